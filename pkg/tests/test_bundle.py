from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cartan_frames import bundle
from cartan_frames import gstructure as gs
from cartan_frames.errors import IncompatibleSection, MissingOverlapData, SectionLeavesOrbit
from cartan_frames.linalg_core import (
    GroupKind,
    GroupTag,
    StructureTensor,
    act_on_coframe,
    act_on_tensor,
    random_group_element,
    tensor_distance,
)

GL2 = GroupTag(GroupKind.GL, 2)


def _section(cover, name):
    kind, fn = bundle.SECTIONS[name]
    return bundle.LocalSection.from_global(cover, kind, fn)


@pytest.mark.parametrize("name", sorted(bundle.COVERS))
def test_builtin_covers_satisfy_cocycle(name):
    report = bundle.check_cocycle(bundle.COVERS[name]())
    assert report.passed
    assert report.cocycle_deviation < 1e-12 and report.identity_deviation < 1e-12
    assert report.to_json()["passed"] is True


def test_circle3_has_triple_overlaps():
    cover = bundle.circle3()
    assert any(len(cover.charts_containing(x)) == 3 for _, x in cover.points())


def test_inconsistent_gluing_fails_cocycle():
    grid = np.linspace(0, 1, 11)
    charts = [bundle.Chart(n, grid) for n in ("A", "B", "C")]
    overlaps = [(a, b, grid) for a, b in (("A", "B"), ("B", "C"), ("A", "C"))]
    mats = {("B", "A"): np.diag([2.0, 1.0]), ("C", "B"): np.eye(2), ("C", "A"): np.eye(2)}

    def gluing(b, a, x):
        if a == b:
            return np.eye(2)
        if (b, a) in mats:
            return mats[(b, a)]
        return np.linalg.inv(mats[(a, b)])

    report = bundle.check_cocycle(bundle.ChartCover(charts, overlaps, gluing, 2))
    assert not report.passed
    assert report.cocycle_deviation == pytest.approx(1.0)


def test_missing_overlap_is_reported():
    grid = np.linspace(0, 1, 5)
    cover = bundle.ChartCover([bundle.Chart("A", grid), bundle.Chart("B", grid), bundle.Chart("C", grid)],
                              [("A", "B", grid)], lambda b, a, x: np.eye(2), 2)
    with pytest.raises(MissingOverlapData):
        bundle.check_cocycle(cover)
    with pytest.raises(MissingOverlapData):
        cover.overlap_samples("A", "C")


def test_constant_field_on_single_chart():
    cover = bundle.single_chart()
    y = np.array([0.3, -1.2])
    sec = bundle.LocalSection(cover, "vector", {"U": np.tile(y, (50, 1))})
    f = bundle.section_to_equivariant(sec)
    for _, x in cover.points():
        np.testing.assert_array_equal(f(bundle.BundlePoint("U", x, np.eye(2))).data, y)


def test_fs_gives_coframe_components_of_the_field():
    cover = bundle.single_chart()
    sec = _section(cover, "rotating")
    f = bundle.section_to_equivariant(sec)
    rng = np.random.default_rng(0)
    for _, x in list(cover.points())[::7]:
        p = bundle.BundlePoint("U", x, random_group_element(GL2, rng=rng))
        v = sec.value("U", x).data
        # e^i(v) for the coframe of p
        np.testing.assert_allclose(f(p).data, p.coframe().mat @ v, atol=1e-12)


@lru_cache(maxsize=None)
def _equivariant(cover_name, section_name):
    cover = bundle.COVERS[cover_name]()
    return cover, bundle.section_to_equivariant(_section(cover, section_name))


@pytest.mark.parametrize("cover_name", ["circle2", "circle3", "interval2"])
@pytest.mark.parametrize("section_name", ["rotating", "metric"])
@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_equivariance(cover_name, section_name, seed):
    rng = np.random.default_rng(seed)
    cover, f = _equivariant(cover_name, section_name)
    pts = list(cover.points())
    chart, x = pts[rng.integers(len(pts))]
    p = bundle.BundlePoint(chart, x, random_group_element(GL2, rng=rng))
    h = random_group_element(GL2, rng=rng)
    lhs = f(p.act(h))
    rhs = act_on_tensor(np.linalg.inv(h), f(p))
    assert tensor_distance(lhs, rhs) < 1e-9


@pytest.mark.parametrize("cover_name", ["circle2", "circle3", "interval2"])
def test_chart_independence(cover_name):
    cover = bundle.COVERS[cover_name]()
    f = bundle.section_to_equivariant(_section(cover, "rotating"))
    rng = np.random.default_rng(1)
    checked = 0
    for pair, samples in cover.overlaps.items():
        a, b = sorted(pair)
        for x in samples:
            p = bundle.BundlePoint(a, x, random_group_element(GL2, rng=rng))
            q = p.in_chart(cover, b)
            assert tensor_distance(f(p), f(q)) < 1e-9
            checked += 1
    assert checked > 0


def test_bracket_inverts_coordinate_diffeo():
    p = bundle.BundlePoint("U", 0.5, random_group_element(GL2, seed=2))
    y = StructureTensor("metric", [[2.0, 0.3], [0.3, 1.0]])
    back = bundle.bracket(p, bundle.coordinate_diffeo(p, y))
    assert tensor_distance(back, y) < 1e-12


def test_incompatible_section_rejected():
    cover = bundle.circle3()
    values = {name: np.tile([1.0, 0.0], (len(c.samples), 1)) for name, c in cover.charts.items()}
    sec = bundle.LocalSection(cover, "vector", values)
    assert sec.compatibility_deviation() > 1e-3
    with pytest.raises(IncompatibleSection):
        bundle.section_to_equivariant(sec)


def test_section_must_cover_every_chart():
    cover = bundle.circle2()
    with pytest.raises(IncompatibleSection):
        bundle.LocalSection(cover, "vector", {"U1": lambda x: np.array([1.0, 0.0])})


def test_vanishing_field_leaves_orbit():
    cover = bundle.circle2()
    f = bundle.section_to_equivariant(_section(cover, "vanishing"))
    with pytest.raises(SectionLeavesOrbit) as info:
        bundle.reduce_by_orbit(f, gs.canonical_tensor("vector", 2))
    xs = sorted({round(float(x), 12) for _, x in info.value.offending})
    # sin 2x vanishes at multiples of pi/2; the grid hits all four
    np.testing.assert_allclose(xs, np.arange(4) * np.pi / 2, atol=1e-12)


@pytest.mark.parametrize("section_name", ["rotating", "metric"])
def test_reduction_is_stable_under_stabilizer_two_sided(section_name):
    cover = bundle.circle3()
    sec = _section(cover, section_name)
    f = bundle.section_to_equivariant(sec)
    y0 = gs.canonical_tensor(sec.kind, 2)
    pred = bundle.reduce_by_orbit(f, y0)
    tag = gs.stabilizer_tag(y0)
    rng = np.random.default_rng(5)
    pts = list(cover.points())
    for _ in range(100):
        chart, x = pts[rng.integers(len(pts))]
        E = gs.normalize(sec.value(chart, x))
        p = bundle.BundlePoint(chart, x, np.linalg.inv(E.mat))
        assert pred(p)
        assert pred(p.act(random_group_element(tag, rng=rng)))
        assert not pred(p.act(random_group_element(GL2, rng=rng)))


def test_reduction_matches_adapted_fiber():
    cover = bundle.single_chart()
    sec = _section(cover, "metric")
    pred = bundle.reduce_by_orbit(bundle.section_to_equivariant(sec), gs.canonical_tensor("metric", 2))
    rng = np.random.default_rng(6)
    pts = list(cover.points())
    for _ in range(50):
        chart, x = pts[rng.integers(len(pts))]
        G = sec.value(chart, x)
        (E,) = gs.adapted_fiber(gs.normalize_metric(G), GroupTag(GroupKind.O, 2), seed=int(rng.integers(1 << 30)))
        assert pred(bundle.BundlePoint(chart, x, np.linalg.inv(E.mat)))
        skew = act_on_coframe(np.diag([1.0, 1.5]), E)
        assert not pred(bundle.BundlePoint(chart, x, np.linalg.inv(skew.mat)))


def test_transition_cache_is_thread_safe():
    cover = bundle.circle3()
    keys = [(b, a, x) for pair, s in cover.overlaps.items() for a, b in [sorted(pair)] for x in s]

    def work(k):
        return cover.transition(*k)

    with ThreadPoolExecutor(max_workers=8) as ex:
        first = list(ex.map(work, keys * 4))
    fresh = bundle.circle3()
    for k, g in zip(keys * 4, first):
        np.testing.assert_array_equal(g, fresh.transition(*k))

"""Principal bundles over explicit chart covers and their associated bundles.

A bundle is never built as a global object.  It lives as local
trivializations ``U_a x G`` over sampled charts plus gluing maps: the point
``(x, g)`` of chart ``a`` is the same as ``(x, g_ba(x) g)`` of chart ``b``.
A bundle point ``p = (a, x, g)`` stands for ``p_a(x) g`` where ``p_a`` is
the chart's reference section; in the coframe-bundle reading its coframe in
chart coordinates is ``g^{-1}``.

Associated-bundle values are :class:`StructureTensor` objects acted on by
``rho`` from :mod:`cartan_frames.linalg_core`.
"""
import itertools
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    DimensionMismatch,
    IncompatibleSection,
    MissingOverlapData,
    SectionLeavesOrbit,
)
from .gstructure import orbit_classify
from .linalg_core import (
    Coframe,
    StructureTensor,
    TensorKind,
    act_on_coframe,
    act_on_tensor,
    tensor_distance,
)

COMPAT_TOL = 1e-9
SAMPLE_ATOL = 1e-12


def _key(x):
    return np.atleast_1d(np.asarray(x, dtype=float)).tobytes()


def _sample_index(samples, x):
    d = np.abs(samples - np.asarray(x, dtype=float))
    if d.ndim > 1:
        d = d.max(axis=tuple(range(1, d.ndim)))
    hit = np.flatnonzero(d <= SAMPLE_ATOL)
    return int(hit[0]) if hit.size else None


@dataclass(frozen=True, eq=False)
class Chart:
    """A sampled chart domain.

    ``contains`` decides membership of arbitrary base points; it defaults
    to membership in ``samples``.  ``local`` maps a base point to the
    chart's own coordinate (e.g. an unwrapped angle).
    """

    name: str
    samples: np.ndarray
    contains: Optional[Callable] = field(default=None, repr=False)
    local: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        if self.contains is None:
            object.__setattr__(self, "contains", lambda x: _sample_index(s, x) is not None)
        if self.local is None:
            object.__setattr__(self, "local", lambda x: x)


class ChartCover:
    """Finite chart cover with gluing maps ``g_ba(x)``.

    ``gluing(b, a, x)`` returns the matrix taking chart ``a``'s
    trivialization to chart ``b``'s.  Values are memoized per
    ``(b, a, x)``; the memo is guarded by a lock and a repeated key simply
    overwrites an identical value.
    """

    def __init__(self, charts, overlaps, gluing, dim, chart_functions=None):
        self.charts = {c.name: c for c in charts}
        if len(self.charts) != len(charts):
            raise ValueError("chart names must be unique")
        self.overlaps = {}
        for a, b, samples in overlaps:
            if a not in self.charts or b not in self.charts:
                raise MissingOverlapData(f"overlap refers to unknown chart {a!r} or {b!r}")
            s = np.array(samples, dtype=float)
            s.setflags(write=False)
            self.overlaps[frozenset((a, b))] = s
        self.dim = int(dim)
        self._gluing = gluing
        # lambda_a such that g_ba = lambda_b lambda_a^{-1}, when the cover was built that way
        self.chart_functions = chart_functions
        self._cache = {}
        self._lock = threading.Lock()

    @classmethod
    def from_chart_functions(cls, charts, overlaps, lam, dim):
        """Cover with ``g_ba(x) = lam(b, x) lam(a, x)^{-1}``; cocycles hold by construction."""

        def gluing(b, a, x):
            La = lam(a, x)
            return np.linalg.solve(La.T, lam(b, x).T).T

        return cls(charts, overlaps, gluing, dim, chart_functions=lam)

    def transition(self, b, a, x):
        key = (b, a, _key(x))
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        g = np.array(self._gluing(b, a, x), dtype=float)
        if g.shape != (self.dim, self.dim):
            raise DimensionMismatch(f"gluing {b}<-{a} returned shape {g.shape}")
        g.setflags(write=False)
        with self._lock:
            self._cache[key] = g
        return g

    def overlap_samples(self, a, b):
        try:
            return self.overlaps[frozenset((a, b))]
        except KeyError:
            raise MissingOverlapData(f"no overlap data for charts {a!r}, {b!r}") from None

    def charts_containing(self, x):
        return [name for name, c in self.charts.items() if c.contains(x)]

    def points(self):
        """All ``(chart, x)`` sample pairs."""
        for name, c in self.charts.items():
            for x in c.samples:
                yield name, x


@dataclass(frozen=True)
class CocycleReport:
    identity_deviation: float
    cocycle_deviation: float
    triples_checked: int
    tol: float

    @property
    def passed(self):
        return max(self.identity_deviation, self.cocycle_deviation) <= self.tol

    def to_json(self):
        return {
            "identity_deviation": self.identity_deviation,
            "cocycle_deviation": self.cocycle_deviation,
            "triples_checked": self.triples_checked,
            "tol": self.tol,
            "passed": self.passed,
        }


def check_cocycle(cover, tol=1e-12):
    """Check ``g_aa = I`` and ``g_ab g_bc g_ca = I`` on the sample sets.

    Ordered triples with repeated charts are included, so ``g_ab g_ba = I``
    is checked on every pairwise overlap as well.
    """
    I = np.eye(cover.dim)
    id_dev = 0.0
    for name, x in cover.points():
        id_dev = max(id_dev, float(np.abs(cover.transition(name, name, x) - I).max()))

    cyc_dev = 0.0
    count = 0
    seen = set()
    for pair, samples in cover.overlaps.items():
        for x in samples:
            xk = _key(x)
            if xk in seen:
                continue
            seen.add(xk)
            here = cover.charts_containing(x)
            for a, b, c in itertools.product(here, repeat=3):
                for u, v in ((a, b), (b, c), (c, a)):
                    if u != v and frozenset((u, v)) not in cover.overlaps:
                        raise MissingOverlapData(f"{x!r} lies in {u!r} and {v!r} but no overlap is listed")
                prod = cover.transition(a, b, x) @ cover.transition(b, c, x) @ cover.transition(c, a, x)
                cyc_dev = max(cyc_dev, float(np.abs(prod - I).max()))
                count += 1
    return CocycleReport(id_dev, cyc_dev, count, tol)


# --------------------------------------------------------------------------
# bundle points


@dataclass(frozen=True, eq=False)
class BundlePoint:
    """``p = p_chart(x) g`` in the trivialization of ``chart``."""

    chart: str
    x: object
    g: np.ndarray

    def __post_init__(self):
        g = np.array(self.g, dtype=float)
        Coframe(g)  # raises if singular
        g.setflags(write=False)
        object.__setattr__(self, "g", g)

    def act(self, h):
        """Right action ``p -> p h``."""
        return BundlePoint(self.chart, self.x, self.g @ np.asarray(h, dtype=float))

    def coframe(self):
        """Coframe of ``p`` in chart coordinates: ``act_on_coframe(g, I)``."""
        return act_on_coframe(self.g, Coframe.identity(self.g.shape[0]))

    def in_chart(self, cover, b):
        """Same abstract point expressed in chart ``b``."""
        if b == self.chart:
            return self
        return BundlePoint(b, self.x, cover.transition(b, self.chart, self.x) @ self.g)


def coordinate_diffeo(p, y):
    """``p^E``: fiber coordinates ``y`` (chart of ``p``) -> typical fiber, ``rho(g)^{-1} y``."""
    if y.dim != p.g.shape[0]:
        raise DimensionMismatch(f"fiber value dim {y.dim} vs group dim {p.g.shape[0]}")
    return act_on_tensor(np.linalg.inv(p.g), y)


def bracket(p, y):
    """Chart coordinates of the class ``[p, y]``: ``rho(g) y``."""
    if y.dim != p.g.shape[0]:
        raise DimensionMismatch(f"fiber value dim {y.dim} vs group dim {p.g.shape[0]}")
    return act_on_tensor(p.g, y)


# --------------------------------------------------------------------------
# sections


class LocalSection:
    """Local representations ``y_a`` of a section, one per chart.

    ``values[a]`` is either an array aligned with ``cover.charts[a].samples``
    or a callable ``x -> data``.
    """

    def __init__(self, cover, kind, values):
        self.cover = cover
        self.kind = TensorKind(kind)
        missing = set(cover.charts) - set(values)
        if missing:
            raise IncompatibleSection(f"section has no values on charts {sorted(missing)}")
        self._values = {}
        for name, v in values.items():
            if callable(v):
                self._values[name] = v
            else:
                arr = np.array(v, dtype=float)
                if len(arr) != len(cover.charts[name].samples):
                    raise DimensionMismatch(f"chart {name!r}: {len(arr)} values for "
                                            f"{len(cover.charts[name].samples)} samples")
                self._values[name] = arr

    def value(self, chart, x):
        v = self._values[chart]
        if callable(v):
            return StructureTensor(self.kind, v(x))
        i = _sample_index(self.cover.charts[chart].samples, x)
        if i is None:
            raise KeyError(f"{x!r} is not a sample of chart {chart!r}")
        return StructureTensor(self.kind, v[i])

    def samples(self):
        for name, x in self.cover.points():
            yield name, x, self.value(name, x)

    def compatibility_deviation(self):
        """Max of ``|rho(g_ba) y_a - y_b| / (1 + |y_b|)`` over overlap samples."""
        worst = 0.0
        for pair, samples in self.cover.overlaps.items():
            a, b = sorted(pair)
            for x in samples:
                ya, yb = self.value(a, x), self.value(b, x)
                moved = act_on_tensor(self.cover.transition(b, a, x), ya)
                dev = tensor_distance(moved, yb) / (1.0 + np.linalg.norm(yb.data))
                worst = max(worst, dev)
        return worst

    @classmethod
    def from_global(cls, cover, kind, field_fn):
        """Section with ``y_a(x) = rho(lam_a(x)) Y(x)`` for a chart-free ``Y``.

        Requires a cover built by :meth:`ChartCover.from_chart_functions`;
        overlap compatibility then holds exactly.
        """
        if cover.chart_functions is None:
            raise ValueError("cover was not built from chart functions")
        lam = cover.chart_functions
        values = {}
        for name, c in cover.charts.items():
            values[name] = np.array([
                act_on_tensor(lam(name, x), StructureTensor(kind, field_fn(x))).data
                for x in c.samples
            ])
        return cls(cover, kind, values)


class EquivariantMap:
    """``f_s`` on the principal bundle: ``f_s(a, x, g) = rho(g)^{-1} y_a(x)``."""

    def __init__(self, section):
        self.section = section
        self.cover = section.cover

    def __call__(self, p):
        return coordinate_diffeo(p, self.section.value(p.chart, p.x))


def section_to_equivariant(section, tol=COMPAT_TOL):
    dev = section.compatibility_deviation()
    if dev > tol:
        raise IncompatibleSection(f"overlap compatibility violated by {dev:.3g}")
    return EquivariantMap(section)


def reduce_by_orbit(f, y0, tol=1e-8, orbit_tol=1e-10):
    """Membership predicate of the reduced subbundle ``f^{-1}(y0)``.

    Every section sample must lie in the orbit of ``y0``; otherwise
    :class:`SectionLeavesOrbit` lists the offending ``(chart, x)`` pairs.
    """
    target = orbit_classify(y0, orbit_tol)
    bad = []
    for name, x, y in f.section.samples():
        if y.kind is not y0.kind or y.data.shape != y0.data.shape or orbit_classify(y, orbit_tol) != target:
            bad.append((name, x))
    if bad:
        raise SectionLeavesOrbit(f"section leaves the orbit {target.label!r} at {len(bad)} samples", bad)

    def predicate(p):
        return tensor_distance(f(p), y0) < tol

    return predicate


# --------------------------------------------------------------------------
# built-in covers


def _rot(t):
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s], [s, c]])


def _arc_chart(name, start, length, grid):
    def contains(x):
        return (x - start) % (2 * np.pi) < length

    def local(x):
        return start + (x - start) % (2 * np.pi)

    samples = np.array([x for x in grid if contains(x)])
    return Chart(name, samples, contains, local)


def _pairwise_overlaps(charts, grid):
    out = []
    for c1, c2 in itertools.combinations(charts, 2):
        s = [x for x in grid if c1.contains(x) and c2.contains(x)]
        if s:
            out.append((c1.name, c2.name, s))
    return out


def circle2(samples=180, theta0=0.3, delta=0.3):
    """Two arcs covering the circle with constant gluing ``g_21 = R(theta0)``."""
    grid = np.arange(samples) * (2 * np.pi / samples)
    charts = [_arc_chart("U1", -delta, np.pi + 2 * delta, grid),
              _arc_chart("U2", np.pi - delta, np.pi + 2 * delta, grid)]
    rot = {"U1": np.eye(2), "U2": _rot(theta0)}
    return ChartCover.from_chart_functions(charts, _pairwise_overlaps(charts, grid),
                                           lambda a, x: rot[a], 2)


def circle3(samples=180, delta=0.3):
    """Three arcs with nonempty triple overlaps and position-dependent gluing."""
    grid = np.arange(samples) * (2 * np.pi / samples)
    charts = [_arc_chart(f"U{i + 1}", 2 * np.pi * i / 3 - delta, 4 * np.pi / 3 + 2 * delta, grid)
              for i in range(3)]
    params = {"U1": (0.5, 0.2), "U2": (-0.25, 0.4), "U3": (1.0, -0.3)}
    by_name = {c.name: c for c in charts}

    def lam(a, x):
        t = by_name[a].local(x)
        w, b = params[a]
        return _rot(w * t) @ np.diag([np.exp(b * np.sin(t)), 1.0])

    return ChartCover.from_chart_functions(charts, _pairwise_overlaps(charts, grid), lam, 2)


def interval2(samples=101, lo=0.4, hi=0.6):
    """Unit interval covered by ``[0, hi]`` and ``[lo, 1]``."""
    grid = np.linspace(0.0, 1.0, samples)
    A = Chart("A", grid[grid <= hi + 1e-12], lambda x: x <= hi + 1e-12)
    B = Chart("B", grid[grid >= lo - 1e-12], lambda x: x >= lo - 1e-12)

    def lam(a, x):
        if a == "A":
            return np.eye(2)
        return np.array([[1.0 + x, x * x], [-x, 2.0]])

    return ChartCover.from_chart_functions([A, B], _pairwise_overlaps([A, B], grid), lam, 2)


def single_chart(samples=50, lo=0.0, hi=1.0):
    grid = np.linspace(lo, hi, samples)
    return ChartCover.from_chart_functions([Chart("U", grid)], [], lambda a, x: np.eye(2), 2)


COVERS = {"interval2": interval2, "circle2": circle2, "circle3": circle3, "single": single_chart}


def _metric_field(x):
    return np.array([[2.0 + np.sin(x), 0.3 * np.cos(x)],
                     [0.3 * np.cos(x), 1.5 + 0.5 * np.cos(x)]])


SECTIONS = {
    "rotating": (TensorKind.VECTOR, lambda x: np.array([np.cos(x), np.sin(x)])),
    "vanishing": (TensorKind.VECTOR, lambda x: np.array([np.sin(2 * x), 0.0])),
    "metric": (TensorKind.METRIC, _metric_field),
}

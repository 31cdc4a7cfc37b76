import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cartan_frames import surfaces as sf
from cartan_frames.stencils import derivative
from cartan_frames.errors import (
    DegenerateFrame,
    DimensionMismatch,
    ExpansionResidualTooLarge,
    MalformedTensor,
    NonInjectiveMap,
    NotInGroup,
    NotOrthogonal,
)


def _finite(a):
    return a[np.isfinite(a)]


def _rotation3(seed):
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.normal(size=(3, 3)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] *= -1
    return Q


def test_plane_is_flat():
    K, H = sf.gauss_mean(sf.plane(n=30))
    assert np.max(np.abs(_finite(K))) < 1e-12 and np.max(np.abs(_finite(H))) < 1e-12


@pytest.mark.parametrize("chart", ["angles", "stereographic"])
def test_sphere(chart):
    K, H = sf.gauss_mean(sf.sphere(r=2.0, n=120, chart=chart))
    np.testing.assert_allclose(_finite(K), 0.25, rtol=1e-5)
    np.testing.assert_allclose(np.abs(_finite(H)), 1.0, rtol=1e-5)


def test_sphere_orientation():
    # outward normal in the angle chart, inward in the stereographic chart
    _, Ha = sf.gauss_mean(sf.sphere(n=60))
    _, Hs = sf.gauss_mean(sf.sphere(n=60, chart="stereographic"))
    assert np.all(_finite(Ha) < 0) and np.all(_finite(Hs) > 0)


def test_cylinder():
    K, H = sf.gauss_mean(sf.cylinder(r=0.5, n=100))
    assert np.max(np.abs(_finite(K))) < 1e-8
    np.testing.assert_allclose(np.abs(_finite(H)), 2.0, rtol=1e-6)


def test_torus_gauss_curvature_and_christoffels():
    R, r = 2.0, 0.5
    s = sf.torus(R, r, n=160)
    d = sf.derivation_coefficients(s)
    V = np.broadcast_to(s.u2[None, :], s.shape)
    rho = R + r * np.cos(V)
    np.testing.assert_allclose(d.K, np.cos(V) / (r * rho), atol=1e-6)

    # Levi-Civita connection of g = diag(rho^2, r^2)
    G = np.zeros(s.shape + (2, 2, 2))
    G[..., 0, 0, 1] = G[..., 0, 1, 0] = -r * np.sin(V) / rho
    G[..., 1, 0, 0] = rho * np.sin(V) / r
    np.testing.assert_allclose(d.Gamma, G, atol=1e-6)


def test_christoffels_match_metric_formula():
    # Gamma^k_ij = 1/2 g^kl (d_i g_lj + d_j g_li - d_l g_ij), with d g from the sampled metric
    s = sf.ellipsoid(2.0, 1.5, 1.0, n=160)
    d = sf.derivation_coefficients(s)
    h = s.steps
    dg = np.stack([derivative(d.g, h[0], axis=0)[0],
                   derivative(d.g, h[1], axis=1, periodic=True)[0]], axis=2)  # [..., l, a, b] = d_l g_ab
    ginv = np.linalg.inv(d.g)
    lower = 0.5 * (np.einsum("...ilj->...lij", dg) + np.einsum("...jli->...lij", dg) - dg)
    Gamma = np.einsum("...kl,...lij->...kij", ginv, lower)
    m = d.interior
    assert np.max(np.abs(Gamma[m] - d.Gamma[m])) < 1e-5


def test_gauss_equation_and_shape_operator_symmetry():
    s = sf.ellipsoid(2.0, 1.5, 1.0, n=120)
    d = sf.derivation_coefficients(s)
    m = d.interior
    np.testing.assert_allclose(d.h_lower[m], np.swapaxes(d.h_lower[m], -1, -2), atol=1e-10)
    # the Weingarten expansion and g^{-1} h agree
    np.testing.assert_allclose(d.h_mixed[m], d.h_metric[m], atol=1e-4)
    np.testing.assert_allclose(d.K[m], np.linalg.det(d.h_lower[m]) / np.linalg.det(d.g[m]), atol=1e-4)


def test_ellipsoid_and_hyperboloid_signs():
    Ke, _ = sf.gauss_mean(sf.ellipsoid(n=80))
    Kh, _ = sf.gauss_mean(sf.hyperboloid1(n=80))
    assert np.all(_finite(Ke) > 0)
    assert np.all(_finite(Kh) < 0)


def test_hyperboloid_closed_form():
    # (x^2+y^2) - z^2 = 1 has K = -1/(x^2+y^2+z^2)^2
    s = sf.hyperboloid1(n=150)
    K, _ = sf.gauss_mean(s)
    rr = np.sum(s.grid**2, axis=-1)
    m = np.isfinite(K)
    np.testing.assert_allclose(K[m], -1 / rr[m] ** 2, atol=1e-6)


def test_saddle_at_origin():
    s = sf.graph("saddle", n=101)
    K, H = sf.gauss_mean(s)
    assert K[50, 50] == pytest.approx(-4.0, rel=1e-5)
    assert H[50, 50] == pytest.approx(0.0, abs=1e-10)


@pytest.mark.parametrize("name", sorted(sf.GRAPH_FUNCTIONS))
def test_graph_gauss_curvature_formula(name):
    # graph oracle: K = (f_xx f_yy - f_xy^2) / (1 + |grad f|^2)^2
    x = np.linspace(-1, 1, 121)
    X, Y = np.meshgrid(x, x, indexing="ij")
    fx, fy, fxx, fyy, fxy = {
        "paraboloid": (2 * X, 2 * Y, 2 + 0 * X, 2 + 0 * X, 0 * X),
        "saddle": (2 * X, -2 * Y, 2 + 0 * X, -2 + 0 * X, 0 * X),
        "monkey": (3 * X**2 - 3 * Y**2, -6 * X * Y, 6 * X, -6 * X, -6 * Y),
        "bump": tuple(e * np.exp(-X**2 - Y**2) for e in
                      (-2 * X, -2 * Y, 4 * X**2 - 2, 4 * Y**2 - 2, 4 * X * Y)),
    }[name]
    exact = (fxx * fyy - fxy**2) / (1 + fx**2 + fy**2) ** 2
    K, _ = sf.gauss_mean(sf.graph(name, n=121))
    m = np.isfinite(K)
    np.testing.assert_allclose(K[m], exact[m], atol=1e-4)


def test_rigid_motion_invariance():
    s = sf.torus(n=80)
    K0, H0 = sf.gauss_mean(s)
    K1, H1 = sf.gauss_mean(sf.apply_rigid_motion(s, _rotation3(1), (1.0, -2.0, 0.5)))
    np.testing.assert_allclose(K1, K0, atol=1e-10)
    np.testing.assert_allclose(H1, H0, atol=1e-10)
    _, H2 = sf.gauss_mean(sf.apply_rigid_motion(s, np.diag([1.0, 1.0, -1.0])))
    np.testing.assert_allclose(H2, -H0, atol=1e-10)
    with pytest.raises(NotOrthogonal):
        sf.apply_rigid_motion(s, 2 * np.eye(3))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_conjugate_shape_preserves_invariants(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(2, 2)) + 3 * np.eye(2)
    h = rng.normal(size=(2, 2))
    hh = sf.conjugate_shape(A, h)
    assert np.linalg.det(hh) == pytest.approx(np.linalg.det(h), abs=1e-10)
    assert np.trace(hh) == pytest.approx(np.trace(h), abs=1e-10)


def test_conjugate_shape_block_pattern():
    A = np.eye(3)
    A[:2, :2] = [[1.0, 2.0], [0.0, 1.0]]
    h = np.diag([1.0, 2.0])
    np.testing.assert_allclose(sf.conjugate_shape(A, h), sf.conjugate_shape(A[:2, :2], h))
    A[2, 0] = 0.5
    with pytest.raises(NotInGroup):
        sf.conjugate_shape(A, h)
    with pytest.raises(NotInGroup):
        sf.conjugate_shape(np.zeros((2, 2)), h)
    with pytest.raises(DimensionMismatch):
        sf.conjugate_shape(np.eye(2), np.eye(3))


def test_swap_flips_mean_curvature_only():
    s = sf.ellipsoid(n=80)
    K0, H0 = sf.gauss_mean(s)
    t = sf.reparametrize(s, "swap")
    K1, H1 = sf.gauss_mean(t)
    np.testing.assert_allclose(K1.T, K0, atol=1e-12, equal_nan=True)
    np.testing.assert_allclose(H1.T, -H0, atol=1e-12, equal_nan=True)


def test_swap_without_closed_form_matches():
    s = sf.ellipsoid(n=60)
    bare = sf.SampledSurface(s.grid, s.u1, s.u2, s.periodic)
    a = sf.reparametrize(s, "swap")
    b = sf.reparametrize(bare, "swap")
    np.testing.assert_allclose(a.grid, b.grid, atol=1e-14)


def test_affine_reflection_and_scaling():
    s = sf.torus(n=80)
    K0, H0 = sf.gauss_mean(s)
    t = sf.reparametrize(s, "affine", scale1=-2.0, shift1=1.0, scale2=0.5)
    K1, H1 = sf.gauss_mean(t)
    # the reversed first axis lists nodes backwards
    np.testing.assert_allclose(K1[::-1], K0, atol=1e-6)
    np.testing.assert_allclose(H1[::-1], -H0, atol=1e-6)


def test_warp_keeps_invariants():
    s = sf.torus(n=120)
    K0, H0 = sf.gauss_mean(s)
    t = sf.reparametrize(s, "warp", eps=0.3, axis=0)
    K1, H1 = sf.gauss_mean(t)
    # same geometric points: compare against the closed form at the new nodes
    V = np.broadcast_to(t.u2[None, :], t.shape)
    exact = np.cos(V) / (0.5 * (2.0 + 0.5 * np.cos(V)))
    np.testing.assert_allclose(K1, exact, atol=1e-4)
    np.testing.assert_allclose(np.abs(H1).max(), np.abs(H0).max(), rtol=1e-3)


def test_warp_interpolation_path_matches_closed_form_path():
    s = sf.torus(n=120)
    bare = sf.SampledSurface(s.grid, s.u1, s.u2, s.periodic)
    a = sf.reparametrize(s, "warp", eps=0.3, axis=1)
    b = sf.reparametrize(bare, "warp", eps=0.3, axis=1)
    np.testing.assert_allclose(b.grid, a.grid, atol=1e-6)


def test_folding_warp_is_rejected():
    with pytest.raises(NonInjectiveMap):
        sf.reparametrize(sf.torus(n=40), "warp", eps=1.2, axis=0)


def test_frame_change_formulas_are_inverse():
    rng = np.random.default_rng(0)
    e1, e2 = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
    J = rng.normal(size=(5, 2, 2)) + 2 * np.eye(2)
    f1, f2 = sf.new_frame_from_old(e1, e2, np.linalg.inv(J))
    g1, g2 = sf.old_frame_from_new(f1, f2, J)
    np.testing.assert_allclose(g1, e1, atol=1e-12)
    np.testing.assert_allclose(g2, e2, atol=1e-12)


def test_frame_change_matches_resampled_surface():
    s = sf.torus(n=80)
    cmap = sf.chart_map("affine", s, scale1=2.0, scale2=3.0)
    t = sf.reparametrize(s, cmap)
    U1, U2 = np.meshgrid(s.u1, s.u2, indexing="ij")
    e1, e2, _ = sf.adapted_frame(s)
    f1, f2 = sf.new_frame_from_old(e1, e2, cmap.inverse_jacobian(U1, U2))
    t1, t2, _ = sf.adapted_frame(t)
    np.testing.assert_allclose(t1, f1, atol=1e-12)
    np.testing.assert_allclose(t2, f2, atol=1e-12)


def test_degenerate_and_malformed_surfaces():
    u = np.linspace(0, 1, 10)
    U, V = np.meshgrid(u, u, indexing="ij")
    flat_line = np.stack([U, np.zeros_like(U), np.zeros_like(U)], axis=-1)
    with pytest.raises(DegenerateFrame):
        sf.adapted_frame(sf.SampledSurface(flat_line, u, u))
    with pytest.raises(MalformedTensor):
        sf.SampledSurface(np.zeros((3, 3, 3)), np.arange(3.0), np.arange(3.0))
    with pytest.raises(DimensionMismatch):
        sf.SampledSurface(np.zeros((10, 10, 2)), u, u)


def test_expansion_residual_check():
    s = sf.sphere(n=13, chart="stereographic")
    with pytest.raises(ExpansionResidualTooLarge):
        sf.derivation_coefficients(s)
    d = sf.derivation_coefficients(s, check=False)
    assert np.all(np.isfinite(d.K))


def test_include_boundary_fills_edges():
    s = sf.ellipsoid(n=60)
    K, _ = sf.gauss_mean(s)
    Kb, _ = sf.gauss_mean(s, include_boundary=True)
    assert np.isnan(K[0, 0]) and np.isfinite(Kb).all()
    m = np.isfinite(K)
    np.testing.assert_array_equal(K[m], Kb[m])


def test_convergence_order_stereographic_sphere():
    def curvatures(n):
        s = sf.sphere(n=n, chart="stereographic")
        return sf.gauss_mean(s, data=sf.derivation_coefficients(s, check=False))

    Kc, _ = curvatures(17)
    Kf, _ = curvatures(33)
    m = np.isfinite(Kc)
    order = np.log2(np.max(np.abs(Kc[m] - 1)) / np.max(np.abs(Kf[::2, ::2][m] - 1)))
    assert order > 3.0

"""Adapted frames, derivation coefficients and curvature of sampled surfaces.

For ``r(u1, u2)`` the adapted frame is ``e_i = d_i r`` plus the unit normal
``n = e_1 x e_2 / |e_1 x e_2|``.  Differentiating the frame and expanding in
itself gives

    d_i e_j = Gamma^k_ij e_k + h_ij n,      d_i n = -h^s_i e_s

and the similarity invariants of the shape operator ``h = [h^s_i]`` are
``K = det h`` and ``H = tr h``.  Note that ``H`` here is the trace, i.e.
twice the "average" mean curvature, and it changes sign with the normal.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import make_interp_spline

from .errors import (
    DegenerateFrame,
    DimensionMismatch,
    ExpansionResidualTooLarge,
    MalformedTensor,
    NonInjectiveMap,
    NotInGroup,
    NotOrthogonal,
)
from .stencils import derivative, grid_step

MIN_NODES = 7
DEGENERACY_RTOL = 1e-10
WEINGARTEN_RTOL = 1e-3
# two stacked first-derivative passes, each with a half-width of 2
INTERIOR_MARGIN = 4


@dataclass(frozen=True, eq=False)
class SampledSurface:
    """Surface samples ``grid[i, j] = r(u1[i], u2[j])``.

    Periodic directions do not repeat their first sample.  ``func`` is the
    generating map when the surface came from a closed-form
    parametrization; reparametrization then resamples exactly instead of
    interpolating.
    """

    grid: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    periodic: tuple = (False, False)
    func: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        g = np.array(self.grid, dtype=float)
        u1 = np.array(self.u1, dtype=float)
        u2 = np.array(self.u2, dtype=float)
        if g.ndim != 3 or g.shape[2] != 3:
            raise DimensionMismatch("grid must have shape (n1, n2, 3)")
        if g.shape[:2] != (len(u1), len(u2)):
            raise DimensionMismatch("parameter arrays do not match the grid")
        if min(g.shape[:2]) < MIN_NODES:
            raise MalformedTensor(f"need at least {MIN_NODES}x{MIN_NODES} nodes")
        for u in (u1, u2):
            if np.any(np.diff(u) <= 0):
                raise MalformedTensor("parameter arrays must be strictly increasing")
        for a in (g, u1, u2):
            a.setflags(write=False)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "u1", u1)
        object.__setattr__(self, "u2", u2)
        object.__setattr__(self, "periodic", tuple(bool(p) for p in self.periodic))

    @property
    def shape(self):
        return self.grid.shape[:2]

    @property
    def steps(self):
        return grid_step(self.u1), grid_step(self.u2)

    def period(self, axis):
        u = self.u1 if axis == 0 else self.u2
        return len(u) * grid_step(u)


@dataclass(frozen=True, eq=False)
class SurfaceFrameData:
    """Per-node derivation data; arrays are indexed ``[i, j, ...]``.

    ``Gamma[..., k, i, j]`` is the coefficient of ``e_k`` in ``d_i e_j``;
    ``h_mixed[..., s, i]`` is ``h^s_i`` from the Weingarten expansion and
    ``h_metric`` the same quantity as ``g^{-1} h_lower``.
    """

    e1: np.ndarray
    e2: np.ndarray
    n: np.ndarray
    g: np.ndarray
    Gamma: np.ndarray
    h_lower: np.ndarray
    h_mixed: np.ndarray
    h_metric: np.ndarray
    weingarten_residual: np.ndarray
    interior: np.ndarray
    K: np.ndarray
    H: np.ndarray


def _d(s, arr, axis):
    h = s.steps[axis]
    out, _ = derivative(arr, h, order=1, axis=axis, periodic=s.periodic[axis])
    return out


def interior_mask(s, margin=INTERIOR_MARGIN):
    n1, n2 = s.shape
    m = np.ones((n1, n2), dtype=bool)
    if not s.periodic[0]:
        m[:margin] = m[n1 - margin:] = False
    if not s.periodic[1]:
        m[:, :margin] = m[:, n2 - margin:] = False
    return m


def adapted_frame(s):
    """Return ``(e1, e2, n)`` arrays of shape ``(n1, n2, 3)``."""
    e1 = _d(s, s.grid, 0)
    e2 = _d(s, s.grid, 1)
    cr = np.cross(e1, e2)
    cn = np.linalg.norm(cr, axis=-1)
    scale = np.linalg.norm(e1, axis=-1) * np.linalg.norm(e2, axis=-1)
    bad = cn < DEGENERACY_RTOL * scale
    if np.any(bad):
        idx = np.argwhere(bad)
        raise DegenerateFrame(f"e1 x e2 vanishes at {len(idx)} nodes, first {idx[0].tolist()}")
    return e1, e2, cr / cn[..., None]


def derivation_coefficients(s, check=True, rtol=WEINGARTEN_RTOL):
    """Expand the derivatives of the adapted frame in the frame itself.

    ``d_i e_j`` is decomposed by solving the 3x3 system in the basis
    ``{e1, e2, n}`` at every node.  ``d_i n`` is expanded in ``{e1, e2}`` by
    least squares; its leftover normal component, relative to ``|d_i n|``,
    is ``weingarten_residual``.  With ``check`` an interior residual above
    ``rtol`` raises :class:`ExpansionResidualTooLarge`.
    """
    e1, e2, n = adapted_frame(s)
    es = (e1, e2)
    frame = np.stack([e1, e2, n], axis=-1)  # columns e1, e2, n

    shape = s.shape
    Gamma = np.empty(shape + (2, 2, 2))
    h_lower = np.empty(shape + (2, 2))
    for i in range(2):
        for j in range(2):
            de = _d(s, es[j], i)
            c = np.linalg.solve(frame, de[..., None])[..., 0]
            Gamma[..., :, i, j] = c[..., :2]
            h_lower[..., i, j] = c[..., 2]

    tang = frame[..., :2]
    g = np.swapaxes(tang, -1, -2) @ tang
    diam = np.ptp(s.grid.reshape(-1, 3), axis=0).max() or 1.0
    h_mixed = np.empty(shape + (2, 2))
    resid = np.empty(shape + (2,))
    for i in range(2):
        dn = _d(s, n, i)
        rhs = np.swapaxes(tang, -1, -2) @ dn[..., None]
        a = np.linalg.solve(g, rhs)[..., 0]
        h_mixed[..., :, i] = -a
        leftover = dn - (tang @ a[..., None])[..., 0]
        ref = np.maximum(np.linalg.norm(dn, axis=-1), 1e-6 * np.linalg.norm(es[i], axis=-1) / diam)
        resid[..., i] = np.linalg.norm(leftover, axis=-1) / ref

    h_metric = np.linalg.solve(g, h_lower)
    interior = interior_mask(s)
    if check and np.any(resid[interior] > rtol):
        raise ExpansionResidualTooLarge(
            f"normal component of d_i n up to {resid[interior].max():.3g} of |d_i n|"
        )
    K = np.linalg.det(h_mixed)
    H = np.trace(h_mixed, axis1=-2, axis2=-1)
    return SurfaceFrameData(e1, e2, n, g, Gamma, h_lower, h_mixed, h_metric, resid, interior, K, H)


def gauss_mean(s, include_boundary=False, data=None):
    """Gaussian curvature ``det h`` and mean curvature ``tr h`` per node.

    Nodes within the stencil margin of a non-periodic edge are NaN unless
    ``include_boundary`` is set.
    """
    if data is None:
        data = derivation_coefficients(s, check=not include_boundary)
    K, H = data.K.copy(), data.H.copy()
    if not include_boundary:
        K[~data.interior] = np.nan
        H[~data.interior] = np.nan
    return K, H


def conjugate_shape(A, h, tol=1e-10):
    """``A~^{-1} h A~`` where ``A~`` is the tangential block of ``A``.

    ``A`` is either the 2x2 block itself or a 3x3 matrix that fixes the
    normal: zero third row and column apart from a unit corner entry.
    """
    A = np.asarray(A, dtype=float)
    h = np.asarray(h, dtype=float)
    if h.shape != (2, 2):
        raise DimensionMismatch("shape operator must be 2x2")
    if A.shape == (3, 3):
        pattern = np.abs(A[2, :2]).max() + np.abs(A[:2, 2]).max() + abs(A[2, 2] - 1.0)
        if pattern > tol:
            raise NotInGroup("matrix does not fix the normal direction")
        A = A[:2, :2]
    elif A.shape != (2, 2):
        raise DimensionMismatch("expected a 2x2 or 3x3 matrix")
    if abs(np.linalg.det(A)) <= tol * max(np.linalg.norm(A) ** 2, 1e-300):
        raise NotInGroup("tangential block is singular")
    return np.linalg.solve(A, h @ A)


def apply_rigid_motion(s, R, t=None, tol=1e-10):
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or np.max(np.abs(R.T @ R - np.eye(3))) > tol:
        raise NotOrthogonal("motion matrix is not orthogonal")
    t = np.zeros(3) if t is None else np.asarray(t, dtype=float)
    func = None
    if s.func is not None:
        f0 = s.func

        def func(a, b):
            return f0(a, b) @ R.T + t

    return SampledSurface(s.grid @ R.T + t, s.u1, s.u2, s.periodic, func)


# --------------------------------------------------------------------------
# chart changes


@dataclass(frozen=True)
class ChartMap:
    """A separable diffeomorphism ``(u1, u2) -> (u1', u2')`` of the domain.

    ``axis_maps`` holds, per output axis, ``(source_axis, f, f_inverse,
    f_prime)`` acting on a single coordinate.
    """

    name: str
    axis_maps: tuple

    def forward(self, u1, u2):
        u = (np.asarray(u1, float), np.asarray(u2, float))
        return tuple(f(u[src]) for src, f, _, _ in self.axis_maps)

    def inverse(self, v1, v2):
        v = (np.asarray(v1, float), np.asarray(v2, float))
        out = [None, None]
        for k, (src, _, finv, _) in enumerate(self.axis_maps):
            out[src] = finv(v[k])
        return tuple(out)

    def jacobian(self, u1, u2):
        """``J[..., k', k] = d u^{k'} / d u^k`` at the given old coordinates."""
        u = np.broadcast_arrays(np.asarray(u1, float), np.asarray(u2, float))
        J = np.zeros(u[0].shape + (2, 2))
        for k, (src, _, _, fp) in enumerate(self.axis_maps):
            J[..., k, src] = fp(u[src])
        return J

    def inverse_jacobian(self, u1, u2):
        """``d u^k / d u^{k'}`` evaluated at the image of ``(u1, u2)``."""
        return np.linalg.inv(self.jacobian(u1, u2))


def _identity_axis(src):
    return (src, lambda x: x, lambda x: x, lambda x: np.ones_like(x))


def chart_map(name, s=None, **params):
    """Build a named chart change for the parameter domain of ``s``.

    ``identity``; ``swap``; ``affine`` with ``scale1, shift1, scale2,
    shift2``; ``warp`` with ``eps`` and ``axis``, which maps
    ``u -> u + eps * L/(2 pi) * sin(2 pi (u - a)/L)`` on the interval
    ``[a, a + L]`` of that axis and folds the grid once ``|eps| >= 1``.
    """
    if name == "identity":
        return ChartMap(name, (_identity_axis(0), _identity_axis(1)))
    if name == "swap":
        return ChartMap(name, (_identity_axis(1), _identity_axis(0)))
    if name == "affine":
        maps = []
        for ax in (0, 1):
            a = float(params.get(f"scale{ax + 1}", 1.0))
            b = float(params.get(f"shift{ax + 1}", 0.0))
            if a == 0.0:
                raise NonInjectiveMap("affine scale must be nonzero")
            maps.append((ax, lambda x, a=a, b=b: a * x + b,
                         lambda y, a=a, b=b: (y - b) / a,
                         lambda x, a=a: np.full_like(x, a)))
        return ChartMap(name, tuple(maps))
    if name == "warp":
        if s is None:
            raise ValueError("warp needs the surface to fix its domain")
        eps = float(params.get("eps", 0.3))
        axis = int(params.get("axis", 0))
        u = s.u1 if axis == 0 else s.u2
        a0 = u[0]
        L = s.period(axis) if s.periodic[axis] else u[-1] - u[0]
        w = 2 * np.pi / L

        def f(x):
            return x + eps / w * np.sin(w * (x - a0))

        def fp(x):
            return 1.0 + eps * np.cos(w * (x - a0))

        def finv(y):
            if abs(eps) >= 1:
                raise NonInjectiveMap("warp with |eps| >= 1 is not invertible")
            y = np.asarray(y, dtype=float)
            x = y.copy()
            # f' >= 1 - |eps| > 0, so Newton from x = y converges monotonically fast
            for _ in range(60):
                step = (f(x) - y) / fp(x)
                x = x - step
                if np.max(np.abs(step), initial=0.0) <= 1e-15 * max(1.0, np.abs(y).max()):
                    break
            return x

        maps = [_identity_axis(0), _identity_axis(1)]
        maps[axis] = (axis, f, finv, fp)
        return ChartMap(name, tuple(maps))
    raise ValueError(f"unknown chart map {name!r}")


def _resample_axis(grid, old, new, axis, periodic, period):
    """Interpolate ``grid`` along one axis from nodes ``old`` to ``new``."""
    g = np.moveaxis(grid, axis, 0)
    x = old
    if periodic:
        pad = 6
        x = np.concatenate([old[-pad:] - period, old, old[:pad] + period])
        g = np.concatenate([g[-pad:], g, g[:pad]])
    spl = make_interp_spline(x, g, k=5, axis=0)
    return np.moveaxis(spl(new), 0, axis)


def reparametrize(s, cmap, **params):
    """Resample ``s`` on a uniform grid of new parameters.

    ``cmap`` is a :class:`ChartMap` or the name of a built-in one.  New node
    ``(i, j)`` sits at old parameters ``cmap.inverse(u1'[i], u2'[j])``.
    Raises :class:`NonInjectiveMap` if the Jacobian changes sign or
    vanishes on the grid.
    """
    if isinstance(cmap, str):
        cmap = chart_map(cmap, s, **params)
    U1, U2 = np.meshgrid(s.u1, s.u2, indexing="ij")
    dets = np.linalg.det(cmap.jacobian(U1, U2))
    if not (np.all(dets > 0) or np.all(dets < 0)):
        raise NonInjectiveMap("chart change Jacobian changes sign or vanishes")

    new_axes, new_periodic, sources = [], [], []
    for k, (src, f, _, _) in enumerate(cmap.axis_maps):
        old = s.u1 if src == 0 else s.u2
        per = s.periodic[src]
        if per:
            L = s.period(src)
            lo, hi = f(np.array([old[0], old[0] + L]))
        else:
            lo, hi = f(np.array([old[0], old[-1]]))
        lo, hi = min(lo, hi), max(lo, hi)
        n = len(old)
        new = lo + np.arange(n) * (hi - lo) / n if per else np.linspace(lo, hi, n)
        new_axes.append(new)
        new_periodic.append(per)
        sources.append(src)

    old1, old2 = cmap.inverse(*np.meshgrid(*new_axes, indexing="ij"))
    func = None
    if s.func is not None:
        grid = s.func(old1, old2)
        f0 = s.func

        def func(v1, v2):
            return f0(*cmap.inverse(v1, v2))
    else:
        grid = s.grid if sources == [0, 1] else np.swapaxes(s.grid, 0, 1)
        # separable maps: the old coordinate along each new axis is 1-D
        for k in (0, 1):
            src = sources[k]
            old = s.u1 if src == 0 else s.u2
            mesh = old1 if src == 0 else old2
            line = mesh[:, 0] if k == 0 else mesh[0, :]
            atol = 1e-12 * max(1.0, np.abs(old).max())
            if np.allclose(line, old, rtol=0, atol=atol):
                continue
            if np.allclose(line, old[::-1], rtol=0, atol=atol):
                grid = np.flip(grid, axis=k)
                continue
            per = s.periodic[src]
            L = s.period(src) if per else None
            if per:
                line = old[0] + np.mod(line - old[0], L)
            grid = _resample_axis(grid, old, line, k, per, L)
    return SampledSurface(grid, new_axes[0], new_axes[1], tuple(new_periodic), func)


def old_frame_from_new(e1p, e2p, J):
    """``e_k = (d u^{k'} / d u^k) e_{k'}``: old tangent vectors from new ones."""
    return (J[..., 0, 0, None] * e1p + J[..., 1, 0, None] * e2p,
            J[..., 0, 1, None] * e1p + J[..., 1, 1, None] * e2p)


def new_frame_from_old(e1, e2, Jinv):
    """``e_{k'} = (d u^k / d u^{k'}) e_k``: the inverse transformation."""
    return (Jinv[..., 0, 0, None] * e1 + Jinv[..., 1, 0, None] * e2,
            Jinv[..., 0, 1, None] * e1 + Jinv[..., 1, 1, None] * e2)


# --------------------------------------------------------------------------
# generators


def from_function(func, u1, u2, periodic=(False, False)):
    U1, U2 = np.meshgrid(u1, u2, indexing="ij")
    return SampledSurface(func(U1, U2), u1, u2, periodic, func)


def _periodic_axis(n, lo=0.0, length=2 * np.pi):
    return lo + np.arange(n) * (length / n)


def plane(n=50, size=1.0):
    u = np.linspace(0.0, size, n)

    def f(a, b):
        return np.stack([a, b, np.zeros_like(a)], axis=-1)

    return from_function(f, u, u)


def sphere(r=1.0, n=200, n2=None, polar_margin=0.2, chart="angles"):
    """Sphere of radius ``r``.

    ``chart="angles"`` uses polar/azimuth coordinates with the poles cut
    away (normal points outward).  ``chart="stereographic"`` projects from
    the north pole over ``[-1, 1]^2`` (normal points inward); unlike the
    angle chart, its finite-difference error is not masked by the
    trigonometric structure of the samples.
    """
    if chart == "angles":
        return ellipsoid(r, r, r, n, n2, polar_margin)
    if chart != "stereographic":
        raise ValueError(f"unknown sphere chart {chart!r}")
    u = np.linspace(-1.0, 1.0, n)
    v = np.linspace(-1.0, 1.0, n2 or n)

    def f(a, b):
        q = 1.0 + a * a + b * b
        return r * np.stack([2 * a / q, 2 * b / q, (a * a + b * b - 1.0) / q], axis=-1)

    return from_function(f, u, v)


def ellipsoid(a=2.0, b=1.5, c=1.0, n=200, n2=None, polar_margin=0.2):
    th = np.linspace(polar_margin, np.pi - polar_margin, n)
    ph = _periodic_axis(n2 or n)

    def f(t, p):
        st = np.sin(t)
        return np.stack([a * st * np.cos(p), b * st * np.sin(p), c * np.cos(t)], axis=-1)

    return from_function(f, th, ph, (False, True))


def cylinder(r=1.0, n=200, height=2.0):
    u = _periodic_axis(n)
    v = np.linspace(0.0, height, n)

    def f(a, b):
        return np.stack([r * np.cos(a), r * np.sin(a), b], axis=-1)

    return from_function(f, u, v, (True, False))


def hyperboloid1(a=1.0, c=1.0, n=200, vmax=1.0):
    """One-sheet hyperboloid ``(x^2 + y^2)/a^2 - z^2/c^2 = 1``."""
    v = np.linspace(-vmax, vmax, n)
    ph = _periodic_axis(n)

    def f(s, p):
        ch = np.cosh(s)
        return np.stack([a * ch * np.cos(p), a * ch * np.sin(p), c * np.sinh(s)], axis=-1)

    return from_function(f, v, ph, (False, True))


def torus(R=2.0, r=0.5, n=200):
    u = _periodic_axis(n)

    def f(a, b):
        rho = R + r * np.cos(b)
        return np.stack([rho * np.cos(a), rho * np.sin(a), r * np.sin(b)], axis=-1)

    return from_function(f, u, u, (True, True))


GRAPH_FUNCTIONS = {
    "paraboloid": lambda x, y: x**2 + y**2,
    "saddle": lambda x, y: x**2 - y**2,
    "monkey": lambda x, y: x**3 - 3 * x * y**2,
    "bump": lambda x, y: np.exp(-(x**2) - y**2),
}


def graph(name="saddle", n=200, half_width=1.0):
    """Graph ``z = f(x, y)`` of a named function over a square."""
    try:
        zf = GRAPH_FUNCTIONS[name]
    except KeyError:
        raise ValueError(f"unknown graph function {name!r}") from None
    u = np.linspace(-half_width, half_width, n)

    def f(x, y):
        return np.stack([x, y, zf(x, y)], axis=-1)

    return from_function(f, u, u)


BUILTINS = {
    "plane": plane,
    "sphere": sphere,
    "cylinder": cylinder,
    "ellipsoid": ellipsoid,
    "hyperboloid1": hyperboloid1,
    "torus": torus,
    "graph": graph,
}

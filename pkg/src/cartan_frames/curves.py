"""Frenet frames, curvature and torsion of sampled plane and space curves."""
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    DegenerateSegment,
    DimensionMismatch,
    MalformedTensor,
    NotOrthogonal,
    NotUnitSpeed,
    VanishingCurvature,
)
from .stencils import derivative, grid_step

MIN_POINTS = 7
UNIT_SPEED_TOL = 1e-2
CURVATURE_FLOOR = 1e-6

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True, eq=False)
class SampledCurve:
    """Ordered samples of a regular curve in R^2 or R^3.

    For closed curves the first point is not repeated at the end; the
    parameter period is ``len(param) * step``.
    """

    points: np.ndarray
    param: np.ndarray = None
    closed: bool = False

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] not in (2, 3):
            raise DimensionMismatch("points must be an (N, 2) or (N, 3) array")
        if self.closed and len(pts) > 1 and np.allclose(pts[0], pts[-1], rtol=0, atol=1e-14):
            pts = pts[:-1]
        if len(pts) < MIN_POINTS:
            raise MalformedTensor(f"need at least {MIN_POINTS} points, got {len(pts)}")
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if np.any(seg == 0.0):
            raise DegenerateSegment(f"coincident consecutive points at {np.flatnonzero(seg == 0.0).tolist()}")
        if self.param is None:
            param = np.concatenate([[0.0], np.cumsum(seg)])
        else:
            param = np.array(self.param, dtype=float)[: len(pts)]
            if param.shape != (len(pts),) or np.any(np.diff(param) <= 0):
                raise MalformedTensor("param must be strictly increasing, one value per point")
        pts.setflags(write=False)
        param.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "param", param)

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True, eq=False)
class FrenetData2D:
    s: np.ndarray
    T: np.ndarray
    N: np.ndarray
    k: np.ndarray
    boundary: np.ndarray


@dataclass(frozen=True, eq=False)
class FrenetData3D:
    s: np.ndarray
    T: np.ndarray
    N: np.ndarray
    B: np.ndarray
    k: np.ndarray
    tau: np.ndarray
    boundary: np.ndarray
    defined: np.ndarray


def rot90(v):
    """Counterclockwise rotation by pi/2 of an (..., 2) array."""
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


# --------------------------------------------------------------------------
# arclength


def _spline_speed(spline, u):
    return np.linalg.norm(spline(u, 1), axis=-1)


def _partial_length(spline, a, b):
    """Arclength of the spline between parameter values ``a`` and ``b``."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    u = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    sp = _spline_speed(spline, u.ravel()).reshape(u.shape)
    return half * (sp @ _GL_WEIGHTS)


def arclength_reparametrize(c, n=None):
    """Resample ``c`` uniformly in arclength.

    A cubic spline is fitted against cumulative chord length; its own
    arclength is then integrated with Gauss-Legendre quadrature and
    inverted by Newton iteration, so the output is unit speed up to the
    spline's interpolation error.  ``n`` defaults to the input size.
    """
    pts = c.points
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    if np.any(seg == 0.0):
        raise DegenerateSegment("coincident consecutive points")
    n = len(pts) if n is None else int(n)
    if c.closed:
        closing = np.linalg.norm(pts[0] - pts[-1])
        if closing == 0.0:
            raise DegenerateSegment("closed curve repeats its first point")
        knots = np.concatenate([[0.0], np.cumsum(np.append(seg, closing))])
        spline = CubicSpline(knots, np.vstack([pts, pts[:1]]), bc_type="periodic")
    else:
        knots = np.concatenate([[0.0], np.cumsum(seg)])
        spline = CubicSpline(knots, pts)

    lengths = _partial_length(spline, knots[:-1], knots[1:])
    S = np.concatenate([[0.0], np.cumsum(lengths)])
    total = S[-1]
    if c.closed:
        s = np.arange(n) * (total / n)
    else:
        s = np.linspace(0.0, total, n)

    idx = np.clip(np.searchsorted(S, s, side="right") - 1, 0, len(lengths) - 1)
    a = knots[idx]
    u = a + (s - S[idx]) / lengths[idx] * (knots[idx + 1] - a)
    for _ in range(8):
        resid = S[idx] + _partial_length(spline, a, u) - s
        u = np.clip(u - resid / _spline_speed(spline, u), knots[idx], knots[idx + 1])
    return SampledCurve(spline(u), s, c.closed)


def curve_length(c):
    """Polygonal length (including the closing segment for closed curves)."""
    pts = c.points
    if c.closed:
        pts = np.vstack([pts, pts[:1]])
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


# --------------------------------------------------------------------------
# derivatives


def _derivatives(c, orders):
    h = grid_step(c.param)
    out = []
    boundary = np.zeros(len(c), dtype=bool)
    for k in orders:
        d, b = derivative(c.points, h, order=k, axis=0, periodic=c.closed)
        out.append(d)
        boundary |= b
    return out, boundary


def is_unit_speed(c, tol=UNIT_SPEED_TOL):
    try:
        (d1,), boundary = _derivatives(c, (1,))
    except ValueError:
        return False
    speed = np.linalg.norm(d1, axis=1)[~boundary]
    return bool(speed.size and np.max(np.abs(speed - 1.0)) <= tol)


def _check_speed(d1, boundary):
    speed = np.linalg.norm(d1, axis=1)
    # one-sided end stencils are flagged, not judged
    judged = speed[~boundary] if np.any(~boundary) else speed
    dev = np.max(np.abs(judged - 1.0))
    if dev > UNIT_SPEED_TOL:
        raise NotUnitSpeed(f"max speed deviation {dev:.3g}; reparametrize by arclength first")
    return speed


def frenet_frame_2d(c):
    """Frenet frame and signed curvature of a unit-speed plane curve.

    ``T = r'/|r'|`` and ``N`` is ``T`` turned counterclockwise by pi/2.  The
    curvature ``k = <T', N>`` uses the exact derivative of the unit tangent,
    ``T' = (r'' - <r'', T> T) / |r'|^2``, so small departures from unit
    speed do not bias it.
    """
    if c.dim != 2:
        raise DimensionMismatch("frenet_frame_2d needs a plane curve")
    (d1, d2), boundary = _derivatives(c, (1, 2))
    speed = _check_speed(d1, boundary)
    T = d1 / speed[:, None]
    N = rot90(T)
    dT = (d2 - np.sum(d2 * T, axis=1)[:, None] * T) / speed[:, None] ** 2
    k = np.sum(dT * N, axis=1)
    return FrenetData2D(c.param.copy(), T, N, k, boundary)


def curvature_2d(c):
    return frenet_frame_2d(c).k


def frenet_3d(c, strict=True, floor=CURVATURE_FLOOR):
    """Frenet frame, curvature and torsion of a unit-speed space curve.

    Torsion is ``tau = -<B', N>``, computed as
    ``det(r', r'', r''') / |r' x r''|^2`` (positive on a right-handed helix).
    Where the curvature drops below ``floor`` the normal, binormal and
    torsion are undefined: with ``strict`` a :class:`VanishingCurvature` is
    raised, otherwise those samples are NaN and ``defined`` is False.
    """
    if c.dim != 3:
        raise DimensionMismatch("frenet_3d needs a space curve")
    (d1, d2, d3), boundary = _derivatives(c, (1, 2, 3))
    speed = _check_speed(d1, boundary)
    T = d1 / speed[:, None]
    perp = d2 - np.sum(d2 * T, axis=1)[:, None] * T
    pn = np.linalg.norm(perp, axis=1)
    k = pn / speed**2
    defined = k >= floor
    if strict and not np.all(defined):
        bad = np.flatnonzero(~defined)
        raise VanishingCurvature(f"curvature below {floor:g} at {bad.size} samples", bad)
    with np.errstate(invalid="ignore", divide="ignore"):
        N = perp / pn[:, None]
        B = np.cross(T, N)
        cr = np.cross(d1, d2)
        tau = np.sum(cr * d3, axis=1) / np.sum(cr * cr, axis=1)
    N[~defined] = np.nan
    B[~defined] = np.nan
    tau[~defined] = np.nan
    return FrenetData3D(c.param.copy(), T, N, B, k, tau, boundary, defined)


def apply_isometry(c, R, t=None, tol=1e-10):
    """Rigid motion ``p -> R p + t``; ``R`` may be a rotation or a reflection."""
    R = np.asarray(R, dtype=float)
    d = c.dim
    if R.shape != (d, d):
        raise DimensionMismatch(f"motion matrix must be {d}x{d}")
    if np.max(np.abs(R.T @ R - np.eye(d))) > tol:
        raise NotOrthogonal("motion matrix is not orthogonal")
    t = np.zeros(d) if t is None else np.asarray(t, dtype=float)
    return SampledCurve(c.points @ R.T + t, c.param, c.closed)


def analyze(c):
    """Reparametrize if needed, then compute the 2-D or 3-D Frenet data."""
    if not is_unit_speed(c, 1e-8):
        c = arclength_reparametrize(c)
    if c.dim == 2:
        return frenet_frame_2d(c)
    return frenet_3d(c, strict=False)


# --------------------------------------------------------------------------
# generators


def line(n=200, length=1.0, direction=(1.0, 0.0), origin=None):
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    o = np.zeros_like(u) if origin is None else np.asarray(origin, dtype=float)
    s = np.linspace(0.0, length, n)
    return SampledCurve(o + s[:, None] * u, s)


def circle(r=1.0, n=2000, clockwise=False, closed=True, dim=2):
    """Circle of radius ``r`` sampled uniformly in arclength.

    The open variant covers three quarters of the circle.
    """
    L = 2 * np.pi * r
    s = np.arange(n) * (L / n) if closed else np.linspace(0.0, 0.75 * L, n)
    th = s / r * (-1.0 if clockwise else 1.0)
    pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
    if dim == 3:
        pts = np.column_stack([pts, np.zeros(n)])
    return SampledCurve(pts, s, closed)


def helix(a=2.0, b=1.0, n=4000, turns=2.0):
    """Right-handed helix ``(a cos t, a sin t, b t)`` sampled in arclength."""
    c = np.hypot(a, b)
    s = np.linspace(0.0, 2 * np.pi * turns * c, n)
    t = s / c
    return SampledCurve(np.column_stack([a * np.cos(t), a * np.sin(t), b * t]), s)


def ellipse(a=2.0, b=1.0, n=2000):
    """Ellipse sampled uniformly in angle (not unit speed)."""
    t = np.arange(n) * (2 * np.pi / n)
    return SampledCurve(np.column_stack([a * np.cos(t), b * np.sin(t)]), t, closed=True)


BUILTINS = {"line": line, "circle": circle, "helix": helix, "ellipse": ellipse}

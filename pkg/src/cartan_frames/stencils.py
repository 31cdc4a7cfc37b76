"""Finite-difference derivatives on uniform grids.

Interior nodes use centred stencils (5 points for first and second
derivatives, 7 points for the third).  Near the ends of a non-periodic axis
the stencil slides inward to a one-sided, second-order window, and those
nodes are reported in the returned boundary mask.  Periodic axes wrap.
"""
from functools import lru_cache

import numpy as np

from .errors import NonUniformGrid

# centred half-widths per derivative order
_HALF_WIDTH = {1: 2, 2: 2, 3: 3}


@lru_cache(maxsize=None)
def fd_weights(offsets, order):
    """Weights ``w`` with ``sum(w[j] * f(x + o[j] h)) ~ h**order f^(order)(x)``.

    Solves the Taylor moment conditions directly; fine for the short
    stencils used here.

    Parameters
    ----------
    offsets : tuple of int
        Stencil offsets in units of the grid step.
    order : int
        Derivative order, smaller than ``len(offsets)``.
    """
    o = np.asarray(offsets, dtype=float)
    m = len(o)
    if order >= m:
        raise ValueError("stencil too short for requested derivative order")
    V = np.vander(o, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[order] = np.prod(np.arange(1, order + 1, dtype=float))
    w = np.linalg.solve(V, rhs)
    w.setflags(write=False)
    return w


def grid_step(param, rtol=1e-8):
    """Return the uniform spacing of ``param`` or raise :class:`NonUniformGrid`."""
    param = np.asarray(param, dtype=float)
    d = np.diff(param)
    if d.size == 0 or np.any(d <= 0):
        raise NonUniformGrid("parameter values must be strictly increasing")
    h = (param[-1] - param[0]) / (len(param) - 1)
    if np.max(np.abs(d - h)) > rtol * max(abs(h), 1.0):
        raise NonUniformGrid("parameter grid is not uniform")
    return h


def derivative(f, h, order=1, axis=0, periodic=False):
    """Differentiate samples ``f`` along ``axis``.

    Returns
    -------
    df : ndarray
        Same shape as ``f``.
    boundary : ndarray of bool
        1-D mask over the axis; True where a one-sided stencil was used.
    """
    f = np.moveaxis(np.asarray(f, dtype=float), axis, 0)
    n = f.shape[0]
    half = _HALF_WIDTH[order]
    central = tuple(range(-half, half + 1))
    wc = fd_weights(central, order)
    boundary = np.zeros(n, dtype=bool)
    out = np.zeros_like(f)

    if periodic:
        if n < 2 * half + 1:
            raise ValueError("too few samples for the periodic stencil")
        for o, w in zip(central, wc):
            out += w * np.roll(f, -o, axis=0)
        return np.moveaxis(out / h**order, 0, axis), boundary

    if n < 2 * half + 1:
        raise ValueError(f"need at least {2 * half + 1} samples, got {n}")
    inner = slice(half, n - half)
    for o, w in zip(central, wc):
        out[inner] += w * f[half + o:n - half + o]

    # one-sided second-order windows anchored at each end
    width = order + 2
    for i in range(half):
        wl = fd_weights(tuple(j - i for j in range(width)), order)
        out[i] = np.tensordot(wl, f[:width], axes=(0, 0))
        r = n - 1 - i
        wr = fd_weights(tuple(j - r for j in range(n - width, n)), order)
        out[r] = np.tensordot(wr, f[n - width:], axes=(0, 0))
        boundary[i] = boundary[r] = True
    return np.moveaxis(out / h**order, 0, axis), boundary

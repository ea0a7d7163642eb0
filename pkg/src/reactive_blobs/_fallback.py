"""Pure numpy versions of the stencil kernels in ``_core.pyx``.

Every function works on 2-D or 3-D C-contiguous float64 arrays.  The
operator is ``diag * x - coef * nbsum(x)`` where ``nbsum`` adds the 2d
face neighbours, wrapping for periodic grids and reading zero outside
the domain otherwise (the Dirichlet ghost contribution is folded into
``diag`` by the caller).
"""

from functools import lru_cache

import numpy as np


def neighbor_sum(x, periodic):
    out = np.zeros_like(x)
    if periodic:
        for axis in range(x.ndim):
            out += np.roll(x, 1, axis=axis)
            out += np.roll(x, -1, axis=axis)
        return out
    for axis in range(x.ndim):
        lo = [slice(None)] * x.ndim
        hi = [slice(None)] * x.ndim
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        out[tuple(lo)] += x[tuple(hi)]
        out[tuple(hi)] += x[tuple(lo)]
    return out


@lru_cache(maxsize=64)
def _color_masks(shape):
    parity = np.indices(shape).sum(axis=0) % 2
    red = parity == 0
    red.flags.writeable = False
    black = ~red
    black.flags.writeable = False
    return red, black


def apply_operator(x, diag, coef, periodic):
    return diag * x - coef * neighbor_sum(x, periodic)


def residual(x, g, diag, coef, periodic):
    return g - apply_operator(x, diag, coef, periodic)


def rbgs(x, g, diag, coef, periodic, sweeps):
    """Red-black Gauss-Seidel, in place. Red cells have even index sum."""
    masks = _color_masks(x.shape)
    for _ in range(sweeps):
        for mask in masks:
            nb = neighbor_sum(x, periodic)
            x[mask] = (g[mask] + coef * nb[mask]) / diag[mask]
    return x


def rbgs_reverse(x, g, diag, coef, periodic, sweeps):
    """Black-then-red ordering; used for post-smoothing."""
    red, black = _color_masks(x.shape)
    for _ in range(sweeps):
        for mask in (black, red):
            nb = neighbor_sum(x, periodic)
            x[mask] = (g[mask] + coef * nb[mask]) / diag[mask]
    return x

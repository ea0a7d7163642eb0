"""Geometric multigrid V cycles for ``(beta I - chi L) c = g`` on cell-centered grids.

Red-black Gauss-Seidel smoothing, cell-average restriction, (bi/tri)linear
prolongation and a sparse direct solve on the coarsest level.  Levels are
halved while every axis is even and stays at least 4 cells wide.

For ``beta = 0`` on a periodic grid the operator is singular; the hierarchy
then implements the restricted inverse acting on zero-mean fields.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _backend
from .grid import GridSpec, ScalarField, stencil_diag


class SolvabilityError(ValueError):
    """Right-hand side outside the range of a singular periodic operator."""


class CycleCounter:
    """Cumulative V-cycle count, shared by every hierarchy built with it."""

    def __init__(self):
        self.count = 0

    def __call__(self) -> int:
        return self.count

    def add(self, n: int = 1):
        self.count += n


global_cycles = CycleCounter()


@dataclass
class _Level:
    spec: GridSpec
    diag: np.ndarray
    coef: float


def _operator_matrix(spec: GridSpec, beta: float, chi: float) -> sp.csr_matrix:
    """Sparse ``beta I - chi L0`` in C-order flat indexing."""
    shape = spec.shape
    n = spec.n_cells
    coef = chi / spec.h**2
    diag = stencil_diag(spec, beta, chi).ravel()
    idx = np.arange(n).reshape(shape)
    rows, cols = [np.arange(n)], [np.arange(n)]
    data = [diag]
    for axis in range(spec.dim):
        for shift in (1, -1):
            nb = np.roll(idx, shift, axis=axis)
            if spec.periodic:
                mask = np.ones(shape, dtype=bool)
            else:
                mask = np.ones(shape, dtype=bool)
                sl = [slice(None)] * spec.dim
                sl[axis] = 0 if shift == 1 else -1
                mask[tuple(sl)] = False
            rows.append(idx[mask])
            cols.append(nb[mask])
            data.append(np.full(mask.sum(), -coef))
    return sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )


class _CoarseSolver:
    def __init__(self, spec: GridSpec, beta: float, chi: float, singular: bool):
        a = _operator_matrix(spec, beta, chi).tolil()
        self.singular = singular
        if singular:
            # pin cell 0; consistent zero-mean data makes row 0 redundant
            a[0, :] = 0.0
            a[0, 0] = 1.0
        self.lu = spla.splu(a.tocsc())
        self.shape = spec.shape

    def __call__(self, g: np.ndarray) -> np.ndarray:
        rhs = g.reshape(-1).copy()
        if self.singular:
            rhs -= rhs.mean()
            rhs[0] = 0.0
        x = self.lu.solve(rhs)
        if self.singular:
            x -= x.mean()
        return x.reshape(self.shape)


def restrict(r: np.ndarray) -> np.ndarray:
    """Average of the 2^d fine children of each coarse cell."""
    out = 0.0
    d = r.ndim
    for offs in itertools.product((0, 1), repeat=d):
        out = out + r[tuple(slice(o, None, 2) for o in offs)]
    return out / 2**d


def _prolong_axis(u: np.ndarray, axis: int, periodic: bool) -> np.ndarray:
    n = u.shape[axis]
    if periodic:
        lo = np.roll(u, 1, axis=axis)
        hi = np.roll(u, -1, axis=axis)
    else:
        # homogeneous Dirichlet ghost: -interior
        first = -np.take(u, [0], axis=axis)
        last = -np.take(u, [n - 1], axis=axis)
        lo = np.concatenate([first, np.take(u, range(n - 1), axis=axis)], axis=axis)
        hi = np.concatenate([np.take(u, range(1, n), axis=axis), last], axis=axis)
    shape = list(u.shape)
    shape[axis] = 2 * n
    out = np.empty(shape)
    even = [slice(None)] * u.ndim
    odd = [slice(None)] * u.ndim
    even[axis] = slice(0, None, 2)
    odd[axis] = slice(1, None, 2)
    out[tuple(even)] = 0.75 * u + 0.25 * lo
    out[tuple(odd)] = 0.75 * u + 0.25 * hi
    return out


def prolong(u: np.ndarray, periodic: bool) -> np.ndarray:
    """Tensor-product linear interpolation from coarse to fine cell centers."""
    for axis in range(u.ndim):
        u = _prolong_axis(u, axis, periodic)
    return np.ascontiguousarray(u)


class MultigridHierarchy:
    """V-cycle solver for ``(beta I - chi L0) c = g`` (homogeneous boundary data)."""

    def __init__(self, spec: GridSpec, beta: float = 0.0, chi: float = 1.0,
                 pre: int = 2, post: int = 2, counter: CycleCounter | None = None):
        if beta < 0:
            raise ValueError("beta must be non-negative")
        if not chi > 0:
            raise ValueError("chi must be positive")
        self.spec = spec
        self.beta = float(beta)
        self.chi = float(chi)
        self.pre = pre
        self.post = post
        self.counter = counter if counter is not None else CycleCounter()
        self.singular = spec.periodic and self.beta == 0.0
        self.levels: list[_Level] = []
        level = spec
        while True:
            self.levels.append(_Level(level, stencil_diag(level, beta, chi), chi / level.h**2))
            if all(n % 2 == 0 and n // 2 >= 4 for n in level.shape):
                level = level.coarsened()
            else:
                break
        self._coarse = _CoarseSolver(self.levels[-1].spec, beta, chi, self.singular)

    @property
    def cycles(self) -> int:
        return self.counter.count

    def apply_operator(self, x: np.ndarray) -> np.ndarray:
        lv = self.levels[0]
        return _backend.apply_operator(np.ascontiguousarray(x), lv.diag, lv.coef, self.spec.periodic)

    def residual(self, x: np.ndarray, g: np.ndarray) -> np.ndarray:
        lv = self.levels[0]
        return _backend.residual(x, g, lv.diag, lv.coef, self.spec.periodic)

    def _check_solvable(self, g: np.ndarray):
        if self.singular:
            scale = np.linalg.norm(g.ravel()) / np.sqrt(g.size)
            if abs(g.mean()) > 1e-10 * max(scale, np.finfo(float).tiny):
                raise SolvabilityError(
                    f"periodic steady problem needs a zero-mean right-hand side (mean={g.mean():.3e})"
                )

    def _cycle(self, depth: int, x: np.ndarray, g: np.ndarray) -> np.ndarray:
        if depth == len(self.levels) - 1:
            return self._coarse(g)
        lv = self.levels[depth]
        periodic = lv.spec.periodic
        _backend.rbgs(x, g, lv.diag, lv.coef, periodic, self.pre)
        r = _backend.residual(x, g, lv.diag, lv.coef, periodic)
        rc = np.ascontiguousarray(restrict(r))
        ec = self._cycle(depth + 1, np.zeros_like(rc), rc)
        x += prolong(ec, periodic)
        _backend.rbgs_reverse(x, g, lv.diag, lv.coef, periodic, self.post)
        return x

    def v_cycle_array(self, g: np.ndarray, x0: np.ndarray | None = None, check: bool = True) -> np.ndarray:
        g = np.ascontiguousarray(g, dtype=float)
        if check:
            self._check_solvable(g)
        x = np.zeros_like(g) if x0 is None else np.array(x0, dtype=float, order="C", copy=True)
        x = self._cycle(0, x, g)
        self.counter.add(1)
        if self.counter is not global_cycles:
            global_cycles.add(1)
        return x

    def solve_array(self, g: np.ndarray, n: int = 1, x0: np.ndarray | None = None) -> np.ndarray:
        """``n`` V cycles; the restricted inverse when the operator is singular."""
        if n < 1:
            raise ValueError("need at least one cycle")
        g = np.ascontiguousarray(g, dtype=float)
        if self.singular:
            g = g - g.mean()
        x = None if x0 is None else np.array(x0, dtype=float, order="C", copy=True)
        for _ in range(n):
            x = self.v_cycle_array(g, x, check=False)
        if self.singular:
            x -= x.mean()
        return x

    def solve_to_tolerance(self, g: np.ndarray, rtol: float = 1e-12, max_cycles: int = 100) -> np.ndarray:
        g = np.ascontiguousarray(g, dtype=float)
        if self.singular:
            g = g - g.mean()
        gnorm = np.linalg.norm(g)
        x = np.zeros_like(g)
        if gnorm == 0:
            return x
        for _ in range(max_cycles):
            x = self.v_cycle_array(g, x, check=False)
            if np.linalg.norm(self.residual(x, g)) <= rtol * gnorm:
                break
        if self.singular:
            x -= x.mean()
        return x

    # ScalarField front ends

    def v_cycle(self, g: ScalarField, c0: ScalarField | None = None) -> ScalarField:
        x0 = None if c0 is None else c0.values
        return ScalarField(self.spec, self.v_cycle_array(g.values, x0))

    def solve_approx(self, g: ScalarField, n: int = 1) -> ScalarField:
        return ScalarField(self.spec, self.solve_array(g.values, n))


def v_cycle(hier: MultigridHierarchy, g: ScalarField, c0: ScalarField | None = None) -> ScalarField:
    return hier.v_cycle(g, c0)


def solve_approx(hier: MultigridHierarchy, g: ScalarField, n: int = 1) -> ScalarField:
    return hier.solve_approx(g, n)

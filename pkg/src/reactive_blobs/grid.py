"""Uniform cell-centered Cartesian grids, scalar fields and the discrete Laplacian.

Cell ``k`` along an axis is centered at ``(k + 1/2) h``.  Field arrays are
indexed ``values[i, j(, k)]`` with array axis ``a`` matching coordinate
axis ``a``; whenever a field is flattened (Krylov vectors, CSV dumps) the
x index runs fastest (Fortran order).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import _backend


@dataclass(frozen=True)
class Periodic:
    """Periodic boundaries on every face."""


@dataclass(frozen=True)
class Dirichlet:
    """Fixed concentration ``value`` on every face of the box."""

    value: float = 0.0


Boundary = Union[Periodic, Dirichlet]
PERIODIC = Periodic()


@dataclass(frozen=True)
class GridSpec:
    shape: tuple[int, ...]
    h: float = 1.0
    boundary: Boundary = PERIODIC

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        object.__setattr__(self, "shape", shape)
        if len(shape) not in (2, 3):
            raise ValueError(f"grid must be 2-D or 3-D, got shape {shape}")
        if any(n < 4 for n in shape):
            raise ValueError(f"every axis needs at least 4 cells, got {shape}")
        if not self.h > 0:
            raise ValueError(f"spacing must be positive, got h={self.h}")
        if not isinstance(self.boundary, (Periodic, Dirichlet)):
            raise TypeError(f"unknown boundary {self.boundary!r}")

    @classmethod
    def cube(cls, n: int, dim: int = 3, h: float = 1.0, boundary: Boundary = PERIODIC):
        return cls((n,) * dim, h, boundary)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def periodic(self) -> bool:
        return isinstance(self.boundary, Periodic)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def lengths(self) -> np.ndarray:
        return np.asarray(self.shape, dtype=float) * self.h

    @property
    def volume(self) -> float:
        return self.n_cells * self.cell_volume

    def centers(self, axis: int) -> np.ndarray:
        return (np.arange(self.shape[axis]) + 0.5) * self.h

    def coarsened(self) -> "GridSpec":
        return GridSpec(tuple(n // 2 for n in self.shape), 2.0 * self.h, self.boundary)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)


@dataclass(frozen=True)
class ScalarField:
    """Immutable cell-centered field; ``values`` is a read-only copy."""

    spec: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True).reshape(self.spec.shape)
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains NaN or Inf")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, spec: GridSpec, value: float) -> "ScalarField":
        return cls(spec, np.full(spec.shape, float(value)))

    @classmethod
    def from_function(cls, spec: GridSpec, func) -> "ScalarField":
        coords = np.meshgrid(*(spec.centers(a) for a in range(spec.dim)), indexing="ij")
        return cls(spec, func(*coords))

    def ravel(self) -> np.ndarray:
        return self.values.ravel(order="F")

    def _wrap(self, values):
        return ScalarField(self.spec, values)

    def __add__(self, other):
        return self._wrap(self.values + _as_values(other))

    def __sub__(self, other):
        return self._wrap(self.values - _as_values(other))

    def __mul__(self, scalar):
        return self._wrap(self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self._wrap(-self.values)


def _as_values(x):
    return x.values if isinstance(x, ScalarField) else x


def stencil_diag(spec: GridSpec, beta: float, chi: float) -> np.ndarray:
    """Diagonal of ``beta I - chi L`` with homogeneous boundary data.

    For Dirichlet grids the ghost value ``-interior`` adds ``chi/h^2`` per
    boundary face of a cell.
    """
    coef = chi / spec.h**2
    diag = np.full(spec.shape, beta + 2 * spec.dim * coef)
    if not spec.periodic:
        for axis in range(spec.dim):
            idx = [slice(None)] * spec.dim
            idx[axis] = 0
            diag[tuple(idx)] += coef
            idx[axis] = -1
            diag[tuple(idx)] += coef
    return diag


def boundary_term(spec: GridSpec) -> np.ndarray:
    """Affine part of ``L`` for Dirichlet grids: ``L c = L0 c + boundary_term``.

    The ghost value ``2 c_b - interior`` contributes ``2 c_b / h^2`` per
    boundary face.  Zero for periodic grids.
    """
    out = np.zeros(spec.shape)
    if spec.periodic or spec.boundary.value == 0.0:
        return out
    face = 2.0 * spec.boundary.value / spec.h**2
    for axis in range(spec.dim):
        idx = [slice(None)] * spec.dim
        idx[axis] = 0
        out[tuple(idx)] += face
        idx[axis] = -1
        out[tuple(idx)] += face
    return out


def laplacian_values(spec: GridSpec, values: np.ndarray, homogeneous: bool = False) -> np.ndarray:
    x = np.ascontiguousarray(values, dtype=float)
    out = -_backend.apply_operator(x, stencil_diag(spec, 0.0, 1.0), 1.0 / spec.h**2, spec.periodic)
    if not homogeneous:
        out += boundary_term(spec)
    return out


def apply_laplacian(f: ScalarField) -> ScalarField:
    """(2d+1)-point Laplacian, including the Dirichlet boundary value."""
    return ScalarField(f.spec, laplacian_values(f.spec, f.values))


def apply_helmholtz(f: ScalarField, beta: float, chi: float) -> ScalarField:
    """``(beta I - chi L) f``."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    return ScalarField(f.spec, beta * f.values - chi * laplacian_values(f.spec, f.values))


def mean(f) -> float:
    return float(np.mean(_as_values(f)))


def subtract_mean(f: ScalarField) -> ScalarField:
    return ScalarField(f.spec, f.values - f.values.mean())


def dot(f, g) -> float:
    return float(np.vdot(_as_values(f), _as_values(g)))


def write_field_csv(f: ScalarField, path) -> None:
    """Dump ``i,j,k,x,y,z,value`` rows with x fastest (k/z dropped in 2-D)."""
    spec = f.spec
    names = "ijk"[: spec.dim]
    header = list(names) + list("xyz"[: spec.dim]) + ["value"]
    idx = np.indices(spec.shape).reshape(spec.dim, -1, order="F")
    vals = f.values.ravel(order="F")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for n in range(vals.size):
            ids = idx[:, n]
            xs = (ids + 0.5) * spec.h
            w.writerow([*map(int, ids), *(f"{x:.16e}" for x in xs), f"{vals[n]:.16e}"])

"""Peskin kernels and the blob <-> grid averaging (J) and spreading (S) operators."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .grid import GridSpec, ScalarField


class KernelKind(enum.IntEnum):
    THREE_POINT = 3
    FOUR_POINT = 4

    @property
    def width(self) -> int:
        return int(self)

    @classmethod
    def parse(cls, value) -> "KernelKind":
        if isinstance(value, KernelKind):
            return value
        text = str(value).strip().lower()
        aliases = {"3": cls.THREE_POINT, "3pt": cls.THREE_POINT, "three": cls.THREE_POINT,
                   "4": cls.FOUR_POINT, "4pt": cls.FOUR_POINT, "four": cls.FOUR_POINT}
        try:
            return aliases[text]
        except KeyError:
            raise ValueError(f"unknown kernel {value!r}; expected 3 or 4") from None


def _phi3(r):
    out = np.zeros_like(r)
    inner = r <= 0.5
    outer = (r > 0.5) & (r < 1.5)
    ri = r[inner]
    out[inner] = (1.0 + np.sqrt(1.0 - 3.0 * ri**2)) / 3.0
    ro = r[outer]
    out[outer] = (5.0 - 3.0 * ro - np.sqrt(np.maximum(-2.0 + 6.0 * ro - 3.0 * ro**2, 0.0))) / 6.0
    return out


def _phi4(r):
    out = np.zeros_like(r)
    inner = r <= 1.0
    outer = (r > 1.0) & (r < 2.0)
    ri = r[inner]
    out[inner] = (3.0 - 2.0 * ri + np.sqrt(1.0 + 4.0 * ri - 4.0 * ri**2)) / 8.0
    ro = r[outer]
    out[outer] = (5.0 - 2.0 * ro - np.sqrt(np.maximum(-7.0 + 12.0 * ro - 4.0 * ro**2, 0.0))) / 8.0
    return out


def kernel_weight(kind, x):
    """One-dimensional dimensionless kernel at offset ``x = r/h``.

    Zero for ``|x| >= w/2``.  Accepts scalars or arrays.
    """
    kind = KernelKind.parse(kind)
    r = np.abs(np.asarray(x, dtype=float))
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    out = _phi3(r) if kind is KernelKind.THREE_POINT else _phi4(r)
    return float(out[0]) if scalar else out


def kernel_volume(kind, dim: int, h: float = 1.0) -> float:
    """Blob volume ``(J S 1)^-1`` in closed form: 2^d h^d or (8/3)^d h^d."""
    kind = KernelKind.parse(kind)
    per_axis = 2.0 if kind is KernelKind.THREE_POINT else 8.0 / 3.0
    return (per_axis * h) ** dim


@dataclass(frozen=True)
class BlobSet:
    """Blob positions ``(N, d)``, reaction rates ``(N,)`` and kernel.

    ``kappa = inf`` marks a diffusion-limited blob.
    """

    positions: np.ndarray
    kappa: np.ndarray | float = np.inf
    kernel: KernelKind = KernelKind.FOUR_POINT
    strengths: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float, ndmin=2, copy=True)
        kap = np.broadcast_to(np.asarray(self.kappa, dtype=float), (pos.shape[0],)).copy()
        if np.any(np.isnan(kap)) or np.any(kap < 0):
            raise ValueError("reaction rates must be non-negative")
        pos.flags.writeable = False
        kap.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "kappa", kap)
        object.__setattr__(self, "kernel", KernelKind.parse(self.kernel))

    def __len__(self):
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def diffusion_limited(self) -> bool:
        return bool(np.all(np.isinf(self.kappa)))

    @property
    def any_diffusion_limited(self) -> bool:
        return bool(np.any(np.isinf(self.kappa)))

    def with_strengths(self, strengths) -> "BlobSet":
        return BlobSet(self.positions, self.kappa, self.kernel, np.asarray(strengths, float))

    def with_kappa(self, kappa) -> "BlobSet":
        return BlobSet(self.positions, kappa, self.kernel)


class BlobStencil:
    """Precomputed kernel weights of every blob on a grid.

    ``index`` and ``weight`` have shape ``(N, w**d)``; ``index`` holds flat
    C-order cell indices into the field array.
    """

    def __init__(self, spec: GridSpec, blobs: BlobSet):
        if blobs.dim != spec.dim:
            raise ValueError(f"blob dimension {blobs.dim} does not match grid dimension {spec.dim}")
        self.spec = spec
        self.blobs = blobs
        w = blobs.kernel.width
        n = len(blobs)
        d = spec.dim
        u = blobs.positions / spec.h
        if spec.periodic:
            u = np.mod(u, np.asarray(spec.shape, dtype=float))
        start = np.floor(u - 0.5 * w + 0.5).astype(np.int64)
        cells = start[:, :, None] + np.arange(w)[None, None, :]  # (N, d, w)
        axis_w = kernel_weight(blobs.kernel, u[:, :, None] - (cells + 0.5))
        if spec.periodic:
            cells = np.mod(cells, np.asarray(spec.shape)[None, :, None])
        else:
            bad = (cells.min(axis=2) < 0) | (cells.max(axis=2) >= np.asarray(spec.shape)[None, :])
            if np.any(bad):
                which = np.nonzero(bad.any(axis=1))[0]
                raise ValueError(
                    f"kernel support of blob(s) {which[:5].tolist()} crosses the Dirichlet boundary"
                )
        strides = np.array([int(np.prod(spec.shape[a + 1:])) for a in range(d)], dtype=np.int64)
        index = np.zeros((n,) + (w,) * d, dtype=np.int64)
        weight = np.ones((n,) + (w,) * d)
        for a in range(d):
            shape = [n] + [1] * d
            shape[a + 1] = w
            index = index + (cells[:, a, :] * strides[a]).reshape(shape)
            weight = weight * axis_w[:, a, :].reshape(shape)
        self.axis_weights = axis_w
        self.index = index.reshape(n, -1)
        self.weight = weight.reshape(n, -1)

    def __len__(self):
        return self.index.shape[0]

    def interpolate(self, values: np.ndarray) -> np.ndarray:
        """``(J c)_i = sum_k phi(q_i - r_k) c_k``."""
        flat = values.reshape(-1)
        return np.einsum("ij,ij->i", self.weight, flat[self.index])

    def spread(self, strengths) -> np.ndarray:
        """``(S lam)_k = sum_i phi(q_i - r_k) lam_i / dV_f``."""
        lam = np.broadcast_to(np.asarray(strengths, dtype=float), (len(self),))
        acc = np.bincount(
            self.index.ravel(),
            weights=(self.weight * lam[:, None]).ravel(),
            minlength=self.spec.n_cells,
        )
        return (acc / self.spec.cell_volume).reshape(self.spec.shape)

    @cached_property
    def self_overlap(self) -> np.ndarray:
        """``sum_k phi_k^2`` per blob."""
        return np.einsum("ij,ij->i", self.weight, self.weight)

    def volumes(self) -> np.ndarray:
        """Per-blob volume ``(J_i S_i 1)^-1``."""
        return self.spec.cell_volume / self.self_overlap


def interpolate(blobs: BlobSet, f: ScalarField) -> np.ndarray:
    return BlobStencil(f.spec, blobs).interpolate(f.values)


def spread(blobs: BlobSet, strengths, spec: GridSpec) -> ScalarField:
    return ScalarField(spec, BlobStencil(spec, blobs).spread(strengths))


def blob_volume(blobs: BlobSet, i: int, spec: GridSpec) -> float:
    single = BlobSet(blobs.positions[i:i + 1], blobs.kappa[i:i + 1], blobs.kernel)
    return float(BlobStencil(spec, single).volumes()[0])

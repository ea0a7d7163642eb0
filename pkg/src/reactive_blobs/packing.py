"""Random sequential addition of non-overlapping spheres in a periodic box."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SaturationError(RuntimeError):
    def __init__(self, message, achieved_phi):
        super().__init__(message)
        self.achieved_phi = achieved_phi


@dataclass(frozen=True)
class Packing:
    centers: np.ndarray
    radius: float
    box: np.ndarray
    seed: int

    @property
    def volume_fraction(self) -> float:
        return len(self.centers) * (4.0 / 3.0) * np.pi * self.radius**3 / float(np.prod(self.box))

    def min_distance(self) -> float:
        """Smallest minimum-image pair distance (brute force)."""
        x = self.centers
        if len(x) < 2:
            return np.inf
        best = np.inf
        for i in range(len(x) - 1):
            d = x[i + 1:] - x[i]
            d -= self.box * np.round(d / self.box)
            best = min(best, float(np.sqrt((d**2).sum(axis=1)).min()))
        return best


def generate_packing(phi: float, radius: float, box, seed: int = 0,
                     attempts_per_sphere: int = 1_000_000) -> Packing:
    """Place spheres one at a time at uniform random positions, rejecting overlaps.

    The sphere count is ``round(phi V / v_sphere)``.  Candidates are drawn
    in growing batches and the first admissible one is kept, which is the
    same as drawing them one by one.  Raises ``SaturationError`` if a
    sphere cannot be placed within its attempt budget.
    """
    box = np.asarray(box, dtype=float)
    if not 0 < phi < 1:
        raise ValueError("phi must lie in (0, 1)")
    if phi > 0.35:
        raise ValueError("sequential addition saturates near phi = 0.38; use phi <= 0.35")
    if box.size != 3:
        raise ValueError("packings are generated in 3-D")
    if np.any(box <= 2 * radius):
        raise ValueError("box must be wider than one sphere diameter")
    v_sphere = 4.0 / 3.0 * np.pi * radius**3
    n_target = int(round(phi * np.prod(box) / v_sphere))
    rng = np.random.default_rng(seed)
    diam = 2.0 * radius
    # cell list: cells at least one diameter wide, so contacts lie in the 27 neighbors
    ncell = np.maximum((box // diam).astype(int), 1)
    cell_len = box / ncell
    per_cell = int(np.ceil(np.prod(cell_len + diam) / v_sphere)) + 1
    table = np.full((*ncell, per_cell), -1, dtype=np.int64)
    fill = np.zeros(tuple(ncell), dtype=np.int64)
    offs = np.array(np.meshgrid(*[(-1, 0, 1)] * 3, indexing="ij")).reshape(3, -1).T
    centers = np.empty((n_target + 1, 3))
    centers[n_target] = 0.0  # padding slot for empty entries, masked below
    batch = 8
    for count in range(n_target):
        tried = 0
        while True:
            if tried >= attempts_per_sphere:
                achieved = count * v_sphere / np.prod(box)
                raise SaturationError(
                    f"could not place sphere {count + 1} of {n_target} (achieved phi={achieved:.4f})",
                    achieved,
                )
            cand = rng.random((batch, 3)) * box
            tried += batch
            cell = np.minimum((cand // cell_len).astype(int), ncell - 1)
            nb = (cell[:, None, :] + offs[None, :, :]) % ncell
            idx = table[nb[..., 0], nb[..., 1], nb[..., 2]].reshape(batch, -1)
            idx[idx < 0] = n_target
            d = centers[idx] - cand[:, None, :]
            d -= box * np.round(d / box)
            dist2 = np.where(idx == n_target, np.inf, (d**2).sum(axis=2))
            hit = np.flatnonzero(np.all(dist2 >= diam**2, axis=1))
            if hit.size:
                p = cand[hit[0]]
                c = tuple(cell[hit[0]])
                centers[count] = p
                table[c][fill[c]] = count
                fill[c] += 1
                break
            batch = min(2 * batch, 4096)
        if hit[0] < batch // 8:
            batch = max(batch // 2, 8)
    return Packing(centers[:n_target].copy(), float(radius), box, seed)

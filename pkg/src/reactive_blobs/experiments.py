"""Calibration and validation studies for reactive blobs in 3-D.

All lengths are in units of the grid spacing unless a ``h`` argument says
otherwise.  Radii are in the same units as positions.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.optimize import least_squares

from .grid import Dirichlet, GridSpec
from .kernels import BlobSet, KernelKind
from .krylov import ConvergenceHistory, KrylovConfig
from .packing import Packing, generate_packing
from .solvers import (
    SCHUR,
    ReactionSystem,
    nearly_steady_beta,
    solve_saddle,
    solve_steady_finite_kappa,
)

# published reactive radii for a blob at a grid corner, in units of h
REFERENCE_RADIUS = {KernelKind.FOUR_POINT: 1.27, KernelKind.THREE_POINT: 0.885}
FINITE_SIZE_COEF = 2.84
CUBIC_B, CUBIC_C = -0.92, 17.4


def reference_radius(kernel) -> float:
    return REFERENCE_RADIUS[KernelKind.parse(kernel)]


@dataclass
class ExperimentResult:
    """Rows of named numeric columns plus free-form metadata."""

    name: str
    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    histories: list = field(default_factory=list)
    converged: bool = True
    physical: bool = True

    def add(self, **row):
        self.rows.append(row)

    def record(self, history: ConvergenceHistory, converged: bool, cbar: float | None = None):
        """Keep one solve's history; a non-positive mean concentration is unphysical."""
        self.histories.append(history)
        self.converged = self.converged and bool(converged)
        if cbar is not None and not (np.isfinite(cbar) and cbar > 0):
            self.physical = False

    @property
    def total_cycles(self) -> int:
        return sum(h.total_cycles for h in self.histories)

    def column(self, name) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([_fmt(r.get(c, "")) for c in self.columns])


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.16e}"
    return v


# --------------------------------------------------------------------------
# closed forms


def sphere_volume_fraction(n_spheres: int, a: float, volume: float) -> float:
    return n_spheres * 4.0 * math.pi * a**3 / (3.0 * volume)


def normalized_rate(cbar: float, s: float, a: float, chi: float, phi: float) -> float:
    """``(s a^2 / chi) (1 - phi) / (3 phi) / cbar``."""
    return (s * a**2 / chi) * (1.0 - phi) / (3.0 * phi) / cbar


def cubic_beta0_fit(phi, b: float = CUBIC_B, c: float = CUBIC_C):
    """Interpolating fit for a simple-cubic array of absorbing spheres."""
    phi = np.asarray(phi, dtype=float)
    k = 1.76
    return 1 + k * phi ** (1 / 3) + k**2 * phi ** (2 / 3) + b * phi + c * phi ** (4 / 3)


def finite_size_radius(a: float, L: float) -> float:
    """Apparent radius ``a_L`` of a blob in a periodic box of side ``L`` (same units)."""
    x = FINITE_SIZE_COEF * a / L
    return a * (1 + x + x * x)


def extrapolate_radius(a_L: float, L: float) -> float:
    """Single-size estimate ``a ~ a_L - 2.84 a_L^2 / L``."""
    return a_L - FINITE_SIZE_COEF * a_L**2 / L


def fit_radius(sizes, a_L) -> float:
    """Least-squares ``a`` in ``a_L = a [1 + x + x^2]``, ``x = 2.84 a / L``."""
    sizes = np.asarray(sizes, dtype=float)
    a_L = np.asarray(a_L, dtype=float)
    res = least_squares(lambda p: finite_size_radius(p[0], sizes) - a_L, [a_L[-1]])
    if not res.success:
        raise RuntimeError(f"radius fit failed: {res.message}")
    return float(res.x[0])


def decay_theory(r, a: float, L: float):
    """``c/c_inf ~ L/(L-2a) (1 - a/r)`` for an absorbing sphere centered in a box."""
    r = np.asarray(r, dtype=float)
    return L / (L - 2 * a) * (1 - a / r)


# --------------------------------------------------------------------------
# beta_0 measurement


@dataclass
class Beta0Measurement:
    beta0: float
    phi: float
    cbar: float
    total_cycles: int
    converged: bool
    history: ConvergenceHistory

    @property
    def physical(self) -> bool:
        return self.cbar > 0 and np.isfinite(self.beta0) and self.beta0 > 0


def measure_beta0(grid: GridSpec, blobs: BlobSet, a: float, chi: float = 1.0, s: float | None = None,
                  precond: str = SCHUR, m: int = 5, n: int = 1,
                  config: KrylovConfig | None = None) -> Beta0Measurement:
    """Steady diffusion-limited solve with a uniform source; ``a`` in length units.

    The mean is taken over every cell, blob interiors included.
    """
    if not grid.periodic:
        raise ValueError("beta_0 is defined for periodic dispersions")
    s = 1.0 / grid.volume if s is None else s
    blobs = blobs if blobs.diffusion_limited else blobs.with_kappa(np.inf)
    sys = ReactionSystem(grid, blobs, chi, 0.0, s)
    sol = solve_saddle(sys, precond=precond, m=m, n=n, config=config)
    cbar = sol.mean_concentration
    phi = sphere_volume_fraction(len(blobs), a, grid.volume)
    beta0 = normalized_rate(cbar, s, a, chi, phi) if cbar != 0 else math.inf
    return Beta0Measurement(beta0, phi, cbar, sol.history.total_cycles, sol.converged, sol.history)


def single_blob_mean(L: int, kernel, offset=(0.0, 0.0, 0.0), chi: float = 1.0, h: float = 1.0,
                     config: KrylovConfig | None = None):
    """Mean steady concentration around one diffusion-limited blob, ``s = 1/V``.

    ``offset`` is the blob displacement from a grid corner, in units of h.
    Returns ``(cbar, solution)``.
    """
    grid = GridSpec.cube(L, 3, h)
    pos = (np.full(3, L // 2, dtype=float) + np.asarray(offset, dtype=float)) * h
    sys = ReactionSystem(grid, BlobSet(pos[None, :], np.inf, kernel), chi, 0.0, 1.0 / grid.volume)
    sol = solve_saddle(sys, config=config)
    return sol.mean_concentration, sol


@dataclass
class RadiusCalibration:
    kernel: KernelKind
    a: float
    table: ExperimentResult


def calibrate_radius(kernel, sizes=(32, 48, 64), offset=(0.0, 0.0, 0.0), chi: float = 1.0,
                     config: KrylovConfig | None = None) -> RadiusCalibration:
    """Fit the infinite-system reactive radius (units of h) from single-blob boxes."""
    kernel = KernelKind.parse(kernel)
    table = ExperimentResult("calibrate-radius", ["L", "phi", "a_L", "a_single", "cbar", "cycles"],
                             metadata={"kernel": int(kernel), "offset": tuple(offset)})
    a_L = []
    for L in sizes:
        cbar, sol = single_blob_mean(L, kernel, offset, chi, config=config)
        aL = 1.0 / (4 * math.pi * chi * cbar)
        a_L.append(aL)
        table.record(sol.history, sol.converged, cbar)
        table.add(L=int(L), phi=sphere_volume_fraction(1, aL, L**3), a_L=aL,
                  a_single=extrapolate_radius(aL, L), cbar=cbar, cycles=sol.history.total_cycles)
    try:
        a = fit_radius(sizes, a_L)
    except RuntimeError:
        a = float("nan")
    table.metadata["a"] = a
    # the fitted radius is the apparent radius of an infinite box
    table.add(L=math.inf, phi=0.0, a_L=a, a_single=a, cbar=0.0, cycles=0)
    return RadiusCalibration(kernel, a, table)


def displacement_samples(per_direction: int = 4):
    """Blob offsets (relative to a grid corner) moving away from a cell center.

    Rays run along an axis, a face diagonal and a body diagonal, each
    ending on the cell boundary.  The axis ray includes the cell center
    itself.  Items are ``(direction, distance from the center, offset)``.
    """
    out = []
    for name, direction in (("axis", (1, 0, 0)), ("face", (1, 1, 0)), ("body", (1, 1, 1))):
        d = np.asarray(direction, dtype=float)
        ts = np.linspace(0.0, 0.5, per_direction)
        if name != "axis":
            ts = np.linspace(0.0, 0.5, per_direction + 1)[1:]
        for t in ts:
            out.append((name, float(np.linalg.norm(t * d)), tuple(0.5 + t * d)))
    return out


def translational_variation(kernel, L: int = 64, samples=None, chi: float = 1.0,
                            config: KrylovConfig | None = None) -> ExperimentResult:
    """Single-size radius estimates for blobs displaced from a cell center."""
    kernel = KernelKind.parse(kernel)
    samples = samples if samples is not None else displacement_samples()
    res = ExperimentResult("translational-variation", ["direction", "delta", "a_L", "a"],
                           metadata={"kernel": int(kernel), "L": L})
    for name, delta, offset in samples:
        cbar, sol = single_blob_mean(L, kernel, offset, chi, config=config)
        res.record(sol.history, sol.converged, cbar)
        aL = 1.0 / (4 * math.pi * chi * cbar)
        res.add(direction=name, delta=delta, a_L=aL, a=extrapolate_radius(aL, L))
    a = res.column("a")
    res.metadata["relative_spread"] = float((a.max() - a.min()) / a.mean())
    return res


# --------------------------------------------------------------------------
# cubic lattices


def _coarse_size(L: int) -> int:
    while L % 2 == 0 and L // 2 >= 4:
        L //= 2
    return L


def choose_lattice(phi: float, a: float, integer_tol: float = 0.15, min_L: int = 8, max_L: int = 64,
                   max_per_axis: int = 16, max_coarse: int = 16):
    """Box size ``L`` and blobs per axis ``M`` for a cubic array near volume fraction ``phi``.

    An integer spacing puts every blob on a grid corner, as in the radius
    calibration, and is used when its volume fraction is within
    ``integer_tol`` (log ratio) of ``phi``.  Otherwise the spacing ``L/M``
    closest to the target is taken over boxes whose coarsest multigrid
    level has at most ``max_coarse`` cells per axis.
    """
    target = a * (4 * math.pi / (3 * phi)) ** (1 / 3)
    d = max(2, int(round(target)))
    if abs(3 * math.log(target / d)) <= integer_tol:
        M = max(1, -(-min_L // d))
        return d * M, M
    best = None
    for M in range(1, max_per_axis + 1):
        for L in range(min_L, max_L + 1):
            if _coarse_size(L) > max_coarse:
                continue
            key = (round(abs(math.log(L / M / target)), 3), L * M)
            if best is None or key < best[0]:
                best = (key, L, M)
    return best[1], best[2]


def cubic_lattice_positions(L: int, M: int, h: float = 1.0) -> np.ndarray:
    """``M^3`` blobs on a cubic lattice of spacing ``L/M`` starting at a grid corner."""
    sp = L / M
    ids = np.array(list(itertools.product(range(M), repeat=3)), dtype=float)
    return ids * sp * h


def cubic_beta0(kernel, phis, a: float | None = None, chi: float = 1.0,
                config: KrylovConfig | None = None) -> ExperimentResult:
    """``beta_0`` of simple-cubic blob arrays next to the interpolating sphere fit."""
    kernel = KernelKind.parse(kernel)
    a = reference_radius(kernel) if a is None else a
    res = ExperimentResult("cubic-beta0",
                           ["phi_target", "phi", "L", "M", "N", "beta0", "fit", "rel_error", "cbar",
                            "cycles", "physical"],
                           metadata={"kernel": int(kernel), "a": a})
    for phi_t in phis:
        L, M = choose_lattice(phi_t, a)
        grid = GridSpec.cube(L)
        blobs = BlobSet(cubic_lattice_positions(L, M), np.inf, kernel)
        meas = measure_beta0(grid, blobs, a, chi, config=config)
        fit = float(cubic_beta0_fit(meas.phi))
        res.record(meas.history, meas.converged, meas.cbar)
        res.add(phi_target=phi_t, phi=meas.phi, L=L, M=M, N=M**3, beta0=meas.beta0, fit=fit,
                rel_error=meas.beta0 / fit - 1, cbar=meas.cbar, cycles=meas.total_cycles,
                physical=meas.physical)
    return res


# --------------------------------------------------------------------------
# random dispersions


def random_blobs(packing: Packing, kernel) -> BlobSet:
    return BlobSet(packing.centers, np.inf, kernel)


def measure_beta0_random(packing: Packing, kernel, L: int, chi: float = 1.0,
                         config: KrylovConfig | None = None) -> Beta0Measurement:
    grid = GridSpec.cube(L)
    return measure_beta0(grid, random_blobs(packing, kernel), packing.radius, chi, config=config)


def random_beta0(kernel, phis, L: int = 64, a: float | None = None, seed: int = 0,
                 realizations: int = 1, chi: float = 1.0, config: KrylovConfig | None = None,
                 packings: list | None = None) -> ExperimentResult:
    """``beta_0`` of sequential-addition dispersions, one row per packing.

    Realization ``r`` at the ``i``-th volume fraction uses seed
    ``seed + 1000 r + i``.  Generated packings are appended to
    ``packings`` when a list is given.
    """
    kernel = KernelKind.parse(kernel)
    a = reference_radius(kernel) if a is None else a
    res = ExperimentResult("random-beta0",
                           ["phi_target", "realization", "phi", "N", "beta0", "cbar", "cycles",
                            "converged", "physical"],
                           metadata={"kernel": int(kernel), "a": a, "L": L, "seed": seed})
    for r in range(realizations):
        for i, phi_t in enumerate(phis):
            packing = generate_packing(phi_t, a, np.full(3, float(L)), seed=seed + 1000 * r + i)
            if packings is not None:
                packings.append(packing)
            meas = measure_beta0_random(packing, kernel, L, chi, config=config)
            res.record(meas.history, meas.converged, meas.cbar)
            res.add(phi_target=phi_t, realization=r, phi=meas.phi, N=len(packing.centers),
                    beta0=meas.beta0, cbar=meas.cbar, cycles=meas.total_cycles,
                    converged=meas.converged, physical=meas.physical)
    return res


def ensemble_mean(res: ExperimentResult):
    """Per-target averages ``(phi, beta0, standard error)`` of a random-beta0 table."""
    targets = res.column("phi_target")
    out = []
    for t in dict.fromkeys(targets.tolist()):
        sel = targets == t
        b = res.column("beta0")[sel]
        err = b.std(ddof=1) / np.sqrt(b.size) if b.size > 1 else float("nan")
        out.append((float(res.column("phi")[sel].mean()), float(b.mean()), float(err)))
    return np.array(out)


def dilute_limit(phi, beta0) -> np.ndarray:
    """Coefficients ``(b0, b1, b2)`` of ``beta0 ~ b0 + b1 phi^1/2 + b2 phi``.

    ``b0`` is the extrapolated value at vanishing volume fraction; use
    only dilute points, where the square-root screening term dominates.
    """
    phi = np.asarray(phi, dtype=float)
    X = np.column_stack([np.ones_like(phi), np.sqrt(phi), phi])
    return np.linalg.lstsq(X, np.asarray(beta0, dtype=float), rcond=None)[0]


# --------------------------------------------------------------------------
# Dirichlet decay profile


RAYS = {"axis": (1.0, 0.0, 0.0), "face": (1.0, 1.0, 0.0), "body": (1.0, 1.0, 1.0)}


def decay_profile(L: int = 64, kernel=KernelKind.FOUR_POINT, c_inf: float = 1.0, a: float | None = None,
                  r_min: float = 3.0, r_max: float | None = None, dr: float = 0.5, chi: float = 1.0,
                  config: KrylovConfig | None = None):
    """Steady concentration around one absorbing blob at the center of a Dirichlet box.

    Samples ``c/c_inf`` along rays by linear interpolation of the
    cell-centered field.  Returns ``(ExperimentResult, SaddleSolution)``.
    """
    kernel = KernelKind.parse(kernel)
    a = reference_radius(kernel) if a is None else a
    grid = GridSpec.cube(L, 3, 1.0, Dirichlet(c_inf))
    center = np.full(3, L / 2.0)
    sys = ReactionSystem(grid, BlobSet(center[None, :], np.inf, kernel), chi, 0.0, 0.0)
    sol = solve_saddle(sys, config=config)
    axes = [grid.centers(i) for i in range(3)]
    interp = RegularGridInterpolator(axes, sol.c.values, method="linear")
    r_max = L / 4.0 if r_max is None else r_max
    radii = np.arange(r_min, r_max + 1e-9, dr)
    res = ExperimentResult("decay-profile", ["direction", "r_over_h", "c_over_c_inf", "theory", "rel_error"],
                           metadata={"kernel": int(kernel), "L": L, "a": a})
    res.record(sol.history, sol.converged)
    for name, d in RAYS.items():
        u = np.asarray(d) / np.linalg.norm(d)
        pts = center + radii[:, None] * u
        inside = np.all((pts >= axes[0][0]) & (pts <= axes[0][-1]), axis=1)
        vals = interp(pts[inside]) / c_inf
        theo = decay_theory(radii[inside], a, L)
        for r, v, t in zip(radii[inside], vals, theo):
            res.add(direction=name, r_over_h=float(r), c_over_c_inf=float(v), theory=float(t),
                    rel_error=float(v / t - 1))
    return res, sol


# --------------------------------------------------------------------------
# finite reaction rate


def measure_omega(L: int = 64, kernel=KernelKind.FOUR_POINT, P_values=(0.01, 0.1, 1.0, 10.0),
                  a: float | None = None, chi: float = 1.0,
                  config: KrylovConfig | None = None) -> ExperimentResult:
    """Normalized inverse rate ``Omega`` versus ``P = 4 pi chi a / kappa`` for one blob.

    Metadata holds ``beta0`` (diffusion-limited), the least-squares slope
    and intercept of ``Omega(P)``, and ``phi``.
    """
    kernel = KernelKind.parse(kernel)
    a = reference_radius(kernel) if a is None else a
    grid = GridSpec.cube(L)
    s = 1.0 / grid.volume
    pos = np.full((1, 3), L // 2, dtype=float)
    phi = sphere_volume_fraction(1, a, grid.volume)
    base = measure_beta0(grid, BlobSet(pos, np.inf, kernel), a, chi, s, config=config)
    res = ExperimentResult("finite-p", ["P", "kappa", "cbar", "omega", "beta_P", "cbar_shift_times_kappa",
                                        "cycles"],
                           metadata={"kernel": int(kernel), "L": L, "a": a, "phi": phi,
                                     "beta0": base.beta0, "cbar0": base.cbar})
    res.record(base.history, base.converged, base.cbar)
    for P in P_values:
        kappa = 4 * math.pi * chi * a / P
        sys = ReactionSystem(grid, BlobSet(pos, kappa, kernel), chi, 0.0, s)
        sol = solve_steady_finite_kappa(sys, config=config)
        cbar = float(sol.c.values.mean())
        omega = 1.0 / normalized_rate(cbar, s, a, chi, phi)
        res.record(sol.history, sol.converged, cbar)
        res.add(P=P, kappa=kappa, cbar=cbar, omega=omega, beta_P=(1 + P) / omega,
                cbar_shift_times_kappa=(cbar - base.cbar) * kappa, cycles=sol.history.total_cycles)
    P = res.column("P")
    om = res.column("omega")
    slope, intercept = np.polyfit(P, om, 1)
    res.metadata.update(slope=float(slope), intercept=float(intercept))
    return res


# --------------------------------------------------------------------------
# preconditioner benchmark


def precond_bench(L: int = 16, blobs_per_axis: int | None = None, precond: str = SCHUR, m: int = 5,
                  n: int = 1, steady: bool = False, restart: int = 30, rtol: float = 1e-9,
                  max_cycles: int = 2000, seed: int = 0, kernel=KernelKind.FOUR_POINT):
    """Saddle solve for a periodic cubic blob array with a random right-hand side.

    Blobs are 4 cells apart unless ``blobs_per_axis`` is given.  The
    operator is ``L^-2 I - L`` (``steady=False``) or ``-L``.  Returns
    ``(ExperimentResult, SaddleSolution)``.
    """
    M = L // 4 if blobs_per_axis is None else blobs_per_axis
    grid = GridSpec.cube(L)
    blobs = BlobSet(cubic_lattice_positions(L, M) + 0.0, np.inf, kernel)
    beta = 0.0 if steady else nearly_steady_beta(grid)
    sys = ReactionSystem(grid, blobs, 1.0, beta, 0.0)
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(grid.shape)
    f = rng.standard_normal(len(blobs))
    cfg = KrylovConfig(restart=restart, rtol=rtol, max_cycles=max_cycles)
    sol = solve_saddle(sys, g, f, precond=precond, m=m, n=n, config=cfg)
    res = ExperimentResult("precond-bench",
                           ["experiment", "L", "N", "precond", "m", "n", "outer_iters", "total_cycles",
                            "final_residual"],
                           metadata={"steady": steady, "restart": restart, "seed": seed})
    res.record(sol.history, sol.converged)
    res.add(experiment="precond-bench", L=L, N=len(blobs), precond=precond, m=m, n=n,
            outer_iters=sol.iterations, total_cycles=sol.history.total_cycles,
            final_residual=sol.history.final_residual)
    return res, sol

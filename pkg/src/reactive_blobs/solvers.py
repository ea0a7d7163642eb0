"""Reaction-diffusion linear systems for blobs and their preconditioned solvers.

Finite reaction rates give ``(beta I - chi L + S kappa J) c = g`` (backward
Euler, or the steady state at ``beta = 0``).  Diffusion-limited blobs give
the saddle-point system

    A c + zeta S lam = g
    xi J c           = f,        A = beta I - chi L,

solved by FGMRES on the product space ``(c, lam)`` with either the
diagonal or the approximate-Schur-complement preconditioner.  On a
periodic grid at steady state ``A`` is singular and both preconditioners
switch to the restricted inverse plus the mean corrections.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .grid import GridSpec, ScalarField, boundary_term
from .kernels import BlobSet, BlobStencil, KernelKind
from .krylov import ConvergenceHistory, KrylovConfig, fgmres, gmres_fixed
from .multigrid import CycleCounter, MultigridHierarchy, SolvabilityError

log = logging.getLogger(__name__)

DIAGONAL = "diagonal"
SCHUR = "schur"


def nearly_steady_beta(spec: GridSpec) -> float:
    """``beta = (L h)^-2``: the nearly-steady ``L^-2 I - L`` benchmark operator (h = 1, chi = 1)."""
    return 1.0 / (max(spec.shape) * spec.h) ** 2


@dataclass
class ReactionSystem:
    """Grid, blobs and coefficients of one linear reaction-diffusion problem.

    ``beta`` is ``1/dt`` for a time step and 0 for the steady state.
    ``source`` may be a scalar, an array or a ScalarField.  ``zeta``
    defaults to ``chi h``; ``xi = zeta / dV_f``.
    """

    grid: GridSpec
    blobs: BlobSet
    chi: float = 1.0
    beta: float = 0.0
    source: object = 0.0
    zeta: float | None = None
    counter: CycleCounter = field(default_factory=CycleCounter, repr=False)

    def __post_init__(self):
        if not self.chi > 0:
            raise ValueError("chi must be positive")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.zeta is None:
            self.zeta = self.chi * self.grid.h
        if not self.zeta > 0:
            raise ValueError("zeta must be positive")

    @classmethod
    def time_step(cls, grid, blobs, chi, dt, **kw) -> "ReactionSystem":
        if not dt > 0:
            raise ValueError("dt must be positive")
        return cls(grid, blobs, chi, 1.0 / dt, **kw)

    @property
    def xi(self) -> float:
        return self.zeta / self.grid.cell_volume

    @property
    def steady(self) -> bool:
        return self.beta == 0.0

    @property
    def singular(self) -> bool:
        """``A`` has the constant null space (periodic steady state)."""
        return self.grid.periodic and self.steady

    @property
    def cfl(self) -> float:
        """Diffusive CFL number ``chi dt / h^2``; infinite at steady state."""
        return np.inf if self.steady else self.chi / (self.beta * self.grid.h**2)

    @cached_property
    def stencil(self) -> BlobStencil:
        return BlobStencil(self.grid, self.blobs)

    @cached_property
    def hierarchy(self) -> MultigridHierarchy:
        return MultigridHierarchy(self.grid, self.beta, self.chi, counter=self.counter)

    @property
    def source_values(self) -> np.ndarray:
        s = self.source
        if isinstance(s, ScalarField):
            return np.array(s.values)
        return np.broadcast_to(np.asarray(s, dtype=float), self.grid.shape).copy()

    @property
    def boundary_rhs(self) -> np.ndarray:
        """``chi`` times the affine Dirichlet part of ``L``, moved to the right-hand side."""
        return self.chi * boundary_term(self.grid)

    def apply_A(self, c: np.ndarray) -> np.ndarray:
        return self.hierarchy.apply_operator(c)

    def reaction(self, c: np.ndarray) -> np.ndarray:
        """``S kappa J c``."""
        st = self.stencil
        return st.spread(self.blobs.kappa * st.interpolate(c))


# --------------------------------------------------------------------------
# finite reaction rate


def apply_reaction_operator(sys: ReactionSystem, c: ScalarField) -> ScalarField:
    """``(beta I - chi L + S kappa J) c`` with the full (affine) Laplacian."""
    if sys.blobs.any_diffusion_limited:
        raise ValueError("diffusion-limited blobs have no finite reaction operator; use solve_saddle")
    vals = np.ascontiguousarray(c.values)
    out = sys.apply_A(vals) - sys.boundary_rhs + sys.reaction(vals)
    return ScalarField(sys.grid, out)


@dataclass
class FiniteKappaSolution:
    c: ScalarField
    history: ConvergenceHistory
    converged: bool
    iterations: int


class NonConvergenceError(RuntimeError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


def _finite_kappa_solve(sys: ReactionSystem, g: np.ndarray, x0: np.ndarray | None,
                        n: int, config: KrylovConfig | None) -> FiniteKappaSolution:
    if sys.blobs.any_diffusion_limited:
        raise ValueError("diffusion-limited blobs need the saddle-point solver")
    shape = sys.grid.shape
    hier = sys.hierarchy
    kappa_total = float(np.sum(sys.blobs.kappa))
    if sys.singular and kappa_total == 0.0:
        if abs(g.mean()) > 1e-12 * max(np.abs(g).max(), 1e-300):
            raise SolvabilityError("periodic steady problem without reaction needs a zero-mean source")
    mean_gain = kappa_total / sys.grid.volume  # mean of S kappa J 1

    def op(v):
        c = v.reshape(shape)
        return (sys.apply_A(c) + sys.reaction(c)).reshape(-1)

    def precond(v):
        r = v.reshape(shape)
        out = hier.solve_array(r, n)
        if sys.singular and mean_gain > 0:
            # constants are invisible to the restricted inverse; the reaction term sets their scale
            out += r.mean() / mean_gain
        return out.reshape(-1)

    res = fgmres(op, g.reshape(-1), precond, config,
                 x0=None if x0 is None else x0.reshape(-1), counter=sys.counter)
    return FiniteKappaSolution(ScalarField(sys.grid, res.x.reshape(shape)), res.history,
                               res.converged, res.iterations)


def solve_steady_finite_kappa(sys: ReactionSystem, n: int = 1,
                              config: KrylovConfig | None = None) -> FiniteKappaSolution:
    """Steady ``(S kappa J - chi L) c = s`` with a multigrid-preconditioned FGMRES."""
    if not sys.steady:
        raise ValueError("system is not steady (beta != 0)")
    g = sys.source_values + sys.boundary_rhs
    return _finite_kappa_solve(sys, g, None, n, config)


def step_backward_euler(sys: ReactionSystem, c_n: ScalarField, n: int = 1,
                        config: KrylovConfig | None = None) -> FiniteKappaSolution:
    """One implicit step ``(dt^-1 I - chi L + S kappa J) c^{n+1} = dt^-1 c^n + s``."""
    if sys.steady:
        raise ValueError("backward Euler needs a finite time step (beta > 0)")
    g = sys.beta * c_n.values + sys.source_values + sys.boundary_rhs
    return _finite_kappa_solve(sys, g, np.array(c_n.values), n, config)


# --------------------------------------------------------------------------
# diffusion-limited saddle point


def compute_gamma(grid: GridSpec, kernel, position, beta: float = 0.0, chi: float = 1.0) -> float:
    """Single-blob Schur diagonal ``gamma = chi (J A^-1 S) 1``.

    At steady state this is ``-(J L^-1 S) 1`` using the restricted inverse
    on periodic grids; in 3-D it approaches ``(4 pi a)^-1`` for large grids.
    """
    blob = BlobSet(np.atleast_2d(position), np.inf, KernelKind.parse(kernel))
    st = BlobStencil(grid, blob)
    hier = MultigridHierarchy(grid, beta, chi)
    u = hier.solve_to_tolerance(st.spread(1.0), rtol=1e-13, max_cycles=200)
    return float(chi * st.interpolate(u)[0])


@dataclass
class SaddleSolution:
    """``strengths`` are physical sink strengths ``zeta * lam``."""

    c: ScalarField
    strengths: np.ndarray
    multipliers: np.ndarray
    history: ConvergenceHistory
    converged: bool
    iterations: int
    breakdown: bool = False

    @property
    def mean_concentration(self) -> float:
        return float(self.c.values.mean())


class SaddlePointProblem:
    """Matrix-free saddle-point operator and its preconditioners."""

    def __init__(self, sys: ReactionSystem, gamma: float | None = None):
        self.sys = sys
        self.n_cells = sys.grid.n_cells
        self.n_blobs = len(sys.blobs)
        if self.n_blobs == 0:
            raise ValueError("saddle-point problem needs at least one blob")
        self._gamma = gamma

    @property
    def alpha(self) -> int:
        return 1 if self.sys.singular else 0

    @property
    def gamma(self) -> float:
        if self._gamma is None:
            s = self.sys
            self._gamma = compute_gamma(s.grid, s.blobs.kernel, s.blobs.positions[0], s.beta, s.chi)
        return self._gamma

    def split(self, x: np.ndarray):
        return x[: self.n_cells].reshape(self.sys.grid.shape), x[self.n_cells:]

    def join(self, c: np.ndarray, lam: np.ndarray) -> np.ndarray:
        return np.concatenate([c.reshape(-1), np.asarray(lam, dtype=float)])

    def apply(self, x: np.ndarray) -> np.ndarray:
        s = self.sys
        c, lam = self.split(x)
        c = np.ascontiguousarray(c)
        top = s.apply_A(c) + s.zeta * s.stencil.spread(lam)
        bottom = s.xi * s.stencil.interpolate(c)
        return self.join(top, bottom)

    def _schur_inner(self, rhs: np.ndarray, m: int) -> np.ndarray:
        s = self.sys
        hier = s.hierarchy

        def op(lam):
            return s.stencil.interpolate(hier.solve_array(s.stencil.spread(lam), 1))

        return gmres_fixed(op, rhs, m)

    def precondition(self, x: np.ndarray, kind: str = SCHUR, m: int = 5, n: int = 1) -> np.ndarray:
        """Approximate solve of the saddle system for the residual ``x = (g, f)``."""
        s = self.sys
        st = s.stencil
        hier = s.hierarchy
        g, f = self.split(x)
        g = np.ascontiguousarray(g)
        zeta, xi = s.zeta, s.xi
        lam_bar = 0.0
        if self.alpha:
            lam_bar = s.grid.volume * g.mean() / (zeta * self.n_blobs)
            g = g - zeta * st.spread(lam_bar)
        c_star = hier.solve_array(g, n)
        h_t = xi * st.interpolate(c_star) - f
        if kind == DIAGONAL:
            lam = s.chi / (zeta * xi * self.gamma) * h_t
        elif kind == SCHUR:
            lam = self._schur_inner(h_t / (zeta * xi), m)
        else:
            raise ValueError(f"unknown preconditioner {kind!r}")
        if self.alpha:
            lam = lam - lam.mean()
        c = hier.solve_array(g - zeta * st.spread(lam), n, x0=c_star)
        if self.alpha:
            c_bar = np.mean(f / xi - st.interpolate(c))
            lam = lam + lam_bar
            c = c + c_bar
        return self.join(c, lam)

    def rhs(self, g: np.ndarray | None = None, f: np.ndarray | None = None) -> np.ndarray:
        s = self.sys
        g = s.source_values if g is None else np.broadcast_to(np.asarray(g, float), s.grid.shape)
        f = np.zeros(self.n_blobs) if f is None else np.broadcast_to(np.asarray(f, float), (self.n_blobs,))
        return self.join(g + s.boundary_rhs, f)


def solve_saddle(sys: ReactionSystem, g=None, f=None, precond: str = SCHUR, m: int = 5, n: int = 1,
                 config: KrylovConfig | None = None, gamma: float | None = None,
                 x0: np.ndarray | None = None) -> SaddleSolution:
    """Solve ``[A, zeta S; xi J, 0] [c; lam] = [g; f]``.

    ``g`` defaults to the system source and ``f`` to zero; Dirichlet
    boundary data enter through ``A``.  ``precond`` is ``"schur"``
    (``m`` inner iterations, ``m + 2n`` cycles per application) or
    ``"diagonal"`` (``2n`` cycles).
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    problem = SaddlePointProblem(sys, gamma)
    if precond == DIAGONAL:
        problem.gamma  # computed up front, outside the cycle accounting
    b = problem.rhs(g, f)
    res = fgmres(problem.apply, b, lambda v: problem.precondition(v, precond, m, n), config,
                 x0=x0, counter=sys.counter)
    c, lam = problem.split(res.x)
    if not res.converged:
        log.warning("saddle solve stopped at relative residual %.3e after %d cycles",
                    res.history.final_residual, res.history.total_cycles)
    return SaddleSolution(ScalarField(sys.grid, c), sys.zeta * lam, lam.copy(), res.history,
                          res.converged, res.iterations, res.breakdown)

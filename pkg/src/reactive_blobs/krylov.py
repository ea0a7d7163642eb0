"""Restarted, right-preconditioned flexible GMRES with modified Gram-Schmidt.

Vectors are flat float64 arrays; operators and preconditioners are plain
callables ``v -> w``.  Convergence is judged on the true residual
``||b - A x|| / ||b||``, which for right preconditioning is also what the
Arnoldi least-squares problem minimises.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Operator = Callable[[np.ndarray], np.ndarray]


@dataclass
class KrylovConfig:
    restart: int = 30
    rtol: float = 1e-9
    maxiter: int = 10_000
    max_cycles: int | None = 2000

    def __post_init__(self):
        if self.restart < 1:
            raise ValueError("restart must be >= 1")
        if not 0 < self.rtol < 1:
            raise ValueError("rtol must lie in (0, 1)")


@dataclass
class ConvergenceHistory:
    """``(cumulative multigrid cycles, relative residual)`` pairs."""

    entries: list[tuple[int, float]] = field(default_factory=list)

    def append(self, cycles: int, residual: float):
        self.entries.append((int(cycles), float(residual)))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def cycles(self) -> np.ndarray:
        return np.array([c for c, _ in self.entries], dtype=int)

    @property
    def residuals(self) -> np.ndarray:
        return np.array([r for _, r in self.entries])

    @property
    def final_residual(self) -> float:
        return self.entries[-1][1] if self.entries else float("nan")

    @property
    def total_cycles(self) -> int:
        return self.entries[-1][0] if self.entries else 0

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cycles", "relative_residual"])
            for c, r in self.entries:
                w.writerow([c, f"{r:.16e}"])


@dataclass
class KrylovResult:
    x: np.ndarray
    history: ConvergenceHistory
    converged: bool
    iterations: int
    breakdown: bool = False
    exhausted: bool = False
    basis: np.ndarray | None = None


def fgmres(
    op: Operator,
    b: np.ndarray,
    precond: Operator | None = None,
    config: KrylovConfig | None = None,
    x0: np.ndarray | None = None,
    counter: Callable[[], int] | None = None,
    keep_basis: bool = False,
) -> KrylovResult:
    """Solve ``op(x) = b``.

    ``counter`` returns the cumulative multigrid cycle count; history
    entries use it relative to the count at entry (iterations when absent).
    Breakdown and budget exhaustion are flagged on the result, not raised.
    """
    cfg = config or KrylovConfig()
    b = np.asarray(b, dtype=float)
    precond = precond or (lambda v: v.copy())
    n_iter = 0
    cycles0 = counter() if counter is not None else 0

    def cycles():
        return (counter() - cycles0) if counter is not None else n_iter

    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float, copy=True)
    history = ConvergenceHistory()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        history.append(0, 0.0)
        return KrylovResult(np.zeros_like(b), history, True, 0)

    r = b - op(x) if x0 is not None else b.copy()
    beta = np.linalg.norm(r)
    history.append(cycles(), beta / bnorm)
    if beta / bnorm <= cfg.rtol:
        return KrylovResult(x, history, True, 0)

    m = cfg.restart
    breakdown = False
    basis_out = None
    while True:
        V = np.zeros((m + 1, b.size))
        Z = np.zeros((m, b.size))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        e = np.zeros(m + 1)
        e[0] = beta
        V[0] = r / beta
        k_used = 0
        for j in range(m):
            Z[j] = precond(V[j])
            w = op(Z[j])
            n_iter += 1
            wnorm0 = np.linalg.norm(w)
            for i in range(j + 1):
                H[i, j] = np.dot(V[i], w)
                w -= H[i, j] * V[i]
            H[j + 1, j] = np.linalg.norm(w)
            for i in range(j):
                tmp = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = tmp
            hnext = H[j + 1, j]
            small = hnext <= 1e-14 * max(wnorm0, np.finfo(float).tiny)
            if not small:
                V[j + 1] = w / hnext
            denom = np.hypot(H[j, j], hnext)
            if denom == 0.0:
                cs[j], sn[j] = 1.0, 0.0
            else:
                cs[j], sn[j] = H[j, j] / denom, hnext / denom
            H[j, j] = cs[j] * H[j, j] + sn[j] * hnext
            H[j + 1, j] = 0.0
            e[j + 1] = -sn[j] * e[j]
            e[j] = cs[j] * e[j]
            k_used = j + 1
            est = abs(e[j + 1]) / bnorm
            history.append(cycles(), est)
            if small:
                breakdown = True
                break
            if est <= cfg.rtol:
                break
            if n_iter >= cfg.maxiter or (cfg.max_cycles is not None and cycles() >= cfg.max_cycles):
                break
        y = np.zeros(k_used)
        if k_used:
            Hk = H[:k_used, :k_used]
            if np.all(np.abs(np.diag(Hk)) > 0):
                y = _back_substitute(Hk, e[:k_used])
            else:
                y = np.linalg.lstsq(Hk, e[:k_used], rcond=None)[0]
        x = x + Z[:k_used].T @ y
        if keep_basis:
            basis_out = V[: k_used + (0 if breakdown else 1)].copy()
        r = b - op(x)
        beta = np.linalg.norm(r)
        true_rel = beta / bnorm
        history.entries[-1] = (history.entries[-1][0], true_rel)
        if true_rel <= cfg.rtol:
            return KrylovResult(x, history, True, n_iter, breakdown=False, basis=basis_out)
        budget_out = n_iter >= cfg.maxiter or (
            cfg.max_cycles is not None and cycles() >= cfg.max_cycles
        )
        if budget_out:
            return KrylovResult(x, history, False, n_iter, exhausted=True, basis=basis_out)
        if breakdown:
            return KrylovResult(x, history, False, n_iter, breakdown=True, basis=basis_out)
        # estimate said converged but the true residual did not: restart


def _back_substitute(R: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    k = R.shape[0]
    y = np.zeros(k)
    for i in range(k - 1, -1, -1):
        y[i] = (rhs[i] - R[i, i + 1:] @ y[i + 1:]) / R[i, i]
    return y


def gmres_fixed(op: Operator, b: np.ndarray, steps: int) -> np.ndarray:
    """Exactly ``steps`` unpreconditioned GMRES iterations from a zero guess.

    Used as an inexact inner solver, so it applies ``op`` exactly
    ``steps`` times (fewer only on breakdown) and never forms the final
    residual.
    """
    b = np.asarray(b, dtype=float)
    beta = np.linalg.norm(b)
    if beta == 0.0:
        return np.zeros_like(b)
    V = np.zeros((steps + 1, b.size))
    H = np.zeros((steps + 1, steps))
    V[0] = b / beta
    k = 0
    for j in range(steps):
        w = op(V[j])
        for i in range(j + 1):
            H[i, j] = np.dot(V[i], w)
            w -= H[i, j] * V[i]
        H[j + 1, j] = np.linalg.norm(w)
        k = j + 1
        if H[j + 1, j] <= 1e-14 * beta:
            break
        V[j + 1] = w / H[j + 1, j]
    rhs = np.zeros(k + 1)
    rhs[0] = beta
    y = np.linalg.lstsq(H[: k + 1, :k], rhs, rcond=None)[0]
    return V[:k].T @ y

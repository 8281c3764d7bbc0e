"""Weighted nuclear-norm recovery via two-block operator splitting with
singular-value thresholding.

The weighted program

    min ||Q_U Z Q_V||_*   s.t.  ||y - A(Z)||_2 <= e

is solved on the substituted variable W = Q_U Z Q_V, for which the objective
is the plain nuclear norm and the sensing matrices become
Atilde_i = Q_U^{-1} A_i Q_V^{-1}.  The splitting alternates the nuclear-norm
proximal step (singular-value thresholding) with an exact projection onto the
measurement set {W : ||y - Atilde(W)||_2 <= e}; for e = 0 the constraint is
the exact affine set, handled with a precomputed pseudo-inverse rather than a
tiny ball.  The penalty parameter is rebalanced whenever the primal/dual
residual ratio exceeds a trigger.  Non-convergence within the iteration cap
returns the best iterate flagged converged=False so Monte-Carlo sweeps can
aggregate failures instead of aborting.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .linalg import as_matrix, svd
from .measure import MeasurementOperator, apply


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 2000
    abs_tol: float = 1e-7
    rel_tol: float = 1e-6
    rho: float = 1.0
    # multiply/divide rho by `scale` when the residual ratio exceeds `trigger`
    residual_balance_trigger: float = 10.0
    residual_balance_scale: float = 2.0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.rho <= 0:
            raise ValueError("rho must be positive")


@dataclass(frozen=True, eq=False)
class RecoveryResult:
    """Solver output.

    estimate: the recovered matrix (always measurement-feasible up to the
        reported gap).
    objective: ||Q_U @ estimate @ Q_V||_* for the Q's used in the solve.
    feasibility_gap: max(0, ||y - A(estimate)||_2 - e).
    trace: per-iteration (primal_residual, dual_residual, rho).
    diagnostics: condition numbers and final penalty value.
    """

    estimate: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float
    feasibility_gap: float
    converged: bool
    objective: float
    trace: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def nuclear_norm(M) -> float:
    return float(np.sum(svd(M).S))


def svt(M, tau: float) -> np.ndarray:
    """Singular-value soft thresholding: shrink each singular value by tau.

    The proximal operator of tau * ||.||_*; never increases the nuclear norm.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    M = as_matrix(M)
    t = svd(M)
    return (t.U * np.maximum(t.S - tau, 0.0)) @ t.V.T


class _MeasurementSetProjector:
    """Exact Euclidean projection onto {W : ||y - Phi @ vec(W)||_2 <= e}.

    Uses a one-time eigendecomposition of the (p x p) Gram matrix Phi Phi^T.
    For e = 0 the projection is affine through the pseudo-inverse; for e > 0
    the radial multiplier t solving ||(I + t G)^{-1} residual|| = e is found
    by bisection on its monotone decreasing radius function.
    """

    def __init__(self, Phi: np.ndarray, y: np.ndarray, e: float, n: int):
        self.Phi = Phi
        self.y = y
        self.e = float(e)
        self.n = n
        G = Phi @ Phi.T
        evals, evecs = np.linalg.eigh(G)
        self.evals = np.maximum(evals, 0.0)
        self.evecs = evecs
        self._inv_floor = max(self.evals[-1], 1.0) * 1e-14

    def __call__(self, V: np.ndarray) -> np.ndarray:
        rV = self.Phi @ V.ravel() - self.y
        norm_r = np.linalg.norm(rV)
        if norm_r <= self.e:
            return V
        b = self.evecs.T @ rV
        if self.e == 0.0:
            mu = self.evecs @ (b / np.maximum(self.evals, self._inv_floor))
            return V - (self.Phi.T @ mu).reshape(self.n, self.n)
        def radius(t: float) -> float:
            return float(np.linalg.norm(b / (1.0 + t * self.evals)))
        t_hi = 1.0
        while radius(t_hi) > self.e and t_hi < 1e18:
            t_hi *= 8.0
        t_lo = 0.0
        for _ in range(128):
            t_mid = 0.5 * (t_lo + t_hi)
            if radius(t_mid) > self.e:
                t_lo = t_mid
            else:
                t_hi = t_mid
        r = self.evecs @ (b / (1.0 + t_hi * self.evals))
        return V - t_hi * (self.Phi.T @ r).reshape(self.n, self.n)


def _splitting_loop(Phi, y, n, e, cfg: SolverConfig):
    project = _MeasurementSetProjector(Phi, y, e, n)
    rho = cfg.rho
    X1 = np.zeros((n, n))
    X2 = np.zeros((n, n))
    U = np.zeros((n, n))
    trace = []
    converged = False
    k = 0
    for k in range(1, cfg.max_iters + 1):
        X1 = svt(X2 - U, 1.0 / rho)
        X2_prev = X2
        X2 = project(X1 + U)
        U = U + X1 - X2
        pri = float(np.linalg.norm(X1 - X2))
        dua = float(rho * np.linalg.norm(X2 - X2_prev))
        trace.append((pri, dua, rho))
        eps_pri = n * cfg.abs_tol + cfg.rel_tol * max(
            np.linalg.norm(X1), np.linalg.norm(X2)
        )
        eps_dua = n * cfg.abs_tol + cfg.rel_tol * rho * np.linalg.norm(U)
        if pri <= eps_pri and dua <= eps_dua:
            converged = True
            break
        if pri > cfg.residual_balance_trigger * dua:
            rho *= cfg.residual_balance_scale
            U /= cfg.residual_balance_scale
        elif dua > cfg.residual_balance_trigger * pri:
            rho /= cfg.residual_balance_scale
            U *= cfg.residual_balance_scale
    return X2, k, converged, np.asarray(trace), rho


def solve(
    op: MeasurementOperator,
    y,
    Q_U: np.ndarray | None = None,
    Q_V: np.ndarray | None = None,
    e: float = 0.0,
    config: SolverConfig | None = None,
) -> RecoveryResult:
    """Recover a low-rank matrix from y ~ A(X) with optional weighting.

    Q_U and Q_V are the (symmetric, invertible) weighting operators; omitting
    both solves the standard nuclear-norm program.  e is the measurement-set
    radius (0 means the exact equality constraint).  The returned estimate is
    the feasible splitting iterate; `objective` is the weighted nuclear norm
    of the estimate.
    """
    cfg = config or SolverConfig()
    y = np.asarray(y, dtype=float)
    if y.shape != (op.p,):
        raise ValueError(f"y must have shape {(op.p,)}, got {y.shape}")
    if e < 0:
        raise ValueError("noise radius e must be >= 0")
    n = op.n
    diagnostics: dict = {}

    if Q_U is None and Q_V is None:
        Phi = op.flat
        back = None
    else:
        Q_U = as_matrix(Q_U, "Q_U") if Q_U is not None else np.eye(n)
        Q_V = as_matrix(Q_V, "Q_V") if Q_V is not None else np.eye(n)
        for name, Q in (("Q_U", Q_U), ("Q_V", Q_V)):
            if Q.shape != (n, n):
                raise ValueError(f"{name} must be {n} x {n}")
            cond = float(np.linalg.cond(Q))
            if not np.isfinite(cond) or cond > 1e12:
                raise ValueError(f"{name} is numerically singular (cond={cond:.3g})")
            if cond > 1e8:
                warnings.warn(f"{name} is ill-conditioned (cond={cond:.3g})")
            diagnostics[f"cond_{name}"] = cond
        Qui = np.linalg.inv(Q_U)
        Qvi = np.linalg.inv(Q_V)
        Phi = np.einsum(
            "ij,pjk,kl->pil", Qui, op.matrices, Qvi
        ).reshape(op.p, n * n)
        back = (Qui, Qvi)

    W, iters, converged, trace, rho = _splitting_loop(Phi, y, n, e, cfg)
    estimate = back[0] @ W @ back[1] if back is not None else W
    gap = max(0.0, float(np.linalg.norm(y - apply(op, estimate)) - e))
    diagnostics["rho_final"] = rho
    return RecoveryResult(
        estimate=estimate,
        iterations=iters,
        primal_residual=float(trace[-1, 0]) if len(trace) else 0.0,
        dual_residual=float(trace[-1, 1]) if len(trace) else 0.0,
        feasibility_gap=gap,
        converged=converged,
        objective=nuclear_norm(W),
        trace=trace,
        diagnostics=diagnostics,
    )

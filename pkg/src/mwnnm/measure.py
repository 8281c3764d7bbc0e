"""Gaussian measurement operators, forward/adjoint application, calibrated
noise injection, and an empirical isometry diagnostic.

An operator is a stack of p sensing matrices A_i; the forward map collects
the Frobenius inner products <X, A_i> and the adjoint is the y-weighted sum
of the A_i.  Operators are regenerable from (n, p, seed): the RNG is numpy's
default PCG64 generator, and Monte-Carlo drivers derive per-task streams with
SeedSequence([master_seed, ...]) so results do not depend on scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linalg import as_matrix


@dataclass(frozen=True, eq=False)
class MeasurementOperator:
    """p sensing matrices of shape (n, n), stored as a (p, n, n) stack."""

    n: int
    p: int
    seed: int
    matrices: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.matrices, dtype=float)
        if M.shape != (self.p, self.n, self.n):
            raise ValueError(f"matrices must have shape {(self.p, self.n, self.n)}")
        if not np.all(np.isfinite(M)):
            raise ValueError("sensing matrices contain non-finite entries")
        object.__setattr__(self, "matrices", M)

    @property
    def flat(self) -> np.ndarray:
        """(p, n*n) view used by solvers; row i is vec(A_i)."""
        return self.matrices.reshape(self.p, self.n * self.n)


def gaussian_operator(n: int, p: int, seed: int) -> MeasurementOperator:
    """i.i.d. N(0, 1/p) sensing matrices; deterministic per seed."""
    if n < 1 or p < 1:
        raise ValueError(f"n and p must be >= 1, got n={n}, p={p}")
    rng = np.random.default_rng(seed)
    mats = rng.normal(0.0, 1.0 / np.sqrt(p), size=(p, n, n))
    return MeasurementOperator(n=n, p=p, seed=int(seed), matrices=mats)


def apply(op: MeasurementOperator, X) -> np.ndarray:
    """Forward map: vector of Frobenius inner products with the A_i."""
    X = as_matrix(X, "X")
    if X.shape != (op.n, op.n):
        raise ValueError(f"X must have shape {(op.n, op.n)}, got {X.shape}")
    return op.flat @ X.ravel()


def adjoint(op: MeasurementOperator, y) -> np.ndarray:
    """Adjoint map: sum_i y_i A_i."""
    y = np.asarray(y, dtype=float)
    if y.shape != (op.p,):
        raise ValueError(f"y must have shape {(op.p,)}, got {y.shape}")
    return (op.flat.T @ y).reshape(op.n, op.n)


def add_noise(y, e: float, seed: int) -> tuple[np.ndarray, float]:
    """Perturb y by a Gaussian direction scaled to exact l2 radius e.

    Returns (y_noisy, actual_norm) with actual_norm == e; e == 0 leaves y
    unchanged.  Deterministic per seed.
    """
    y = np.asarray(y, dtype=float)
    if e < 0:
        raise ValueError("noise radius e must be >= 0")
    if e == 0.0:
        return y.copy(), 0.0
    rng = np.random.default_rng(seed)
    d = rng.standard_normal(y.shape)
    d *= e / np.linalg.norm(d)
    return y + d, float(e)


def empirical_rip_ratios(
    op: MeasurementOperator, r: int, draws: int = 200, seed: int = 0
) -> np.ndarray:
    """Ratios ||A(X)||_2 / ||X||_F over random rank-r test matrices.

    A sanity diagnostic, not an isometry certificate: concentration of the
    ratios near 1 indicates the operator is well-scaled on low-rank inputs.
    """
    if not 1 <= r <= op.n:
        raise ValueError("need 1 <= r <= n")
    rng = np.random.default_rng(seed)
    out = np.empty(draws)
    for k in range(draws):
        X = rng.standard_normal((op.n, r)) @ rng.standard_normal((r, op.n))
        out[k] = np.linalg.norm(apply(op, X)) / np.linalg.norm(X)
    return out


def save_operator(op: MeasurementOperator, path, include_payload: bool = False) -> None:
    """Serialize to a binary container: header (n, p, seed) plus an optional
    payload; without the payload the operator is regenerated from the seed on
    load."""
    path = Path(path)
    header = dict(n=np.int64(op.n), p=np.int64(op.p), seed=np.int64(op.seed))
    if include_payload:
        np.savez(path, **header, matrices=op.matrices)
    else:
        np.savez(path, **header)


def load_operator(path) -> MeasurementOperator:
    with np.load(Path(path)) as z:
        n, p, seed = int(z["n"]), int(z["p"]), int(z["seed"])
        if "matrices" in z.files:
            return MeasurementOperator(n=n, p=p, seed=seed, matrices=z["matrices"])
    return gaussian_operator(n, p, seed)


def spawn_seeds(master_seed: int, *keys: int, count: int = 2) -> list[int]:
    """Derive independent child seeds from a master seed and integer keys.

    The same (master_seed, keys) always yields the same children, regardless
    of call order elsewhere; used to give Monte-Carlo tasks their own streams.
    """
    ss = np.random.SeedSequence([int(master_seed), *[int(k) for k in keys]])
    return [int(c.generate_state(1)[0]) for c in ss.spawn(count)]

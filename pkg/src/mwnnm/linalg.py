"""Dense linear-algebra primitives: SVD, truncation, spectral norm, principal
angles, and cross-Gram-aligned basis construction.

All matrices are real float64 ndarrays.  Angles are stored in radians
internally; degree conversion happens at the CLI / file-format boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

# Orthonormality is validated an order above double-precision accumulation
# at the supported sizes (n <= ~500).
ORTHO_TOL = 1e-10


class DecompositionError(RuntimeError):
    """Raised when the SVD fails to converge on every available driver."""


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Validate and return a finite 2-D float64 array."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {M.shape}")
    if M.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


@dataclass(frozen=True, eq=False)
class Subspace:
    """A linear subspace of R^n represented by an orthonormal basis (n x k).

    The basis columns must be orthonormal to within 1e-10 entrywise on the
    Gram matrix.  Instances are treated as immutable values.
    """

    basis: np.ndarray

    def __post_init__(self):
        B = as_matrix(self.basis, "basis")
        if B.shape[1] > B.shape[0]:
            raise ValueError(
                f"basis has more columns ({B.shape[1]}) than rows ({B.shape[0]})"
            )
        gram = B.T @ B
        err = np.max(np.abs(gram - np.eye(B.shape[1])))
        if err > ORTHO_TOL:
            raise ValueError(f"basis columns not orthonormal (gram error {err:.2e})")
        object.__setattr__(self, "basis", B)

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        """Orthogonal projector onto the subspace."""
        return self.basis @ self.basis.T


@dataclass(frozen=True, eq=False)
class SvdTriple:
    """Full SVD M = U @ diag(S) @ V.T with S non-increasing."""

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.S) @ self.V.T


def svd(M) -> SvdTriple:
    """Economy SVD with a fallback LAPACK driver.

    numpy's default gesdd driver occasionally fails to converge; on failure
    the slower but more robust gesvd driver is tried before giving up.
    """
    M = as_matrix(M)
    try:
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError:
        try:
            U, s, Vt = scipy.linalg.svd(M, full_matrices=False, lapack_driver="gesvd")
        except Exception as exc:
            raise DecompositionError(f"SVD failed on both drivers: {exc}") from exc
    return SvdTriple(U=U, S=s, V=Vt.T)


def truncate(M, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Split M into its best rank-r approximation and the residual.

    Returns (X_r, X_rplus) with X_r + X_rplus == M exactly (the residual is
    formed by subtraction) and rank(X_r) <= r.
    """
    M = as_matrix(M)
    if not 1 <= r <= min(M.shape):
        raise ValueError(f"rank r={r} out of range for shape {M.shape}")
    t = svd(M)
    X_r = (t.U[:, :r] * t.S[:r]) @ t.V[:, :r].T
    return X_r, M - X_r


def spectral_norm(M) -> float:
    """Largest singular value of M."""
    M = as_matrix(M)
    return float(svd(M).S[0])


def nuclear_norm(M) -> float:
    """Sum of singular values of M."""
    M = as_matrix(M)
    return float(np.sum(svd(M).S))


def principal_angles(A: Subspace, B: Subspace) -> np.ndarray:
    """Principal angles between two subspaces, in radians, non-increasing.

    Requires dim(A) <= dim(B) and equal ambient dimensions.  The cosines of
    the angles are the singular values of A.T @ B; the returned vector is
    ordered so that the first entry is the largest angle.
    """
    if A.ambient_dim != B.ambient_dim:
        raise ValueError(
            f"ambient dimensions differ: {A.ambient_dim} vs {B.ambient_dim}"
        )
    if A.dim > B.dim:
        raise ValueError(f"dim(A)={A.dim} exceeds dim(B)={B.dim}")
    sv = svd(A.basis.T @ B.basis).S
    cosines = np.clip(sv, -1.0, 1.0)
    return np.arccos(cosines)[::-1].copy()  # singular values descend -> angles ascend


def orthonormal_complement(B: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of the orthogonal complement of range(B).

    B may have zero columns, in which case a full orthonormal basis of R^n is
    returned (the identity).
    """
    n = B.shape[0]
    k = B.shape[1]
    if k == 0:
        return np.eye(n)
    if k >= n:
        return np.zeros((n, 0))
    # null space of B.T, via SVD: deterministic, orthonormal to machine precision
    return scipy.linalg.null_space(B.T)


def _numerical_rank(s: np.ndarray) -> int:
    if s.size == 0 or s[0] <= 0.0:
        return 0
    return int(np.sum(s > s[0] * 1e-9))


def aligned_bases(
    X_r,
    prior_col: Subspace,
    prior_row: Subspace,
    r: int | None = None,
) -> tuple[Subspace, Subspace, Subspace, Subspace]:
    """Rotate bases so the cross-Gram matrices take the canonical form.

    Returns (U_r, V_r, U_tilde, V_tilde) with span(U_r) = span(X_r),
    span(U_tilde) = prior_col (same on the row side), and

        U_r.T @ U_tilde = [diag(cos theta_u) | 0],

    where theta_u are the principal angles in non-increasing order.  This is
    achieved by replacing U_r and U_tilde with the left/right singular bases
    of their cross-Gram matrix.

    If r is given, X_r must have numerical rank exactly r.
    """
    X_r = as_matrix(X_r, "X_r")
    t = svd(X_r)
    rank = _numerical_rank(t.S)
    if r is None:
        r = rank
    elif rank < r:
        raise ValueError(f"X_r has numerical rank {rank} < requested r={r}")
    if r == 0:
        raise ValueError("X_r is numerically zero")
    if prior_col.dim < r or prior_row.dim < r:
        raise ValueError("prior subspace dimension must be >= rank of X_r")
    if prior_col.ambient_dim != X_r.shape[0] or prior_row.ambient_dim != X_r.shape[1]:
        raise ValueError("ambient dimension mismatch between X_r and priors")

    def align_side(base: np.ndarray, prior: Subspace) -> tuple[Subspace, Subspace]:
        cross = base.T @ prior.basis  # r x r'
        c = svd(cross)
        # reverse so the first direction pairs with the largest angle
        Uc = c.U[:, ::-1]
        Vc = c.V[:, ::-1]
        new_base = Subspace(base @ Uc)
        rest = orthonormal_complement(Vc)  # within R^{r'}
        new_prior = Subspace(prior.basis @ np.column_stack([Vc, rest]))
        return new_base, new_prior

    U_r, U_t = align_side(t.U[:, :r], prior_col)
    V_r, V_t = align_side(t.V[:, :r], prior_row)
    return U_r, V_r, U_t, V_t

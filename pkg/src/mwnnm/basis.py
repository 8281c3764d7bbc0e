"""Weighting operators, structured orthonormal bases with their block-triangular
factors, closed-form block operator norms, and support projections.

The weighting operator for a prior subspace with orthonormal basis W and
per-direction weights w is

    Q = W diag(w) W.T + P_perp,

i.e. identity on the orthogonal complement and a per-direction shrinkage on
the prior.  For aligned bases (cross-Gram in canonical diagonal form) Q admits
an exact factorization Q = B O L B.T with B, O orthonormal and L block
upper-triangular; the blocks of L have closed-form operator norms used by the
recovery-condition constants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import Subspace, as_matrix, orthonormal_complement

# Weights strictly below this floor would make the weighting operator (and the
# triangular factor's diagonal) numerically singular.
EPS_WEIGHT = 1e-6

# sin(theta) below this is treated as an exact zero angle when constructing
# the coupled basis direction (the direction is then arbitrary and is filled
# from the deterministic orthonormal completion).
_SIN_TOL = 1e-8


class UnsupportedGeometryError(ValueError):
    """Raised when n < r + r': the four-block decomposition needs n - r - r' >= 0."""


def _check_weight_vector(w, name: str, size: int | None = None) -> np.ndarray:
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if w.ndim != 1:
        raise ValueError(f"{name} must be a vector")
    if size is not None and w.size != size:
        raise ValueError(f"{name} must have length {size}, got {w.size}")
    if w.size and (np.min(w) < EPS_WEIGHT or np.max(w) > 1.0):
        raise ValueError(f"{name} entries must lie in [{EPS_WEIGHT}, 1]")
    return w


@dataclass(frozen=True, eq=False)
class WeightSpec:
    """Per-direction weights for the column side (lambda1, lambda2) and row
    side (gamma1, gamma2).

    lambda1/gamma1 weight the r directions paired with the principal angles
    (non-increasing, matching the non-increasing angle convention);
    lambda2/gamma2 weight the remaining r' - r prior directions.
    """

    lambda1: np.ndarray
    lambda2: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray

    def __post_init__(self):
        l1 = _check_weight_vector(self.lambda1, "lambda1")
        g1 = _check_weight_vector(self.gamma1, "gamma1", size=l1.size)
        l2 = _check_weight_vector(self.lambda2, "lambda2")
        g2 = _check_weight_vector(self.gamma2, "gamma2", size=l2.size)
        if l1.size < 1:
            raise ValueError("lambda1/gamma1 must have at least one entry")
        for v, name in [(l1, "lambda1"), (g1, "gamma1")]:
            if np.any(np.diff(v) > 1e-12):
                raise ValueError(f"{name} must be non-increasing")
        object.__setattr__(self, "lambda1", l1)
        object.__setattr__(self, "lambda2", l2)
        object.__setattr__(self, "gamma1", g1)
        object.__setattr__(self, "gamma2", g2)

    @property
    def r(self) -> int:
        return self.lambda1.size

    @property
    def r_prime(self) -> int:
        return self.lambda1.size + self.lambda2.size

    @property
    def diag_u(self) -> np.ndarray:
        """Full column-side weight vector of length r'."""
        return np.concatenate([self.lambda1, self.lambda2])

    @property
    def diag_v(self) -> np.ndarray:
        return np.concatenate([self.gamma1, self.gamma2])

    @classmethod
    def ones(cls, r: int, r_prime: int) -> "WeightSpec":
        """All-ones weights: the weighting operators reduce to the identity."""
        return cls(np.ones(r), np.ones(r_prime - r), np.ones(r), np.ones(r_prime - r))

    @classmethod
    def uniform(cls, lam: float, gam: float, r: int, r_prime: int) -> "WeightSpec":
        """A single scalar weight per side, applied to all r' prior directions."""
        return cls(
            np.full(r, lam), np.full(r_prime - r, lam),
            np.full(r, gam), np.full(r_prime - r, gam),
        )


def build_Q(prior: Subspace, weights) -> np.ndarray:
    """Weighting operator: per-direction shrinkage on the prior subspace,
    identity on its orthogonal complement.

    weights must be strictly positive (a zero weight makes Q singular) and at
    most 1.  The result is symmetric with eigenvalues {weights} union {1}.
    """
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    if w.size != prior.dim:
        raise ValueError(f"expected {prior.dim} weights, got {w.size}")
    if np.any(w <= 0.0):
        raise ValueError("weights must be strictly positive (zero makes Q singular)")
    if np.any(w > 1.0):
        raise ValueError("weights must be at most 1")
    B = prior.basis
    n = prior.ambient_dim
    # Q = B diag(w) B.T + (I - B B.T) = I + B diag(w - 1) B.T
    return np.eye(n) + (B * (w - 1.0)) @ B.T


def invert_Q(prior: Subspace, weights) -> np.ndarray:
    """Exact inverse of build_Q(prior, weights) via the same structure."""
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    if np.any(w <= 0.0):
        raise ValueError("weights must be strictly positive")
    B = prior.basis
    n = prior.ambient_dim
    return np.eye(n) + (B * (1.0 / w - 1.0)) @ B.T


def _mgs(col: np.ndarray, cols: list[np.ndarray]) -> np.ndarray:
    """Two-pass modified Gram-Schmidt of col against an orthonormal set."""
    v = col.copy()
    for _ in range(2):
        for b in cols:
            v -= (b @ v) * b
    nrm = np.linalg.norm(v)
    if nrm < 1e-8:
        raise ValueError("degenerate column during basis construction")
    return v / nrm


@dataclass(frozen=True, eq=False)
class StructuredBases:
    """Orthonormal bases B_L, B_R and O_L, O_R together with block
    upper-triangular factors L, R such that

        Q_U = B_L @ O_L @ L @ B_L.T      and the row-side analogue.

    Block sizes along the diagonal are [r, r, r' - r, n - r - r'].
    """

    B_L: np.ndarray
    B_R: np.ndarray
    O_L: np.ndarray
    O_R: np.ndarray
    L: np.ndarray
    R: np.ndarray
    Q_U: np.ndarray
    Q_V: np.ndarray
    theta_u: np.ndarray
    theta_v: np.ndarray
    weights: WeightSpec
    n: int
    r: int
    r_prime: int


def _aligned_angles(base: Subspace, prior: Subspace, tol: float = 1e-8) -> np.ndarray:
    """Extract angles from an aligned cross-Gram matrix, validating its shape."""
    G = base.basis.T @ prior.basis
    r = base.dim
    diag = np.clip(np.diag(G[:, :r]), 0.0, 1.0)
    off = G[:, :r] - np.diag(np.diag(G[:, :r]))
    if np.max(np.abs(off)) > tol or (G.shape[1] > r and np.max(np.abs(G[:, r:])) > tol):
        raise ValueError(
            "bases are not aligned: cross-Gram is not [diag(cos theta) | 0]; "
            "run aligned_bases first"
        )
    return np.arccos(diag)


def _side_factors(base: Subspace, prior: Subspace, w1: np.ndarray, w2: np.ndarray):
    """B, O, L and angles for one side.  base (n x r) and prior (n x r') must
    be aligned so base.T @ prior.basis = [diag(cos theta) | 0]."""
    n, r = base.ambient_dim, base.dim
    rp = prior.dim
    theta = _aligned_angles(base, prior)
    c, s = np.cos(theta), np.sin(theta)

    cols: list[np.ndarray] = [base.basis[:, i] for i in range(r)]
    # coupled directions: prior_i = cos(t_i) base_i - sin(t_i) coupled_i
    coupled: list[np.ndarray | None] = []
    for i in range(r):
        if s[i] > _SIN_TOL:
            v = (c[i] * base.basis[:, i] - prior.basis[:, i]) / s[i]
            coupled.append(_mgs(v, cols))
            cols.append(coupled[-1])
        else:
            coupled.append(None)  # zero angle: direction free, filled below
    extra = [-prior.basis[:, r + j] for j in range(rp - r)]
    extra = [_mgs(v, cols) for v in extra]
    cols.extend(extra)

    known = np.column_stack(cols) if cols else np.zeros((n, 0))
    fill = orthonormal_complement(known)
    f = 0
    for i in range(r):
        if coupled[i] is None:
            coupled[i] = fill[:, f]
            f += 1
    B = np.column_stack(
        [base.basis] + [coupled[i] for i in range(r)] + extra + [fill[:, f:]]
    )

    delta = np.sqrt(w1**2 * c**2 + s**2)
    a = (w1 * c**2 + s**2) / delta
    b = (1.0 - w1) * s * c / delta
    O = np.eye(n)
    L = np.eye(n)
    for i in range(r):
        O[np.ix_([i, r + i], [i, r + i])] = [[a[i], -b[i]], [b[i], a[i]]]
        L[i, i] = delta[i]
        L[i, r + i] = (1.0 - w1[i] ** 2) * s[i] * c[i] / delta[i]
        L[r + i, r + i] = w1[i] / delta[i]
    L[range(2 * r, r + rp), range(2 * r, r + rp)] = w2
    return B, O, L, theta


def build_structured_bases(
    U_r: Subspace,
    V_r: Subspace,
    prior_col: Subspace,
    prior_row: Subspace,
    weights: WeightSpec,
) -> StructuredBases:
    """Construct the structured bases and triangular factors for both sides.

    Inputs must be mutually aligned (see linalg.aligned_bases): the cross-Gram
    of each (truth, prior) pair must already be in canonical diagonal form.
    Requires n >= r + r' so all four diagonal blocks have non-negative size.
    """
    n, r = U_r.ambient_dim, U_r.dim
    rp = prior_col.dim
    if weights.r != r or weights.r_prime != rp:
        raise ValueError("weight spec shape does not match subspace dimensions")
    if V_r.dim != r or prior_row.dim != rp:
        raise ValueError("column and row sides must have matching (r, r')")
    if n < r + rp:
        raise UnsupportedGeometryError(
            f"need n >= r + r' for the four-block decomposition, got n={n}, "
            f"r={r}, r'={rp}"
        )
    B_L, O_L, L, theta_u = _side_factors(U_r, prior_col, weights.lambda1, weights.lambda2)
    B_R, O_R, R, theta_v = _side_factors(V_r, prior_row, weights.gamma1, weights.gamma2)
    return StructuredBases(
        B_L=B_L, B_R=B_R, O_L=O_L, O_R=O_R, L=L, R=R,
        Q_U=build_Q(prior_col, weights.diag_u),
        Q_V=build_Q(prior_row, weights.diag_v),
        theta_u=theta_u, theta_v=theta_v, weights=weights,
        n=n, r=r, r_prime=rp,
    )


@dataclass(frozen=True)
class BlockNorms:
    """Closed-form operator norms of the triangular factor's sub-blocks.

    L11: norm of the leading diagonal block (= the delta diagonal).
    L12: norm of the coupling block.
    I_minus_L22: norm of I - L22.
    L11_L12_row: norm of the row concatenation [L11 L12].
    Lprime: norm of the residual factor (coupling column stacked with the
        deviation-from-identity diagonal blocks).
    block_diag_norm: norm of diag(I - L22, I - Lambda2).
    """

    L11: float
    L12: float
    I_minus_L22: float
    L11_L12_row: float
    Lprime: float
    block_diag_norm: float


def triangular_block_norms(
    theta, lambda1, lambda2, d1_variant: str = "assembled"
) -> BlockNorms:
    """Evaluate the closed-form block norms for one side.

    theta: principal angles (radians), lambda1: the r paired weights,
    lambda2: the remaining r' - r weights (may be empty).

    d1_variant selects the formula for the squared norm of the stacked
    coupling column inside Lprime:

    - "assembled" (default): the exact norm of the assembled blocks, whose
      shrinkage factor is (1 - lambda^2)^2.
    - "alt": an alternative form with (1 - lambda)^2 in the coupling term,
      exposed for comparison only; it underestimates the exact norm.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    lam1 = np.atleast_1d(np.asarray(lambda1, dtype=float))
    lam2 = np.atleast_1d(np.asarray(lambda2, dtype=float)) if np.size(lambda2) else np.zeros(0)
    if theta.size != lam1.size:
        raise ValueError("theta and lambda1 must have equal length")
    if np.any(theta < -1e-12) or np.any(theta > np.pi / 2 + 1e-12):
        raise ValueError("angles must lie in [0, pi/2] radians")
    if d1_variant not in ("assembled", "alt"):
        raise ValueError(f"unknown d1_variant {d1_variant!r}")

    c2 = np.cos(theta) ** 2
    s2 = np.sin(theta) ** 2
    sc = np.sin(theta) * np.cos(theta)
    delta2 = lam1**2 * c2 + s2
    delta = np.sqrt(delta2)

    l11 = float(np.max(delta))
    l12 = float(np.max(np.abs(1.0 - lam1**2) * sc / delta))
    i_minus_l22 = float(np.max(1.0 - lam1 / delta))
    row = float(np.max(np.sqrt((lam1**4 * c2 + s2) / delta2)))

    shrink = (1.0 - lam1**2) ** 2 if d1_variant == "assembled" else (1.0 - lam1) ** 2
    d1 = (1.0 - lam1 / delta) ** 2 + shrink * sc**2 / delta2
    d2 = (1.0 - lam2) ** 2 if lam2.size else np.zeros(1)
    lprime = float(np.sqrt(max(np.max(d1), np.max(d2))))
    block_diag = float(max(np.max(1.0 - lam1 / delta), np.max(1.0 - lam2) if lam2.size else 0.0))

    return BlockNorms(
        L11=l11, L12=l12, I_minus_L22=i_minus_l22,
        L11_L12_row=row, Lprime=lprime, block_diag_norm=block_diag,
    )


@dataclass(frozen=True, eq=False)
class SupportProjector:
    """Projections onto the support of a rank-r matrix with column space
    span(U_r) and row space span(V_r), and onto its orthogonal complement."""

    U_r: Subspace
    V_r: Subspace

    def __post_init__(self):
        if self.U_r.ambient_dim != self.V_r.ambient_dim:
            raise ValueError("column and row subspaces must share the ambient dim")
        object.__setattr__(self, "_P_U", self.U_r.projector())
        object.__setattr__(self, "_P_V", self.V_r.projector())


def project_T(Z, S: SupportProjector) -> np.ndarray:
    """P_T(Z) = P_U Z + Z P_V - P_U Z P_V."""
    Z = as_matrix(Z, "Z")
    P_U, P_V = S._P_U, S._P_V
    PUZ = P_U @ Z
    return PUZ + Z @ P_V - PUZ @ P_V


def project_Tperp(Z, S: SupportProjector) -> np.ndarray:
    """P_Tperp(Z) = (I - P_U) Z (I - P_V); complements project_T exactly."""
    Z = as_matrix(Z, "Z")
    P_U, P_V = S._P_U, S._P_V
    return Z - (P_U @ Z + Z @ P_V - P_U @ (Z @ P_V))


def project_Ttilde(Z, bases: StructuredBases) -> np.ndarray:
    """Projection onto the auxiliary subspace inside T-perp: in B-coordinates
    the first block row, first block column and the trailing corner block are
    zeroed; block sizes are [r, r, r'-r, n-r-r']."""
    Z = as_matrix(Z, "Z")
    n, r, rp = bases.n, bases.r, bases.r_prime
    Zb = bases.B_L.T @ Z @ bases.B_R
    mask = np.ones((n, n))
    mask[:r, :] = 0.0
    mask[:, :r] = 0.0
    mask[r + rp:, r + rp:] = 0.0
    return bases.B_L @ (Zb * mask) @ bases.B_R.T

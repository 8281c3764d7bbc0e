"""Recovery-condition constants and bounds for weighted nuclear-norm recovery,
plus derivative-free weight optimization.

Two regimes are covered:

- single weight: one scalar weight per side, constants (alpha1, alpha2)
  depending only on the largest principal angle of each side, with the bound
  (0.9 - max(a1, a2)/sqrt(30)) / (0.9 + max(a1, a2)/sqrt(30));

- multiple weights: one weight per prior direction, constants (alpha3,
  alpha4) depending on the full angle vectors, with the bound
  (1 - s) / (1 + s),  s = sqrt((a3^2 + a4^2)/15).

The constants 15 = (30r)/(2r) and 30r come from the analysis choice of
partitioning the residual spectrum into blocks of 30r modes while requiring
the measurement operator to be a near-isometry on matrices of rank up to 32r.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .basis import EPS_WEIGHT, WeightSpec, triangular_block_norms

# residual-spectrum block size per unit rank in the recovery analysis
TAIL_BLOCK_PER_RANK = 30
# ratio 2r / (30 r) entering both bounds
_RATIO = 2.0 / TAIL_BLOCK_PER_RANK  # = 1/15


class InfeasibleBoundError(ValueError):
    """The error-constant denominator is non-positive at the supplied delta."""


@dataclass(frozen=True, eq=False)
class AnglePair:
    """Principal-angle vectors (theta_u, theta_v) in radians, each
    non-increasing with entries in [0, pi/2]."""

    theta_u: np.ndarray
    theta_v: np.ndarray

    def __post_init__(self):
        tu = np.atleast_1d(np.asarray(self.theta_u, dtype=float))
        tv = np.atleast_1d(np.asarray(self.theta_v, dtype=float))
        if tu.size != tv.size or tu.size == 0:
            raise ValueError("theta_u and theta_v must be non-empty, equal length")
        for t, name in [(tu, "theta_u"), (tv, "theta_v")]:
            if np.any(t < -1e-12) or np.any(t > np.pi / 2 + 1e-12):
                raise ValueError(f"{name} entries must lie in [0, 90] degrees")
            if np.any(np.diff(t) > 1e-12):
                raise ValueError(f"{name} must be non-increasing")
        object.__setattr__(self, "theta_u", np.clip(tu, 0.0, np.pi / 2))
        object.__setattr__(self, "theta_v", np.clip(tv, 0.0, np.pi / 2))

    @property
    def r(self) -> int:
        return self.theta_u.size

    @classmethod
    def from_degrees(cls, theta_u, theta_v, sort: bool = True) -> "AnglePair":
        """Build from degree vectors; by default sorts each non-increasing
        (the canonical ordering that pairs the largest angle with the first
        weight)."""
        tu = np.atleast_1d(np.asarray(theta_u, dtype=float))
        tv = np.atleast_1d(np.asarray(theta_v, dtype=float))
        if sort:
            tu = np.sort(tu)[::-1]
            tv = np.sort(tv)[::-1]
        return cls(np.deg2rad(tu), np.deg2rad(tv))

    def to_degrees(self) -> tuple[np.ndarray, np.ndarray]:
        return np.rad2deg(self.theta_u), np.rad2deg(self.theta_v)


def _check_angle(theta: float, name: str) -> float:
    theta = float(theta)
    if not 0.0 <= theta <= np.pi / 2 + 1e-12:
        raise ValueError(f"{name} must lie in [0, pi/2] radians, got {theta}")
    return min(theta, np.pi / 2)


def _check_scalar_weight(w: float, name: str) -> float:
    w = float(w)
    if not 0.0 < w <= 1.0:
        raise ValueError(f"{name} must lie in (0, 1], got {w}")
    return w


def alpha12(theta_u_max: float, theta_v_max: float, lam: float, gam: float) -> tuple[float, float]:
    """Single-weight constants from the largest principal angle of each side.

    alpha1 sums, over the two sides, sqrt((w^4 c^2 + s^2)/(w^2 c^2 + s^2));
    alpha2 sums sqrt(2 (1 - w^2) s^2 / (w^2 c^2 + s^2)).
    """
    theta_u_max = _check_angle(theta_u_max, "theta_u_max")
    theta_v_max = _check_angle(theta_v_max, "theta_v_max")
    lam = _check_scalar_weight(lam, "lam")
    gam = _check_scalar_weight(gam, "gam")
    a1 = a2 = 0.0
    for th, w in ((theta_u_max, lam), (theta_v_max, gam)):
        c2, s2 = np.cos(th) ** 2, np.sin(th) ** 2
        den = w**2 * c2 + s2
        a1 += np.sqrt((w**4 * c2 + s2) / den)
        a2 += np.sqrt(2.0 * (1.0 - w**2) * s2 / den)
    return float(a1), float(a2)


def alpha34(
    angles: AnglePair, weights: WeightSpec, d1_variant: str = "assembled"
) -> tuple[float, float]:
    """Multi-weight constants from the full angle vectors.

    alpha3 sums, over the two sides, the largest per-direction value of
    sqrt((w^4 c^2 + s^2)/(w^2 c^2 + s^2)); alpha4 sums the two residual-factor
    norms (see basis.triangular_block_norms).  Always alpha3 <= 2.
    """
    if weights.r != angles.r:
        raise ValueError(
            f"weights pair {weights.r} directions but angles have {angles.r}"
        )
    a3 = 0.0
    for th, w1 in ((angles.theta_u, weights.lambda1), (angles.theta_v, weights.gamma1)):
        c2, s2 = np.cos(th) ** 2, np.sin(th) ** 2
        a3 += np.max(np.sqrt((w1**4 * c2 + s2) / (w1**2 * c2 + s2)))
    lp_u = triangular_block_norms(angles.theta_u, weights.lambda1, weights.lambda2, d1_variant).Lprime
    lp_v = triangular_block_norms(angles.theta_v, weights.gamma1, weights.gamma2, d1_variant).Lprime
    return float(a3), float(lp_u + lp_v)


def rip_bound_multi(alpha3: float, alpha4: float) -> float:
    """Isometry-constant bound for the multi-weight program; may be <= 0 in
    the infeasible regime and is reported as-is."""
    if alpha3 < 0 or alpha4 < 0:
        raise ValueError("alpha constants must be non-negative")
    s = np.sqrt(_RATIO * (alpha3**2 + alpha4**2))
    return float((1.0 - s) / (1.0 + s))


def rip_bound_single(alpha1: float, alpha2: float) -> float:
    """Isometry-constant bound for the single-weight program."""
    if alpha1 < 0 or alpha2 < 0:
        raise ValueError("alpha constants must be non-negative")
    m = max(alpha1, alpha2) / np.sqrt(30.0)
    return float((0.9 - m) / (0.9 + m))


def error_constants(delta: float, alpha3: float, alpha4: float, r: int) -> tuple[float, float]:
    """Error-bound constants (C0, C1) at a given operator isometry constant.

    The recovery error obeys ||Xhat - X||_F <= C0 ||tail||_* + C1 e whenever
    the denominator 1 - ((1+delta)/(1-delta)) sqrt((a3^2+a4^2)/15) is
    positive; otherwise InfeasibleBoundError is raised.
    """
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    if r < 1:
        raise ValueError("r must be >= 1")
    s = np.sqrt(_RATIO * (alpha3**2 + alpha4**2))
    denom = 1.0 - (1.0 + delta) / (1.0 - delta) * s
    if denom <= 0.0:
        raise InfeasibleBoundError(
            f"denominator {denom:.6g} <= 0 at delta={delta:.6g} "
            f"(alpha3={alpha3:.6g}, alpha4={alpha4:.6g})"
        )
    c0 = 4.0 / ((1.0 - delta) * np.sqrt(TAIL_BLOCK_PER_RANK * r)) / denom
    c1 = 2.0 / (1.0 - delta) * (1.0 + s) / denom
    return float(c0), float(c1)


@dataclass(frozen=True)
class SingleWeightReport:
    alpha1: float
    alpha2: float
    delta_single: float


def single_weight_report(
    theta_u_max: float, theta_v_max: float, lam: float, gam: float
) -> SingleWeightReport:
    a1, a2 = alpha12(theta_u_max, theta_v_max, lam, gam)
    return SingleWeightReport(a1, a2, rip_bound_single(a1, a2))


@dataclass(frozen=True)
class BoundReport:
    """Multi-weight bound summary.

    C0/C1 are evaluated at eval_delta and present only when the denominator
    is positive there (feasible); eval_delta defaults to 0 (best-case
    operator).
    """

    alpha3: float
    alpha4: float
    delta_multi: float
    r: int
    eval_delta: float
    feasible: bool
    C0: float | None
    C1: float | None

    def to_dict(self) -> dict:
        return {
            "alpha3": self.alpha3,
            "alpha4": self.alpha4,
            "delta_multi": self.delta_multi,
            "r": self.r,
            "eval_delta": self.eval_delta,
            "feasible": self.feasible,
            "C0": self.C0,
            "C1": self.C1,
        }


def bound_report(
    angles: AnglePair,
    weights: WeightSpec,
    eval_delta: float = 0.0,
    d1_variant: str = "assembled",
) -> BoundReport:
    a3, a4 = alpha34(angles, weights, d1_variant)
    delta = rip_bound_multi(a3, a4)
    try:
        c0, c1 = error_constants(eval_delta, a3, a4, weights.r)
        feasible = True
    except InfeasibleBoundError:
        c0 = c1 = None
        feasible = False
    return BoundReport(
        alpha3=a3, alpha4=a4, delta_multi=delta, r=weights.r,
        eval_delta=eval_delta, feasible=feasible, C0=c0, C1=c1,
    )


def _project_multi(x: np.ndarray, r: int, rp: int) -> WeightSpec:
    """Clip to [EPS_WEIGHT, 1] and sort the angle-paired groups non-increasing."""
    x = np.clip(x, EPS_WEIGHT, 1.0)
    l1 = np.sort(x[:r])[::-1]
    l2 = x[r:rp]
    g1 = np.sort(x[rp:rp + r])[::-1]
    g2 = x[rp + r:]
    return WeightSpec(l1, l2, g1, g2)


def _project_uniform(x: np.ndarray, r: int, rp: int) -> WeightSpec:
    lam, gam = np.clip(x, EPS_WEIGHT, 1.0)
    return WeightSpec.uniform(float(lam), float(gam), r, rp)


def optimize_weights(
    angles: AnglePair,
    r: int | None = None,
    r_prime: int | None = None,
    budget: int = 10_000,
    seed: int = 0,
    mode: str = "multi",
    d1_variant: str = "assembled",
) -> tuple[WeightSpec, BoundReport]:
    """Search for weights minimizing sqrt(alpha3^2 + alpha4^2), equivalently
    maximizing the multi-weight bound (the map s -> (1-s)/(1+s) is strictly
    decreasing).

    mode "multi" searches one weight per prior direction (2 r' variables);
    mode "uniform" searches a single scalar weight per side (2 variables).

    Derivative-free simplex descent restarted from 8 deterministic seeds
    (all-ones, the weight floor, the best shared weight on a 1-D grid, and 5
    seeded random points); every evaluated point is projected onto the box
    [EPS_WEIGHT, 1] with the angle-paired groups sorted non-increasing.  A
    final cyclic coordinate polish refines the best point.  The result is
    never worse than the all-ones weights or the best 1-D grid point, and is
    deterministic for a fixed seed.
    """
    if r is None:
        r = angles.r
    if r != angles.r:
        raise ValueError(f"r={r} does not match angles.r={angles.r}")
    if r_prime is None:
        r_prime = r
    if r_prime < r:
        raise ValueError("r_prime must be >= r")
    if budget < 1000:
        raise ValueError("budget must be >= 1000")
    if mode not in ("multi", "uniform"):
        raise ValueError(f"unknown mode {mode!r}")

    rp = r_prime
    project = _project_multi if mode == "multi" else _project_uniform
    dim = 2 * rp if mode == "multi" else 2

    def objective(x: np.ndarray) -> float:
        spec = project(np.asarray(x, dtype=float), r, rp)
        a3, a4 = alpha34(angles, spec, d1_variant)
        return float(np.hypot(a3, a4))

    # fallback (a): all-ones; fallback (b): best shared scalar weight on a grid
    grid = np.linspace(EPS_WEIGHT, 1.0, 256)
    grid_vals = [
        np.hypot(*alpha34(angles, WeightSpec.uniform(g, g, r, rp), d1_variant))
        for g in grid
    ]
    g_best = float(grid[int(np.argmin(grid_vals))])

    rng = np.random.default_rng(seed)
    starts = [
        np.ones(dim),
        np.full(dim, EPS_WEIGHT),
        np.full(dim, g_best),
    ]
    starts += [rng.uniform(0.05, 1.0, dim) for _ in range(5)]

    best_x = starts[0]
    best_f = objective(best_x)
    for x0 in starts[1:]:
        f0 = objective(x0)
        if f0 < best_f:
            best_x, best_f = x0, f0

    maxfev = max(50, int(0.85 * budget) // len(starts))
    for x0 in starts:
        res = minimize(
            objective, x0, method="Nelder-Mead",
            options={"maxfev": maxfev, "xatol": 1e-9, "fatol": 1e-12},
        )
        if res.fun < best_f:
            best_x, best_f = res.x, float(res.fun)

    # cyclic coordinate polish (golden-section per coordinate, two passes)
    x = np.clip(np.asarray(best_x, dtype=float), EPS_WEIGHT, 1.0)
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    for _ in range(2):
        for j in range(dim):
            lo, hi = EPS_WEIGHT, 1.0
            xl = x.copy(); xl[j] = hi - invphi * (hi - lo)
            xh = x.copy(); xh[j] = lo + invphi * (hi - lo)
            fl, fh = objective(xl), objective(xh)
            for _ in range(30):
                if fl < fh:
                    hi = xh[j]
                    xh = xl
                    fh = fl
                    xl = x.copy(); xl[j] = hi - invphi * (hi - lo)
                    fl = objective(xl)
                else:
                    lo = xl[j]
                    xl = xh
                    fl = fh
                    xh = x.copy(); xh[j] = lo + invphi * (hi - lo)
                    fh = objective(xh)
            cand = x.copy(); cand[j] = 0.5 * (lo + hi)
            fc = objective(cand)
            if fc < best_f:
                best_f = fc
                x = cand
                best_x = cand

    spec = project(np.asarray(best_x, dtype=float), r, rp)
    return spec, bound_report(angles, spec, d1_variant=d1_variant)

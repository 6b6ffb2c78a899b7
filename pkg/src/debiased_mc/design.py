"""Truncation-law design tools.

Given rate information about a convergent sequence, these functions produce
variance-minimizing survival profiles: the general profile from level
moments, the closed-form optimum for geometrically convergent sequences
under a mean-level budget, the mean-squared-error price of debiasing, and
the budget optimization for exponential-cost levels.

All functions are pure; inputs are immutable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDesignError, InfeasibleBudgetError, InfeasibleLawError

__all__ = [
    "MomentSequence",
    "SurvivalProfile",
    "GeometricDesign",
    "CostDesign",
    "optimal_survival_profile",
    "toy_variance",
    "optimal_geometric_design",
    "mse_inflation_factor",
    "cost_constrained_design",
]


@dataclass(frozen=True)
class MomentSequence:
    """Per-level means and variances of a sequence, plus its limit mean.

    ``mu[n]`` and ``sigma2[n]`` describe level n; midpoints
    ``(mu[n] + mu[n-1]) / 2`` and backward differences are derived.
    """

    mu: tuple
    sigma2: tuple
    limit: float

    def __post_init__(self):
        mu = tuple(float(x) for x in self.mu)
        sigma2 = tuple(float(x) for x in self.sigma2)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma2", sigma2)
        if len(mu) != len(sigma2):
            raise ValueError("sigma2: must have the same length as mu")
        if len(mu) < 2:
            raise ValueError("mu: need at least 2 levels")
        if any(s < 0 for s in sigma2):
            raise ValueError("sigma2: variances must be >= 0")

    def design_weights(self) -> np.ndarray:
        """Per-increment weights sqrt(|2 (limit - midpoint_n) dmu_n - dsigma2_n|)
        for n = 1 .. len-1; survival should be proportional to these."""
        mu = np.asarray(self.mu)
        sigma2 = np.asarray(self.sigma2)
        dmu = np.diff(mu)
        dsig2 = np.diff(sigma2)
        mid = 0.5 * (mu[1:] + mu[:-1])
        return np.sqrt(np.abs(2.0 * (self.limit - mid) * dmu - dsig2))


@dataclass(frozen=True)
class SurvivalProfile:
    """Designed survival table (index n = 0 .. K, with entry 0 fixed at 1).

    ``achieved_budget`` is the realized sum of survival values over n >= 1,
    which may fall short of the requested budget after clamping to one and
    enforcing monotonicity (clamping is not re-normalized away).
    """

    survival: np.ndarray
    achieved_budget: float


def optimal_survival_profile(moments: MomentSequence, budget: float) -> SurvivalProfile:
    """Variance-optimal survival profile under the mean-level constraint
    ``sum_n Q(n) = budget`` (E[N] for a non-negative integer level).

    Survival values are proportional to the moment design weights,
    normalized to the budget, then clamped to <= 1 and made non-increasing
    by a running minimum. The profile is advisory: entries may be zero
    where the sequence is locally flat.
    """
    if budget <= 0:
        raise InfeasibleBudgetError(f"budget: must be > 0, got {budget}")
    weights = moments.design_weights()
    total = weights.sum()
    if total == 0.0:
        raise DegenerateDesignError(
            "mu: all design weights vanish (constant sequence); no profile exists"
        )
    q = budget * weights / total
    q = np.minimum(q, 1.0)
    q = np.minimum.accumulate(q)
    survival = np.concatenate([[1.0], q])
    return SurvivalProfile(survival=survival, achieved_budget=float(q.sum()))


def toy_variance(a: float, r: float, s: float, q: float) -> float:
    """Exact debiased-estimator variance for the geometric sequence
    ``X_n = b + a r**n`` under survival ``Q(n) = q**(n-s)`` with shift s:

        a**2 * |r|**(2s) * (1 - q) / (q - r**2),  feasible for r**2 < q < 1.

    ``s`` may be fractional (closed-form design analysis treats it as real).
    """
    if not 0.0 < abs(r) < 1.0:
        raise ValueError(f"r: must satisfy 0 < |r| < 1, got {r}")
    if s < 0:
        raise ValueError(f"s: must be >= 0, got {s}")
    if not (r * r < q < 1.0):
        raise InfeasibleLawError(
            f"q: must satisfy r**2 < q < 1 for finite variance, got q = {q} with "
            f"r**2 = {r * r}"
        )
    return a * a * abs(r) ** (2.0 * s) * (1.0 - q) / (q - r * r)


def mse_inflation_factor(r: float) -> float:
    """Multiplicative MSE price of debiasing a geometric sequence at matched
    expected level: ``|r| ** (-2|r| / (1 - |r|))``."""
    if not 0.0 < abs(r) < 1.0:
        raise ValueError(f"r: must satisfy 0 < |r| < 1, got {r}")
    ar = abs(r)
    return ar ** (-2.0 * ar / (1.0 - ar))


@dataclass(frozen=True)
class GeometricDesign:
    """Optimal shifted-geometric law for a geometric sequence.

    ``s_real`` is the unconstrained-optimum shift; ``s`` is the integer
    choice (both neighbors evaluated at their budget-consistent tail ratios,
    smaller variance kept) and ``q`` its tail ratio. ``min_variance`` is the
    real-shift closed-form optimum ``a**2 |r|**(2 s_real - 1)``;
    ``rounded_variance`` is the variance at ``(s, q)``.
    """

    q: float
    s: int
    s_real: float
    min_variance: float
    rounded_variance: float
    inflation: float


def optimal_geometric_design(r: float, mean_level_budget: float, a: float = 1.0) -> GeometricDesign:
    """Minimize the toy variance over (tail ratio, shift) subject to the
    mean-level budget ``E[N] = shift + q/(1-q) = mean_level_budget``.

    The optimum has tail ratio |r| and real shift
    ``mean_level_budget - |r| / (1 - |r|)``.
    """
    if not 0.0 < abs(r) < 1.0:
        raise ValueError(f"r: must satisfy 0 < |r| < 1, got {r}")
    ar = abs(r)
    s_real = mean_level_budget - ar / (1.0 - ar)
    if s_real <= 0.0:
        raise InfeasibleBudgetError(
            f"mean_level_budget: must exceed |r|/(1-|r|) = {ar / (1.0 - ar):.6g} "
            f"for a non-negative shift, got {mean_level_budget}"
        )
    candidates = []
    for s_int in {math.floor(s_real), math.ceil(s_real)}:
        if s_int < 0:
            continue
        rest = mean_level_budget - s_int
        if rest <= 0:
            continue
        q_int = rest / (1.0 + rest)  # solves q/(1-q) = rest
        if not (r * r < q_int < 1.0):
            continue
        candidates.append((toy_variance(a, r, s_int, q_int), s_int, q_int))
    if not candidates:
        raise InfeasibleBudgetError(
            f"mean_level_budget: no feasible integer shift near {s_real:.3f}"
        )
    rounded_variance, s_int, q_int = min(candidates)
    return GeometricDesign(
        q=q_int,
        s=s_int,
        s_real=s_real,
        min_variance=a * a * ar ** (2.0 * s_real - 1.0),
        rounded_variance=rounded_variance,
        inflation=mse_inflation_factor(r),
    )


@dataclass(frozen=True)
class CostDesign:
    """Budget-constrained law for exponential-cost levels."""

    s: int
    q: float
    objective: float


def cost_constrained_design(r: float, budget: float) -> CostDesign:
    """Minimize the geometric-sequence variance subject to the expected
    evaluation budget ``E[2**N] = 2**s (1-q)/(1-2q) = budget``.

    Exhaustive search over integer shifts with ``2**s < budget``; each shift
    forces ``q = (budget - 2**s) / (2 budget - 2**s)``, and shifts whose q
    falls outside ``(r**2, 1/2)`` are infeasible. Returns the true
    minimizer (the large-shift heuristic breaks down when q approaches
    r**2 from above).
    """
    if not 0.0 < abs(r) < 1.0:
        raise ValueError(f"r: must satisfy 0 < |r| < 1, got {r}")
    if budget <= 1.0:
        raise InfeasibleBudgetError(f"budget: must be > 1, got {budget}")
    r2 = r * r
    best = None
    s = 0
    while 2**s < budget:
        q = (budget - 2**s) / (2.0 * budget - 2**s)
        if r2 < q < 0.5:
            objective = (
                abs(r) ** (2.0 * s)
                * budget
                / (budget - 2**s - r2 * (2.0 * budget - 2**s))
            )
            if best is None or objective < best.objective:
                best = CostDesign(s=s, q=q, objective=objective)
        s += 1
    if best is None:
        raise InfeasibleBudgetError(
            f"budget: no integer shift gives a tail ratio in (r**2, 1/2) for "
            f"r = {r}, budget = {budget}"
        )
    return best

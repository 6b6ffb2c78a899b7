"""Heston stochastic-volatility call pricing as a level-sequence model.

The variance process has an exactly simulable transition (a scaled
noncentral chi-square), so a replicate simulates one exact variance path at
its drawn finest level; coarser levels reuse sub-grids of the same path.
Conditionally on the terminal variance and the integrated variance, the
call price is a closed-form Black-Scholes value at a modified spot and
volatility, and the debiased estimator removes the trapezoid discretization
bias of the integrated variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidStateError
from .sequences import LevelSequenceModel

__all__ = [
    "HestonParams",
    "VariancePath",
    "norm_cdf",
    "bs_call",
    "cir_exact_step",
    "simulate_variance_grid",
    "nested_trapezoid_integrals",
    "xi_factor",
    "conditional_price",
    "HestonLevelModel",
    "heston_level_model",
    "HESTON_PRESETS",
]

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class HestonParams:
    """Parameter set for the stochastic-volatility call pricing problem.

    Attributes:
        s0: spot price (> 0).
        strike: strike price (> 0).
        rate: risk-free rate per year.
        maturity: option maturity in years (> 0).
        rho: correlation between the variance and price drivers, in [-1, 1].
        kappa: mean-reversion speed of the variance process (> 0).
        theta: long-run variance level (> 0).
        sigma_v: volatility of variance (> 0).
        v0: initial variance (>= 0).
    """

    s0: float
    strike: float
    rate: float
    maturity: float
    rho: float
    kappa: float
    theta: float
    sigma_v: float
    v0: float

    def __post_init__(self):
        for name in ("s0", "strike", "maturity", "kappa", "theta", "sigma_v"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name}: must be > 0, got {getattr(self, name)}")
        if not abs(self.rho) <= 1.0:
            raise ValueError(f"rho: must be in [-1, 1], got {self.rho}")
        if self.v0 < 0:
            raise ValueError(f"v0: must be >= 0, got {self.v0}")

    @property
    def feller_ok(self) -> bool:
        """True when 2*kappa*theta > sigma_v**2 (variance stays positive).

        Informational only; the bundled presets violate it, meaning their
        variance paths touch zero.
        """
        return 2.0 * self.kappa * self.theta > self.sigma_v**2


@dataclass(frozen=True)
class VariancePath:
    """Exact variance-process values on the uniform dyadic grid of one level.

    ``values`` has length ``2**level + 1`` covering ``[0, maturity]``.
    """

    level: int
    maturity: float
    values: np.ndarray


def norm_cdf(x: float) -> float:
    """Standard normal CDF, clamped to {0, 1} beyond |x| = 8."""
    if x < -8.0:
        return 0.0
    if x > 8.0:
        return 1.0
    return 0.5 * math.erfc(-x / _SQRT2)


def bs_call(s: float, k: float, r: float, t: float, sigma: float) -> float:
    """Black-Scholes call price with zero dividend yield.

    Degenerate diffusion (sigma = 0 or t = 0) returns the discounted
    intrinsic value; a worthless spot returns 0.
    """
    for name, v in (("s", s), ("k", k), ("r", r), ("t", t), ("sigma", sigma)):
        if not math.isfinite(v):
            raise ValueError(f"{name}: must be finite, got {v}")
    if s < 0 or k <= 0 or t < 0 or sigma < 0:
        raise ValueError("bs_call: need s >= 0, k > 0, t >= 0, sigma >= 0")
    if s == 0.0:
        return 0.0
    if sigma == 0.0 or t == 0.0:
        return max(s - k * math.exp(-r * t), 0.0)
    vol = sigma * math.sqrt(t)
    d1 = (math.log(s / k) + (r + 0.5 * sigma * sigma) * t) / vol
    d2 = d1 - vol
    return s * norm_cdf(d1) - k * math.exp(-r * t) * norm_cdf(d2)


def cir_exact_step(
    v,
    dt: float,
    kappa: float,
    theta: float,
    sigma_v: float,
    rng: np.random.Generator,
    size: int | None = None,
):
    """Draw V(t+dt) | V(t) = v exactly from the square-root-process
    transition: scale * noncentral-chi-square(d, lam) with

        scale = sigma_v**2 (1 - e) / (4 kappa),   e = exp(-kappa dt)
        d     = 4 kappa theta / sigma_v**2
        lam   = v * e / scale

    The noncentral chi-square is sampled through its Poisson mixture
    (central chi-square with d + 2J degrees, J ~ Poisson(lam/2)), which is
    exact for every d > 0 including d < 1.

    ``v`` may be a scalar or an array; ``size`` broadcasts a scalar ``v``.
    """
    if dt <= 0:
        raise ValueError(f"dt: must be > 0, got {dt}")
    e = math.exp(-kappa * dt)
    scale = sigma_v * sigma_v * (1.0 - e) / (4.0 * kappa)
    d = 4.0 * kappa * theta / (sigma_v * sigma_v)
    lam = np.asarray(v) * (e / scale)
    if size is not None:
        lam = np.broadcast_to(lam, (size,))
    j = rng.poisson(0.5 * lam)
    out = scale * 2.0 * rng.standard_gamma(0.5 * d + j)
    if np.ndim(out) == 0:
        return float(out)
    return out


def simulate_variance_grid(
    params: HestonParams, level: int, rng: np.random.Generator
) -> VariancePath:
    """Simulate the variance process exactly on the level-``level`` dyadic
    grid of [0, maturity] by sequential exact transitions."""
    if level < 0:
        raise ValueError(f"level: must be >= 0, got {level}")
    n_steps = 2**level
    dt = params.maturity / n_steps
    values = np.empty(n_steps + 1)
    values[0] = params.v0
    v = params.v0
    for k in range(n_steps):
        v = cir_exact_step(v, dt, params.kappa, params.theta, params.sigma_v, rng)
        values[k + 1] = v
    return VariancePath(level=level, maturity=params.maturity, values=values)


def nested_trapezoid_integrals(path: VariancePath, base: int) -> np.ndarray:
    """Integrated-variance approximations ``I_base .. I_level`` from one
    fine path: level j uses every ``2**(level-j)``-th grid point, so each
    value has the exact marginal law of a level-j simulation."""
    if base < 0:
        raise ValueError(f"base: must be >= 0, got {base}")
    if base > path.level:
        raise ValueError(f"base: must be <= path level {path.level}, got {base}")
    out = np.empty(path.level - base + 1)
    for j in range(base, path.level + 1):
        stride = 2 ** (path.level - j)
        sub = path.values[::stride]
        h = path.maturity / 2**j
        out[j - base] = h * (0.5 * sub[0] + sub[1:-1].sum() + 0.5 * sub[-1])
    return out


def xi_factor(v_t: float, integrated: float, params: HestonParams) -> float:
    """Spot multiplier of the conditional pricing identity,

        exp(-(rho**2 / 2) I + (rho / sigma_v)(V_T - v0 + kappa I - kappa theta T)),

    evaluated through its logarithm to keep extreme paths from overflowing.
    """
    if integrated < 0:
        raise ValueError(f"integrated: must be >= 0, got {integrated}")
    log_xi = -0.5 * params.rho * params.rho * integrated + (params.rho / params.sigma_v) * (
        v_t - params.v0 + params.kappa * integrated - params.kappa * params.theta * params.maturity
    )
    if not math.isfinite(log_xi):
        raise InvalidStateError(f"xi: non-finite log spot multiplier {log_xi}")
    xi = math.exp(log_xi)
    if not math.isfinite(xi):
        raise InvalidStateError(f"xi: spot multiplier overflowed (log = {log_xi})")
    return xi


def conditional_price(v_t: float, integrated: float, params: HestonParams) -> float:
    """Call price conditional on terminal variance ``v_t`` and integrated
    variance ``integrated``: Black-Scholes at spot ``s0 * xi`` and
    volatility ``sqrt(integrated / maturity) * sqrt(1 - rho**2)``."""
    xi = xi_factor(v_t, integrated, params)
    sigma = math.sqrt(integrated / params.maturity) * math.sqrt(
        1.0 - params.rho * params.rho
    )
    return bs_call(params.s0 * xi, params.strike, params.rate, params.maturity, sigma)


class HestonLevelModel(LevelSequenceModel):
    """Level-sequence adapter: level n is the conditional call price using
    the trapezoid integrated variance on ``2**n + 1`` exactly simulated
    grid points; one path per replicate, coarse levels by sub-grids."""

    deterministic = False
    exponential_cost = True

    def __init__(self, params: HestonParams):
        self.params = params

    def generate(self, rng, base: int, top: int) -> np.ndarray:
        self._check_range(base, top)
        path = simulate_variance_grid(self.params, top, rng)
        v_t = float(path.values[-1])
        integrals = nested_trapezoid_integrals(path, base)
        return np.array(
            [conditional_price(v_t, integral, self.params) for integral in integrals]
        )


def heston_level_model(params: HestonParams) -> HestonLevelModel:
    """Build the exponential-cost level model for a parameter set."""
    return HestonLevelModel(params)


#: Literature parameter sets used for the reproduction experiments.
HESTON_PRESETS = {
    "broadie_kaya_1": HestonParams(
        s0=100.0,
        strike=100.0,
        rate=0.05,
        maturity=5.0,
        rho=-0.3,
        kappa=2.0,
        theta=0.09,
        sigma_v=1.0,
        v0=0.09,
    ),
    "broadie_kaya_2": HestonParams(
        s0=100.0,
        strike=100.0,
        rate=0.0319,
        maturity=1.0,
        rho=-0.7,
        kappa=6.21,
        theta=0.019,
        sigma_v=0.61,
        v0=0.010201,
    ),
}

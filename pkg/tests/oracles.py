"""Independent oracles used to freeze expected values.

These deliberately avoid the library's estimator kernels: level values,
survival probabilities, and probability masses are supplied as plain
callables by each test, and moments come from direct enumeration over the
truncation level.
"""

from __future__ import annotations

import math


def enumerate_debias_moments(
    level_value,
    survival,
    shift: int,
    tail_mass: float = 1e-12,
    max_level: int = 200_000,
):
    """Mean and variance of the debiased value for a deterministic sequence,
    by enumerating the truncation level until both the remaining probability
    mass and the running variance contributions are negligible.

    Args:
        level_value: n -> X_n (deterministic sequence).
        survival: n -> Q(n) = P(N >= n).
        shift: guaranteed minimum level (Q = 1 through shift).

    Returns:
        (mean, variance) of y(N) under the level distribution.
    """
    y = level_value(shift)
    x_prev = y
    cum_p = 0.0
    m1 = 0.0
    m2 = 0.0
    n = shift
    stall = 0
    while n <= max_level:
        q_here = survival(n)
        q_next = survival(n + 1)
        p_n = q_here - q_next
        contrib = p_n * y * y
        m1 += p_n * y
        m2 += contrib
        cum_p += p_n
        if cum_p >= 1.0 - tail_mass:
            # keep enumerating while contributions still matter
            if contrib <= 1e-16 * max(m2, 1e-300):
                stall += 1
                if stall > 8:
                    break
            else:
                stall = 0
        n += 1
        x = level_value(n)
        y += (x - x_prev) / survival(n)
        x_prev = x
    return m1, m2 - m1 * m1


def enumerate_expectation_over_levels(
    value_at_level,
    survival,
    shift: int,
    tail_mass: float = 1e-12,
    max_level: int = 100_000,
):
    """E[f(N)] for f given per-level, by direct enumeration.

    Enumeration continues past the probability-tail cutoff until the
    per-level contributions themselves are negligible (f may grow with the
    level while remaining summable against the pmf).
    """
    total = 0.0
    cum_p = 0.0
    n = shift
    stall = 0
    while n <= max_level:
        p_n = survival(n) - survival(n + 1)
        contrib = p_n * value_at_level(n)
        total += contrib
        cum_p += p_n
        if cum_p >= 1.0 - tail_mass:
            if abs(contrib) <= 1e-16 * max(abs(total), 1e-300):
                stall += 1
                if stall > 8:
                    break
            else:
                stall = 0
        n += 1
    return total


def normal_cdf_by_quadrature(x: float) -> float:
    """Standard normal CDF by numerical integration of the density."""
    from scipy import integrate

    if x >= 0:
        tail, _ = integrate.quad(
            lambda t: math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi), 0.0, x,
            epsabs=1e-14, epsrel=1e-14,
        )
        return 0.5 + tail
    return 1.0 - normal_cdf_by_quadrature(-x)


def bs_call_by_quadrature(s0, k, r, t, sigma) -> float:
    """Discounted call payoff integrated against the lognormal terminal
    density (via the standard normal driver)."""
    from scipy import integrate

    def integrand(z):
        s_t = s0 * math.exp((r - 0.5 * sigma * sigma) * t + sigma * math.sqrt(t) * z)
        payoff = max(s_t - k, 0.0)
        return payoff * math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)

    value, _ = integrate.quad(integrand, -12.0, 12.0, epsabs=1e-12, epsrel=1e-12, limit=400)
    return math.exp(-r * t) * value

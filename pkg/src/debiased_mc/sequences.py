"""Bundled level-sequence models.

A level-sequence model produces coupled approximations ``X_base .. X_top``
of increasing accuracy from a single source of randomness, together with a
per-replicate cost. Level values must be reproducible for a fixed stream
state, and the marginal law of ``X_n`` must not depend on the top level
requested (coupling affects the joint law only).

Cost accounting: a replicate whose highest level is ``n`` costs ``n + 1``
units for linear-cost models (one unit per level including level 0) and
``2**n + 1`` units for exponential-cost models (cumulative function
evaluations on nested dyadic grids).
"""

from __future__ import annotations

import math
from typing import Callable, Iterator

import numpy as np
from scipy import integrate

from .errors import (
    DerivativeZeroError,
    DivergentCostError,
    InvalidLevelError,
    UnsupportedQueryError,
)
from .laws import ShiftedGeometricLaw

__all__ = [
    "LevelSequenceModel",
    "ToyGeometricModel",
    "NewtonModel",
    "QuadratureModel",
    "expected_evaluations",
    "crude_mc_variance",
]


class LevelSequenceModel:
    """Base class for coupled level generators."""

    #: True when levels are a fixed function of the level index (no randomness)
    deterministic: bool = False
    #: True when the per-level cost grows like 2**n (nested dyadic grids)
    exponential_cost: bool = False
    #: lowest level the model can produce
    min_level: int = 0

    def generate(self, rng: np.random.Generator | None, base: int, top: int) -> np.ndarray:
        """Return one coupled realization of levels ``base .. top`` inclusive."""
        raise NotImplementedError

    def level_stream(self, rng: np.random.Generator | None, start: int) -> Iterator[float]:
        """Yield ``X_start, X_start+1, ...`` incrementally from one realization.

        Needed by adaptive replicates; models that can only be simulated at
        a pre-declared finest level do not support it.
        """
        raise UnsupportedQueryError(
            f"{type(self).__name__} does not support incremental level generation"
        )

    def replicate_cost(self, top: int) -> float:
        """Cost units for one replicate whose highest level is ``top``."""
        if self.exponential_cost:
            return float(2**top + 1)
        return float(top + 1)

    def _check_range(self, base: int, top: int) -> None:
        if base < self.min_level:
            raise InvalidLevelError(
                f"base: level {base} below the model's minimum level {self.min_level}"
            )
        if top < base:
            raise InvalidLevelError(f"top: must be >= base, got {top} < {base}")


class ToyGeometricModel(LevelSequenceModel):
    """Deterministic benchmark sequence ``X_n = b + a * r**n`` with |r| < 1."""

    deterministic = True

    def __init__(self, b: float, a: float, r: float):
        if not abs(r) < 1.0:
            raise ValueError(f"r: must satisfy |r| < 1, got {r}")
        self.b = float(b)
        self.a = float(a)
        self.r = float(r)

    def level_value(self, n: int) -> float:
        if n < 0:
            raise InvalidLevelError(f"n: must be >= 0, got {n}")
        return self.b + self.a * self.r**n

    def generate(self, rng, base: int, top: int) -> np.ndarray:
        self._check_range(base, top)
        return np.array([self.level_value(n) for n in range(base, top + 1)])

    def level_stream(self, rng, start: int) -> Iterator[float]:
        self._check_range(start, start)
        n = start
        while True:
            yield self.level_value(n)
            n += 1


class NewtonModel(LevelSequenceModel):
    """Damped Newton iteration for ``h(x) = target`` with a random start.

    ``X_0`` is drawn uniformly on [start_low, start_high] once per
    realization; each step is clamped to unit magnitude:
    ``X_{n+1} = X_n - clip((h(X_n) - target) / h'(X_n), -1, 1)``.
    """

    deterministic = False

    def __init__(
        self,
        h: Callable[[float], float],
        h_prime: Callable[[float], float],
        target: float,
        start_low: float,
        start_high: float,
    ):
        if not start_low <= start_high:
            raise ValueError("start_low: must be <= start_high")
        self.h = h
        self.h_prime = h_prime
        self.target = float(target)
        self.start_low = float(start_low)
        self.start_high = float(start_high)

    def _step(self, x: float, n: int) -> float:
        deriv = self.h_prime(x)
        if deriv == 0.0:
            raise DerivativeZeroError(
                f"h'(X_{n}) = 0 at x = {x}; cannot form the Newton step", level=n
            )
        delta = (self.h(x) - self.target) / deriv
        delta = min(1.0, max(-1.0, delta))
        return x - delta

    def trajectory(self, rng: np.random.Generator, top: int) -> np.ndarray:
        """Return ``X_0 .. X_top`` for one random start."""
        if top < 0:
            raise InvalidLevelError(f"top: must be >= 0, got {top}")
        xs = np.empty(top + 1)
        x = rng.uniform(self.start_low, self.start_high)
        xs[0] = x
        for n in range(top):
            x = self._step(x, n)
            xs[n + 1] = x
        return xs

    def generate(self, rng, base: int, top: int) -> np.ndarray:
        self._check_range(base, top)
        return self.trajectory(rng, top)[base:]

    def level_stream(self, rng, start: int) -> Iterator[float]:
        self._check_range(start, start)
        x = rng.uniform(self.start_low, self.start_high)
        for n in range(start):
            x = self._step(x, n)
        n = start
        while True:
            yield x
            x = self._step(x, n)
            n += 1


_RULES = ("trapezoid", "simpson")


class QuadratureModel(LevelSequenceModel):
    """Composite quadrature on nested dyadic grids of [lo, hi].

    Level ``n`` uses the uniform grid with ``2**n`` intervals (``2**n + 1``
    points); refining to level ``n + 1`` evaluates the integrand only at the
    ``2**n`` new midpoints, so the cumulative evaluation count at level
    ``n`` is exactly ``2**n + 1``. Level values are byte-identical whether
    computed directly or via successive refinement because grid abscissae
    coincide bit-for-bit across levels.

    Simpson's rule needs an even interval count, so its minimum level is 1.
    """

    deterministic = True
    exponential_cost = True

    def __init__(self, f: Callable[[float], float], lo: float, hi: float, rule: str = "simpson"):
        if rule not in _RULES:
            raise ValueError(f"rule: must be one of {_RULES}, got {rule!r}")
        if not hi > lo:
            raise ValueError("hi: must be > lo")
        self.f = f
        self.lo = float(lo)
        self.hi = float(hi)
        self.rule = rule
        self.min_level = 1 if rule == "simpson" else 0
        self.evaluation_count = 0
        self._grids: dict[int, np.ndarray] = {}

    def _grid_values(self, n: int) -> np.ndarray:
        """Integrand values on the level-n grid, filling caches by refinement."""
        if n in self._grids:
            return self._grids[n]
        if n == 0:
            xs = np.array([self.lo, self.hi])
            vals = np.array([self.f(x) for x in xs], dtype=float)
            self.evaluation_count += 2
        else:
            coarse = self._grid_values(n - 1)
            step = (self.hi - self.lo) / 2**n
            mids = self.lo + step * np.arange(1, 2**n, 2)
            vals = np.empty(2**n + 1)
            vals[::2] = coarse
            vals[1::2] = [self.f(x) for x in mids]
            self.evaluation_count += len(mids)
        self._grids[n] = vals
        return vals

    def level_value(self, n: int) -> float:
        if n < self.min_level:
            raise InvalidLevelError(
                f"n: level {n} invalid for {self.rule} (minimum level {self.min_level})"
            )
        vals = self._grid_values(n)
        h = (self.hi - self.lo) / 2**n
        if self.rule == "trapezoid":
            return h * (0.5 * vals[0] + vals[1:-1].sum() + 0.5 * vals[-1])
        # composite Simpson over 2**n intervals
        odd = vals[1:-1:2].sum()
        even = vals[2:-1:2].sum()
        return (h / 3.0) * (vals[0] + 4.0 * odd + 2.0 * even + vals[-1])

    def generate(self, rng, base: int, top: int) -> np.ndarray:
        self._check_range(base, top)
        return np.array([self.level_value(n) for n in range(base, top + 1)])

    def level_stream(self, rng, start: int) -> Iterator[float]:
        self._check_range(start, start)
        n = start
        while True:
            yield self.level_value(n)
            n += 1


def expected_evaluations(law: ShiftedGeometricLaw) -> float:
    """Expected function evaluations of a dyadic-grid replicate,
    ``E[2**N + 1] = 1 + 2**shift * p / (2p - 1)``.

    Finite only when the stopping probability exceeds 1/2.
    """
    if not isinstance(law, ShiftedGeometricLaw):
        raise TypeError("law: expected a ShiftedGeometricLaw")
    if law.p <= 0.5:
        raise DivergentCostError(
            f"p: expected evaluation count diverges for p <= 1/2, got p = {law.p}"
        )
    return 1.0 + 2.0**law.shift * law.p / (2.0 * law.p - 1.0)


def crude_mc_variance(
    f: Callable[[float], float], lo: float, hi: float, evals: int
) -> float:
    """Variance of the crude Monte Carlo integral estimate of f on [lo, hi]
    that spends ``evals`` function evaluations on uniform draws.

    The integrals of f and f**2 are computed with an independent adaptive
    quadrature, not with this package's nested rules.
    """
    if evals < 1:
        raise ValueError(f"evals: must be >= 1, got {evals}")
    int_f, _ = integrate.quad(f, lo, hi, epsabs=1e-13, epsrel=1e-13, limit=200)
    int_f2, _ = integrate.quad(lambda x: f(x) ** 2, lo, hi, epsabs=1e-13, epsrel=1e-13, limit=200)
    # estimator is (hi-lo) * mean f(U_i); per-draw variance of (hi-lo) f(U)
    return ((hi - lo) * int_f2 - int_f**2) / evals

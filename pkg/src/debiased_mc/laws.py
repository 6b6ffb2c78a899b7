"""Truncation laws: distributions over the random highest level N.

A law exposes survival probabilities ``Q(n) = P(N >= n)`` and sampling.
Survival probabilities are what the estimator divides increments by, so
every law must keep ``Q`` non-increasing, strictly positive, and equal to
one up to its guaranteed shift.

Conventions:

* ``ShiftedGeometricLaw(p, shift)``: ``p`` is the per-level *stopping*
  probability, so ``P(N = n) = p (1-p)^(n-shift)`` for ``n >= shift`` and
  the survival ratio is ``1 - p``.
* ``AdaptiveLaw(p, ...)``: ``p`` is the per-level survival *decay factor*
  applied when an increment falls below the threshold; survival is realized
  per replicate, so this law has no fixed survival function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UnsupportedQueryError

__all__ = [
    "TruncationLaw",
    "ShiftedGeometricLaw",
    "TableLaw",
    "AdaptiveLaw",
]


class TruncationLaw:
    """Base class for truncation-level distributions."""

    #: lowest level that is always included (Q(n) = 1 for n <= shift)
    shift: int = 0
    adaptive: bool = False

    def survival(self, n: int) -> float:
        """Return Q(n) = P(N >= n)."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` independent truncation levels as an int array."""
        raise NotImplementedError

    def mean_level(self) -> float:
        """Return E[N]."""
        raise NotImplementedError


@dataclass(frozen=True)
class ShiftedGeometricLaw(TruncationLaw):
    """Geometric level distribution with a guaranteed minimum level.

    Args:
        p: per-level stopping probability in (0, 1). The survival ratio
            beyond the shift is ``1 - p``.
        shift: guaranteed minimum level (Q(n) = 1 for n <= shift).
    """

    p: float
    shift: int = 0
    adaptive = False

    def __post_init__(self):
        if not (0.0 < self.p < 1.0):
            raise ValueError(f"p: must be in (0, 1), got {self.p}")
        if self.shift < 0:
            raise ValueError(f"shift: must be >= 0, got {self.shift}")

    @property
    def survival_ratio(self) -> float:
        return 1.0 - self.p

    def survival(self, n: int) -> float:
        if n < 0:
            raise ValueError(f"n: must be >= 0, got {n}")
        if n <= self.shift:
            return 1.0
        return (1.0 - self.p) ** (n - self.shift)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        # numpy's geometric counts trials to first success, support {1, 2, ...}
        return self.shift + rng.geometric(self.p, size=size) - 1

    def mean_level(self) -> float:
        return self.shift + (1.0 - self.p) / self.p


@dataclass(frozen=True)
class TableLaw(TruncationLaw):
    """Truncation law given by an explicit finite survival table plus a
    geometric tail.

    ``survival_table[n]`` holds Q(n) for n < len(table); beyond the table
    the ratio ``tail_ratio`` applies: Q(n) = Q(L) * tail_ratio**(n - L)
    where L is the last table index.

    The table must start at 1.0, be non-increasing, and stay in (0, 1].
    """

    survival_table: tuple
    tail_ratio: float
    shift: int = field(init=False, default=0)
    adaptive = False

    def __post_init__(self):
        table = tuple(float(q) for q in self.survival_table)
        object.__setattr__(self, "survival_table", table)
        if len(table) == 0:
            raise ValueError("survival_table: must be non-empty")
        if table[0] != 1.0:
            raise ValueError("survival_table: Q(0) must equal 1")
        for i, q in enumerate(table):
            if not (0.0 < q <= 1.0):
                raise ValueError(f"survival_table[{i}]: must be in (0, 1], got {q}")
            if i > 0 and q > table[i - 1]:
                raise ValueError(f"survival_table[{i}]: table must be non-increasing")
        if not (0.0 < self.tail_ratio < 1.0):
            raise ValueError(f"tail_ratio: must be in (0, 1), got {self.tail_ratio}")
        # guaranteed shift = largest n with Q(n) == 1
        s = 0
        for i, q in enumerate(table):
            if q == 1.0:
                s = i
        object.__setattr__(self, "shift", s)

    def survival(self, n: int) -> float:
        if n < 0:
            raise ValueError(f"n: must be >= 0, got {n}")
        last = len(self.survival_table) - 1
        if n <= last:
            return self.survival_table[n]
        return self.survival_table[last] * self.tail_ratio ** (n - last)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = np.maximum(rng.random(size), 1e-300)  # keep log(u) finite
        out = np.empty(size, dtype=np.int64)
        table = np.asarray(self.survival_table)
        last = len(table) - 1
        q_last = table[last]
        in_table = u >= q_last * self.tail_ratio
        # table part: N = max{n : Q(n) > U}; table is non-increasing
        if np.any(in_table):
            # count of table entries (beyond index 0) strictly above u, i.e.
            # the largest n <= last with Q(n) > u; add tail levels if u < Q(last)
            counts = (table[None, 1:] > u[in_table, None]).sum(axis=1)
            out[in_table] = counts
        deep = ~in_table
        if np.any(deep):
            # max k with q_last * ratio^k > u  ->  k = ceil(log(u/q_last)/log(ratio)) - 1
            k = np.ceil(np.log(u[deep] / q_last) / math.log(self.tail_ratio)).astype(np.int64) - 1
            out[deep] = last + k
        return out

    def mean_level(self) -> float:
        # E[N] = sum_{n>=1} Q(n)
        table_part = sum(self.survival_table[1:])
        q_last = self.survival_table[-1]
        tail = q_last * self.tail_ratio / (1.0 - self.tail_ratio)
        return table_part + tail


@dataclass(frozen=True)
class AdaptiveLaw(TruncationLaw):
    """Stopping-time truncation rule driven by observed increments.

    While ``|X_n - X_{n-1}| > epsilon`` the realized survival is carried
    over unchanged (the replicate always continues); once the increment is
    at or below ``epsilon`` survival decays by factor ``p`` and the
    replicate continues with conditional probability ``p``.

    Because survival is realized per replicate, there is no fixed
    ``survival`` function and no direct ``sample``; use
    :func:`debiased_mc.estimator.adaptive_replicate`.

    Args:
        p: decay factor in (0, 1); with an infinite threshold the level
            distribution reduces to a geometric law with survival ratio p.
        epsilon: increment threshold, > 0 (may be ``math.inf``).
        n_max: hard guard on the level count; exhaustion is an error, not a
            truncation.
        shift: guaranteed minimum level, as for the geometric law.
    """

    p: float
    epsilon: float
    n_max: int = 10**6
    shift: int = 0
    adaptive = True

    def __post_init__(self):
        if not (0.0 < self.p < 1.0):
            raise ValueError(f"p: must be in (0, 1), got {self.p}")
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon: must be > 0, got {self.epsilon}")
        if self.n_max < 1:
            raise ValueError(f"n_max: must be >= 1, got {self.n_max}")
        if self.shift < 0:
            raise ValueError(f"shift: must be >= 0, got {self.shift}")

    def survival(self, n: int) -> float:
        raise UnsupportedQueryError(
            "adaptive law has no fixed survival function; survival is realized "
            "per replicate"
        )

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise UnsupportedQueryError(
            "adaptive truncation levels are determined by the observed sequence; "
            "use adaptive_replicate"
        )

    def mean_level(self) -> float:
        raise UnsupportedQueryError("adaptive law has no sequence-free mean level")

"""Debiasing engine: replicates, batched estimation, variance diagnostics.

A replicate draws a random truncation level N, generates the coupled levels
``X_shift .. X_N`` from a sequence model, and forms the debiased value

    y = X_shift + sum_{n=shift+1}^{N} (X_n - X_{n-1}) / Q(n)

whose expectation is the sequence limit whatever the (positive-survival)
law of N. Batched runs report the across-replicate standard error, which is
the authoritative uncertainty; the within-replicate variance estimator is a
diagnostic that targets only the truncation-randomization component.

Seeding scheme (documented contract): replicates are processed in fixed
chunks of ``CHUNK_SIZE``. Chunk ``c`` owns the generator
``PCG64(SeedSequence(entropy=seed, spawn_key=(c,)))``; within a chunk all
truncation levels are drawn in one vectorized call, then each replicate's
sequence randomness is consumed in ascending replicate order. Replicate
``i`` therefore sees a stream that is a deterministic function of
``(seed, i)``, and results are aggregated in replicate-index order, so runs
are bit-identical at any worker count.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import (
    DivergentCostError,
    GuardExhaustedError,
    InvalidLevelError,
    LevelGenerationError,
)
from .laws import AdaptiveLaw, ShiftedGeometricLaw, TableLaw, TruncationLaw
from .sequences import LevelSequenceModel

__all__ = [
    "Replicate",
    "EstimateReport",
    "single_replicate",
    "replicate_at_level",
    "adaptive_replicate",
    "within_replicate_variance",
    "pooled_average",
    "replicate_arrays",
    "summarize_replicates",
    "run_estimate",
    "validate_pairing",
    "CHUNK_SIZE",
]

#: replicates per random-stream chunk; part of the seeding contract
CHUNK_SIZE = 4096


@dataclass(frozen=True)
class Replicate:
    """One realization of the debiased estimator.

    Attributes:
        level: drawn (or realized) truncation level N.
        values: level values ``X_shift .. X_N``.
        value: debiased estimate y.
        weights: realized increment weights 1/Q(n), n = shift+1 .. N.
        cost: realized cost units (model cost convention; adaptive
            replicates include the probe level generated past N).
    """

    level: int
    values: np.ndarray
    value: float
    weights: np.ndarray
    cost: float


@dataclass(frozen=True)
class EstimateReport:
    """Aggregate of a batched run.

    ``stderr**2 * m == var_y`` up to rounding. ``sigma2_hat_mean`` is NaN
    for adaptive runs (the within-replicate estimator needs a fixed
    survival function). ``m`` counts accepted replicates; ``n_failed``
    counts adaptive guard exhaustions, which are excluded from statistics.
    """

    mean: float
    stderr: float
    m: int
    var_y: float
    sigma2_hat_mean: float
    mean_level: float
    mean_cost: float
    seed: int
    n_failed: int = 0


def validate_pairing(model: LevelSequenceModel, law: TruncationLaw) -> None:
    """Reject law/model pairings with divergent expected cost or levels the
    model cannot produce."""
    if law.shift < model.min_level:
        raise InvalidLevelError(
            f"shift: law shift {law.shift} below the model's minimum level "
            f"{model.min_level}"
        )
    if model.exponential_cost:
        if isinstance(law, ShiftedGeometricLaw) and law.p <= 0.5:
            raise DivergentCostError(
                f"p: expected cost E[2**N] diverges for p <= 1/2, got p = {law.p}"
            )
        if isinstance(law, TableLaw) and law.tail_ratio >= 0.5:
            raise DivergentCostError(
                f"tail_ratio: expected cost E[2**N] diverges for tail ratio >= 1/2, "
                f"got {law.tail_ratio}"
            )
        if isinstance(law, AdaptiveLaw) and law.p >= 0.5:
            raise DivergentCostError(
                f"p: adaptive survival decays at best by factor p per level, so "
                f"E[2**N] diverges for p >= 1/2, got p = {law.p}"
            )


def replicate_at_level(
    model: LevelSequenceModel,
    law: TruncationLaw,
    level: int,
    rng: np.random.Generator | None,
) -> Replicate:
    """Build the debiased replicate for an already-drawn truncation level.

    The telescoping sum is accumulated in level order, which fixes the
    floating-point result.
    """
    base = law.shift
    try:
        values = model.generate(rng, base, level)
    except LevelGenerationError:
        raise
    except Exception as exc:  # attach the level range being generated
        raise LevelGenerationError(
            f"level generation failed while producing levels {base}..{level}: {exc}",
            level=level,
        ) from exc
    y = float(values[0])
    weights = np.empty(level - base)
    for n in range(base + 1, level + 1):
        q = law.survival(n)
        y += (values[n - base] - values[n - base - 1]) / q
        weights[n - base - 1] = 1.0 / q
    return Replicate(
        level=level,
        values=values,
        value=y,
        weights=weights,
        cost=model.replicate_cost(level),
    )


def single_replicate(
    model: LevelSequenceModel, law: TruncationLaw, rng: np.random.Generator
) -> Replicate:
    """Draw N from the law, then generate levels and form the estimate.

    Drawing N first lets exponential-cost models simulate once at the
    finest level and derive coarse levels by nesting.
    """
    validate_pairing(model, law)
    level = int(law.sample(rng, 1)[0])
    return replicate_at_level(model, law, level, rng)


def adaptive_replicate(
    model: LevelSequenceModel, law: AdaptiveLaw, rng: np.random.Generator
) -> Replicate:
    """Run the stopping-time rule: survival decays by ``law.p`` only when the
    observed increment magnitude is at or below ``law.epsilon``, and the
    replicate continues past a level with the matching conditional
    probability. Realized weights keep the accepted output unbiased.

    Raises:
        GuardExhaustedError: the level count reached ``law.n_max`` before
            the rule stopped; the replicate must be discarded, not
            truncated.
    """
    if not isinstance(law, AdaptiveLaw):
        raise TypeError("law: adaptive_replicate needs an AdaptiveLaw")
    validate_pairing(model, law)
    base = law.shift
    stream = model.level_stream(rng, base)
    x_prev = next(stream)
    values = [x_prev]
    weights = []
    y = x_prev
    q_real = 1.0
    n = base
    while True:
        n += 1
        if n > law.n_max:
            raise GuardExhaustedError(
                f"n_max: adaptive rule did not stop within {law.n_max} levels", level=n - 1
            )
        x = next(stream)
        if abs(x - x_prev) <= law.epsilon:
            q_next = q_real * law.p
            if rng.random() >= law.p:  # stop: level n excluded
                level = n - 1
                break
        else:
            q_next = q_real  # always continue
        y += (x - x_prev) / q_next
        values.append(x)
        weights.append(1.0 / q_next)
        q_real = q_next
        x_prev = x
    # the probe level that triggered the stop was real work
    return Replicate(
        level=level,
        values=np.array(values),
        value=y,
        weights=np.array(weights),
        cost=model.replicate_cost(level + 1),
    )


def within_replicate_variance(rep: Replicate, law: TruncationLaw) -> float:
    """Single-replicate estimate of the truncation-randomization variance.

    For a non-adaptive law with survival Q, returns

        sum_n  d_n^2 (1 - Q_n) / Q_n^2
      + 2 sum_{j<n} d_n d_j (1 - Q_j) / (Q_j Q_n)

    over ``n, j in shift+1 .. N`` with ``d_n = X_n - X_{n-1}``. Its
    expectation over N equals Var(y) for deterministic sequences. (The
    cross-term weight uses one factor of Q_j, which is what makes the
    estimator unbiased under the level randomization.)
    """
    if law.adaptive:
        raise TypeError("law: within_replicate_variance needs a non-adaptive law")
    base = law.shift
    total = 0.0
    running = 0.0  # sum_j d_j (1 - Q_j) / Q_j over j < n
    for n in range(base + 1, rep.level + 1):
        q = law.survival(n)
        d = rep.values[n - base] - rep.values[n - base - 1]
        total += d * d * (1.0 - q) / (q * q) + 2.0 * (d / q) * running
        running += d * (1.0 - q) / q
    return total


def pooled_average(replicates: list[Replicate], law: TruncationLaw) -> float:
    """Frequency-weighted pooled estimate over replicates drawn under one
    non-adaptive law: base-level mean plus, per level, the averaged
    increment times ``freq(N >= n) / Q(n)``.

    Algebraically identical to the arithmetic mean of per-replicate values.
    """
    if not replicates:
        raise ValueError("replicates: must be non-empty")
    if law.adaptive:
        raise TypeError("law: pooled_average needs a non-adaptive law")
    base = law.shift
    m = len(replicates)
    out = sum(float(r.values[0]) for r in replicates) / m
    max_level = max(r.level for r in replicates)
    for n in range(base + 1, max_level + 1):
        increments = [
            float(r.values[n - base] - r.values[n - base - 1])
            for r in replicates
            if r.level >= n
        ]
        if not increments:
            continue
        avg = sum(increments) / len(increments)
        freq = len(increments) / m
        out += avg * freq / law.survival(n)
    return out


class _DeterministicTables:
    """Per-level lookup tables for deterministic models.

    Entries are produced by the same scalar kernels used on the general
    path, so table lookups are bit-identical to per-replicate evaluation.
    """

    def __init__(self, model: LevelSequenceModel, law: TruncationLaw):
        self.model = model
        self.law = law
        self._lock = threading.Lock()
        self._y: list[float] = []
        self._sig2: list[float] = []
        self._cost: list[float] = []

    def _ensure(self, top: int) -> None:
        base = self.law.shift
        with self._lock:
            have = len(self._y)
            for n in range(base + have, top + 1):
                rep = replicate_at_level(self.model, self.law, n, None)
                self._y.append(rep.value)
                self._sig2.append(within_replicate_variance(rep, self.law))
                self._cost.append(rep.cost)

    def lookup(self, levels: np.ndarray):
        self._ensure(int(levels.max()))
        base = self.law.shift
        idx = levels - base
        return (
            np.asarray(self._y)[idx],
            np.asarray(self._sig2)[idx],
            np.asarray(self._cost)[idx],
        )


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(chunk,)))
    )


def replicate_arrays(
    model: LevelSequenceModel,
    law: TruncationLaw,
    reps: int,
    seed: int,
    threads: int = 1,
):
    """Run ``reps`` replicates and return per-replicate arrays
    ``(values, levels, costs, sigma2s, n_failed)`` in replicate order.

    Adaptive guard exhaustions leave NaN at the failed index. ``sigma2s``
    is all-NaN for adaptive laws.
    """
    if reps < 1:
        raise ValueError(f"reps: must be >= 1, got {reps}")
    validate_pairing(model, law)
    adaptive = isinstance(law, AdaptiveLaw)
    tables = (
        _DeterministicTables(model, law)
        if (model.deterministic and not adaptive)
        else None
    )

    n_chunks = (reps + CHUNK_SIZE - 1) // CHUNK_SIZE

    def work(chunk: int):
        lo = chunk * CHUNK_SIZE
        hi = min(lo + CHUNK_SIZE, reps)
        k = hi - lo
        rng = _chunk_rng(seed, chunk)
        ys = np.empty(k)
        costs = np.empty(k)
        sig2 = np.full(k, math.nan)
        if adaptive:
            levels = np.empty(k, dtype=np.int64)
            for i in range(k):
                try:
                    rep = adaptive_replicate(model, law, rng)
                except GuardExhaustedError:
                    ys[i] = math.nan
                    levels[i] = -1
                    costs[i] = math.nan
                    continue
                ys[i] = rep.value
                levels[i] = rep.level
                costs[i] = rep.cost
            return ys, levels, costs, sig2
        levels = law.sample(rng, k).astype(np.int64)
        if tables is not None:
            ys, sig2, costs = tables.lookup(levels)
        else:
            for i in range(k):
                rep = replicate_at_level(model, law, int(levels[i]), rng)
                ys[i] = rep.value
                costs[i] = rep.cost
                sig2[i] = within_replicate_variance(rep, law)
        return ys, levels, costs, sig2

    if threads > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, range(n_chunks)))
    else:
        results = [work(c) for c in range(n_chunks)]

    ys = np.concatenate([r[0] for r in results])
    levels = np.concatenate([r[1] for r in results])
    costs = np.concatenate([r[2] for r in results])
    sig2 = np.concatenate([r[3] for r in results])
    n_failed = int(np.isnan(ys).sum()) if adaptive else 0
    return ys, levels, costs, sig2, n_failed


def summarize_replicates(
    ys: np.ndarray,
    levels: np.ndarray,
    costs: np.ndarray,
    sig2: np.ndarray,
    n_failed: int,
    seed: int,
    adaptive: bool,
) -> EstimateReport:
    """Fold per-replicate arrays (replicate order) into an EstimateReport."""
    if n_failed:
        ok = ~np.isnan(ys)
        ys, levels, costs = ys[ok], levels[ok], costs[ok]
    m = len(ys)
    if m < 2:
        raise GuardExhaustedError(
            "n_max: too few accepted replicates to form an estimate", level=-1
        )
    var_y = float(np.var(ys, ddof=1))
    return EstimateReport(
        mean=float(np.mean(ys)),
        stderr=math.sqrt(var_y / m),
        m=m,
        var_y=var_y,
        sigma2_hat_mean=math.nan if adaptive else float(np.mean(sig2)),
        mean_level=float(np.mean(levels)),
        mean_cost=float(np.mean(costs)),
        seed=seed,
        n_failed=n_failed,
    )


def run_estimate(
    model: LevelSequenceModel,
    law: TruncationLaw,
    reps: int,
    seed: int,
    threads: int = 1,
) -> EstimateReport:
    """Estimate the sequence limit from ``reps`` independent replicates.

    Deterministic given ``(model, law, reps, seed)`` at any worker count.
    """
    if reps < 2:
        raise ValueError(f"reps: must be >= 2, got {reps}")
    arrays = replicate_arrays(model, law, reps, seed, threads)
    return summarize_replicates(*arrays, seed=seed, adaptive=isinstance(law, AdaptiveLaw))

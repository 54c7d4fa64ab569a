"""Acceptance suite: one PASS/FAIL line per criterion, repeated in the terminal summary."""

import math
import os
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from randrank.exact import (
    exact_expected_char_product,
    exact_marginals,
    exact_tau_pmf,
    exact_variance_U,
)
from randrank.montecarlo import SimConfig, normality_report, run_simulation
from randrank.rankstats import characteristic_product
from randrank.rules import AssignmentPath, RuleSpec
from randrank.scores import RawScores, ScoreFamily, condition_diagnostics, normalize, normalized_family
from randrank.tau import tau_limit_distance, tau_mean, tau_pmf

SEED = 12345
FOUR_RULES = [RuleSpec.complete(), RuleSpec.random_allocation(), RuleSpec.truncated_binomial(),
              RuleSpec.wei(1, 1)]


def test_1_exact_marginals(verdict):
    start = time.perf_counter()
    bad = []
    for rule in FOUR_RULES:
        for n in (2, 4, 6, 8, 10, 12):
            if any(m != 0 for m in exact_marginals(rule, n)):
                bad.append((rule.label(), n))
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 10
    assert verdict("1 exact marginals", ok, f"nonzero cells {bad}, {elapsed:.2f}s (< 10s)")


def test_2_tau_distribution(verdict):
    def formula(n):
        h = n // 2
        return tuple(Fraction(math.comb(n - k - 1, h - 1), 2 ** (n - k - 1)) for k in range(1, h + 1))

    exact_ok = all(exact_tau_pmf(n).exact == formula(n) for n in range(2, 17, 2))
    worst_sum = max(abs(math.fsum(tau_pmf(n).p) - 1) for n in range(2, 10001, 2))
    worst_mean = 0.0
    for n in list(range(2, 202, 2)) + [1000, 5000, 10000, 100000]:
        pmf = tau_pmf(n)
        direct = math.fsum(k * p for k, p in zip(pmf.support, pmf.p))
        worst_mean = max(worst_mean, abs(tau_mean(n) - direct) / direct)
    ratio = tau_mean(100000) / math.sqrt(100000)
    ok = exact_ok and worst_sum <= 1e-12 and worst_mean <= 1e-10 and 0.78 <= ratio <= 0.815
    assert verdict("2 tau distribution", ok,
                   f"exact match n=2..16 {exact_ok}, max |sum-1| {worst_sum:.1e}, "
                   f"max rel mean err {worst_mean:.1e}, E tau/sqrt(n) at 1e5 {ratio:.5f}")


def test_3_tau_limit_law(verdict):
    d = [tau_limit_distance(n) for n in (100, 400, 1600)]
    ok = d[0] > d[1] > d[2] and d[2] <= 0.05
    assert verdict("3 tau limit law", ok, "distances " + ", ".join(f"{x:.5f}" for x in d))


def test_4_characteristic_product(verdict):
    cr_err = max(
        abs(exact_expected_char_product(RuleSpec.complete(), normalized_family("wilcoxon", n), lam) - 1)
        for n in (4, 8, 12) for lam in (0.5, 1.0, 2.0)
    )
    ra = RuleSpec.random_allocation()
    ra2 = exact_expected_char_product(ra, normalized_family("wilcoxon", 2), 1.0)
    gaps = [abs(exact_expected_char_product(ra, normalized_family("wilcoxon", n), 1.0) - 1)
            for n in (4, 8, 12)]

    rng = np.random.default_rng(SEED)
    violations = 0
    for _ in range(10000):
        n = 2 * int(rng.integers(1, 31))
        a = rng.standard_normal(n)
        s = normalize(RawScores(a))
        path = AssignmentPath.of(tuple(rng.choice([1, -1], size=n)))
        lam = float(rng.uniform(0.01, 3.0))
        if abs(characteristic_product(s, path, lam)) ** 2 > math.exp(lam**2):
            violations += 1

    ok = cr_err <= 1e-12 and abs(ra2 - 0.5) <= 1e-12 and gaps[0] > gaps[1] > gaps[2] and violations == 0
    assert verdict("4 characteristic product", ok,
                   f"CR max |E pi - 1| {cr_err:.1e}, RA n=2 E pi {ra2.real:.12f}, "
                   f"RA gaps {', '.join(f'{g:.4f}' for g in gaps)}, modulus violations {violations}")


def test_5_variance_identity(verdict):
    worst = 0.0
    for family in ScoreFamily:
        for n in (4, 6, 8, 10, 12):
            s = normalized_family(family, n)
            pmf = tau_pmf(n)
            cdf = np.concatenate([[0.0], np.cumsum([float(p) for p in pmf.exact])])
            w = np.array([cdf[min(max(n - j, 0), n // 2)] for j in range(1, n + 1)])
            worst = max(worst, float(np.max(np.abs(exact_variance_U(s) - s.s**2 * w))))
    assert verdict("5 variance identity", worst <= 1e-12, f"max abs error {worst:.1e}")


CELLS = [
    (RuleSpec.complete(), "plain"),
    (RuleSpec.random_allocation(), "plain"),
    (RuleSpec.wei(1, 1), "centered"),
    (RuleSpec.truncated_binomial(), "tbd"),
]


@pytest.mark.slow
def test_6_asymptotic_normality(verdict):
    m = 200000
    problems, worst, slowest = [], {"mean": 0.0, "var": 0.0, "ks": 0.0, "skew": 0.0, "kurt": 0.0}, 0.0
    for rule, stat in CELLS:
        for family in ("wilcoxon", "savage"):
            name = f"{rule.label()}/{stat}/{family}"
            start = time.perf_counter()
            rep = normality_report(run_simulation(SimConfig(rule, 200, m, SEED, stat, family)))
            slowest = max(slowest, time.perf_counter() - start)
            got = {
                "mean": abs(rep.mean),
                "var": abs(rep.variance - 1),
                "ks": rep.ks,
                "skew": abs(rep.skewness),
                "kurt": abs(rep.excess_kurtosis),
            }
            limits = {"mean": 0.01, "var": 0.02, "ks": 0.02, "skew": 0.05, "kurt": 0.1}
            for key, val in got.items():
                worst[key] = max(worst[key], val)
                if val > limits[key]:
                    problems.append(f"{name} {key}={val:.4f}")
            ks = {n: normality_report(run_simulation(SimConfig(rule, n, m, SEED, stat, family))).ks
                  for n in (50, 800)}
            if ks[800] > ks[50] + 0.002:
                problems.append(f"{name} KS trend {ks[50]:.4f} -> {ks[800]:.4f}")
    if slowest > 300:
        problems.append(f"slowest cell {slowest:.0f}s")
    detail = ", ".join(f"{k} {v:.4f}" for k, v in worst.items())
    ok = not problems
    assert verdict("6 asymptotic normality", ok,
                   f"worst {detail}; slowest n=200 cell {slowest:.1f}s"
                   + (f"; failures {problems}" if problems else ""))


def test_7_condition_diagnostics(verdict):
    ns = [2**k for k in range(6, 15)]
    failing, bands = [], {}
    for family in ScoreFamily:
        rep = condition_diagnostics(family, ns)
        bands[family.value] = rep.band_ratio()
        if rep.verdict != "pass" or rep.band_ratio() > 4:
            s2 = ", ".join(f"{r.scaled_s2:.3f}" for r in rep.rows[:3])
            failing.append(f"{family.value} (verdict {rep.verdict}, scaled_s2 starts {s2}, ...)")
    band = ", ".join(f"{k} {v:.2f}" for k, v in bands.items())
    ok = not failing
    assert verdict("7 condition diagnostics", ok,
                   f"band ratios {band}" + (f"; failing {failing}" if failing else ""))


@pytest.mark.slow
def test_8_determinism(verdict, tmp_path):
    runs = [
        ["--rule", "complete", "--stat", "plain"],
        ["--rule", "wei", "--alpha", "1", "--beta", "1", "--stat", "centered"],
        ["--rule", "tbd", "--stat", "tbd", "--scores", "savage"],
    ]
    differing = []
    for i, flags in enumerate(runs):
        outputs = []
        for threads in ("1", "4", "8"):
            out = tmp_path / f"run{i}_{threads}.csv"
            env = {**os.environ, "RANDRANK_THREADS": threads}
            subprocess.run(
                [sys.executable, "-m", "randrank", "simulate", *flags, "--n", "60", "--m", "5000",
                 "--seed", str(SEED), "--format", "csv", "--out", str(out)],
                check=True, env=env,
            )
            outputs.append(out.read_bytes())
        if not (outputs[0] == outputs[1] == outputs[2]):
            differing.append(" ".join(flags))
    ok = not differing
    assert verdict("8 determinism", ok,
                   f"{len(runs)} simulate invocations x RANDRANK_THREADS 1/4/8, differing {differing}")

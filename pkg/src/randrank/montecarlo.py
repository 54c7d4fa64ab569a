"""Seeded, reproducible Monte Carlo for the rank statistics.

Replicate ``r`` draws from a Philox stream keyed by ``seed`` whose counter
starts at ``r`` in the high word, so each replicate's randomness depends on
``(seed, r)`` only. Replicates are processed in fixed-size blocks and merged by
index, which makes the sample independent of the worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from randrank.errors import ValidationError
from randrank.rankstats import StatisticKind, check_kind, tail_weights
from randrank.rules import RuleSpec, check_n, prob_treatment_array
from randrank.scores import (
    RawScores,
    ScoreFamily,
    normal_cdf,
    normal_quantile,
    normalize,
    normalized_family,
)
from randrank.tau import tau_pmf

BLOCK_SIZE = 2048
REPORT_QUANTILES = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)
RANK_MODES = ("random", "identity")
THREADS_ENV = "RANDRANK_THREADS"


@dataclass(frozen=True)
class SimConfig:
    rule: RuleSpec
    n: int
    replications: int
    seed: int
    statistic: StatisticKind = StatisticKind.PLAIN
    score_family: Optional[ScoreFamily] = ScoreFamily.WILCOXON
    raw_scores: Optional[RawScores] = None
    rank_mode: str = "random"

    def __post_init__(self):
        check_n(self.n)
        object.__setattr__(self, "statistic", StatisticKind(self.statistic))
        if self.replications < 1:
            raise ValidationError(f"replications must be positive, got {self.replications}")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        if self.rank_mode not in RANK_MODES:
            raise ValidationError(f"rank_mode must be one of {RANK_MODES}")
        if (self.score_family is None) == (self.raw_scores is None):
            raise ValidationError("give exactly one of score_family or raw_scores")
        if self.raw_scores is not None and self.raw_scores.n != self.n:
            raise ValidationError("raw scores length must equal n")
        check_kind(self.rule, self.statistic)

    def base_scores(self) -> np.ndarray:
        """Normalized scores indexed by rank (family) or by position (explicit)."""
        if self.raw_scores is not None:
            return normalize(self.raw_scores).s
        return normalized_family(self.score_family, self.n).s

    def echo(self) -> dict:
        return {
            "rule": self.rule.kind.value,
            "alpha": self.rule.alpha,
            "beta": self.rule.beta,
            "n": self.n,
            "replications": self.replications,
            "seed": self.seed,
            "statistic": self.statistic.value,
            "scores": self.score_family.value if self.score_family else "explicit",
            "rank_mode": self.rank_mode,
        }


def replicate_stream(seed: int, r: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, r]))


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return min(8, os.cpu_count() or 1)
    try:
        count = int(raw)
    except ValueError:
        raise ValidationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if count < 1:
        raise ValidationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return count


def simulate_assignments(rule: RuleSpec, u: np.ndarray):
    """Run ``rule`` on a (replicates x n) matrix of uniforms.

    Returns the assignment matrix, the conditional expectations E(T_j | past),
    and the mask of positions assigned before either arm filled up.
    """
    reps, n = u.shape
    half = n // 2
    t = np.empty((reps, n))
    e = np.empty((reps, n))
    open_arm = np.empty((reps, n), dtype=bool)
    s_plus = np.zeros(reps, dtype=np.int64)
    for j in range(n):
        p = prob_treatment_array(rule, n, j, s_plus)
        open_arm[:, j] = np.maximum(s_plus, j - s_plus) < half
        e[:, j] = 2.0 * p - 1.0
        plus = u[:, j] < p
        t[:, j] = np.where(plus, 1.0, -1.0)
        s_plus += plus
    return t, e, open_arm


def _draw_block(config: SimConfig, start: int, stop: int):
    n = config.n
    u = np.empty((stop - start, n))
    perms = np.empty((stop - start, n), dtype=np.int64) if config.rank_mode == "random" else None
    for i, r in enumerate(range(start, stop)):
        g = replicate_stream(config.seed, r)
        if perms is not None:
            perms[i] = g.permutation(n)
        u[i] = g.random(n)
    return u, perms


def _block_statistics(config: SimConfig, base: np.ndarray, weights, start: int, stop: int):
    u, perms = _draw_block(config, start, stop)
    s = base[perms] if perms is not None else np.broadcast_to(base, u.shape)
    t, e, open_arm = simulate_assignments(config.rule, u)
    if config.statistic is StatisticKind.PLAIN:
        return (s * t).sum(axis=1)
    if config.statistic is StatisticKind.CENTERED:
        return (s * (t - e)).sum(axis=1)
    v = (s * s) @ weights
    return (s * t * open_arm).sum(axis=1) / np.sqrt(v)


def run_simulation(config: SimConfig, workers: Optional[int] = None) -> np.ndarray:
    """M statistic values in replicate order; identical for any ``workers``."""
    base = config.base_scores()
    weights = tail_weights(tau_pmf(config.n)) if config.statistic is StatisticKind.TBD_STOPPED else None
    m = config.replications
    blocks = [(lo, min(lo + BLOCK_SIZE, m)) for lo in range(0, m, BLOCK_SIZE)]
    workers = worker_count() if workers is None else workers

    def job(bounds):
        return _block_statistics(config, base, weights, *bounds)

    if workers == 1 or len(blocks) == 1:
        parts = [job(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, blocks))
    return np.concatenate(parts)


@dataclass
class NormalityReport:
    ks: float
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    quantiles: dict
    m: int
    variance_convention: str = "population (divide by m)"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["quantiles"] = {f"{p:g}": q for p, q in self.quantiles.items()}
        return d


def ks_distance(sample) -> float:
    """sup_x |F_m(x) - Phi(x)| evaluated at the sorted sample points."""
    x = np.sort(np.asarray(sample, dtype=float))
    m = x.size
    if m == 0:
        raise ValidationError("empty sample")
    cdf = normal_cdf(x)
    upper = np.arange(1, m + 1) / m - cdf
    lower = cdf - np.arange(0, m) / m
    return float(max(upper.max(), lower.max()))


def normality_report(sample) -> NormalityReport:
    x = np.asarray(sample, dtype=float)
    m = x.size
    if m < 2:
        raise ValidationError("normality report needs at least two values")
    mean = float(x.mean())
    d = x - mean
    m2 = float(np.mean(d**2))
    m3 = float(np.mean(d**3))
    m4 = float(np.mean(d**4))
    skew = m3 / m2**1.5 if m2 > 0 else math.nan
    kurt = m4 / m2**2 - 3.0 if m2 > 0 else math.nan
    qs = np.quantile(x, REPORT_QUANTILES)
    return NormalityReport(
        ks=ks_distance(x),
        mean=mean,
        variance=m2,
        skewness=skew,
        excess_kurtosis=kurt,
        quantiles={p: float(q) for p, q in zip(REPORT_QUANTILES, qs)},
        m=m,
    )


def qq_points(sample, count: int) -> list[tuple[float, float]]:
    """(normal quantile, sample quantile) pairs at plotting positions (i - 0.5)/count."""
    x = np.asarray(sample, dtype=float)
    if not 1 <= count <= x.size:
        raise ValidationError(f"count must lie in [1, {x.size}], got {count}")
    probs = (np.arange(1, count + 1) - 0.5) / count
    theory = normal_quantile(probs)
    empirical = np.quantile(x, probs, method="hazen")
    return list(zip(theory.tolist(), empirical.tolist()))


@dataclass
class DecayRow:
    n: int
    j: int
    mean_abs_cond_expectation: float


@dataclass
class DecayReport:
    rule: str
    rows: list = field(default_factory=list)

    def values(self, j_is_n: bool = True) -> list[float]:
        return [r.mean_abs_cond_expectation for r in self.rows if (r.j == r.n) == j_is_n]


def cond_expectation_decay(
    rule: RuleSpec,
    ns: Sequence[int],
    replications: int,
    seed: int,
    positions: Sequence[float] = (1.0,),
) -> DecayReport:
    """Average |E(T_j | past)| at ``j = ceil(f n)`` for each fraction ``f`` in ``positions``."""
    if replications < 1:
        raise ValidationError("replications must be positive")
    report = DecayReport(rule.label())
    for n in ns:
        n = check_n(n)
        u = np.empty((replications, n))
        for r in range(replications):
            u[r] = replicate_stream(seed, r).random(n)
        _, e, _ = simulate_assignments(rule, u)
        for f in positions:
            j = min(n, max(1, math.ceil(f * n)))
            report.rows.append(DecayRow(n, j, float(np.abs(e[:, j - 1]).mean())))
    return report

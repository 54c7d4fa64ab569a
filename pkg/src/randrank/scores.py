"""Rank scores, normalization, and score-regularity diagnostics."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy import special

from randrank.errors import DegenerateScoresError, DomainError, ValidationError

# Wichura (1988) AS241 PPND16 coefficients, lowest order first.
_A = (3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4, 2.5090809287301226727e3)
_B = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
      2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
      5.2264952788528545610e3)
_C = (1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4)
_D = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9)
_E = (6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15)


def _poly(coef, x):
    acc = coef[-1]
    for c in reversed(coef[:-1]):
        acc = acc * x + c
    return acc


def normal_quantile(p):
    """Inverse standard normal CDF (AS241, about 1e-16 relative accuracy).

    Accepts a scalar or array; raises ``DomainError`` unless 0 < p < 1.
    """
    arr = np.asarray(p, dtype=float)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise DomainError("normal_quantile requires 0 < p < 1")
    q = arr - 0.5
    out = np.empty_like(arr)

    central = np.abs(q) <= 0.425
    if np.any(central):
        qc = q[central]
        r = 0.180625 - qc * qc
        out[central] = qc * _poly(_A, r) / _poly(_B, r)

    tail = ~central
    if np.any(tail):
        pt = arr[tail]
        r = np.sqrt(-np.log(np.minimum(pt, 1.0 - pt)))
        x = np.where(
            r <= 5.0,
            _poly(_C, r - 1.6) / _poly(_D, r - 1.6),
            _poly(_E, r - 5.0) / _poly(_F, r - 5.0),
        )
        out[tail] = np.where(q[tail] < 0.0, -x, x)

    if out.ndim == 0:
        return float(out)
    return out


def normal_cdf(x):
    """Standard normal CDF via the complementary error function."""
    if np.ndim(x) == 0:
        return 0.5 * math.erfc(-float(x) / math.sqrt(2.0))
    return special.ndtr(np.asarray(x, dtype=float))


class ScoreFamily(str, enum.Enum):
    MEDIAN = "median"
    WILCOXON = "wilcoxon"
    VAN_DER_WAERDEN = "vdw"
    SAVAGE = "savage"

    @classmethod
    def parse(cls, name: str) -> ScoreFamily:
        aliases = {"van-der-waerden": "vdw", "van_der_waerden": "vdw", "normal": "vdw"}
        try:
            return cls(aliases.get(name.lower(), name.lower()))
        except ValueError:
            raise ValidationError(f"unknown score family {name!r}") from None


@dataclass(frozen=True)
class RankVector:
    ranks: tuple

    def __post_init__(self):
        ranks = tuple(int(r) for r in self.ranks)
        if not ranks:
            raise ValidationError("rank vector is empty")
        if sorted(ranks) != list(range(1, len(ranks) + 1)):
            raise ValidationError("ranks must be a permutation of 1..n (ties are not supported)")
        object.__setattr__(self, "ranks", ranks)

    @classmethod
    def identity(cls, n: int) -> RankVector:
        return cls(tuple(range(1, n + 1)))

    @classmethod
    def from_outcomes(cls, y: Sequence[float]) -> RankVector:
        """Rank raw outcomes (1 = smallest); tied outcomes are rejected."""
        y = np.asarray(y, dtype=float)
        if len(np.unique(y)) != len(y):
            raise ValidationError("tied outcomes cannot be ranked without midranks")
        ranks = np.empty(len(y), dtype=int)
        ranks[np.argsort(y, kind="stable")] = np.arange(1, len(y) + 1)
        return cls(tuple(ranks))

    @property
    def n(self) -> int:
        return len(self.ranks)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.ranks, dtype=np.int64)


@dataclass(frozen=True)
class RawScores:
    a: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        if a.ndim != 1 or a.size == 0:
            raise ValidationError("scores must be a nonempty 1-d sequence")
        if not np.all(np.isfinite(a)):
            raise ValidationError("scores must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @property
    def n(self) -> int:
        return self.a.size


@dataclass(frozen=True)
class NormalizedScores:
    s: np.ndarray

    def __post_init__(self):
        s = np.array(self.s, dtype=float)
        if abs(s.sum()) > 1e-12 or abs(np.dot(s, s) - 1.0) > 1e-12:
            raise ValidationError("normalized scores must have zero sum and unit sum of squares")
        s.setflags(write=False)
        object.__setattr__(self, "s", s)

    @property
    def n(self) -> int:
        return self.s.size


def median_scores(r: RankVector) -> RawScores:
    ranks = r.as_array()
    return RawScores((2 * ranks > r.n + 1).astype(float))


def wilcoxon_scores(r: RankVector) -> RawScores:
    return RawScores(r.as_array().astype(float))


def van_der_waerden_scores(r: RankVector) -> RawScores:
    return RawScores(normal_quantile(r.as_array() / (r.n + 1.0)))


def savage_scores(r: RankVector) -> RawScores:
    n = r.n
    # cumulative[k-1] = sum_{i=1..k} 1/(n - i + 1)
    cumulative = np.cumsum(1.0 / np.arange(n, 0, -1))
    return RawScores(cumulative[r.as_array() - 1] - 1.0)


_FAMILY_FUNCS = {
    ScoreFamily.MEDIAN: median_scores,
    ScoreFamily.WILCOXON: wilcoxon_scores,
    ScoreFamily.VAN_DER_WAERDEN: van_der_waerden_scores,
    ScoreFamily.SAVAGE: savage_scores,
}


def family_scores(family: Union[ScoreFamily, str], r: RankVector) -> RawScores:
    if isinstance(family, str):
        family = ScoreFamily.parse(family)
    return _FAMILY_FUNCS[family](r)


def normalize(a: RawScores) -> NormalizedScores:
    if np.ptp(a.a) == 0.0:
        raise DegenerateScoresError("scores are all equal; normalization is undefined")
    centered = a.a - a.a.mean()
    centered -= centered.mean()  # second pass removes rounding left by a large mean
    ss = float(np.dot(centered, centered))
    return NormalizedScores(centered / math.sqrt(ss))


def normalized_family(family: Union[ScoreFamily, str], n: int) -> NormalizedScores:
    """Normalized scores at the identity ranking."""
    return normalize(family_scores(family, RankVector.identity(n)))


# growth order of max_j s_{n,j}^2 for each family
FAMILY_ORDER: dict[ScoreFamily, Callable[[int], float]] = {
    ScoreFamily.MEDIAN: lambda n: 1.0 / n,
    ScoreFamily.WILCOXON: lambda n: 1.0 / n,
    ScoreFamily.VAN_DER_WAERDEN: lambda n: math.log(n) / n,
    ScoreFamily.SAVAGE: lambda n: math.log(n) ** 2 / n,
}


@dataclass
class ConditionRow:
    n: int
    max_s_sq: float
    tail_max_s_sq: float
    scaled_s1: float
    scaled_s2: float
    order_ratio: float = math.nan


@dataclass
class ConditionReport:
    family: str
    rows: list = field(default_factory=list)

    COLUMNS = ("n", "max_s_sq", "tail_max_s_sq", "scaled_s1", "scaled_s2", "order_ratio")

    @property
    def verdict(self) -> str:
        """``pass`` when both scaled tail columns strictly decrease in n."""
        s1 = [row.scaled_s1 for row in self.rows]
        s2 = [row.scaled_s2 for row in self.rows]
        ok = all(b < a for a, b in zip(s1, s1[1:])) and all(b < a for a, b in zip(s2, s2[1:]))
        return "pass" if ok else "fail"

    def band_ratio(self) -> float:
        """max/min of ``max_s_sq / order`` over the range (nan without an order)."""
        ratios = [row.order_ratio for row in self.rows]
        if any(math.isnan(r) for r in ratios):
            return math.nan
        return max(ratios) / min(ratios)


def spike_scores(n: int) -> RawScores:
    """One dominant score at the last position; violates max |s| -> 0."""
    a = np.zeros(n)
    a[-1] = 1.0
    return RawScores(a)


def condition_diagnostics(family, ns: Sequence[int]) -> ConditionReport:
    """Tabulate max s^2 and its sqrt(n), sqrt(n ln n) scalings over ``ns``.

    ``family`` is a ``ScoreFamily`` (or its name) evaluated at the identity
    ranking, or a callable ``n -> RawScores``. The tail maximum over
    positions n/2..n is reported at its worst case, the global maximum, since
    any rank permutation can move the largest score into the tail.
    """
    ns = list(ns)
    if not ns:
        raise ValidationError("need at least one n")
    for n in ns:
        if n < 4 or n % 2:
            raise ValidationError(f"diagnostic n must be even and >= 4, got {n}")

    if callable(family) and not isinstance(family, (str, ScoreFamily)):
        make, order, label = family, None, getattr(family, "__name__", "custom")
    else:
        fam = ScoreFamily.parse(family) if isinstance(family, str) else family
        make = lambda n, fam=fam: family_scores(fam, RankVector.identity(n))  # noqa: E731
        order, label = FAMILY_ORDER[fam], fam.value

    report = ConditionReport(label)
    for n in ns:
        s = normalize(make(n)).s
        max_sq = float(np.max(s * s))
        tail = max_sq
        report.rows.append(ConditionRow(
            n=n,
            max_s_sq=max_sq,
            tail_max_s_sq=tail,
            scaled_s1=tail * math.sqrt(n),
            scaled_s2=tail * math.sqrt(n * math.log(n)),
            order_ratio=max_sq / order(n) if order else math.nan,
        ))
    return report

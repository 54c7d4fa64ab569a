"""Distribution of the tail length of the truncated binomial design.

Once one arm holds n/2 patients the remaining assignments are forced; the
number of forced assignments ``tau`` takes values 1..n/2 with

    P(tau = k) = C(n-k-1, n/2-1) / 2^(n-k-1).

That is the Binomial(n-k-1, 1/2) pmf evaluated at n/2-1, which is how large
``n`` is handled.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy import special, stats

from randrank.errors import ValidationError
from randrank.rules import check_n

EXACT_MAX_N = 64


@dataclass(frozen=True)
class TauPmf:
    n: int
    p: np.ndarray  # p[k-1] = P(tau = k)
    exact: Optional[tuple] = None  # Fractions, present for n <= EXACT_MAX_N

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.shape != (self.n // 2,):
            raise ValidationError(f"pmf for n={self.n} needs {self.n // 2} entries")
        if np.any(p < 0) or abs(math.fsum(p) - 1.0) > 1e-12:
            raise ValidationError("tau pmf must be nonnegative and sum to one")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def support(self) -> np.ndarray:
        return np.arange(1, self.n // 2 + 1)

    def cdf_array(self) -> np.ndarray:
        """F(k) for k = 1..n/2, last entry pinned to 1."""
        cdf = np.cumsum(self.p)
        cdf[-1] = 1.0
        return np.minimum(cdf, 1.0)


def _exact_probs(n: int) -> tuple:
    half = n // 2
    return tuple(
        Fraction(math.comb(n - k - 1, half - 1), 2 ** (n - k - 1)) for k in range(1, half + 1)
    )


def tau_pmf(n: int) -> TauPmf:
    n = check_n(n)
    if n <= EXACT_MAX_N:
        exact = _exact_probs(n)
        return TauPmf(n, np.array([float(x) for x in exact]), exact)
    k = np.arange(1, n // 2 + 1)
    return TauPmf(n, stats.binom.pmf(n // 2 - 1, n - k - 1, 0.5))


def tau_cdf(pmf: TauPmf, k: int) -> float:
    """P(tau <= k); 0 for k <= 0 and 1 for k >= n/2."""
    if k <= 0:
        return 0.0
    if k >= pmf.n // 2:
        return 1.0
    return math.fsum(pmf.p[:k])


def tau_cdf_exact(pmf: TauPmf, k: int) -> Fraction:
    if pmf.exact is None:
        raise ValidationError(f"no exact pmf stored for n={pmf.n}")
    if k <= 0:
        return Fraction(0)
    if k >= pmf.n // 2:
        return Fraction(1)
    return sum(pmf.exact[:k], Fraction(0))


def tau_mean(n: int) -> float:
    """E tau = n C(n, n/2) / 2^n."""
    n = check_n(n)
    if n <= EXACT_MAX_N:
        return float(Fraction(n * math.comb(n, n // 2), 2**n))
    return float(n * stats.binom.pmf(n // 2, n, 0.5))


def sample_tau(pmf: TauPmf, u: float) -> int:
    """Inversion sampling: the smallest k with P(tau <= k) > u."""
    if not 0.0 <= u < 1.0:
        raise ValidationError(f"uniform draw must lie in [0, 1), got {u}")
    k = bisect.bisect_right(list(pmf.cdf_array()), u) + 1
    return min(k, pmf.n // 2)


def folded_normal_cdf(x):
    """P(|Z| <= x) for x >= 0."""
    return special.erf(np.asarray(x, dtype=float) / math.sqrt(2.0))


def tau_limit_distance(n: int) -> float:
    """Kolmogorov distance between tau/sqrt(n) and |Z| over the integer support."""
    pmf = tau_pmf(n)
    k = pmf.support
    gap = np.abs(pmf.cdf_array() - folded_normal_cdf(k / math.sqrt(n)))
    return float(gap.max())

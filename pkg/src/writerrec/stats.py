"""Paired and normality tests for intra-user distance sets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtr
from scipy.stats import rankdata

from .errors import AllZeroDifferences, LengthMismatch, TooFewSamples, ZeroVariance

EXACT_MAX_N = 25
MC_REPLICATES = 10_000


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # keep pytest from collecting this class

    statistic: float
    p_value: float
    n_effective: int
    method: str  # "WilcoxonSignedRank" | "Lilliefors"
    mode: str  # "Exact" | "Approximate" | "MonteCarlo"
    null_hypothesis: str = ""

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "mode": self.mode,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "n_effective": self.n_effective,
        }


def _signed_rank_counts(doubled_ranks) -> np.ndarray:
    """``counts[s]`` = number of sign assignments whose doubled positive-rank sum is ``s``."""
    counts = np.zeros(int(sum(doubled_ranks)) + 1, dtype=object)
    counts[0] = 1
    top = 0
    for r in doubled_ranks:
        counts[r:top + r + 1] = counts[r:top + r + 1] + counts[:top + 1].copy()
        top += r
    return counts


def wilcoxon_signed_rank(a, b, exact_max_n: int = EXACT_MAX_N) -> TestResult:
    """Two-sided signed-rank test on paired samples.

    Zero differences are dropped and tied magnitudes get average ranks. The
    statistic is the sum of ranks of positive differences. Up to
    ``exact_max_n`` non-zero pairs the p-value counts all ``2**n`` sign
    assignments (with the tied ranks as given); above that it uses the normal
    approximation with tie and continuity corrections.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise LengthMismatch(f"paired samples differ in length: {a.size} vs {b.size}")
    d = a - b
    d = d[d != 0]
    n = d.size
    if n == 0:
        raise AllZeroDifferences("every paired difference is zero")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    h0 = "the paired differences are symmetric about zero"

    if n <= exact_max_n:
        # average ranks are multiples of 1/2, so doubled ranks are exact integers
        doubled = [int(round(2 * r)) for r in ranks]
        counts = _signed_rank_counts(doubled)
        total = sum(doubled)  # doubled maximum statistic
        obs = int(round(2 * w_plus))
        dev = abs(2 * obs - total)
        sums = np.arange(len(counts))
        extreme = int(counts[np.abs(2 * sums - total) >= dev].sum())
        p = extreme / 2 ** n
        return TestResult(w_plus, min(1.0, float(p)), n, "WilcoxonSignedRank", "Exact", h0)

    mean = n * (n + 1) / 4.0
    _, tie_sizes = np.unique(np.abs(d), return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float((tie_sizes ** 3 - tie_sizes).sum()) / 48.0
    z = max(abs(w_plus - mean) - 0.5, 0.0) / math.sqrt(var)
    p = math.erfc(z / math.sqrt(2.0))
    return TestResult(w_plus, min(1.0, p), n, "WilcoxonSignedRank", "Approximate", h0)


def _ks_normal(samples: np.ndarray) -> np.ndarray:
    """KS distance of each row to a normal fitted with that row's mean and std (ddof=1)."""
    x = np.sort(samples, axis=-1)
    n = x.shape[-1]
    mu = x.mean(axis=-1, keepdims=True)
    sd = x.std(axis=-1, ddof=1, keepdims=True)
    cdf = ndtr((x - mu) / sd)
    i = np.arange(1, n + 1)
    d_plus = (i / n - cdf).max(axis=-1)
    d_minus = (cdf - (i - 1) / n).max(axis=-1)
    return np.maximum(d_plus, d_minus)


@lru_cache(maxsize=64)
def _null_statistics(n: int, replicates: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng([seed, n])
    out = np.empty(replicates)
    chunk = max(1, 200_000 // n)
    for start in range(0, replicates, chunk):
        stop = min(replicates, start + chunk)
        out[start:stop] = _ks_normal(rng.standard_normal((stop - start, n)))
    out.sort()
    out.setflags(write=False)
    return out


def lilliefors_test(sample, replicates: int = MC_REPLICATES, seed: int = 0) -> TestResult:
    """Lilliefors normality test with a Monte Carlo null distribution.

    The p-value is the fraction of ``replicates`` simulated normal samples of
    the same size whose statistic is at least the observed one. The simulated
    statistics depend only on ``(n, replicates, seed)`` and are cached.
    """
    x = np.asarray(sample, dtype=np.float64).ravel()
    if x.size < 4:
        raise TooFewSamples(f"need at least 4 observations, got {x.size}")
    if np.ptp(x) == 0:
        raise ZeroVariance("sample has zero variance")
    stat = float(_ks_normal(x))
    null = _null_statistics(x.size, replicates, seed)
    # tolerate last-ulp differences between the observed and simulated paths
    p = (null.size - np.searchsorted(null, stat * (1 - 1e-12), side="left")) / null.size
    return TestResult(stat, float(p), int(x.size), "Lilliefors", "MonteCarlo",
                      "the sample comes from some normal distribution")

"""Dynamic time warping over feature sequences."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import DimensionMismatch, EmptyReferenceSet, InvalidParams

METRICS = ("euclidean", "manhattan")


@dataclass(frozen=True)
class DtwConfig:
    local_metric: str = "euclidean"
    normalize_by_path: bool = True

    def __post_init__(self):
        if self.local_metric not in METRICS:
            raise InvalidParams(f"unknown local metric {self.local_metric!r}")


@numba.njit(cache=True, nogil=True)
def _accumulate(a, b, manhattan):
    l1, l2 = a.shape[0], b.shape[0]
    dim = a.shape[1]
    prev = np.full(l2 + 1, np.inf)
    cur = np.empty(l2 + 1)
    prev[0] = 0.0
    for i in range(1, l1 + 1):
        cur[0] = np.inf
        for j in range(1, l2 + 1):
            cost = 0.0
            if manhattan:
                for k in range(dim):
                    cost += abs(a[i - 1, k] - b[j - 1, k])
            else:
                for k in range(dim):
                    d = a[i - 1, k] - b[j - 1, k]
                    cost += d * d
                cost = np.sqrt(cost)
            best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            if prev[j - 1] < best:
                best = prev[j - 1]
            cur[j] = cost + best
        prev, cur = cur, prev
    return prev[l2]


def _as_2d(seq) -> np.ndarray:
    arr = np.asarray(seq, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise DimensionMismatch(f"expected a non-empty (length, dim) sequence, got shape {arr.shape}")
    return np.ascontiguousarray(arr)


def dtw_distance(a, b, cfg: DtwConfig = DtwConfig()) -> float:
    """Accumulated cost of the best monotone alignment of ``a`` and ``b``.

    No band constraint. With ``normalize_by_path`` the cost is divided by
    ``len(a) + len(b)``.
    """
    a, b = _as_2d(a), _as_2d(b)
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"dims differ: {a.shape[1]} vs {b.shape[1]}")
    total = float(_accumulate(a, b, cfg.local_metric == "manhattan"))
    if cfg.normalize_by_path:
        total /= a.shape[0] + b.shape[0]
    return total


def aggregate_reference(probe, refs, mode: str = "min", cfg: DtwConfig = DtwConfig()) -> float:
    """Collapse the distances from ``probe`` to several references into one."""
    if len(refs) == 0:
        raise EmptyReferenceSet("no reference sequences")
    dists = [dtw_distance(probe, r, cfg) for r in refs]
    if mode == "min":
        return min(dists)
    if mode == "mean":
        return float(np.mean(dists))
    raise InvalidParams(f"unknown aggregation mode {mode!r}")

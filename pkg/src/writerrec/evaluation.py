"""Identification and verification metrics over dissimilarity matrices.

Lower scores mean more similar: a claim is accepted when the dissimilarity is
at or below the threshold, and identification picks the model with the
smallest dissimilarity.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, NamedTuple, Sequence

import numpy as np

from .errors import DataError, NoGenuine, NoImpostor, ScoringError, WriterRecError


@dataclass(frozen=True)
class Probe:
    key: str
    subject: str
    data: Any
    phase: str = ""
    task: str = ""


@dataclass(frozen=True)
class Model:
    subject: str
    data: Any


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    scores: np.ndarray  # (n_probes, n_models)
    probe_keys: tuple
    model_ids: tuple
    true_model: np.ndarray  # column index of each probe's own model
    probe_meta: tuple = ()

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        if s.ndim != 2 or s.shape != (len(self.probe_keys), len(self.model_ids)):
            raise DataError(f"score grid shape {s.shape} does not match labels")
        true = np.asarray(self.true_model, dtype=np.intp)
        if true.shape != (s.shape[0],) or np.any(true < 0) or np.any(true >= s.shape[1]):
            raise DataError("every probe needs exactly one true model among the columns")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "true_model", true)

    @property
    def genuine_mask(self) -> np.ndarray:
        mask = np.zeros(self.scores.shape, dtype=bool)
        mask[np.arange(len(self.true_model)), self.true_model] = True
        return mask

    @property
    def genuine(self) -> np.ndarray:
        return self.scores[self.genuine_mask]

    @property
    def impostor(self) -> np.ndarray:
        return self.scores[~self.genuine_mask]

    def map(self, fn) -> "ScoreMatrix":
        return ScoreMatrix(fn(self.scores), self.probe_keys, self.model_ids,
                           self.true_model, self.probe_meta)


def build_score_matrix(probes: Sequence[Probe], models: Sequence[Model],
                       scorer: Callable[[Any, Any], float], jobs: int = 1) -> ScoreMatrix:
    """Score every probe against every model.

    Rows are assembled in input order whatever the worker count.
    """
    model_ids = tuple(m.subject for m in models)
    if len(set(model_ids)) != len(model_ids):
        raise DataError("duplicate model subjects")
    column = {sid: j for j, sid in enumerate(model_ids)}
    missing = [p.key for p in probes if p.subject not in column]
    if missing:
        raise DataError(f"probes without an enrolled model: {missing[:5]}")

    def row(p: Probe):
        out = []
        for m in models:
            try:
                out.append(float(scorer(p.data, m.data)))
            except WriterRecError as exc:
                raise ScoringError(p.key, m.subject, exc) from exc
        return out

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            rows = list(pool.map(row, probes))
    else:
        rows = [row(p) for p in probes]
    return ScoreMatrix(
        np.array(rows, dtype=np.float64).reshape(len(probes), len(models)),
        tuple(p.key for p in probes),
        model_ids,
        np.array([column[p.subject] for p in probes], dtype=np.intp),
        tuple({"phase": p.phase, "task": p.task} for p in probes),
    )


# --------------------------------------------------------------------------
# Identification

@dataclass(frozen=True)
class IdentificationReport:
    idr: float  # percent
    predicted: tuple
    ranks: tuple


def identify(m: ScoreMatrix) -> IdentificationReport:
    """Closed-set identification. A tie with the true model counts as a miss."""
    s = m.scores
    own = s[np.arange(len(s)), m.true_model][:, None]
    others = ~m.genuine_mask
    ranks = 1 + ((s < own) | ((s == own) & others)).sum(axis=1)
    predicted = tuple(m.model_ids[j] for j in s.argmin(axis=1)) if s.size else ()
    n = len(ranks)
    idr = 100.0 * float(np.sum(ranks == 1)) / n if n else 0.0
    return IdentificationReport(idr, predicted, tuple(int(r) for r in ranks))


# --------------------------------------------------------------------------
# Verification

class CurvePoint(NamedTuple):
    threshold: float
    far: float  # percent
    frr: float  # percent


@dataclass(frozen=True)
class VerificationReport:
    curve: tuple
    eer: float  # percent
    eer_threshold: float


def _check_scores(genuine, impostor):
    genuine = np.asarray(genuine, dtype=np.float64).ravel()
    impostor = np.asarray(impostor, dtype=np.float64).ravel()
    if genuine.size == 0:
        raise NoGenuine("no genuine scores")
    if impostor.size == 0:
        raise NoImpostor("no impostor scores")
    return genuine, impostor


def _sweep(genuine, impostor):
    """Thresholds with sentinels and FAR/FRR as fractions."""
    thresholds = np.concatenate([[-np.inf], np.unique(np.concatenate([genuine, impostor])), [np.inf]])
    g, i = np.sort(genuine), np.sort(impostor)
    far = np.searchsorted(i, thresholds, side="right") / len(i)
    frr = 1.0 - np.searchsorted(g, thresholds, side="right") / len(g)
    return thresholds, far, frr


def far_frr_curve_from_scores(genuine, impostor) -> list[CurvePoint]:
    genuine, impostor = _check_scores(genuine, impostor)
    t, far, frr = _sweep(genuine, impostor)
    return [CurvePoint(float(a), 100.0 * float(b), 100.0 * float(c)) for a, b, c in zip(t, far, frr)]


def far_frr_curve(m: ScoreMatrix) -> list[CurvePoint]:
    """Staircase of (threshold, FAR%, FRR%) over every distinct score plus ±inf."""
    return far_frr_curve_from_scores(m.genuine, m.impostor)


def _lower_hull(points):
    """Indices of the lower convex hull (monotone chain) of (far, frr) points."""
    order = sorted(range(len(points)), key=lambda k: (points[k][0], points[k][1], k))
    hull = []
    for k in order:
        while len(hull) >= 2:
            (x1, y1), (x2, y2), (x3, y3) = points[hull[-2]], points[hull[-1]], points[k]
            if (x2 - x1) * (y3 - y1) - (y2 - y1) * (x3 - x1) <= 0:
                hull.pop()
            else:
                break
        if not hull or points[hull[-1]] != points[k]:
            hull.append(k)
    return hull


def eer_from_scores(genuine, impostor) -> tuple[float, float]:
    """EER (percent) and its threshold.

    The EER is read where the convex hull of the FAR/FRR operating points meets
    FAR = FRR, interpolating linearly between the two hull vertices that
    straddle it.
    """
    genuine, impostor = _check_scores(genuine, impostor)
    t, far, frr = _sweep(genuine, impostor)
    points = list(zip(far.tolist(), frr.tolist()))
    hull = _lower_hull(points)
    gaps = [points[k][1] - points[k][0] for k in hull]
    k = next(n for n, g in enumerate(gaps) if g <= 0)
    if k == 0:
        return 100.0 * points[hull[0]][0], float(t[hull[0]])
    a, b = hull[k - 1], hull[k]
    lam = gaps[k - 1] / (gaps[k - 1] - gaps[k])
    eer = points[a][0] + lam * (points[b][0] - points[a][0])
    ta, tb = t[a], t[b]
    if math.isinf(ta):
        thr = tb
    elif math.isinf(tb):
        thr = ta
    else:
        thr = ta + lam * (tb - ta)
    return 100.0 * eer, float(thr)


def verify_eer(m: ScoreMatrix) -> VerificationReport:
    eer, thr = eer_from_scores(m.genuine, m.impostor)
    return VerificationReport(tuple(far_frr_curve(m)), eer, thr)


# --------------------------------------------------------------------------
# Report serialization

def _threshold_json(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def report_dict(m: ScoreMatrix, ident: IdentificationReport, verif: VerificationReport) -> dict:
    """JSON-ready report with a fixed key order."""
    return {
        "idr": ident.idr,
        "eer": verif.eer,
        "eer_threshold": _threshold_json(verif.eer_threshold),
        "n_probes": len(m.probe_keys),
        "n_models": len(m.model_ids),
        "curve": [{"threshold": _threshold_json(p.threshold), "far": p.far, "frr": p.frr}
                  for p in verif.curve],
        "per_probe": [
            {"probe": key, "true": m.model_ids[j], "predicted": pred, "rank": rank}
            for key, j, pred, rank in zip(m.probe_keys, m.true_model, ident.predicted, ident.ranks)
        ],
    }


def evaluate(m: ScoreMatrix) -> dict:
    return report_dict(m, identify(m), verify_eer(m))

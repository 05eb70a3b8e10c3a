"""Deterministic synthetic handwriting corpus with a tunable fatigue distortion.

Every writer owns a signature (two to four pen-down strokes built from
spline control points) and a personal allograph choice for each uppercase
letter of the four task words. A record is rendered from the writer's
template after per-record noise and the phase's fatigue distortion:

* vertical size ``* (1 + vertical_gain * f * u)``
* horizontal size ``* (1 + horizontal_gain * f * u)``
* duration ``* (1 + timing_gain * f * u)`` plus per-stroke tempo jitter
* per-sample coordinate jitter with std ``jitter_scale * f * height``

with ``f`` the phase's fatigue level and each ``u`` drawn from U[0.5, 1.5].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidParams
from .ink import PHASES, TASKS, WORDS, InkRecord, Phase, PhaseLabel

ALPHABET = sorted(set("".join(WORDS.values())))


@dataclass(frozen=True)
class SynthParams:
    n_writers: int = 20
    seed: int = 0
    fatigue: tuple = (0.0, 0.2, 0.8, 0.5)  # BASE, MEIF, SEIF, POST_SEIF
    signature_strokes: tuple = (2, 4)  # pen-down strokes, inclusive range
    base_amplitude: float = 1000.0  # signature height, device units
    amplitude_spread: float = 0.25
    base_tempo: float = 90.0  # ms per control-point segment
    tempo_spread: float = 0.25
    sample_period: float = 10.0  # ms
    intra_noise: float = 1.0  # scales baseline record-to-record variability
    allograph_variants: int = 3
    canonical_share: float = 0.8  # probability a writer uses the first allograph of a letter
    quirk_scale: float = 0.03  # writer-specific allograph deformation
    jitter_scale: float = 0.2
    vertical_gain: float = 0.3
    horizontal_gain: float = 0.15
    timing_gain: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "fatigue", tuple(float(f) for f in self.fatigue))
        if self.n_writers < 2:
            raise InvalidParams(f"need at least 2 writers, got {self.n_writers}")
        if len(self.fatigue) != len(PHASES):
            raise InvalidParams(f"need one fatigue level per phase ({len(PHASES)}), got {len(self.fatigue)}")
        if any(not 0.0 <= f <= 1.0 for f in self.fatigue):
            raise InvalidParams(f"fatigue levels must lie in [0, 1], got {self.fatigue}")
        lo, hi = self.signature_strokes
        if not 1 <= lo <= hi:
            raise InvalidParams("bad signature stroke range")
        if min(self.base_amplitude, self.base_tempo, self.sample_period) <= 0:
            raise InvalidParams("amplitude, tempo and sample period must be positive")
        if self.intra_noise < 0 or self.jitter_scale < 0 or self.allograph_variants < 1:
            raise InvalidParams("noise scales must be non-negative")
        if not 0.0 <= self.canonical_share <= 1.0 or self.quirk_scale < 0:
            raise InvalidParams("canonical_share must lie in [0, 1] and quirk_scale >= 0")
        if not (0 <= self.amplitude_spread < 1 and 0 <= self.tempo_spread < 1):
            raise InvalidParams("spreads must lie in [0, 1)")

    def fatigue_of(self, phase) -> float:
        return self.fatigue[PHASES.index(Phase(phase))]


@dataclass
class _Segment:
    on_surface: bool
    ctrl: np.ndarray  # (k, 2) control points, device units
    duration: float  # ms


@dataclass
class _Writer:
    height: float
    tempo: float
    pressure: float
    slant: float
    signature: list  # list of (k, 2) control arrays in units of height
    sig_gaps: list
    variants: dict  # letter -> allograph index
    quirks: dict  # letter -> list of per-stroke control offsets
    letter_width: float
    spacing: float
    lift: float
    word_height: float


def _alphabet(params: SynthParams) -> dict:
    """letter -> list of variants, each a list of strokes in a unit letter box."""
    rng = np.random.default_rng([params.seed, 1])
    out = {}
    for letter in ALPHABET:
        variants = []
        for _ in range(params.allograph_variants):
            strokes = []
            for _ in range(int(rng.integers(1, 4))):
                k = int(rng.integers(3, 6))
                start = rng.uniform([0.0, 0.0], [0.8, 1.0])
                steps = rng.normal(0.0, 0.35, size=(k - 1, 2))
                pts = np.vstack([start, start + np.cumsum(steps, axis=0)])
                strokes.append(np.clip(pts, [-0.1, -0.1], [1.0, 1.1]))
            variants.append(strokes)
        out[letter] = variants
    return out


def _writer(params: SynthParams, index: int, alphabet: dict) -> _Writer:
    rng = np.random.default_rng([params.seed, 0, index])
    lo, hi = params.signature_strokes
    spread_a, spread_t = params.amplitude_spread, params.tempo_spread
    signature = []
    for _ in range(int(rng.integers(lo, hi + 1))):
        k = int(rng.integers(5, 9))
        width = rng.uniform(0.6, 1.4)
        xs = width * np.arange(k) / (k - 1) + rng.normal(0.0, 0.25 * width, k)
        ys = rng.normal(0.0, 0.45, k)
        signature.append(np.column_stack([xs, ys]))
    n_var = params.allograph_variants
    share = params.canonical_share if n_var > 1 else 1.0
    probs = np.array([share] + [(1.0 - share) / (n_var - 1)] * (n_var - 1))
    variants = {c: int(rng.choice(n_var, p=probs)) for c in ALPHABET}
    # idiosyncratic deformation of each chosen allograph
    quirks = {c: [rng.normal(0.0, params.quirk_scale, s.shape) for s in alphabet[c][variants[c]]]
              for c in ALPHABET}
    return _Writer(
        height=params.base_amplitude * rng.uniform(1 - spread_a, 1 + spread_a),
        tempo=params.base_tempo * rng.uniform(1 - spread_t, 1 + spread_t),
        pressure=rng.uniform(300.0, 700.0),
        slant=rng.uniform(-0.3, 0.3),
        signature=signature,
        sig_gaps=list(rng.uniform(0.15, 0.5, len(signature))),
        variants=variants,
        quirks=quirks,
        letter_width=rng.uniform(0.8, 1.2),
        spacing=rng.uniform(0.15, 0.45),
        lift=rng.uniform(0.05, 0.4),
        word_height=rng.uniform(0.4, 0.6),
    )


def _air_path(p0, p1, lift, n_mid=3):
    """Pen-up move from p0 to p1 arcing upward by ``lift`` (device units)."""
    s = np.linspace(0.0, 1.0, n_mid + 2)
    pts = p0 + np.outer(s, p1 - p0)
    pts[:, 1] += lift * np.sin(np.pi * s)
    return pts


def _signature_segments(w: _Writer, rng, noise: float) -> list:
    segs = []
    cursor = 0.0
    prev_end = None
    for ctrl, gap in zip(w.signature, w.sig_gaps):
        pts = ctrl + rng.normal(0.0, 0.04 * noise, ctrl.shape)
        pts = (pts + [cursor - ctrl[0, 0], 0.0]) * w.height
        if prev_end is not None:
            segs.append(_Segment(False, _air_path(prev_end, pts[0], 0.2 * w.height),
                                 w.tempo * (1.0 + 4.0 * gap)))
        segs.append(_Segment(True, pts, w.tempo * (len(pts) - 1)))
        prev_end = pts[-1]
        cursor += (ctrl[:, 0].max() - ctrl[0, 0]) + gap
    return segs


def _word_segments(w: _Writer, word: str, alphabet: dict, rng, noise: float) -> list:
    segs = []
    cursor = 0.0
    prev_end = None
    h = w.height * w.word_height
    for letter in word:
        strokes = alphabet[letter][w.variants[letter]]
        for stroke, quirk in zip(strokes, w.quirks[letter]):
            pts = stroke + quirk + rng.normal(0.0, 0.03 * noise, stroke.shape)
            pts = np.column_stack([pts[:, 0] * w.letter_width + cursor, pts[:, 1]]) * h
            if prev_end is not None:
                dist = np.hypot(*(pts[0] - prev_end)) / h
                segs.append(_Segment(False, _air_path(prev_end, pts[0], w.lift * h),
                                     w.tempo * (1.0 + 1.5 * dist)))
            segs.append(_Segment(True, pts, w.tempo * (len(pts) - 1)))
            prev_end = pts[-1]
        cursor += w.letter_width + w.spacing
    return segs


def _curve(ctrl: np.ndarray, n: int) -> np.ndarray:
    """Uniform Catmull-Rom curve through the control points, ``n`` samples."""
    k = len(ctrl)
    u = np.linspace(0.0, k - 1, n)
    i = np.minimum(u.astype(int), k - 2)
    s = (u - i)[:, None]
    pad = np.vstack([2 * ctrl[0] - ctrl[1], ctrl, 2 * ctrl[-1] - ctrl[-2]])
    p0, p1, p2, p3 = pad[i], pad[i + 1], pad[i + 2], pad[i + 3]
    return 0.5 * (2 * p1 + (p2 - p0) * s + (2 * p0 - 5 * p1 + 4 * p2 - p3) * s ** 2
                  + (3 * p1 - p0 - 3 * p2 + p3) * s ** 3)


def _render(segs: list, w: _Writer, params: SynthParams, f: float, rng):
    """Apply the fatigue distortion, sample the segments and return columns."""
    u_y, u_x, u_t = rng.uniform(0.5, 1.5, 3)
    sy = 1.0 + params.vertical_gain * f * u_y
    sx = 1.0 + params.horizontal_gain * f * u_x
    dilation = 1.0 + params.timing_gain * f * u_t
    jitter = params.jitter_scale * f * w.height
    base_jitter = 0.002 * params.intra_noise * w.height
    tempo_jitter = 0.5 * params.timing_gain * f
    scale = 1.0 + rng.normal(0.0, 0.03 * params.intra_noise)
    dt = params.sample_period

    xs, ys, ps, pens = [], [], [], []
    for seg in segs:
        pace = max(0.5, 1.0 + rng.normal(0.0, 0.05 * params.intra_noise) + rng.normal(0.0, tempo_jitter))
        n = max(2, int(round(seg.duration * dilation * pace / dt)))
        pts = _curve(seg.ctrl, n if seg.on_surface else n + 2)
        if not seg.on_surface:
            pts = pts[1:-1]  # endpoints belong to the neighbouring pen-down strokes
        m = len(pts)
        if seg.on_surface:
            s = np.linspace(0.0, 1.0, m)
            pressure = w.pressure * (0.6 + 0.4 * np.sin(np.pi * s)) * (1.0 + rng.normal(0.0, 0.02, m))
            ps.append(np.maximum(1.0, np.round(pressure)))
        else:
            ps.append(np.zeros(m))
        xs.append(pts[:, 0])
        ys.append(pts[:, 1])
        pens.append(np.full(m, 1 if seg.on_surface else 0, dtype=np.int8))
    x, y = np.concatenate(xs), np.concatenate(ys)
    x = (x + w.slant * y) * scale * sx
    y = y * scale * sy
    noise_std = np.hypot(base_jitter, jitter)
    x = x + rng.normal(0.0, noise_std, x.size)
    y = y + rng.normal(0.0, noise_std, y.size)
    t = dt * np.arange(x.size)
    return t, np.round(x, 1), np.round(y, 1), np.concatenate(ps), np.concatenate(pens)


def fatigue_label(phase: Phase, f: float) -> PhaseLabel:
    """Indicator values that grow with the synthetic fatigue level."""
    return PhaseLabel(phase, lactate=round(1.1 + 15.0 * f, 2), flight_height=round(36.0 - 4.0 * f, 2),
                      rpe=round(min(10.0, 1.1 + 8.9 * f), 2))


def synth_records(params: SynthParams, writer: int, alphabet: Optional[dict] = None) -> list:
    """All records of one writer, across phases and tasks."""
    alphabet = alphabet if alphabet is not None else _alphabet(params)
    w = _writer(params, writer, alphabet)
    subject = subject_name(writer)
    out = []
    for p_idx, phase in enumerate(PHASES):
        f = params.fatigue[p_idx]
        label = fatigue_label(phase, f)
        for t_idx, task in enumerate(TASKS):
            rng = np.random.default_rng([params.seed, 2, writer, p_idx, t_idx])
            if task.startswith("SIG"):
                segs = _signature_segments(w, rng, params.intra_noise)
            else:
                segs = _word_segments(w, WORDS[task], alphabet, rng, params.intra_noise)
            t, x, y, p, pen = _render(segs, w, params, f, rng)
            out.append(InkRecord(t, x, y, p, pen, subject, label, task))
    return out


def subject_name(index: int) -> str:
    return f"u{index + 1:03d}"


def synth_dataset(params: SynthParams) -> list:
    """``n_writers x 4 phases x 6 tasks`` records, deterministic given the params."""
    alphabet = _alphabet(params)
    records = []
    for w in range(params.n_writers):
        records.extend(synth_records(params, w, alphabet))
    return records

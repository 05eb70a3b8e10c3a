"""Online ink data model: records, the text file format, strokes and features."""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import (
    DegenerateGeometry,
    EmptyRecord,
    InconsistentPressureState,
    InvalidParams,
    MalformedLine,
    NonMonotoneTime,
)

#: Per-sample real vectors, shape ``(length, dim)``.
FeatureSequence = np.ndarray


class PenState(enum.IntEnum):
    IN_AIR = 0
    ON_SURFACE = 1


class Phase(str, enum.Enum):
    BASE = "BASE"
    MEIF = "MEIF"
    SEIF = "SEIF"
    POST_SEIF = "POST_SEIF"


PHASES = tuple(Phase)
SIGNATURE_TASKS = ("SIG1", "SIG2")
WORD_TASKS = ("W1", "W2", "W3", "W4")
TASKS = SIGNATURE_TASKS + WORD_TASKS

#: Uppercase words written for tasks W1..W4.
WORDS = {
    "W1": "BIODEGRADABLE",
    "W2": "DELEZNABLE",
    "W3": "DESAPROVECHAMIENTO",
    "W4": "DESBRIZNAR",
}


class PenSample(NamedTuple):
    t: float
    x: float
    y: float
    pressure: float
    pen_state: PenState


@dataclass(frozen=True)
class PhaseLabel:
    phase: Phase
    lactate: Optional[float] = None
    flight_height: Optional[float] = None
    rpe: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "phase", Phase(self.phase))
        if self.rpe is not None and not 1.0 <= self.rpe <= 10.0:
            raise InvalidParams(f"RPE must lie in [1, 10], got {self.rpe}")


@dataclass(frozen=True, eq=False)
class InkRecord:
    """A single handwriting realization.

    Samples are stored column-wise; ``samples`` gives the row view.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    pressure: np.ndarray
    pen: np.ndarray
    subject_id: str
    phase: PhaseLabel
    task_id: str

    def __post_init__(self):
        cols = {}
        for name in ("t", "x", "y", "pressure"):
            cols[name] = np.array(getattr(self, name), dtype=np.float64)
            cols[name].setflags(write=False)
        pen = np.array(self.pen, dtype=np.int8)
        pen.setflags(write=False)
        n = len(cols["t"])
        if any(len(c) != n for c in cols.values()) or len(pen) != n:
            raise InvalidParams("sample columns differ in length")
        for name, col in cols.items():
            object.__setattr__(self, name, col)
        object.__setattr__(self, "pen", pen)
        if isinstance(self.phase, (str, Phase)):
            object.__setattr__(self, "phase", PhaseLabel(Phase(self.phase)))
        _validate(self)

    def __len__(self):
        return len(self.t)

    @property
    def samples(self) -> list[PenSample]:
        return [
            PenSample(float(t), float(x), float(y), float(p), PenState(int(s)))
            for t, x, y, p, s in zip(self.t, self.x, self.y, self.pressure, self.pen)
        ]

    @property
    def xy(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def __eq__(self, other):
        if not isinstance(other, InkRecord):
            return NotImplemented
        return (
            self.subject_id == other.subject_id
            and self.phase == other.phase
            and self.task_id == other.task_id
            and all(
                np.array_equal(getattr(self, c), getattr(other, c))
                for c in ("t", "x", "y", "pressure", "pen")
            )
        )

    __hash__ = None

    @classmethod
    def from_samples(cls, samples: Sequence[PenSample], subject_id, phase, task_id):
        if not samples:
            raise EmptyRecord("record has no samples")
        t, x, y, p, s = zip(*samples)
        return cls(np.array(t), np.array(x), np.array(y), np.array(p),
                   np.array([int(v) for v in s]), subject_id, phase, task_id)


def _validate(rec: InkRecord) -> None:
    if len(rec) == 0:
        raise EmptyRecord("record has no samples")
    if len(rec) < 2:
        raise EmptyRecord("record needs at least 2 samples")
    if rec.task_id not in TASKS:
        raise InvalidParams(f"unknown task {rec.task_id!r}")
    if np.any(rec.t < 0):
        raise NonMonotoneTime("negative timestamp")
    bad = np.flatnonzero(np.diff(rec.t) <= 0)
    if bad.size:
        raise NonMonotoneTime(f"timestamp at sample {bad[0] + 1} does not increase")
    if not np.all(np.isin(rec.pen, (0, 1))):
        raise InconsistentPressureState("pen state must be 0 or 1")
    surface = rec.pen == PenState.ON_SURFACE
    if np.any(rec.pressure[~surface] != 0) or np.any(rec.pressure[surface] <= 0):
        raise InconsistentPressureState(
            "pressure must be 0 in air and positive on surface")


# --------------------------------------------------------------------------
# File format

def format_float(v: float) -> str:
    """Shortest positional decimal that parses back to exactly ``v``."""
    return np.format_float_positional(float(v), unique=True, trim="-")


_HEADER = re.compile(r"^#ink v1 subject=(\S+) phase=(\S+) task=(\S+)$")


def _key_values(fields: Sequence[str], lineno: int) -> dict:
    out = {}
    for item in fields:
        key, sep, value = item.partition("=")
        if not sep:
            raise MalformedLine(f"line {lineno}: expected key=value, got {item!r}")
        out[key] = value
    return out


def parse_ink(content) -> InkRecord:
    """Parse ink-file content (``bytes`` or ``str``) into an :class:`InkRecord`."""
    if isinstance(content, bytes):
        content = content.decode("utf-8")
    lines = content.splitlines()
    if not lines:
        raise EmptyRecord("empty file")
    m = _HEADER.match(lines[0].strip())
    if not m:
        raise MalformedLine(f"line 1: bad header {lines[0]!r}")
    subject, phase_name, task = m.groups()
    if phase_name not in Phase.__members__:
        raise MalformedLine(f"line 1: unknown phase {phase_name!r}")
    if task not in TASKS:
        raise MalformedLine(f"line 1: unknown task {task!r}")

    fatigue = {}
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line.split()
            if parts[0] == "#fatigue":
                kv = _key_values(parts[1:], lineno)
                unknown = set(kv) - {"lactate", "mffh", "rpe"}
                if unknown:
                    raise MalformedLine(f"line {lineno}: unknown fatigue keys {sorted(unknown)}")
                try:
                    fatigue = {k: float(v) for k, v in kv.items()}
                except ValueError as exc:
                    raise MalformedLine(f"line {lineno}: {exc}") from None
            continue
        parts = line.split()
        if len(parts) != 5:
            raise MalformedLine(f"line {lineno}: expected 5 fields, got {len(parts)}")
        try:
            t, x, y, p = (float(v) for v in parts[:4])
            pen = int(parts[4])
        except ValueError:
            raise MalformedLine(f"line {lineno}: non-numeric field in {line!r}") from None
        if pen not in (0, 1):
            raise MalformedLine(f"line {lineno}: pen must be 0 or 1")
        if not all(math.isfinite(v) for v in (t, x, y, p)):
            raise MalformedLine(f"line {lineno}: non-finite value")
        rows.append((t, x, y, p, pen))

    if not rows:
        raise EmptyRecord("no sample lines")
    try:
        label = PhaseLabel(Phase(phase_name), fatigue.get("lactate"),
                           fatigue.get("mffh"), fatigue.get("rpe"))
    except InvalidParams as exc:
        raise MalformedLine(f"fatigue line: {exc}") from None
    cols = list(zip(*rows))
    return InkRecord(np.array(cols[0]), np.array(cols[1]), np.array(cols[2]),
                     np.array(cols[3]), np.array(cols[4]), subject, label, task)


def write_ink(record: InkRecord) -> bytes:
    """Serialize a record; ``parse_ink(write_ink(r)) == r`` bit for bit."""
    lab = record.phase
    out = [f"#ink v1 subject={record.subject_id} phase={lab.phase.value} task={record.task_id}"]
    fat = [(k, v) for k, v in (("lactate", lab.lactate), ("mffh", lab.flight_height),
                               ("rpe", lab.rpe)) if v is not None]
    if fat:
        out.append("#fatigue " + " ".join(f"{k}={format_float(v)}" for k, v in fat))
    for t, x, y, p, s in zip(record.t, record.x, record.y, record.pressure, record.pen):
        out.append(f"{format_float(t)} {format_float(x)} {format_float(y)} "
                   f"{format_float(p)} {int(s)}")
    return ("\n".join(out) + "\n").encode("utf-8")


def record_path(root, subject_id: str, phase, task_id: str) -> Path:
    return Path(root) / subject_id / Phase(phase).value / f"{task_id}.ink"


def save_dataset(records, root) -> list[Path]:
    """Write records under ``<root>/<subject>/<phase>/<task>.ink``."""
    paths = []
    for rec in records:
        path = record_path(root, rec.subject_id, rec.phase.phase, rec.task_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(write_ink(rec))
        paths.append(path)
    return paths


def load_dataset(root, phases=None) -> list[InkRecord]:
    """Read every ``*.ink`` file in the dataset layout, in sorted path order."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {str(root)!r} does not exist")
    wanted = None if phases is None else {Phase(p).value for p in phases}
    records = []
    for path in sorted(root.glob("*/*/*.ink")):
        if wanted is not None and path.parent.name not in wanted:
            continue
        records.append(parse_ink(path.read_bytes()))
    return records


# --------------------------------------------------------------------------
# Strokes

@dataclass(frozen=True, eq=False)
class Stroke:
    kind: PenState
    start: int
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    pressure: np.ndarray

    def __len__(self):
        return len(self.t)

    @property
    def xy(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])


def segment_strokes(record: InkRecord) -> list[Stroke]:
    """Split a record into maximal runs of constant pen state."""
    cuts = np.flatnonzero(np.diff(record.pen)) + 1
    bounds = np.concatenate([[0], cuts, [len(record)]])
    return [
        Stroke(PenState(int(record.pen[a])), int(a), record.t[a:b], record.x[a:b],
               record.y[a:b], record.pressure[a:b])
        for a, b in zip(bounds[:-1], bounds[1:])
    ]


# --------------------------------------------------------------------------
# Features

@dataclass(frozen=True)
class FeatureConfig:
    channels: tuple = ("x", "y")
    include_derivatives: bool = True
    normalization: str = "centroid_scale"  # or "none"

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if not self.channels:
            raise InvalidParams("at least one channel is required")
        bad = set(self.channels) - {"x", "y", "pressure"}
        if bad or len(set(self.channels)) != len(self.channels):
            raise InvalidParams(f"bad channel list {self.channels}")
        if self.normalization not in ("centroid_scale", "none"):
            raise InvalidParams(f"unknown normalization {self.normalization!r}")

    @property
    def dim(self) -> int:
        return len(self.channels) * (2 if self.include_derivatives else 1)


def extract_features(record: InkRecord, cfg: FeatureConfig = FeatureConfig()) -> FeatureSequence:
    """One feature vector per sample.

    Under ``centroid_scale`` the positional channels are centred and divided by
    the larger of the x and y standard deviations (computed over both, even if
    only one is selected), so the aspect ratio is preserved. Derivatives are
    taken over the sample index.
    """
    x, y = record.x, record.y
    if cfg.normalization == "centroid_scale":
        scale = max(float(np.std(x)), float(np.std(y)))
        if scale == 0.0:
            raise DegenerateGeometry("all samples lie on one point")
        x = (x - x.mean()) / scale
        y = (y - y.mean()) / scale
    source = {"x": x, "y": y, "pressure": record.pressure}
    cols = [np.asarray(source[c], dtype=np.float64) for c in cfg.channels]
    if cfg.include_derivatives:
        cols += [np.gradient(c) for c in cols]
    return np.column_stack(cols)


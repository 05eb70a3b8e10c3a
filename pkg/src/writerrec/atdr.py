"""Allographic text-dependent recognition.

Words are cut into in-air and on-surface strokes. Each stroke is resampled,
normalized, and replaced by the grid cell of its nearest prototype in a
self-organizing map trained per (word, channel). Two re-encoded words are
compared by DTW where the local cost is the distance between grid cells, so
neighbouring prototypes are cheap to confuse.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from .dtw import DtwConfig, dtw_distance
from .errors import (
    CatalogueMismatch,
    DegenerateStroke,
    DimensionMismatch,
    EmptyChannel,
    EmptyList,
    EmptyTrainingSet,
    InvalidParams,
    MalformedLine,
    NoUsableStrokes,
    WordMismatch,
)
from .ink import InkRecord, PenState, Stroke, format_float, segment_strokes

IN_AIR = "InAir"
ON_SURFACE = "OnSurface"
CHANNELS = (IN_AIR, ON_SURFACE)
_KIND = {PenState.IN_AIR: IN_AIR, PenState.ON_SURFACE: ON_SURFACE}


@dataclass(frozen=True)
class SomParams:
    grid: int = 8
    resample: int = 16
    epochs: int = 30
    lr_initial: float = 0.5
    lr_final: float = 0.02
    radius_initial: float = 4.0
    radius_final: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.grid < 2 or self.resample < 4 or self.epochs < 1:
            raise InvalidParams("need grid >= 2, resample >= 4, epochs >= 1")
        if not (self.lr_initial >= self.lr_final > 0 and self.radius_initial >= self.radius_final > 0):
            raise InvalidParams("rates and radii must be positive and non-increasing")


@dataclass(frozen=True, eq=False)
class SomCatalogue:
    word_id: str
    channel: str
    grid: int
    resample: int
    prototypes: np.ndarray  # (grid * grid, 2 * resample), row-major over (row, col)

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise InvalidParams(f"unknown channel {self.channel!r}")
        p = np.array(self.prototypes, dtype=np.float64)
        if p.shape != (self.grid ** 2, 2 * self.resample):
            raise InvalidParams(f"prototype array has shape {p.shape}")
        p.setflags(write=False)
        object.__setattr__(self, "prototypes", p)

    def coord(self, index: int) -> tuple:
        return divmod(int(index), self.grid)

    def prototype(self, coord) -> np.ndarray:
        r, c = coord
        return self.prototypes[r * self.grid + c]

    def __eq__(self, other):
        if not isinstance(other, SomCatalogue):
            return NotImplemented
        return ((self.word_id, self.channel, self.grid, self.resample)
                == (other.word_id, other.channel, other.grid, other.resample)
                and np.array_equal(self.prototypes, other.prototypes))

    __hash__ = None


@dataclass(frozen=True)
class EncodedWord:
    word_id: str
    air_seq: tuple
    surface_seq: tuple

    def __post_init__(self):
        object.__setattr__(self, "air_seq", tuple(tuple(int(v) for v in c) for c in self.air_seq))
        object.__setattr__(self, "surface_seq", tuple(tuple(int(v) for v in c) for c in self.surface_seq))
        if not self.air_seq and not self.surface_seq:
            raise NoUsableStrokes("encoded word has no strokes")

    def channel(self, name: str) -> tuple:
        if name == IN_AIR:
            return self.air_seq
        if name == ON_SURFACE:
            return self.surface_seq
        raise InvalidParams(f"unknown channel {name!r}")


# --------------------------------------------------------------------------
# Stroke preprocessing

def _polyline(stroke) -> np.ndarray:
    xy = stroke.xy if isinstance(stroke, Stroke) else np.asarray(stroke, dtype=np.float64)
    if xy.ndim != 2 or xy.shape[1] != 2:
        raise DimensionMismatch(f"expected (n, 2) points, got shape {xy.shape}")
    return xy


def resample_polyline(xy, n_points: int) -> np.ndarray:
    """``n_points`` points equally spaced by arc length along the polyline."""
    xy = _polyline(xy)
    if len(xy) < 2:
        raise DegenerateStroke("a stroke needs at least 2 samples")
    seg = np.hypot(*np.diff(xy, axis=0).T)
    keep = np.concatenate([[True], seg > 0])
    xy, seg = xy[keep], seg[seg > 0]
    if seg.size == 0:
        raise DegenerateStroke("stroke has zero path length")
    s = np.concatenate([[0.0], np.cumsum(seg)])
    targets = np.linspace(0.0, s[-1], n_points)
    return np.column_stack([np.interp(targets, s, xy[:, 0]), np.interp(targets, s, xy[:, 1])])


def preprocess_stroke(stroke, resample: int = 16) -> np.ndarray:
    """Resample, centre, scale by the larger axis spread, interleave x/y."""
    pts = resample_polyline(stroke, resample)
    pts = pts - pts.mean(axis=0)
    scale = pts.std(axis=0).max()
    if scale == 0.0:
        raise DegenerateStroke("stroke collapses to a point")
    return (pts / scale).ravel()


# --------------------------------------------------------------------------
# Self-organizing map

@numba.njit(cache=True, nogil=True)
def _som_train(data, protos, rows, cols, orders, lrs, radii):
    n_units, dim = protos.shape
    for e in range(orders.shape[0]):
        lr = lrs[e]
        two_r2 = 2.0 * radii[e] * radii[e]
        for idx in orders[e]:
            x = data[idx]
            best = np.inf
            win = 0
            for k in range(n_units):
                d = 0.0
                for m in range(dim):
                    t = protos[k, m] - x[m]
                    d += t * t
                if d < best:
                    best = d
                    win = k
            for k in range(n_units):
                g2 = (rows[k] - rows[win]) ** 2 + (cols[k] - cols[win]) ** 2
                step = lr * np.exp(-g2 / two_r2)
                for m in range(dim):
                    protos[k, m] += step * (x[m] - protos[k, m])
    return protos


def quantization_error(vectors, prototypes) -> float:
    """Mean Euclidean distance from each vector to its nearest prototype."""
    v = np.asarray(vectors, dtype=np.float64)
    d2 = ((v[:, None, :] - prototypes[None, :, :]) ** 2).sum(axis=2)
    return float(np.sqrt(d2.min(axis=1)).mean())


def init_prototypes(data: np.ndarray, params: SomParams) -> np.ndarray:
    rng = np.random.default_rng(params.seed)
    spread = data.std(axis=0)
    spread = np.where(spread > 0, spread, 1.0)
    return data.mean(axis=0) + spread * rng.standard_normal((params.grid ** 2, data.shape[1]))


def train_catalogue(strokes, params: SomParams = SomParams(), word_id: str = "",
                    channel: str = ON_SURFACE) -> SomCatalogue:
    """Classic online SOM with a Gaussian neighbourhood and linear decay."""
    if len(strokes) == 0:
        raise EmptyTrainingSet("no training strokes")
    data = np.asarray(strokes, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != 2 * params.resample:
        raise DimensionMismatch(f"stroke vectors must have dim {2 * params.resample}")
    protos = init_prototypes(data, params)
    # separate stream for presentation order so the init matches init_prototypes
    order_rng = np.random.default_rng([params.seed, 1])
    orders = np.stack([order_rng.permutation(len(data)) for _ in range(params.epochs)])
    frac = np.linspace(0.0, 1.0, params.epochs) if params.epochs > 1 else np.zeros(1)
    lrs = params.lr_initial + (params.lr_final - params.lr_initial) * frac
    radii = params.radius_initial + (params.radius_final - params.radius_initial) * frac
    units = np.arange(params.grid ** 2)
    rows, cols = (units // params.grid).astype(np.float64), (units % params.grid).astype(np.float64)
    protos = _som_train(np.ascontiguousarray(data), protos, rows, cols, orders, lrs, radii)
    return SomCatalogue(word_id, channel, params.grid, params.resample, protos)


def stroke_pool(records, word_id: str, channel: str, resample: int) -> np.ndarray:
    """Preprocessed strokes of one kind from every realization of ``word_id``."""
    kind = PenState.IN_AIR if channel == IN_AIR else PenState.ON_SURFACE
    out = []
    for rec in records:
        if rec.task_id != word_id:
            continue
        for st in segment_strokes(rec):
            if st.kind != kind:
                continue
            try:
                out.append(preprocess_stroke(st, resample))
            except DegenerateStroke:
                continue
    return np.array(out).reshape(len(out), 2 * resample)


def catalogue_seed(seed: int, word_id: str, channel: str) -> int:
    return int(np.random.SeedSequence([seed, int(word_id[1:]), CHANNELS.index(channel)])
               .generate_state(1)[0])


def train_catalogues(records, params: SomParams = SomParams(), words=("W1", "W2", "W3", "W4")) -> dict:
    """One catalogue per (word, channel), keyed by that pair."""
    cats = {}
    for word in words:
        for channel in CHANNELS:
            pool = stroke_pool(records, word, channel, params.resample)
            p = dataclasses.replace(params, seed=catalogue_seed(params.seed, word, channel))
            cats[word, channel] = train_catalogue(pool, p, word, channel)
    return cats


# --------------------------------------------------------------------------
# Encoding and matching

def nearest_prototype(vector, catalogue: SomCatalogue) -> tuple:
    d2 = ((catalogue.prototypes - vector) ** 2).sum(axis=1)
    return catalogue.coord(int(np.argmin(d2)))


def encode_word(record: InkRecord, air_cat: SomCatalogue, surf_cat: SomCatalogue) -> EncodedWord:
    if air_cat.channel != IN_AIR or surf_cat.channel != ON_SURFACE:
        raise CatalogueMismatch("catalogues passed for the wrong channels")
    if not (air_cat.word_id == surf_cat.word_id == record.task_id):
        raise CatalogueMismatch(f"record is {record.task_id}, catalogues are "
                                f"{air_cat.word_id}/{surf_cat.word_id}")
    if air_cat.resample != surf_cat.resample:
        raise CatalogueMismatch("catalogues differ in resample count")
    cats = {PenState.IN_AIR: air_cat, PenState.ON_SURFACE: surf_cat}
    seqs = {PenState.IN_AIR: [], PenState.ON_SURFACE: []}
    for st in segment_strokes(record):
        cat = cats[st.kind]
        try:
            vec = preprocess_stroke(st, cat.resample)
        except DegenerateStroke:
            continue
        seqs[st.kind].append(nearest_prototype(vec, cat))
    if not seqs[PenState.IN_AIR] and not seqs[PenState.ON_SURFACE]:
        raise NoUsableStrokes(f"no usable strokes in {record.subject_id}/{record.task_id}")
    return EncodedWord(record.task_id, seqs[PenState.IN_AIR], seqs[PenState.ON_SURFACE])


_ENCODED_DTW = DtwConfig("euclidean", normalize_by_path=True)


def encoded_dtw(a: EncodedWord, b: EncodedWord, channel: str,
                local_cost: str = "grid", catalogue: SomCatalogue | None = None) -> float:
    """DTW between two re-encoded stroke sequences, normalized by ``l1 + l2``.

    ``local_cost="grid"`` uses the Euclidean distance between grid cells;
    ``"prototype"`` uses the distance between the prototype vectors and needs
    the channel's catalogue.
    """
    if a.word_id != b.word_id:
        raise WordMismatch(f"{a.word_id} vs {b.word_id}")
    sa, sb = a.channel(channel), b.channel(channel)
    if not sa or not sb:
        raise EmptyChannel(f"{channel} sequence is empty")
    if local_cost == "grid":
        return dtw_distance(np.array(sa, dtype=np.float64), np.array(sb, dtype=np.float64), _ENCODED_DTW)
    if local_cost == "prototype":
        if catalogue is None:
            raise InvalidParams("prototype local cost needs the catalogue")
        return dtw_distance(np.array([catalogue.prototype(c) for c in sa]),
                            np.array([catalogue.prototype(c) for c in sb]), _ENCODED_DTW)
    raise InvalidParams(f"unknown local cost {local_cost!r}")


def fuse_channels(d_air: float, d_surface: float, w_air: float = 0.5) -> float:
    if not 0.0 <= w_air <= 1.0:
        raise InvalidParams("w_air must lie in [0, 1]")
    return w_air * d_air + (1.0 - w_air) * d_surface


def fuse_words(per_word) -> float:
    if len(per_word) == 0:
        raise EmptyList("no per-word dissimilarities")
    return float(np.mean(per_word))


def word_dissimilarity(probe: EncodedWord, model: EncodedWord, w_air: float = 0.5) -> float:
    """Both channels compared and fused; a channel with zero weight is skipped."""
    d_air = encoded_dtw(probe, model, IN_AIR) if w_air > 0 else 0.0
    d_surf = encoded_dtw(probe, model, ON_SURFACE) if w_air < 1 else 0.0
    return fuse_channels(d_air, d_surf, w_air)


# --------------------------------------------------------------------------
# Persistence

def dumps_catalogue(cat: SomCatalogue) -> str:
    lines = [f"#som v1 word={cat.word_id} channel={cat.channel} grid={cat.grid} resample={cat.resample}"]
    lines += [" ".join(format_float(v) for v in row) for row in cat.prototypes]
    return "\n".join(lines) + "\n"


def loads_catalogue(text: str) -> SomCatalogue:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split() if lines else []
    if len(head) != 6 or head[:2] != ["#som", "v1"]:
        raise MalformedLine("bad catalogue header")
    try:
        kv = dict(item.split("=", 1) for item in head[2:])
        protos = np.array([[float(v) for v in ln.split()] for ln in lines[1:]], dtype=np.float64)
        return SomCatalogue(kv["word"], kv["channel"], int(kv["grid"]), int(kv["resample"]), protos)
    except (KeyError, ValueError, InvalidParams) as exc:
        raise MalformedLine(f"bad catalogue file: {exc}") from None


def catalogue_filename(word_id: str, channel: str) -> str:
    return f"{word_id}_{channel}.som"


def save_catalogue(cat: SomCatalogue, directory) -> Path:
    path = Path(directory) / catalogue_filename(cat.word_id, cat.channel)
    path.write_text(dumps_catalogue(cat), encoding="utf-8")
    return path


def load_catalogue(path) -> SomCatalogue:
    return loads_catalogue(Path(path).read_text(encoding="utf-8"))


def load_catalogues(directory, words=("W1", "W2", "W3", "W4")) -> dict:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"catalogue directory {str(directory)!r} does not exist")
    return {(w, ch): load_catalogue(directory / catalogue_filename(w, ch))
            for w in words for ch in CHANNELS}

"""Multi-section vector quantization.

A user model holds one LBG codebook per signature section (initial, middle,
final). A probe is scored by its mean quantization distortion against the
section codebooks with the same index.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, EmptyTrainingSet, InvalidParams, MalformedLine, TooShort
from .ink import format_float


@dataclass(frozen=True)
class LbgParams:
    split_epsilon: float = 0.01
    max_iters: int = 100
    rel_improvement_threshold: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if not self.split_epsilon > 0:
            raise InvalidParams("split_epsilon must be positive")
        if self.max_iters < 1 or self.rel_improvement_threshold < 0:
            raise InvalidParams("max_iters must be >= 1 and the threshold >= 0")


@dataclass(frozen=True, eq=False)
class Codebook:
    bits: int
    centroids: np.ndarray

    def __post_init__(self):
        c = np.array(self.centroids, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] != 2 ** self.bits:
            raise InvalidParams(f"a {self.bits}-bit codebook needs {2 ** self.bits} centroids")
        c.setflags(write=False)
        object.__setattr__(self, "centroids", c)

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Codebook):
            return NotImplemented
        return self.bits == other.bits and np.array_equal(self.centroids, other.centroids)

    __hash__ = None


@dataclass
class LbgTrace:
    """Training-set distortion history.

    ``levels[b]`` is the distortion of the final ``2**b``-centroid codebook
    (``levels[0]`` is the global centroid). ``iterations[b - 1]`` lists the
    distortion measured at every Lloyd assignment while growing to ``b`` bits.
    """

    levels: list = field(default_factory=list)
    iterations: list = field(default_factory=list)


def _nearest(vectors, centroids):
    d2 = ((vectors[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    return labels, d2[np.arange(len(vectors)), labels]


def _cell_means(vectors, labels, k, fallback):
    """Per-cell means, computed as ``first + mean(offsets)`` so identical points
    reproduce themselves exactly. Empty cells keep ``fallback``."""
    out = fallback.copy()
    order = np.argsort(labels, kind="stable")
    counts = np.bincount(labels, minlength=k)
    start = 0
    for cell, n in enumerate(counts):
        if n:
            pts = vectors[order[start:start + n]]
            out[cell] = pts[0] + (pts - pts[0]).mean(axis=0)
        start += n
    return out, counts


def _repair_empty(v, labels, counts, codebook, empty):
    """Re-split populous cells into the empty ones.

    The new centroid lands on the donor cell's farthest member, so the
    distortion strictly drops whenever the donor has any spread. Donors are
    taken in order of population, halving a donor's weight each time it gives.
    """
    own = ((v - codebook[labels]) ** 2).sum(axis=1)
    load = np.where(np.bincount(labels, weights=own, minlength=len(codebook)) > 0, counts, -1).astype(float)
    taken = np.zeros(len(v), dtype=bool)
    for cell in empty:
        donor = int(np.argmax(load))
        gap = np.where((labels == donor) & ~taken, own, -1.0)
        far = int(np.argmax(gap))
        if load[donor] < 0 or gap[far] <= 0:
            # nothing left to split: every populated cell is a single repeated point
            codebook[cell] = codebook[int(np.argmax(counts))]
            continue
        codebook[cell] = v[far]
        taken[far] = True
        load[donor] /= 2
    return codebook


def lbg_train(vectors, bits: int, params: LbgParams = LbgParams(), return_trace: bool = False):
    """Train a ``2**bits`` codebook by binary splitting plus Lloyd iterations.

    Each split replaces centroid ``c`` with ``c ± eps * (c + sigma * r)`` where
    ``sigma`` is the per-dimension spread of the data and ``r`` a seeded normal
    draw; the ``sigma * r`` term lets zero centroids split too. A cell left
    empty after an update takes over the farthest member of the most populous
    cell that still has spread.
    """
    v = np.asarray(vectors, dtype=np.float64)
    if v.ndim == 1:
        v = v[:, None]
    if v.shape[0] == 0:
        raise EmptyTrainingSet("no training vectors")
    if not 1 <= bits <= 8:
        raise InvalidParams(f"bits must be in [1, 8], got {bits}")
    rng = np.random.default_rng(params.seed)
    eps = params.split_epsilon
    sigma = v.std(axis=0)

    first = v[0]
    codebook = (first + (v - first).mean(axis=0))[None, :]
    trace = LbgTrace(levels=[float(_nearest(v, codebook)[1].mean())])

    for _ in range(bits):
        delta = eps * (codebook + sigma * rng.standard_normal(codebook.shape))
        codebook = np.concatenate([codebook + delta, codebook - delta])
        k = len(codebook)
        history = []
        prev = np.inf
        for _ in range(params.max_iters):
            labels, d2 = _nearest(v, codebook)
            dist = float(d2.mean())
            history.append(dist)
            codebook, counts = _cell_means(v, labels, k, codebook)
            empty = np.flatnonzero(counts == 0)
            if empty.size:
                codebook = _repair_empty(v, labels, counts, codebook, empty)
            if dist == 0.0 or (prev - dist) / prev < params.rel_improvement_threshold:
                break
            prev = dist
        final = float(_nearest(v, codebook)[1].mean())
        history.append(final)
        trace.iterations.append(history)
        trace.levels.append(final)

    book = Codebook(bits, codebook)
    return (book, trace) if return_trace else book


def quantize(vectors, book: Codebook):
    """Nearest-centroid labels and squared distances."""
    v = np.asarray(vectors, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] != book.dim:
        raise DimensionMismatch(f"vectors of shape {v.shape} vs codebook dim {book.dim}")
    return _nearest(v, book.centroids)


def split_sections(seq, n_sections: int = 3) -> list[np.ndarray]:
    """Contiguous split into ``n_sections`` parts; the first ``len % n`` parts get one extra."""
    seq = np.asarray(seq)
    if n_sections < 1:
        raise InvalidParams("need at least one section")
    n = len(seq)
    if n < n_sections:
        raise TooShort(f"sequence of length {n} cannot be split into {n_sections} sections")
    q, r = divmod(n, n_sections)
    sizes = [q + 1] * r + [q] * (n_sections - r)
    edges = np.cumsum([0] + sizes)
    return [seq[a:b] for a, b in zip(edges[:-1], edges[1:])]


@dataclass(frozen=True, eq=False)
class MsvqModel:
    user_id: str
    codebooks: tuple

    def __post_init__(self):
        books = tuple(self.codebooks)
        if not books:
            raise InvalidParams("a model needs at least one codebook")
        if len({(b.bits, b.dim) for b in books}) != 1:
            raise InvalidParams("section codebooks differ in bits or dim")
        object.__setattr__(self, "codebooks", books)

    @property
    def n_sections(self) -> int:
        return len(self.codebooks)

    @property
    def bits(self) -> int:
        return self.codebooks[0].bits

    @property
    def dim(self) -> int:
        return self.codebooks[0].dim

    def __eq__(self, other):
        if not isinstance(other, MsvqModel):
            return NotImplemented
        return self.user_id == other.user_id and self.codebooks == other.codebooks

    __hash__ = None


def section_seed(seed: int, section: int) -> int:
    return int(np.random.SeedSequence([seed, section]).generate_state(1)[0])


def build_msvq_model(training, n_sections: int = 3, bits: int = 3,
                     params: LbgParams = LbgParams(), user_id: str = "") -> MsvqModel:
    """Train one codebook per section on the pooled same-index sections."""
    if len(training) == 0:
        raise EmptyTrainingSet("no training sequences")
    parts = [split_sections(seq, n_sections) for seq in training]
    if len({p[0].shape[1] for p in parts}) != 1:
        raise DimensionMismatch("training sequences differ in dimension")
    books = []
    for i in range(n_sections):
        pooled = np.concatenate([p[i] for p in parts])
        books.append(lbg_train(pooled, bits, dataclasses.replace(params, seed=section_seed(params.seed, i))))
    return MsvqModel(user_id, tuple(books))


def msvq_distortion(probe, model: MsvqModel) -> float:
    """Mean over sections of the mean squared distance to the nearest centroid."""
    probe = np.asarray(probe, dtype=np.float64)
    if probe.ndim != 2 or probe.shape[1] != model.dim:
        raise DimensionMismatch(f"probe of shape {probe.shape} vs model dim {model.dim}")
    sections = split_sections(probe, model.n_sections)
    return float(np.mean([quantize(s, b)[1].mean() for s, b in zip(sections, model.codebooks)]))


# --------------------------------------------------------------------------
# Persistence

def dumps_model(model: MsvqModel) -> str:
    lines = [f"#msvq v1 user={model.user_id} sections={model.n_sections} "
             f"bits={model.bits} dim={model.dim}"]
    for book in model.codebooks:
        lines += [" ".join(format_float(v) for v in row) for row in book.centroids]
    return "\n".join(lines) + "\n"


def loads_model(text: str) -> MsvqModel:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split() if lines else []
    if len(head) != 6 or head[:2] != ["#msvq", "v1"]:
        raise MalformedLine("bad msvq model header")
    kv = dict(item.split("=", 1) for item in head[2:])
    try:
        user, s, bits, dim = kv["user"], int(kv["sections"]), int(kv["bits"]), int(kv["dim"])
        rows = np.array([[float(v) for v in ln.split()] for ln in lines[1:]], dtype=np.float64)
    except (KeyError, ValueError) as exc:
        raise MalformedLine(f"bad msvq model file: {exc}") from None
    k = 2 ** bits
    if rows.shape != (s * k, dim):
        raise MalformedLine(f"expected {s * k} rows of {dim} values, got shape {rows.shape}")
    return MsvqModel(user, tuple(Codebook(bits, rows[i * k:(i + 1) * k]) for i in range(s)))


def save_model(model: MsvqModel, path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8")


def load_model(path) -> MsvqModel:
    return loads_model(Path(path).read_text(encoding="utf-8"))

"""Enrolment-and-testing protocol over a corpus of records.

Writers are enrolled from their BASE records (two signatures, one realization
of each word) and every record of the requested test phases is scored against
every enrolled writer.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from . import atdr, msvq
from .dtw import DtwConfig, aggregate_reference
from .errors import DataError, InvalidParams
from .evaluation import Model, Probe, ScoreMatrix, build_score_matrix, evaluate
from .ink import (
    SIGNATURE_TASKS,
    WORD_TASKS,
    FeatureConfig,
    InkRecord,
    Phase,
    extract_features,
    format_float,
)

METHODS = ("dtw", "msvq", "atdr")
TEST_PHASES = (Phase.MEIF, Phase.SEIF, Phase.POST_SEIF)


@dataclass(frozen=True)
class RunConfig:
    method: str = "dtw"
    agg: str = "min"
    dtw: DtwConfig = DtwConfig()
    features: FeatureConfig = FeatureConfig()
    sections: int = 3
    bits: int = 3
    lbg: msvq.LbgParams = None  # derived from seed when omitted
    som: atdr.SomParams = None
    w_air: float = 0.5
    enrol_phase: Phase = Phase.BASE
    phases: tuple = TEST_PHASES
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidParams(f"unknown method {self.method!r}")
        if self.agg not in ("min", "mean"):
            raise InvalidParams(f"unknown aggregation {self.agg!r}")
        if not 0.0 <= self.w_air <= 1.0:
            raise InvalidParams("w_air must lie in [0, 1]")
        if self.sections < 1 or not 1 <= self.bits <= 8:
            raise InvalidParams("need sections >= 1 and bits in [1, 8]")
        object.__setattr__(self, "enrol_phase", Phase(self.enrol_phase))
        object.__setattr__(self, "phases", tuple(Phase(p) for p in self.phases))
        if self.lbg is None:
            object.__setattr__(self, "lbg", msvq.LbgParams(seed=self.seed))
        if self.som is None:
            object.__setattr__(self, "som", atdr.SomParams(seed=self.seed))


class Corpus:
    """Records indexed by (subject, phase, task)."""

    def __init__(self, records):
        self.records = {}
        for r in records:
            key = (r.subject_id, r.phase.phase, r.task_id)
            if key in self.records:
                raise DataError(f"duplicate record {key}")
            self.records[key] = r
        self.subjects = sorted({k[0] for k in self.records})
        self.phases = {k[1] for k in self.records}

    def get(self, subject: str, phase: Phase, task: str) -> InkRecord:
        try:
            return self.records[subject, Phase(phase), task]
        except KeyError:
            raise DataError(f"missing record {subject}/{Phase(phase).value}/{task}") from None

    def require_phase(self, phase: Phase) -> None:
        if Phase(phase) not in self.phases:
            raise DataError(f"phase {Phase(phase).value} is absent from the dataset")


def probe_key(subject: str, phase: Phase, task: str) -> str:
    return f"{subject}/{Phase(phase).value}/{task}"


# --------------------------------------------------------------------------
# Signatures: DTW and MSVQ

def _signature_scorer(cfg: RunConfig):
    if cfg.method == "dtw":
        return lambda probe, refs: aggregate_reference(probe, refs, cfg.agg, cfg.dtw)
    return msvq.msvq_distortion


def enrol_signatures(corpus: Corpus, cfg: RunConfig) -> list[Model]:
    models = []
    for s_idx, subject in enumerate(corpus.subjects):
        refs = [extract_features(corpus.get(subject, cfg.enrol_phase, t), cfg.features)
                for t in SIGNATURE_TASKS]
        if cfg.method == "dtw":
            models.append(Model(subject, refs))
        else:
            params = dataclasses.replace(cfg.lbg, seed=msvq.section_seed(cfg.lbg.seed, 1000 + s_idx))
            models.append(Model(subject, msvq.build_msvq_model(refs, cfg.sections, cfg.bits,
                                                               params, subject)))
    return models


def signature_probes(corpus: Corpus, phase: Phase, cfg: RunConfig) -> list[Probe]:
    corpus.require_phase(phase)
    return [Probe(probe_key(s, phase, t), s, extract_features(corpus.get(s, phase, t), cfg.features),
                  Phase(phase).value, t)
            for s in corpus.subjects for t in SIGNATURE_TASKS]


def signature_matrices(corpus: Corpus, cfg: RunConfig) -> dict:
    """phase -> ScoreMatrix for DTW or MSVQ."""
    for phase in cfg.phases:
        corpus.require_phase(phase)
    models = enrol_signatures(corpus, cfg)
    scorer = _signature_scorer(cfg)
    return {phase: build_score_matrix(signature_probes(corpus, phase, cfg), models, scorer, cfg.jobs)
            for phase in cfg.phases}


# --------------------------------------------------------------------------
# Text: ATDR

def encode_all(corpus: Corpus, phase: Phase, catalogues: dict) -> dict:
    """subject -> {word -> EncodedWord}."""
    return {
        s: {w: atdr.encode_word(corpus.get(s, phase, w), catalogues[w, atdr.IN_AIR],
                                catalogues[w, atdr.ON_SURFACE]) for w in WORD_TASKS}
        for s in corpus.subjects
    }


def train_corpus_catalogues(corpus: Corpus, cfg: RunConfig) -> dict:
    """Catalogues trained on every writer's enrolment-phase words."""
    pool = [r for (s, p, t), r in corpus.records.items() if p == cfg.enrol_phase and t in WORD_TASKS]
    if not pool:
        raise DataError(f"no {cfg.enrol_phase.value} word records to train catalogues on")
    return atdr.train_catalogues(pool, cfg.som, WORD_TASKS)


def text_matrices(corpus: Corpus, catalogues: dict, cfg: RunConfig) -> dict:
    """phase -> {"combined", "in_air", "on_surface", "W1".."W4"} -> ScoreMatrix.

    ``combined`` fuses both channels (weight ``cfg.w_air``) and all four words;
    ``in_air``/``on_surface`` fuse the words on a single channel; the word keys
    score one word with both channels.
    """
    for phase in cfg.phases:
        corpus.require_phase(phase)
    enrolled = encode_all(corpus, cfg.enrol_phase, catalogues)
    models = [Model(s, enrolled[s]) for s in corpus.subjects]

    def fused(w_air):
        return lambda p, m: atdr.fuse_words([atdr.word_dissimilarity(p[w], m[w], w_air)
                                             for w in WORD_TASKS])

    def single(word):
        return lambda p, m: atdr.word_dissimilarity(p[word], m[word], cfg.w_air)

    scorers = {"combined": fused(cfg.w_air), "in_air": fused(1.0), "on_surface": fused(0.0)}
    scorers.update({w: single(w) for w in WORD_TASKS})
    out = {}
    for phase in cfg.phases:
        encoded = encode_all(corpus, phase, catalogues)
        probes = [Probe(probe_key(s, phase, "WORDS"), s, encoded[s], Phase(phase).value, "WORDS")
                  for s in corpus.subjects]
        out[phase] = {name: build_score_matrix(probes, models, fn, cfg.jobs)
                      for name, fn in scorers.items()}
    return out


# --------------------------------------------------------------------------
# Reports

def config_dict(cfg: RunConfig) -> dict:
    d = {"method": cfg.method, "enrol_phase": cfg.enrol_phase.value,
         "phases": [p.value for p in cfg.phases], "seed": cfg.seed}
    if cfg.method == "dtw":
        d.update(agg=cfg.agg, local_metric=cfg.dtw.local_metric,
                 normalize_by_path=cfg.dtw.normalize_by_path)
    elif cfg.method == "msvq":
        d.update(sections=cfg.sections, bits=cfg.bits)
    else:
        d.update(grid=cfg.som.grid, resample=cfg.som.resample, epochs=cfg.som.epochs, w_air=cfg.w_air)
    if cfg.method != "atdr":
        d.update(channels=list(cfg.features.channels),
                 derivatives=cfg.features.include_derivatives,
                 normalization=cfg.features.normalization)
    return d


def run_protocol(records, cfg: RunConfig, catalogues: dict | None = None) -> tuple[dict, dict]:
    """Score the corpus; returns ``(report, matrices)``.

    For ATDR the catalogues are trained from the corpus when not given.
    """
    corpus = Corpus(records)
    report = {"config": config_dict(cfg), "phases": {}}
    if cfg.method == "atdr":
        if catalogues is None:
            catalogues = train_corpus_catalogues(corpus, cfg)
        matrices = text_matrices(corpus, catalogues, cfg)
        for phase, by_name in matrices.items():
            entry = evaluate(by_name["combined"])
            entry["by_channel"] = {k: _summary(by_name[k]) for k in ("in_air", "on_surface")}
            entry["by_word"] = {w: _summary(by_name[w]) for w in WORD_TASKS}
            report["phases"][phase.value] = entry
    else:
        matrices = signature_matrices(corpus, cfg)
        for phase, m in matrices.items():
            report["phases"][phase.value] = evaluate(m)
    return report, matrices


def _summary(m: ScoreMatrix) -> dict:
    full = evaluate(m)
    return {"idr": full["idr"], "eer": full["eer"], "eer_threshold": full["eer_threshold"]}


def intra_user_distances(m: ScoreMatrix) -> dict:
    """probe key -> dissimilarity to the probe's own model."""
    return dict(zip(m.probe_keys, m.genuine.tolist()))


# --------------------------------------------------------------------------
# Distance files: "#distances v1 method=<m> phase=<p>" then "<key> <value>" lines

def _pair_key(probe: str) -> str:
    subject, _, task = probe.split("/")
    return f"{subject}/{task}"


def dumps_distances(distances: dict, method: str, phase: str) -> str:
    lines = [f"#distances v1 method={method} phase={phase}"]
    lines += [f"{_pair_key(k)} {format_float(v)}" for k, v in distances.items()]
    return "\n".join(lines) + "\n"


def loads_distances(text: str) -> tuple[dict, dict]:
    """Returns ``(header fields, {pair key -> distance})``."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#distances v1"):
        raise DataError("bad distance file header")
    header = dict(item.split("=", 1) for item in lines[0].split()[2:])
    values = {}
    for n, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) != 2:
            raise DataError(f"distance file line {n}: expected 2 fields")
        try:
            values[parts[0]] = float(parts[1])
        except ValueError:
            raise DataError(f"distance file line {n}: non-numeric distance") from None
    return header, values


def write_distance_files(matrices: dict, method: str, directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for phase, m in matrices.items():
        if isinstance(m, dict):
            m = m["combined"]
        path = directory / f"{Phase(phase).value}.dist"
        path.write_text(dumps_distances(intra_user_distances(m), method, Phase(phase).value),
                        encoding="utf-8")
        paths.append(path)
    return paths

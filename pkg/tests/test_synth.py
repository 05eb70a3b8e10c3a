import numpy as np
import pytest

import helpers
from writerrec.errors import InvalidParams
from writerrec.ink import PHASES, TASKS, Phase, write_ink
from writerrec.synth import SynthParams, fatigue_label, synth_dataset


def test_deterministic():
    p = SynthParams(n_writers=3, seed=42)
    assert [write_ink(r) for r in synth_dataset(p)] == [write_ink(r) for r in synth_dataset(p)]


def test_seed_changes_corpus():
    a = synth_dataset(SynthParams(n_writers=2, seed=1))
    b = synth_dataset(SynthParams(n_writers=2, seed=2))
    assert write_ink(a[0]) != write_ink(b[0])


def test_shape():
    records = helpers.corpus(0)
    subjects = {r.subject_id for r in records}
    assert len(subjects) == 20
    for s in subjects:
        for phase in PHASES:
            tasks = sorted(r.task_id for r in records if r.subject_id == s and r.phase.phase is phase)
            assert tasks == sorted(TASKS)


def test_words_have_both_channels():
    for r in helpers.corpus(0)[:24]:
        if r.task_id.startswith("W"):
            assert set(np.unique(r.pen)) == {0, 1}


@pytest.mark.parametrize("kwargs", [
    {"n_writers": 1},
    {"fatigue": (0.0, 0.2, 1.2, 0.5)},
    {"fatigue": (0.0, 0.2)},
    {"signature_strokes": (3, 2)},
    {"intra_noise": -1.0},
    {"canonical_share": 1.5},
])
def test_invalid(kwargs):
    with pytest.raises(InvalidParams):
        SynthParams(**kwargs)


def test_fatigue_labels_grow():
    labels = [fatigue_label(Phase.SEIF, f) for f in (0.0, 0.3, 0.9)]
    assert [lab.lactate for lab in labels] == sorted(lab.lactate for lab in labels)
    assert [lab.rpe for lab in labels] == sorted(lab.rpe for lab in labels)
    assert all(1 <= lab.rpe <= 10 for lab in labels)


def test_size_and_duration_follow_fatigue():
    records = helpers.corpus(3)
    stats = {}
    for phase in PHASES:
        sigs = [r for r in records if r.phase.phase is phase and r.task_id.startswith("SIG")]
        stats[phase] = (np.mean([np.ptp(r.y) for r in sigs]), np.mean([np.ptp(r.x) for r in sigs]),
                        np.mean([r.t[-1] for r in sigs]))
    order = [Phase.BASE, Phase.MEIF, Phase.POST_SEIF, Phase.SEIF]  # fatigue 0, 0.2, 0.5, 0.8
    for k in range(3):
        vals = [stats[p][k] for p in order]
        assert vals == sorted(vals), (k, vals)


def test_fatigue_increases_intra_writer_distance():
    tired, rested = [], []
    for seed in helpers.SEEDS:
        tired.append(helpers.run(seed, "dtw")[1][Phase.SEIF].genuine.mean())
        rested.append(helpers.run(seed, "dtw", helpers.ZERO_FATIGUE)[1][Phase.SEIF].genuine.mean())
    assert np.mean(tired) > np.mean(rested)


def test_separation_at_zero_fatigue():
    hits = total = 0
    for seed in helpers.SEEDS:
        _, mats = helpers.run(seed, "dtw", helpers.ZERO_FATIGUE)
        for m in mats.values():
            own = m.scores[np.arange(len(m.scores)), m.true_model]
            others = np.where(m.genuine_mask, np.inf, m.scores).min(axis=1)
            hits += int(np.sum(own < others))
            total += len(own)
    assert hits / total >= 0.95

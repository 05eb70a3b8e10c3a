import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import chord_eer
from writerrec.errors import DataError, NoGenuine, NoImpostor, ScoringError, TooShort
from writerrec.evaluation import (
    Model,
    Probe,
    ScoreMatrix,
    build_score_matrix,
    eer_from_scores,
    evaluate,
    far_frr_curve,
    far_frr_curve_from_scores,
    identify,
    verify_eer,
)


def matrix(scores, true=None):
    s = np.asarray(scores, dtype=float)
    true = np.arange(len(s)) % s.shape[1] if true is None else np.asarray(true)
    return ScoreMatrix(s, tuple(f"p{i}" for i in range(len(s))), tuple(f"m{j}" for j in range(s.shape[1])), true)


@st.composite
def score_matrices(draw, max_cells=50):
    models = draw(st.integers(2, 7))
    probes = draw(st.integers(1, max_cells // models))
    integer = draw(st.booleans())
    cell = st.integers(0, 6).map(float) if integer else st.floats(0, 100, allow_subnormal=False)
    scores = draw(st.lists(st.lists(cell, min_size=models, max_size=models), min_size=probes, max_size=probes))
    true = draw(st.lists(st.integers(0, models - 1), min_size=probes, max_size=probes))
    return matrix(scores, true)


class TestScoreMatrix:
    def test_shape(self):
        probes = [Probe(f"k{i}", s, i) for i, s in enumerate(["a", "b"])]
        models = [Model(s, s) for s in "abc"]
        m = build_score_matrix(probes, models, lambda p, m: 1.0)
        assert m.scores.shape == (2, 3)

    def test_genuine_zero(self):
        probes = [Probe(f"k{s}", s, s) for s in "abcab"]
        models = [Model(s, s) for s in "abc"]
        m = build_score_matrix(probes, models, lambda p, q: 0.0 if p == q else 1.5)
        assert np.all(m.genuine == 0.0) and np.all(m.impostor > 0)
        assert m.model_ids == ("a", "b", "c") and list(m.true_model) == [0, 1, 2, 0, 1]

    def test_error_names_pair(self):
        def scorer(p, m):
            if (p, m) == ("b", "c"):
                raise TooShort("boom")
            return 1.0
        probes = [Probe(f"probe-{s}", s, s) for s in "ab"]
        with pytest.raises(ScoringError, match="probe-b") as info:
            build_score_matrix(probes, [Model(s, s) for s in "abc"], scorer)
        assert info.value.model == "c" and "c" in str(info.value)

    def test_threads_match_serial(self):
        rng = np.random.default_rng(0)
        data = rng.normal(size=(12, 5))
        probes = [Probe(f"k{i}", f"s{i % 4}", data[i]) for i in range(12)]
        models = [Model(f"s{j}", data[j]) for j in range(4)]
        fn = lambda p, m: float(np.abs(p - m).sum())  # noqa: E731
        a = build_score_matrix(probes, models, fn, jobs=1)
        b = build_score_matrix(probes, models, fn, jobs=4)
        assert np.array_equal(a.scores, b.scores) and a.probe_keys == b.probe_keys

    def test_orphan_probe(self):
        with pytest.raises(DataError):
            build_score_matrix([Probe("k", "z", 0)], [Model("a", 0)], lambda p, m: 0.0)


class TestIdentify:
    def test_perfect(self):
        assert identify(matrix([[0, 1, 2], [3, 1, 4], [5, 5, 0]])).idr == 100.0

    def test_forty_two_trials(self):
        # 39 of 42 probes rank their own model first
        s = np.ones((42, 3))
        true = np.arange(42) % 3
        s[np.arange(42), true] = 0.5
        s[[0, 10, 20], (true[[0, 10, 20]] + 1) % 3] = 0.1
        rep = identify(matrix(s, true))
        assert round(rep.idr, 2) == 92.86
        assert sorted(rep.ranks)[-3:] == [2, 2, 2]

    def test_tie_is_a_miss(self):
        rep = identify(matrix([[1.0, 1.0]], [0]))
        assert rep.idr == 0.0 and rep.ranks == (2,)

    @settings(max_examples=80, deadline=None)
    @given(score_matrices())
    def test_rank_definition(self, m):
        rep = identify(m)
        for i, rank in enumerate(rep.ranks):
            row = m.scores[i]
            own = row[m.true_model[i]]
            better = sum(1 for j, v in enumerate(row) if j != m.true_model[i] and v <= own)
            assert rank == 1 + better
        assert 0.0 <= rep.idr <= 100.0


class TestVerify:
    def test_perfect_separation(self):
        assert eer_from_scores([0.1, 0.2, 0.3], [0.5, 0.9])[0] == 0.0

    def test_identical_multisets(self):
        assert eer_from_scores([1, 2, 3, 3], [3, 1, 2, 3])[0] == pytest.approx(50.0)
        assert eer_from_scores([7.0], [7.0])[0] == pytest.approx(50.0)

    def test_interleaved(self):
        eer, thr = eer_from_scores([1, 3], [2, 4])
        assert eer == pytest.approx(25.0, abs=1e-12)
        assert chord_eer([1, 3], [2, 4]) == pytest.approx(25.0, abs=1e-12)
        assert 1.0 <= thr <= 3.0

    def test_errors(self):
        with pytest.raises(NoGenuine):
            eer_from_scores([], [1.0])
        with pytest.raises(NoImpostor):
            eer_from_scores([1.0], [])

    def test_curve_ends(self):
        curve = far_frr_curve_from_scores([1.0], [2.0])
        assert curve[0] == (-np.inf, 0.0, 100.0)
        assert curve[-1] == (np.inf, 100.0, 0.0)
        # threshold 1.5 sits between the two scores; the staircase point at 1.0 covers it
        assert [(p.far, p.frr) for p in curve if p.threshold == 1.0] == [(0.0, 0.0)]

    @settings(max_examples=80, deadline=None)
    @given(score_matrices())
    def test_curve_monotone(self, m):
        curve = far_frr_curve(m)
        ts = [p.threshold for p in curve]
        assert ts == sorted(ts) and len(set(ts)) == len(ts)
        assert all(a.far <= b.far and a.frr >= b.frr for a, b in zip(curve, curve[1:]))
        assert len(curve) == len(np.unique(m.scores)) + 2

    @settings(max_examples=150, deadline=None)
    @given(score_matrices())
    def test_matches_chord_oracle(self, m):
        if m.scores.shape[1] < 2:
            return
        rep = verify_eer(m)
        assert abs(rep.eer - chord_eer(m.genuine.tolist(), m.impostor.tolist())) <= 1e-9
        assert 0.0 <= rep.eer <= 100.0

    @settings(max_examples=60, deadline=None)
    @given(score_matrices(), st.sampled_from(["exp", "cube", "affine", "log1p"]))
    def test_monotone_transform_invariance(self, m, kind):
        fn = {"exp": lambda s: np.exp(s / 50.0), "cube": lambda s: s ** 3,
              "affine": lambda s: 3.0 * s + 2.0, "log1p": np.log1p}[kind]
        t = m.map(fn)
        if len(np.unique(t.scores)) != len(np.unique(m.scores)):
            return  # transform collapsed distinct floats; no longer strictly increasing
        assert identify(t).idr == identify(m).idr
        assert verify_eer(t).eer == pytest.approx(verify_eer(m).eer, abs=1e-9)


def test_report_layout():
    m = matrix([[0.1, 0.9], [0.8, 0.2], [0.3, 0.4]], [0, 1, 1])
    rep = evaluate(m)
    assert list(rep) == ["idr", "eer", "eer_threshold", "n_probes", "n_models", "curve", "per_probe"]
    assert rep["curve"][0]["threshold"] == "-inf" and rep["curve"][-1]["threshold"] == "inf"
    assert rep["per_probe"][2] == {"probe": "p2", "true": "m1", "predicted": "m0", "rank": 2}
    assert json.dumps(rep) == json.dumps(evaluate(m))


def test_idr_drops_with_more_writers():
    import helpers
    from writerrec.ink import Phase

    noisy = {"intra_noise": 4.0, "jitter_scale": 0.6}
    fatigue = (0.0, 0.2, 1.0, 0.5)
    idr = {n: np.mean([helpers.run(s, "dtw", fatigue, phases=(Phase.SEIF,), n_writers=n, **noisy)[0]
                       ["phases"]["SEIF"]["idr"] for s in helpers.SEEDS])
           for n in (10, 40)}
    assert idr[40] <= idr[10]

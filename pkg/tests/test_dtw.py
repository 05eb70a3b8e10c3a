import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import brute_dtw
from writerrec.dtw import DtwConfig, aggregate_reference, dtw_distance
from writerrec.errors import DimensionMismatch, EmptyReferenceSet, InvalidParams

RAW = DtwConfig(normalize_by_path=False)
RAW_L1 = DtwConfig("manhattan", normalize_by_path=False)


def seqs(dim, max_len=6):
    return st.integers(1, max_len).flatmap(
        lambda n: arrays(np.float64, (n, dim), elements=st.floats(-100, 100)))


def pair(max_len=6):
    return st.integers(1, 3).flatmap(lambda d: st.tuples(seqs(d, max_len), seqs(d, max_len)))


def test_identity_example():
    a = np.array([[0.0, 1.0], [2.0, 5.0], [3.0, -1.0]])
    assert dtw_distance(a, a) == 0.0


def test_single_cells():
    assert dtw_distance([[0.0, 0.0]], [[3.0, 4.0]], RAW) == pytest.approx(5.0)
    assert dtw_distance([[0.0, 0.0]], [[3.0, 4.0]], RAW_L1) == pytest.approx(7.0)


def test_manhattan_warp_example():
    assert dtw_distance([0.0, 1.0, 2.0], [0.0, 2.0], RAW_L1) == pytest.approx(1.0)
    assert brute_dtw([0.0, 1.0, 2.0], [0.0, 2.0], "manhattan") == pytest.approx(1.0)


def test_path_normalization():
    assert dtw_distance([0.0, 1.0, 2.0], [0.0, 2.0], DtwConfig("manhattan")) == pytest.approx(1.0 / 5)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        dtw_distance(np.zeros((3, 2)), np.zeros((3, 3)))
    with pytest.raises(DimensionMismatch):
        dtw_distance(np.zeros((0, 2)), np.zeros((3, 2)))


def test_bad_metric():
    with pytest.raises(InvalidParams):
        DtwConfig("cosine")


class TestAggregate:
    def test_single_ref(self):
        p, r = np.arange(5.0), np.arange(1.0, 4.0)
        d = dtw_distance(p, r)
        assert aggregate_reference(p, [r], "min") == d == aggregate_reference(p, [r], "mean")

    def test_min_and_mean(self):
        # single-sample sequences give distances 2 and 4 before normalization
        probe = [[0.0]]
        refs = [[[2.0]], [[4.0]]]
        assert aggregate_reference(probe, refs, "min", RAW) == 2.0
        assert aggregate_reference(probe, refs, "mean", RAW) == 3.0

    def test_probe_equal_to_a_ref(self):
        rng = np.random.default_rng(1)
        refs = [rng.normal(size=(7, 2)) for _ in range(3)]
        assert aggregate_reference(refs[1], refs, "min") == 0.0

    def test_errors(self):
        with pytest.raises(EmptyReferenceSet):
            aggregate_reference([[1.0]], [])
        with pytest.raises(DimensionMismatch):
            aggregate_reference(np.zeros((2, 2)), [np.zeros((2, 1))])
        with pytest.raises(InvalidParams):
            aggregate_reference([[1.0]], [[[1.0]]], "median")


@settings(max_examples=150, deadline=None)
@given(pair(), st.sampled_from(["euclidean", "manhattan"]))
def test_matches_path_enumeration(ab, metric):
    a, b = ab
    got = dtw_distance(a, b, DtwConfig(metric, normalize_by_path=False))
    assert abs(got - brute_dtw(a, b, metric)) <= 1e-9 * max(1.0, abs(got))


@settings(max_examples=100, deadline=None)
@given(pair(12), st.sampled_from(["euclidean", "manhattan"]))
def test_symmetric_and_non_negative(ab, metric):
    a, b = ab
    cfg = DtwConfig(metric)
    d = dtw_distance(a, b, cfg)
    assert d >= 0.0
    assert d == pytest.approx(dtw_distance(b, a, cfg), rel=1e-12, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(seqs(3, 20))
def test_self_distance_zero(a):
    assert dtw_distance(a, a) == 0.0

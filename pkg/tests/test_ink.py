import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from writerrec.errors import (
    DegenerateGeometry,
    EmptyRecord,
    InconsistentPressureState,
    InvalidParams,
    MalformedLine,
    NonMonotoneTime,
)
from writerrec.ink import (
    FeatureConfig,
    InkRecord,
    PenState,
    Phase,
    PhaseLabel,
    extract_features,
    load_dataset,
    parse_ink,
    save_dataset,
    segment_strokes,
    write_ink,
)

HEADER = "#ink v1 subject=s01 phase=MEIF task=SIG1\n"


def make_record(pens, xs=None, ys=None, subject="s01", phase="BASE", task="SIG1"):
    n = len(pens)
    xs = np.arange(n, dtype=float) if xs is None else np.asarray(xs, dtype=float)
    ys = np.zeros(n) if ys is None else np.asarray(ys, dtype=float)
    pressure = np.where(np.asarray(pens) == 1, 100.0, 0.0)
    return InkRecord(10.0 * np.arange(n), xs, ys, pressure, pens, subject, phase, task)


@st.composite
def records(draw):
    n = draw(st.integers(2, 30))
    finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
    gaps = draw(st.lists(st.floats(1e-3, 1e3), min_size=n, max_size=n))
    t = np.cumsum(gaps)
    pens = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    press = [draw(st.floats(1e-3, 1e4)) if p else 0.0 for p in pens]
    xs = draw(st.lists(finite, min_size=n, max_size=n))
    ys = draw(st.lists(finite, min_size=n, max_size=n))
    rpe = draw(st.none() | st.floats(1, 10))
    label = PhaseLabel(draw(st.sampled_from(list(Phase))), draw(st.none() | st.floats(0, 30)), None, rpe)
    return InkRecord(t, xs, ys, press, pens, draw(st.sampled_from(["a", "u007"])), label,
                     draw(st.sampled_from(["SIG1", "SIG2", "W1", "W4"])))


class TestParseWrite:
    def test_minimal_file(self):
        rec = parse_ink(HEADER + "0 1 2 50 1\n10 2 3 60 1\n20 3 4 0 0\n")
        assert len(rec) == 3
        assert rec.subject_id == "s01" and rec.phase.phase is Phase.MEIF and rec.task_id == "SIG1"
        assert rec.samples[2].pen_state is PenState.IN_AIR

    def test_repeated_timestamp(self):
        with pytest.raises(NonMonotoneTime):
            parse_ink(HEADER + "0 1 2 50 1\n0 2 3 60 1\n")

    def test_no_data_lines(self):
        with pytest.raises(EmptyRecord):
            parse_ink(HEADER)

    @pytest.mark.parametrize("line", ["0 1 2 50", "0 1 2 50 1 9", "0 x 2 50 1", "0 1 2 50 2"])
    def test_malformed(self, line):
        with pytest.raises(MalformedLine):
            parse_ink(HEADER + line + "\n10 1 1 1 1\n")

    def test_pressure_state_conflict(self):
        with pytest.raises(InconsistentPressureState):
            parse_ink(HEADER + "0 1 2 0 1\n10 2 3 60 1\n")
        with pytest.raises(InconsistentPressureState):
            parse_ink(HEADER + "0 1 2 5 0\n10 2 3 60 1\n")

    def test_fatigue_line(self):
        rec = parse_ink(HEADER + "#fatigue lactate=14.19 mffh=33.25 rpe=8.32\n0 0 0 1 1\n5 1 1 1 1\n")
        assert rec.phase == PhaseLabel(Phase.MEIF, 14.19, 33.25, 8.32)

    def test_rpe_out_of_range(self):
        with pytest.raises(MalformedLine):
            parse_ink(HEADER + "#fatigue rpe=11\n0 0 0 1 1\n5 1 1 1 1\n")
        with pytest.raises(InvalidParams):
            PhaseLabel(Phase.BASE, rpe=0.5)

    def test_two_samples_gives_header_and_two_lines(self):
        text = write_ink(make_record([1, 1])).decode()
        lines = text.splitlines()
        assert len(lines) == 3 and lines[0].startswith("#ink v1")

    def test_serialization_is_deterministic(self):
        rec = make_record([1, 0, 1], xs=[0.1, 1e-7, 123456.789])
        assert write_ink(rec) == write_ink(rec)
        assert "e" not in write_ink(rec).decode().split("\n", 1)[1]

    @settings(max_examples=80, deadline=None)
    @given(records())
    def test_round_trip(self, rec):
        assert parse_ink(write_ink(rec)) == rec

    def test_dataset_layout(self, tmp_path):
        recs = [make_record([1, 1], subject="s1", phase=p, task=t)
                for p in ("BASE", "SEIF") for t in ("SIG1", "W2")]
        paths = save_dataset(recs, tmp_path)
        assert (tmp_path / "s1" / "SEIF" / "W2.ink") in paths
        back = load_dataset(tmp_path)
        assert sorted(map(write_ink, back)) == sorted(map(write_ink, recs))
        assert len(load_dataset(tmp_path, phases=["SEIF"])) == 2


class TestStrokes:
    def test_all_on_surface(self):
        strokes = segment_strokes(make_record([1, 1, 1, 1]))
        assert [(s.kind, len(s)) for s in strokes] == [(PenState.ON_SURFACE, 4)]

    def test_alternating_runs(self):
        strokes = segment_strokes(make_record([1, 1, 0, 0, 1]))
        assert [s.kind for s in strokes] == [PenState.ON_SURFACE, PenState.IN_AIR, PenState.ON_SURFACE]
        assert [len(s) for s in strokes] == [2, 2, 1]

    def test_two_air_samples(self):
        strokes = segment_strokes(make_record([0, 0]))
        assert len(strokes) == 1 and strokes[0].kind is PenState.IN_AIR

    @settings(max_examples=60, deadline=None)
    @given(records())
    def test_partition(self, rec):
        strokes = segment_strokes(rec)
        assert sum(len(s) for s in strokes) == len(rec)
        assert all(a.kind != b.kind for a, b in zip(strokes, strokes[1:]))
        assert np.array_equal(np.concatenate([s.t for s in strokes]), rec.t)
        for s in strokes:
            assert np.all(rec.pen[s.start:s.start + len(s)] == s.kind)


class TestFeatures:
    def test_shape(self):
        rec = make_record([1] * 7, ys=np.sin(np.arange(7)))
        feats = extract_features(rec, FeatureConfig(("x", "y"), include_derivatives=False))
        assert feats.shape == (7, 2)
        assert extract_features(rec).shape == (7, 4)

    def test_translation_invariance(self):
        rng = np.random.default_rng(3)
        xs, ys = rng.normal(size=20), rng.normal(size=20)
        a = extract_features(make_record([1] * 20, xs, ys))
        b = extract_features(make_record([1] * 20, xs + 250.0, ys - 31.0))
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_scale_uses_larger_std(self):
        xs = np.array([0.0, 2.0, 4.0, 6.0])
        feats = extract_features(make_record([1] * 4, xs, xs / 2), FeatureConfig(include_derivatives=False))
        assert feats[:, 0].std() == pytest.approx(1.0)
        assert feats[:, 1].std() == pytest.approx(0.5)

    def test_degenerate(self):
        with pytest.raises(DegenerateGeometry):
            extract_features(make_record([1, 1, 1], xs=[5, 5, 5], ys=[2, 2, 2]))

    def test_derivatives_central_and_one_sided(self):
        xs = np.array([0.0, 1.0, 4.0, 9.0])
        feats = extract_features(make_record([1] * 4, xs), FeatureConfig(("x",), True, "none"))
        np.testing.assert_allclose(feats[:, 1], [1.0, 2.0, 4.0, 5.0])

    def test_pressure_channel(self):
        rec = make_record([1, 0, 1])
        feats = extract_features(rec, FeatureConfig(("x", "y", "pressure"), False))
        np.testing.assert_array_equal(feats[:, 2], [100.0, 0.0, 100.0])

    def test_invalid_config(self):
        with pytest.raises(InvalidParams):
            FeatureConfig(())
        with pytest.raises(InvalidParams):
            FeatureConfig(("z",))

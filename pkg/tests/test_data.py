import logging
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvlatent.cca import linear_cca
from mvlatent.data import (
    CorpusFormatError,
    FoldPlan,
    FrameSequence,
    MultiViewCorpus,
    SynthConfig,
    center_frame,
    decode_corpus,
    encode_corpus,
    load_corpus,
    load_features,
    make_folds,
    normalize_per_speaker,
    save_corpus,
    save_features,
    stationary_distribution,
    synth_generate,
    tandem_concat,
    transition_matrix,
    window_corpus,
    window_frames,
)


def _corpus(n_speakers=3, utts=2, T=5, dx=2, dy=3, seed=0):
    rng = np.random.default_rng(seed)
    seqs = []
    for k in range(n_speakers):
        for u in range(utts):
            x = rng.standard_normal((T, dx)).astype(np.float32).astype(np.float64)
            y = rng.standard_normal((T, dy)).astype(np.float32).astype(np.float64)
            seqs.append(FrameSequence(f"spk{k}", f"spk{k}_{u}", x, y, rng.integers(0, 3, T)))
    return MultiViewCorpus(seqs, dx, dy, ["a", "b", "c"])


def _bitwise_equal(a, b):
    if (a.d_x, a.d_y, a.label_alphabet, len(a)) != (b.d_x, b.d_y, b.label_alphabet, len(b)):
        return False
    for s, t in zip(a, b):
        if (s.speaker_id, s.utterance_id) != (t.speaker_id, t.utterance_id):
            return False
        if s.frames_x.tobytes() != t.frames_x.tobytes() or s.frames_y.tobytes() != t.frames_y.tobytes():
            return False
        if (s.labels is None) != (t.labels is None) or (s.labels is not None and not np.array_equal(s.labels, t.labels)):
            return False
    return True


class TestContainers:
    def test_views_must_share_frame_count(self):
        with pytest.raises(ValueError, match="frame"):
            FrameSequence("s", "u", np.zeros((4, 2)), np.zeros((3, 2)))

    def test_empty_speaker_rejected(self):
        with pytest.raises(ValueError, match="speaker"):
            FrameSequence("", "u", np.zeros((2, 1)), np.zeros((2, 1)))

    def test_inconsistent_dims_rejected(self):
        a = FrameSequence("s", "u", np.zeros((2, 2)), np.zeros((2, 1)))
        b = FrameSequence("s", "v", np.zeros((2, 3)), np.zeros((2, 1)))
        with pytest.raises(ValueError):
            MultiViewCorpus([a, b], 2, 1, [])


class TestCorpusFile:
    def test_round_trip_bitwise(self, tmp_path):
        c = _corpus()
        save_corpus(c, tmp_path / "c.mvc")
        assert _bitwise_equal(load_corpus(tmp_path / "c.mvc"), c)

    def test_empty_corpus_round_trips(self, tmp_path):
        c = MultiViewCorpus([], 4, 2, [])
        save_corpus(c, tmp_path / "e.mvc")
        back = load_corpus(tmp_path / "e.mvc")
        assert len(back) == 0 and (back.d_x, back.d_y) == (4, 2)

    def test_bad_magic_names_offset(self):
        buf = bytearray(encode_corpus(_corpus()))
        buf[1] ^= 0xFF
        with pytest.raises(CorpusFormatError, match="offset 0"):
            decode_corpus(bytes(buf))

    def test_bad_version_names_offset(self):
        buf = bytearray(encode_corpus(_corpus()))
        buf[4] = 9
        with pytest.raises(CorpusFormatError, match="offset 4"):
            decode_corpus(bytes(buf))

    def test_truncated(self):
        buf = encode_corpus(_corpus())
        with pytest.raises(CorpusFormatError, match="truncated"):
            decode_corpus(buf[:-3])

    def test_trailing_bytes(self):
        with pytest.raises(CorpusFormatError, match="trailing"):
            decode_corpus(encode_corpus(_corpus()) + b"\0")

    def test_layout(self):
        buf = encode_corpus(_corpus(n_speakers=1, utts=1, T=2, dx=1, dy=1))
        assert buf[:4] == b"MVC1" and buf[4] == 1
        (hlen,) = struct.unpack("<I", buf[5:9])
        # two x floats, two y floats, two int32 labels
        assert len(buf) == 9 + hlen + 2 * 4 + 2 * 4 + 2 * 4

    def test_header_dim_inconsistency(self):
        buf = encode_corpus(_corpus())
        hlen = struct.unpack("<I", buf[5:9])[0]
        header = buf[9:9 + hlen].replace(b'"d_x":2', b'"d_x":5')
        bad = buf[:5] + struct.pack("<I", len(header)) + header + buf[9 + hlen:]
        with pytest.raises(CorpusFormatError):
            decode_corpus(bad)

    def test_features_file(self, tmp_path):
        c = _corpus()
        F = np.arange(c.n_frames * 4, dtype=np.float64).reshape(-1, 4)
        save_features(F, c, tmp_path / "f.mvc", {"method": "x"})
        back = load_features(tmp_path / "f.mvc")
        assert np.array_equal(back.stacked("x"), F) and back.meta["method"] == "x"
        with pytest.raises(CorpusFormatError, match="not features"):
            save_corpus(c, tmp_path / "c.mvc")
            load_features(tmp_path / "c.mvc")


class TestSynth:
    def test_same_seed_bitwise(self):
        cfg = SynthConfig(n_speakers=2, utterances=2, frames=20, seed=3)
        a, b = synth_generate(cfg), synth_generate(cfg)
        assert _bitwise_equal(a, b) and a.digest() == b.digest()

    def test_different_seed_differs(self):
        a = synth_generate(SynthConfig(n_speakers=1, utterances=1, frames=20, seed=1))
        b = synth_generate(SynthConfig(n_speakers=1, utterances=1, frames=20, seed=2))
        assert a.digest() != b.digest()

    def test_survives_file_round_trip(self, tmp_path):
        c = synth_generate(SynthConfig(n_speakers=2, utterances=1, frames=10))
        save_corpus(c, tmp_path / "s.mvc")
        assert load_corpus(tmp_path / "s.mvc").digest() == c.digest()

    @pytest.mark.parametrize("bad", [
        dict(n_states=1), dict(z_dim=0), dict(self_loop=1.0), dict(silence_loop=0.0), dict(noise_x=-1.0),
    ])
    def test_invalid_config(self, bad):
        with pytest.raises(ValueError):
            SynthConfig(**bad)

    def test_noiseless_views_are_functions_of_state_with_unit_correlation(self):
        cfg = SynthConfig(n_speakers=4, utterances=4, frames=100, hx_dim=0, hy_dim=0, mixing=False,
                          noise_z=0.0, noise_x=0.0, noise_y=0.0, speaker_offset=0.0)
        c = synth_generate(cfg)
        X, Y, s = c.stacked("x"), c.stacked("y"), c.labels()
        for k in np.unique(s):
            assert np.ptp(X[s == k], axis=0).max() < 1e-6
            assert np.ptp(Y[s == k], axis=0).max() < 1e-6
        res = linear_cca(X, Y, cfg.z_dim, reg=1e-8)
        np.testing.assert_allclose(res.correlations, 1.0, atol=1e-4)

    def test_label_marginals_match_stationary_distribution(self):
        # 100 utterances x 1000 frames = 10^5 frames
        cfg = SynthConfig(n_speakers=10, utterances=10, frames=1000, x_dim=2, y_dim=2, z_dim=2, hx_dim=1, hy_dim=1)
        labels = synth_generate(cfg).labels()
        # independent oracle: power iteration on the transition matrix
        P = transition_matrix(cfg)
        pi = np.full(cfg.n_states, 1.0 / cfg.n_states)
        for _ in range(5000):
            pi = pi @ P
        np.testing.assert_allclose(stationary_distribution(P), pi, atol=1e-12)
        freq = np.bincount(labels, minlength=cfg.n_states) / labels.size
        assert np.abs(freq - pi).max() < 0.02

    def test_transition_rows_are_stochastic(self):
        P = transition_matrix(SynthConfig())
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-14)
        assert P[0, 0] == SynthConfig().silence_loop

    def test_silence_state_present(self):
        c = synth_generate(SynthConfig(n_speakers=1, utterances=2))
        assert c.label_alphabet[0] == "sil" and (c.labels() == 0).any()


class TestWindowing:
    def test_w1_is_identity(self):
        s = _corpus().sequences[0]
        assert np.array_equal(window_frames(s, "x", 1), s.frames_x)

    def test_three_frame_example(self):
        a, b, c = 1.0, 2.0, 3.0
        s = FrameSequence("s", "u", np.array([[a], [b], [c]]), np.zeros((3, 1)))
        np.testing.assert_array_equal(window_frames(s, "x", 3), [[a, a, b], [a, b, c], [b, c, c]])

    def test_plain_matrix_input(self):
        np.testing.assert_array_equal(window_frames(np.array([[1.0], [2.0]]), None, 3), [[1, 1, 2], [1, 2, 2]])

    def test_even_window_rejected(self):
        with pytest.raises(ValueError, match="odd"):
            window_frames(_corpus().sequences[0], "x", 4)

    @settings(max_examples=40, deadline=None)
    @given(T=st.integers(1, 9), d=st.integers(1, 4), half=st.integers(0, 5))
    def test_shape_and_centre_recovery(self, T, d, half):
        W = 2 * half + 1
        frames = np.arange(T * d, dtype=np.float64).reshape(T, d)
        out = window_frames(frames, None, W)
        assert out.shape == (T, d * W)
        assert np.array_equal(center_frame(out, d, W), frames)
        # every block is some frame of the same sequence, in temporal order
        idx = out[:, ::d] // d
        assert (np.diff(idx, axis=1) >= 0).all() and idx.min() >= 0 and idx.max() <= T - 1

    def test_never_crosses_utterances(self):
        c = _corpus(n_speakers=1, utts=2, T=3, dx=1)
        w = window_corpus(c, 5)
        first, second = c.sequences
        assert set(w["x"][:3].ravel()) <= set(first.frames_x.ravel())
        assert set(w["x"][3:].ravel()) <= set(second.frames_x.ravel())
        assert w["x"].shape[0] == w["y"].shape[0] == len(w["labels"]) == len(w["speakers"]) == 6


class TestNormalize:
    def test_post_condition(self):
        c = normalize_per_speaker(_corpus(T=40), ("x", "y"))
        for spk in c.speakers:
            for v in ("x", "y"):
                Z = c.subset([spk]).stacked(v)
                assert np.abs(Z.mean(axis=0)).max() < 1e-10
                assert np.abs(Z.var(axis=0) - 1).max() < 1e-10

    def test_default_is_y_only(self):
        c = _corpus(T=40)
        n = normalize_per_speaker(c)
        assert np.array_equal(n.stacked("x"), c.stacked("x"))
        assert not np.array_equal(n.stacked("y"), c.stacked("y"))

    def test_idempotent(self):
        once = normalize_per_speaker(_corpus(T=40), ("x", "y"))
        twice = normalize_per_speaker(once, ("x", "y"))
        np.testing.assert_allclose(twice.stacked("y"), once.stacked("y"), atol=1e-10)
        np.testing.assert_allclose(twice.stacked("x"), once.stacked("x"), atol=1e-10)

    def test_standardized_input_unchanged(self):
        rng = np.random.default_rng(0)
        y = rng.standard_normal((50, 2))
        y = (y - y.mean(0)) / y.std(0)
        c = MultiViewCorpus([FrameSequence("s", "u", np.zeros((50, 1)), y)], 1, 2, [])
        np.testing.assert_allclose(normalize_per_speaker(c).stacked("y"), y, atol=1e-12)

    def test_constant_dimension_zeroed_with_warning(self, caplog):
        y = np.column_stack([np.full(6, 3.0), np.arange(6.0)])
        c = MultiViewCorpus([FrameSequence("s", "u", np.zeros((6, 1)), y)], 1, 2, [])
        with caplog.at_level(logging.WARNING):
            out = normalize_per_speaker(c).stacked("y")
        assert np.array_equal(out[:, 0], np.zeros(6))
        assert "zero-variance" in caplog.text

    def test_single_frame_speaker_rejected(self):
        c = MultiViewCorpus([FrameSequence("s", "u", np.zeros((1, 1)), np.zeros((1, 1)))], 1, 1, [])
        with pytest.raises(ValueError, match="at least 2"):
            normalize_per_speaker(c)


class TestFolds:
    def test_twelve_speakers_six_folds(self):
        spk = [f"s{i}" for i in range(12)]
        plan = make_folds(spk, 6, seed=0)
        assert len(plan) == 6
        for f in plan:
            assert (len(f["train"]), len(f["dev"]), len(f["test"])) == (8, 2, 2)
            assert set(f["train"]) | set(f["dev"]) | set(f["test"]) == set(spk)
        tests = [t for f in plan for t in f["test"]]
        assert sorted(tests) == sorted(spk)

    def test_dev_is_next_group(self):
        plan = make_folds(list("abcdef"), 3, seed=1)
        for i, f in enumerate(plan):
            assert f["dev"] == plan.folds[(i + 1) % 3]["test"]

    def test_same_seed_same_plan(self):
        spk = [f"s{i}" for i in range(12)]
        assert make_folds(spk, 6, 4) == make_folds(spk, 6, 4)
        assert make_folds(spk, 6, 4) != make_folds(spk, 6, 5)

    def test_indivisible_rejected(self):
        with pytest.raises(ValueError, match="cannot be split"):
            make_folds([f"s{i}" for i in range(13)], 6)

    def test_relabeling_permutes_plan(self):
        spk = [f"s{i}" for i in range(12)]
        rename = {s: f"renamed_{s}" for s in spk}
        a = make_folds(spk, 6, 2)
        b = make_folds([rename[s] for s in spk], 6, 2)
        for fa, fb in zip(a, b):
            for k in ("train", "dev", "test"):
                assert [rename[s] for s in fa[k]] == fb[k]

    def test_dict_round_trip(self):
        plan = make_folds([f"s{i}" for i in range(6)], 3)
        assert FoldPlan.from_dict(plan.to_dict()) == plan

    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            FoldPlan(({"train": ["a"], "dev": ["a"], "test": ["b"]},))


class TestTandem:
    def test_shapes_and_order(self):
        learned, base = np.ones((5, 2)), np.zeros((5, 3))
        out = tandem_concat(learned, base)
        assert out.shape == (5, 5) and (out[:, :2] == 1).all() and (out[:, 2:] == 0).all()

    def test_degenerate_widths(self):
        base = np.arange(6.0).reshape(3, 2)
        assert np.array_equal(tandem_concat(np.zeros((3, 0)), base), base)
        assert np.array_equal(tandem_concat(base, np.zeros((3, 0))), base)

    def test_row_mismatch(self):
        with pytest.raises(ValueError):
            tandem_concat(np.zeros((3, 1)), np.zeros((4, 1)))

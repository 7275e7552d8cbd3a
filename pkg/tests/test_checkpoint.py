import json
import os

import numpy as np
import pytest

from mvlatent.checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint, tool_version
from mvlatent.models import build_contrastive, build_gan, build_model
from mvlatent.nn import ParamSet


def _vccap():
    return build_model(6, 4, z_dim=3, hx_dim=2, hy_dim=1, hidden=(5,), private_hidden=(4,), seed=3)


@pytest.mark.parametrize("make", [
    lambda: Checkpoint("vccap", _vccap(), window=3, frame_dims=(2, 1), train_config={"seed": 3}),
    lambda: Checkpoint("vccap-gan", _vccap(), build_gan(6, 4, hidden=(3,), seed=1), window=3, frame_dims=(2, 1)),
    lambda: Checkpoint("contrastive", build_contrastive(6, 4, 2, hidden=(3,)), window=1, frame_dims=(6, 4)),
    lambda: Checkpoint("cca", params=ParamSet([("cca.proj_x", np.arange(6.0).reshape(3, 2)),
                                                ("cca.mean_x", np.ones(3))]), window=1, frame_dims=(3, 2)),
    lambda: Checkpoint("baseline-identity", window=5, frame_dims=(2, 2)),
])
def test_round_trip_bitwise(tmp_path, make):
    ckpt = make()
    save_checkpoint(ckpt, tmp_path / "m")
    back = load_checkpoint(tmp_path / "m")
    assert back.bitwise_equal(ckpt)
    assert type(back.model) is type(ckpt.model)


def test_round_trip_preserves_behaviour(tmp_path):
    from mvlatent.models import encode_features

    ckpt = Checkpoint("vccap", _vccap(), window=3, frame_dims=(2, 1))
    save_checkpoint(ckpt, tmp_path / "m.json")
    back = load_checkpoint(tmp_path / "m.bin")
    x = np.random.default_rng(0).standard_normal((5, 6))
    assert encode_features(back.model, x).tobytes() == encode_features(ckpt.model, x).tobytes()


def test_manifest_contents(tmp_path):
    ckpt = Checkpoint("vccap", _vccap(), window=3, frame_dims=(2, 1), corpus_fingerprint="abc")
    path = save_checkpoint(ckpt, tmp_path / "m")
    man = json.loads(open(path).read())
    for key in ("method", "params", "model", "train_config", "corpus_fingerprint", "tool_version", "blob_sha256"):
        assert key in man
    assert man["tool_version"] == tool_version()
    n_values = sum(int(np.prod(shape)) for _, shape in man["params"])
    assert os.path.getsize(tmp_path / "m.bin") == 8 * n_values


def test_blob_is_little_endian_float64_in_manifest_order(tmp_path):
    ckpt = Checkpoint("cca", params=ParamSet([("a", [1.5, -2.0]), ("b", [[3.0]])]))
    save_checkpoint(ckpt, tmp_path / "m")
    raw = np.fromfile(tmp_path / "m.bin", dtype="<f8")
    assert raw.tolist() == [1.5, -2.0, 3.0]


def test_length_mismatch_fails_before_reading(tmp_path):
    save_checkpoint(Checkpoint("vccap", _vccap()), tmp_path / "m")
    with open(tmp_path / "m.bin", "ab") as fh:
        fh.write(b"\0" * 8)
    with pytest.raises(CheckpointError, match="bytes but the manifest"):
        load_checkpoint(tmp_path / "m")


def test_corrupted_blob_detected(tmp_path):
    save_checkpoint(Checkpoint("vccap", _vccap()), tmp_path / "m")
    data = bytearray((tmp_path / "m.bin").read_bytes())
    data[0] ^= 1
    (tmp_path / "m.bin").write_bytes(bytes(data))
    with pytest.raises(CheckpointError, match="digest"):
        load_checkpoint(tmp_path / "m")


def test_not_a_manifest(tmp_path):
    (tmp_path / "m.json").write_text('{"format": "other"}')
    (tmp_path / "m.bin").write_bytes(b"")
    with pytest.raises(CheckpointError, match="not an mvlatent"):
        load_checkpoint(tmp_path / "m")

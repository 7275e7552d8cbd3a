"""Checkpoints: a JSON manifest plus a little-endian float64 parameter blob.

``save_checkpoint(ckpt, "run/model")`` writes ``run/model.json`` and
``run/model.bin``. The blob holds every parameter array in manifest order,
row-major, so a load reproduces the saved values bit for bit. A blob whose
length disagrees with the manifest is rejected before anything is built.
"""

import functools
import hashlib
import json
import os
import subprocess
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .models.contrastive import ContrastiveModel
from .models.gan import GanConfig
from .models.vcca import MultiViewModel
from .nn import MlpSpec, ParamSet

FORMAT = "mvlatent-checkpoint"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


@functools.lru_cache(maxsize=1)
def tool_version():
    """``mvlatent <version>`` plus ``git describe`` output when run from a checkout."""
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--tags", "--dirty"],
            cwd=here, capture_output=True, text=True, timeout=5, check=True,
        ).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        out = ""
    return f"mvlatent {__version__}" + (f" ({out})" if out else "")


@dataclass
class Checkpoint:
    """A trained model (or linear projection) with its provenance.

    ``model`` is a :class:`MultiViewModel`, a :class:`ContrastiveModel`, or
    ``None`` for parameter-only methods (linear CCA, identity baseline)
    whose arrays live in ``params``.
    """

    method: str
    model: object = None
    gan: GanConfig = None
    params: ParamSet = field(default_factory=ParamSet)
    window: int = 1
    frame_dims: tuple = (0, 0)
    train_config: dict = field(default_factory=dict)
    corpus_fingerprint: str = ""
    meta: dict = field(default_factory=dict)

    def all_params(self):
        out = ParamSet()
        if self.model is not None:
            out = out.merged(self.model.params)
        if self.gan is not None:
            out = out.merged(self.gan.params)
        return out.merged(self.params)

    def bitwise_equal(self, other):
        return self.all_params().bitwise_equal(other.all_params()) and _manifest(self) == _manifest(other)


def _model_section(model):
    if model is None:
        return None
    specs = {name: model.specs[name].to_dict() for name in model.networks}
    if isinstance(model, MultiViewModel):
        return {
            "kind": "multiview",
            "x_dim": model.x_dim, "y_dim": model.y_dim,
            "z_dim": model.z_dim, "hx_dim": model.hx_dim, "hy_dim": model.hy_dim,
            "sigma_x": model.sigma_x, "sigma_y": model.sigma_y,
            "specs": specs, "meta": model.meta,
        }
    if isinstance(model, ContrastiveModel):
        return {
            "kind": "contrastive",
            "x_dim": model.x_dim, "y_dim": model.y_dim, "feature_dim": model.feature_dim,
            "margin": model.margin, "specs": specs, "meta": model.meta,
        }
    raise CheckpointError(f"cannot serialize model of type {type(model).__name__}")


def _gan_section(gan):
    if gan is None:
        return None
    return {
        "disc_x": gan.disc_x.to_dict(), "disc_y": gan.disc_y.to_dict(),
        "lambda1": gan.lambda1, "lambda2": gan.lambda2,
        "disc_minibatch": gan.disc_minibatch, "disc_update_period": gan.disc_update_period,
    }


def _manifest(ckpt):
    params = ckpt.all_params()
    return {
        "format": FORMAT,
        "format_version": FORMAT_VERSION,
        "method": ckpt.method,
        "window": ckpt.window,
        "frame_dims": list(ckpt.frame_dims),
        "model": _model_section(ckpt.model),
        "gan": _gan_section(ckpt.gan),
        "extra_params": list(ckpt.params),
        "params": [[name, list(shape)] for name, shape in params.shapes()],
        "train_config": ckpt.train_config,
        "corpus_fingerprint": ckpt.corpus_fingerprint,
        "tool_version": tool_version(),
        "meta": ckpt.meta,
    }


def _paths(path):
    stem = str(path)
    for ext in (".json", ".bin"):
        if stem.endswith(ext):
            stem = stem[: -len(ext)]
    return stem + ".json", stem + ".bin"


def save_checkpoint(ckpt, path):
    """Write manifest and blob; returns the manifest path."""
    manifest_path, blob_path = _paths(path)
    params = ckpt.all_params()
    blob = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in params.values())
    manifest = _manifest(ckpt)
    manifest["blob"] = os.path.basename(blob_path)
    manifest["blob_sha256"] = hashlib.sha256(blob).hexdigest()
    with open(blob_path, "wb") as fh:
        fh.write(blob)
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return manifest_path


def _build_model(section, params):
    if section is None:
        return None
    specs = {name: MlpSpec.from_dict(d) for name, d in section["specs"].items()}
    own = ParamSet((n, a) for n, a in params.items() if n.split(".", 1)[0] in specs)
    if section["kind"] == "multiview":
        return MultiViewModel(
            section["x_dim"], section["y_dim"], section["z_dim"], section["hx_dim"], section["hy_dim"],
            specs, own, section["sigma_x"], section["sigma_y"], dict(section.get("meta") or {}),
        )
    if section["kind"] == "contrastive":
        return ContrastiveModel(
            section["x_dim"], section["y_dim"], section["feature_dim"], specs, own, section["margin"],
            dict(section.get("meta") or {}),
        )
    raise CheckpointError(f"unknown model kind {section['kind']!r}")


def load_checkpoint(path):
    manifest_path, blob_path = _paths(path)
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{manifest_path}: manifest is not valid JSON ({exc})") from None
    if manifest.get("format") != FORMAT:
        raise CheckpointError(f"{manifest_path}: not an mvlatent checkpoint manifest")
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{manifest_path}: unsupported format version {manifest.get('format_version')}")
    shapes = [(name, tuple(shape)) for name, shape in manifest["params"]]
    expected = 8 * sum(int(np.prod(s, dtype=np.int64)) for _, s in shapes)
    size = os.path.getsize(blob_path)
    if size != expected:
        raise CheckpointError(
            f"{blob_path}: blob has {size} bytes but the manifest shapes need {expected}"
        )
    with open(blob_path, "rb") as fh:
        blob = fh.read()
    if hashlib.sha256(blob).hexdigest() != manifest.get("blob_sha256"):
        raise CheckpointError(f"{blob_path}: blob digest does not match the manifest")
    params = ParamSet.from_flat(shapes, np.frombuffer(blob, dtype="<f8").astype(np.float64))

    model = _build_model(manifest["model"], params)
    gan = None
    if manifest["gan"] is not None:
        g = manifest["gan"]
        gan = GanConfig(
            MlpSpec.from_dict(g["disc_x"]), MlpSpec.from_dict(g["disc_y"]),
            ParamSet((n, a) for n, a in params.items() if n.startswith(("disc_x.", "disc_y."))),
            g["lambda1"], g["lambda2"], g["disc_minibatch"], g["disc_update_period"],
        )
    extra = ParamSet((n, params[n]) for n in manifest["extra_params"])
    return Checkpoint(
        manifest["method"], model, gan, extra, manifest["window"], tuple(manifest["frame_dims"]),
        manifest["train_config"], manifest["corpus_fingerprint"], manifest["meta"],
    )

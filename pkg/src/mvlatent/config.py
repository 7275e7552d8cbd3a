"""Experiment configuration: a strict JSON document validated before any work."""

import copy
import json

METHODS = ("vcca", "vccap", "vccap-gan", "contrastive", "cca", "baseline-identity")


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "corpus": None,
    "synth": None,
    "method": "vccap",
    "window": 7,
    "z_dim": 70,
    "hx_dim": 0,
    "hy_dim": 0,
    "feature_dim": 50,
    "hidden": [1500, 1500, 1500],
    "private_hidden": [1024, 1024, 1024],
    "disc_hidden": [2048, 1500, 1500],
    "activation": "relu",
    "sigma_x": 1.0,
    "sigma_y": 0.1,
    "margin": 1.0,
    "beta": 1.0,
    "beta_hx": None,
    "beta_hy": None,
    "prior": {"kind": "standard", "checkpoint": None, "window": None, "warm_start": False},
    "gan": {
        "lambda1": 5.0,
        "lambda2": 5.0,
        "disc_minibatch": 1800,
        "disc_update_period": 9,
        "init_checkpoint": None,
    },
    "train": {
        "learning_rate": 1e-4,
        "minibatch": 200,
        "epochs": 10,
        "mc_samples": 1,
        "dropout_rate": 0.2,
    },
    "probe": {"l2_grid": [1e-3, 1e-2, 1e-1], "epochs": 500, "folds": 6, "tandem": True},
    "recognition_speakers": 12,
    "normalize_x": False,
    "cca_reg": 1e-4,
    "seed": 0,
    "output": None,
}

_NESTED = ("prior", "gan", "train", "probe")


def _merge(base, given, where):
    unknown = sorted(set(given) - set(base))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {where}")
    out = copy.deepcopy(base)
    for key, value in given.items():
        if key in _NESTED and where == "config":
            if not isinstance(value, dict):
                raise ConfigError(f"'{key}' must be an object")
            out[key] = _merge(base[key], value, f"'{key}'")
        else:
            out[key] = value
    return out


def _positive_int(cfg, key, where=None, allow_zero=False):
    v = cfg[key]
    if not isinstance(v, int) or isinstance(v, bool) or v < (0 if allow_zero else 1):
        bound = "nonnegative" if allow_zero else "positive"
        raise ConfigError(f"{where + '.' if where else ''}{key} must be a {bound} integer, got {v!r}")


def validate(cfg):
    """Raise :class:`ConfigError` on the first violated rule."""
    if cfg["method"] not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {cfg['method']!r}")
    if (cfg["corpus"] is None) == (cfg["synth"] is None):
        raise ConfigError("give exactly one of 'corpus' (a path) or 'synth' (generator settings)")
    if cfg["synth"] is not None and not isinstance(cfg["synth"], dict):
        raise ConfigError("'synth' must be an object of generator settings")
    W = cfg["window"]
    if not isinstance(W, int) or W < 1 or W % 2 == 0:
        raise ConfigError(f"window must be a positive odd integer, got {W!r}")
    for key in ("z_dim", "feature_dim", "recognition_speakers"):
        _positive_int(cfg, key)
    for key in ("hx_dim", "hy_dim", "seed"):
        _positive_int(cfg, key, allow_zero=True)
    if cfg["method"] in ("vcca", "contrastive", "cca", "baseline-identity") and (cfg["hx_dim"] or cfg["hy_dim"]):
        raise ConfigError(f"method {cfg['method']} has no private latents; set hx_dim = hy_dim = 0")
    for key in ("hidden", "private_hidden", "disc_hidden"):
        v = cfg[key]
        if not isinstance(v, list) or not all(isinstance(w, int) and w > 0 for w in v):
            raise ConfigError(f"{key} must be a list of positive integers")
    if cfg["activation"] not in ("relu", "linear"):
        raise ConfigError("activation must be 'relu' or 'linear'")
    for key in ("sigma_x", "sigma_y", "margin"):
        if not cfg[key] > 0:
            raise ConfigError(f"{key} must be positive")
    for key in ("beta", "beta_hx", "beta_hy", "cca_reg"):
        if cfg[key] is not None and not cfg[key] >= 0:
            raise ConfigError(f"{key} must be nonnegative")

    prior = cfg["prior"]
    if prior["kind"] not in ("standard", "learned"):
        raise ConfigError("prior.kind must be 'standard' or 'learned'")
    if prior["kind"] == "learned":
        if not prior["checkpoint"]:
            raise ConfigError("a learned prior needs prior.checkpoint")
        Wp = prior["window"]
        if not isinstance(Wp, int) or Wp < 1 or Wp % 2 == 0:
            raise ConfigError("prior.window must be a positive odd integer")
        if Wp >= W:
            raise ConfigError(f"prior window {Wp} must be smaller than the model window {W}")
        if cfg["method"] not in ("vcca", "vccap", "vccap-gan"):
            raise ConfigError(f"method {cfg['method']} does not take a prior")

    gan = cfg["gan"]
    if gan["lambda1"] < 0 or gan["lambda2"] < 0:
        raise ConfigError("gan.lambda1 and gan.lambda2 must be nonnegative")
    _positive_int(gan, "disc_minibatch", "gan")
    _positive_int(gan, "disc_update_period", "gan")

    train = cfg["train"]
    if not train["learning_rate"] > 0:
        raise ConfigError("train.learning_rate must be positive")
    _positive_int(train, "minibatch", "train")
    _positive_int(train, "mc_samples", "train")
    _positive_int(train, "epochs", "train", allow_zero=True)
    if not 0 <= train["dropout_rate"] < 1:
        raise ConfigError("train.dropout_rate must lie in [0, 1)")

    probe = cfg["probe"]
    if not probe["l2_grid"] or any(not v >= 0 for v in probe["l2_grid"]):
        raise ConfigError("probe.l2_grid must be a non-empty list of nonnegative values")
    _positive_int(probe, "epochs", "probe")
    _positive_int(probe, "folds", "probe")
    if probe["folds"] < 3:
        raise ConfigError("probe.folds must be at least 3")
    return cfg


def resolve(doc):
    """Defaults merged with ``doc`` (a dict), validated."""
    if not isinstance(doc, dict):
        raise ConfigError("a config must be a JSON object")
    return validate(_merge(DEFAULTS, doc, "config"))


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return resolve(doc)


def dump_config(cfg):
    return json.dumps(cfg, indent=1, sort_keys=True) + "\n"

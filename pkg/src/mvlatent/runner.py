"""End-to-end experiment steps shared by the CLI and the acceptance suite.

Every step is a pure function of its inputs and the master seed, so a run
repeated from its resolved config reproduces its outputs bit for bit.
"""

import csv
import io
import json
import logging
import os

import numpy as np

from .cca import linear_cca
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import ConfigError, dump_config
from .data import (
    FrameSequence,
    MultiViewCorpus,
    SynthConfig,
    center_frame,
    load_corpus,
    make_folds,
    normalize_per_speaker,
    save_features,
    synth_generate,
    tandem_concat,
    window_corpus,
)
from .models import (
    ContrastiveModel,
    MultiViewModel,
    PriorError,
    PriorSpec,
    TrainConfig,
    build_contrastive,
    build_gan,
    build_model,
    encode_contrastive,
    encode_features,
    train,
    warm_start_from_prior,
)
from .nn import ParamSet
from .probe import ProbeConfig, run_protocol

log = logging.getLogger(__name__)

NEURAL = ("vcca", "vccap", "vccap-gan", "contrastive")


def synth_config(d):
    try:
        return SynthConfig(**d)
    except TypeError as exc:
        raise ConfigError(f"synth: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"synth: {exc}") from None


def source_corpus(cfg):
    """The raw corpus named by a resolved config (loaded or generated)."""
    if cfg["corpus"] is not None:
        return load_corpus(cfg["corpus"])
    return synth_generate(synth_config(cfg["synth"]))


def prepare(corpus, cfg):
    views = ("x", "y") if cfg["normalize_x"] else ("y",)
    return normalize_per_speaker(corpus, views)


def split_speakers(corpus, n_recognition):
    """Sorted speakers split into (feature-learning, recognition) lists.

    The last ``n_recognition`` speakers are held out for the probe. A corpus
    with exactly that many speakers has no feature-learning part.
    """
    speakers = sorted(corpus.speakers)
    if len(speakers) < n_recognition:
        raise ConfigError(f"corpus has {len(speakers)} speakers, fewer than recognition_speakers={n_recognition}")
    cut = len(speakers) - n_recognition
    return speakers[:cut], speakers[cut:]


def train_config(cfg):
    t = cfg["train"]
    return TrainConfig(
        learning_rate=t["learning_rate"], minibatch=t["minibatch"], epochs=t["epochs"],
        mc_samples=t["mc_samples"], beta=cfg["beta"], beta_hx=cfg["beta_hx"], beta_hy=cfg["beta_hy"],
        dropout_rate=t["dropout_rate"], seed=cfg["seed"],
    )


def load_prior(cfg, frame_dim):
    p = cfg["prior"]
    if p["kind"] == "standard":
        return PriorSpec.standard()
    ckpt = load_checkpoint(p["checkpoint"])
    if not isinstance(ckpt.model, MultiViewModel):
        raise ConfigError(f"prior checkpoint {p['checkpoint']} does not hold a multi-view model")
    if ckpt.window != p["window"]:
        raise ConfigError(f"prior checkpoint was trained at W={ckpt.window}, config says W_prior={p['window']}")
    if ckpt.window >= cfg["window"]:
        raise ConfigError(f"prior window {ckpt.window} must be smaller than the model window {cfg['window']}")
    return PriorSpec("learned", ckpt.model, ckpt.window, frame_dim, source=str(p["checkpoint"]))


def build_for(cfg, x_dim, y_dim, prior=None):
    """Untrained model (and discriminators) for a neural method."""
    method, seed, rate = cfg["method"], cfg["seed"], cfg["train"]["dropout_rate"]
    if method == "contrastive":
        return build_contrastive(x_dim, y_dim, cfg["feature_dim"], cfg["hidden"], cfg["activation"], rate,
                                 cfg["margin"], seed), None
    init = cfg["gan"]["init_checkpoint"] if method == "vccap-gan" else None
    if init:
        model = load_checkpoint(init).model
        if not isinstance(model, MultiViewModel):
            raise ConfigError(f"GAN warm-start checkpoint {init} does not hold a multi-view model")
        if (model.x_dim, model.y_dim, model.z_dim, model.hx_dim, model.hy_dim) != (
                x_dim, y_dim, cfg["z_dim"], cfg["hx_dim"], cfg["hy_dim"]):
            raise ConfigError(f"GAN warm-start checkpoint {init} has different dimensions")
    else:
        model = build_model(x_dim, y_dim, cfg["z_dim"], cfg["hx_dim"], cfg["hy_dim"], cfg["hidden"],
                            cfg["private_hidden"], None, cfg["activation"], rate, cfg["sigma_x"],
                            cfg["sigma_y"], seed)
        if prior is not None and prior.kind == "learned" and cfg["prior"]["warm_start"]:
            model = warm_start_from_prior(model, prior)
    gan = None
    if method == "vccap-gan":
        g = cfg["gan"]
        gan = build_gan(x_dim, y_dim, cfg["disc_hidden"], cfg["activation"], rate, g["lambda1"], g["lambda2"],
                        g["disc_minibatch"], g["disc_update_period"], seed)
    return model, gan


def cca_params(res):
    return ParamSet([("cca.proj_x", res.proj_x), ("cca.mean_x", res.mean_x), ("cca.proj_y", res.proj_y),
                     ("cca.mean_y", res.mean_y), ("cca.correlations", res.correlations)])


def train_from_config(cfg, corpus=None, callback=None):
    """Train the configured method; returns ``(checkpoint, history)``.

    ``history`` is ``None`` for the closed-form methods.
    """
    raw = source_corpus(cfg) if corpus is None else corpus
    data = prepare(raw, cfg)
    feat_speakers, _ = split_speakers(data, cfg["recognition_speakers"])
    if not feat_speakers:
        raise ConfigError("no feature-learning speakers left after holding out the recognition speakers")
    W = cfg["window"]
    win = window_corpus(data.subset(feat_speakers), W)
    method = cfg["method"]
    common = dict(method=method, window=W, frame_dims=(data.d_x, data.d_y),
                  corpus_fingerprint=raw.digest(), meta={"feature_speakers": feat_speakers})
    if method == "baseline-identity":
        return Checkpoint(train_config=train_config(cfg).to_dict(), **common), None
    if method == "cca":
        res = linear_cca(win["x"], win["y"], cfg["z_dim"], cfg["cca_reg"])
        return Checkpoint(params=cca_params(res), train_config={"reg": cfg["cca_reg"], "k": cfg["z_dim"]}, **common), None

    try:
        prior = load_prior(cfg, data.d_x) if method != "contrastive" else None
        model, gan = build_for(cfg, win["x"].shape[1], win["y"].shape[1], prior)
    except PriorError as exc:
        raise ConfigError(str(exc)) from None
    tc = train_config(cfg)
    result = train(model, win["x"], win["y"], tc, prior, gan, callback)
    meta = dict(common.pop("meta"), prior=cfg["prior"])
    ckpt = Checkpoint(model=result.model, gan=result.gan, train_config=tc.to_dict(), meta=meta, **common)
    return ckpt, result.history


def write_run(out_dir, cfg, ckpt, history):
    os.makedirs(out_dir, exist_ok=True)
    save_checkpoint(ckpt, os.path.join(out_dir, "checkpoint"))
    with open(os.path.join(out_dir, "config.resolved.json"), "w", encoding="utf-8") as fh:
        fh.write(dump_config(cfg))
    if history is not None:
        with open(os.path.join(out_dir, "history.csv"), "w", encoding="utf-8") as fh:
            fh.write(history.to_csv())


def check_frame_width(ckpt, corpus):
    """Reject a corpus whose view-x frames do not fit the checkpoint."""
    d_ckpt = ckpt.frame_dims[0]
    if corpus.d_x != d_ckpt:
        raise ValueError(
            f"checkpoint expects {ckpt.window} x {d_ckpt} = {ckpt.window * d_ckpt} input columns "
            f"but the corpus windows to {ckpt.window} x {corpus.d_x} = {ckpt.window * corpus.d_x}"
        )


def extract(ckpt, corpus, tandem=False, window=None):
    """Per-frame features of view x for every frame of ``corpus``, in corpus order."""
    if window is not None and window != ckpt.window:
        d = ckpt.frame_dims[0]
        raise ValueError(
            f"input window W={window} gives {window * corpus.d_x} columns "
            f"but the checkpoint was trained on W={ckpt.window} ({ckpt.window * d} columns)"
        )
    check_frame_width(ckpt, corpus)
    W = ckpt.window
    x = window_corpus(corpus, W, views=("x",))["x"]
    model = ckpt.model
    if isinstance(model, MultiViewModel):
        feats = encode_features(model, x)
    elif isinstance(model, ContrastiveModel):
        feats = encode_contrastive(model, x)
    elif ckpt.method == "cca":
        feats = (x - ckpt.params["cca.mean_x"]) @ ckpt.params["cca.proj_x"]
    elif ckpt.method == "baseline-identity":
        feats = x
    else:
        raise ValueError(f"checkpoint method {ckpt.method!r} has no feature map")
    if tandem:
        feats = tandem_concat(feats, center_frame(x, corpus.d_x, W))
    return feats


def as_feature_corpus(features, corpus, meta=None):
    """Single-view corpus holding ``features`` with the utterance layout of ``corpus``."""
    seqs, pos = [], 0
    for s in corpus:
        seqs.append(FrameSequence(s.speaker_id, s.utterance_id, features[pos:pos + s.n_frames],
                                  np.zeros((s.n_frames, 0)), s.labels))
        pos += s.n_frames
    if pos != features.shape[0]:
        raise ValueError(f"{features.shape[0]} feature rows for {pos} frames")
    return MultiViewCorpus(seqs, features.shape[1], 0, corpus.label_alphabet, dict(meta or {}))


def extract_to_file(ckpt, corpus, path, tandem=False, window=None):
    feats = extract(ckpt, corpus, tandem, window)
    meta = {"method": ckpt.method, "window": ckpt.window, "tandem": bool(tandem),
            "checkpoint_fingerprint": ckpt.corpus_fingerprint}
    return save_features(feats, corpus, path, meta)


def probe_features(features, n_recognition=12, folds=6, probe=ProbeConfig(), method="", W=1):
    """Fold protocol over the recognition speakers of a feature corpus.

    Returns ``(report, fold_plan)``.
    """
    _, rec = split_speakers(features, n_recognition)
    sub = features.subset(rec)
    plan = make_folds(rec, folds, probe.seed)
    speakers = np.concatenate([[s.speaker_id] * s.n_frames for s in sub]) if len(sub) else np.array([])
    report = run_protocol(sub.stacked("x"), sub.labels(), speakers, plan, probe, method, W,
                          n_classes=max(2, len(features.label_alphabet)))
    return report, plan


def write_report(out_dir, report, plan=None):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.csv"), "w", encoding="utf-8") as fh:
        fh.write(report.to_csv())
    with open(os.path.join(out_dir, "report.md"), "w", encoding="utf-8") as fh:
        fh.write(report.to_markdown())
    if plan is not None:
        with open(os.path.join(out_dir, "folds.json"), "w", encoding="utf-8") as fh:
            json.dump(plan.to_dict(), fh, indent=1)
            fh.write("\n")


# --- cross-run comparison ---------------------------------------------------

TERMS = ("objective", "kl_z", "rec_x", "rec_y")


def _read_run(path):
    rpath = os.path.join(path, "report.csv")
    if not os.path.isfile(rpath):
        return None
    with open(rpath, encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return None
    run = {
        "run": path,
        "method": rows[0]["method"],
        "W": int(rows[0]["W"]),
        "dev": float(np.mean([float(r["dev_err"]) for r in rows])),
        "test": float(np.mean([float(r["test_err"]) for r in rows])),
        "folds": len(rows),
    }
    hpath = os.path.join(path, "history.csv")
    if os.path.isfile(hpath):
        with open(hpath, encoding="utf-8") as fh:
            hist = list(csv.DictReader(fh))
        if hist:
            for t in TERMS:
                run[t] = float(hist[-1][t]) if hist[-1].get(t) not in (None, "") else float("nan")
    return run


def compare_runs(paths):
    """Collect finished runs; returns ``(runs, incomplete)`` with duplicates flagged."""
    runs, incomplete, seen = [], [], set()
    for p in paths:
        r = _read_run(p)
        if r is None:
            incomplete.append(p)
            continue
        key = (r["method"], r["W"])
        r["duplicate"] = key in seen
        seen.add(key)
        runs.append(r)
    return runs, incomplete


def _fmt(v):
    return "" if v is None or (isinstance(v, float) and np.isnan(v)) else f"{v:.4f}"


def comparison_markdown(runs, incomplete=()):
    widths = sorted({r["W"] for r in runs})
    lines = ["| method | " + " | ".join(f"W={w} dev / test" for w in widths) + " | note |",
             "|---|" + "---:|" * len(widths) + "---|"]
    for r in runs:
        cells = [f"{_fmt(r['dev'])} / {_fmt(r['test'])}" if r["W"] == w else "" for w in widths]
        note = f"duplicate of an earlier {r['method']} W={r['W']} run" if r["duplicate"] else ""
        lines.append(f"| {r['method']} | " + " | ".join(cells) + f" | {note} |")
    out = "\n".join(lines) + "\n"
    terms = [r for r in runs if "objective" in r]
    if terms:
        out += "\n| run | method | W | " + " | ".join(TERMS) + " |\n|---|---|---:|" + "---:|" * len(TERMS) + "\n"
        for r in terms:
            out += f"| {r['run']} | {r['method']} | {r['W']} | " + " | ".join(_fmt(r[t]) for t in TERMS) + " |\n"
    if incomplete:
        out += "\nIncomplete runs: " + ", ".join(incomplete) + "\n"
    return out


def comparison_csv(runs):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run", "method", "W", "dev_err", "test_err", *TERMS, "duplicate"])
    for r in sorted(runs, key=lambda r: r["W"]):
        w.writerow([r["run"], r["method"], r["W"], repr(r["dev"]), repr(r["test"]),
                    *(repr(r[t]) if t in r else "" for t in TERMS), int(r["duplicate"])])
    return buf.getvalue()

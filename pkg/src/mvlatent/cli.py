"""``mvlatent`` command line: synth, train, extract, probe, cca, gradcheck, report.

Exit codes: 0 success, 1 a check failed, 2 usage or config error, 3 I/O or
file-format error.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import runner
from .cca import linear_cca, pcca_ml, principal_angles
from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, DEFAULTS, load_config, resolve
from .data import CorpusFormatError, load_corpus, load_features, save_corpus, synth_generate, window_corpus
from .models import TrainingError
from .probe import ProbeConfig
from .verify import gradcheck_objectives

log = logging.getLogger("mvlatent")

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
GRADCHECK_TOL = 1e-4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _config_or_defaults(path):
    """Resolved config from ``--config`` or a synth-free default for flag-driven commands."""
    if path:
        return load_config(path)
    cfg = json.loads(json.dumps(DEFAULTS))
    cfg["synth"] = {}
    return resolve({k: v for k, v in cfg.items() if k != "corpus"})


# --- commands ---------------------------------------------------------------

def cmd_synth(args):
    settings = {}
    if args.config:
        cfg = load_config(args.config)
        settings.update(cfg["synth"] or {})
    flags = {
        "n_speakers": args.speakers, "utterances": args.utts, "frames": args.frames, "n_states": args.states,
        "z_dim": args.zdim, "hx_dim": args.hxdim, "hy_dim": args.hydim, "speaker_offset": args.offset, "seed": args.seed,
    }
    settings.update({k: v for k, v in flags.items() if v is not None})
    if args.noise is not None:
        settings.update(noise_z=args.noise[0], noise_x=args.noise[1 % len(args.noise)],
                        noise_y=args.noise[2 % len(args.noise)])
    corpus = synth_generate(runner.synth_config(settings))
    save_corpus(corpus, args.out)
    print(f"wrote {args.out}: {len(corpus.speakers)} speakers, {corpus.n_frames} frames, digest {corpus.digest()[:16]}")
    return EXIT_OK


def cmd_train(args):
    cfg = load_config(args.config)
    if args.out:
        cfg["output"] = args.out
    if not cfg["output"]:
        raise UsageError("train needs an output directory (--out or 'output' in the config)")

    def progress(epoch, model, rec):
        log.info("epoch %d objective %.6g", epoch, rec.objective)

    ckpt, history = runner.train_from_config(cfg, callback=progress)
    runner.write_run(cfg["output"], cfg, ckpt, history)
    tail = f", final objective {history[-1].objective:.6g}" if history else ""
    print(f"trained {cfg['method']} (W={cfg['window']}) into {cfg['output']}{tail}")
    return EXIT_OK


def cmd_extract(args):
    ckpt = load_checkpoint(args.checkpoint)
    corpus = load_corpus(args.corpus)
    if args.normalize_x:
        corpus = runner.normalize_per_speaker(corpus, ("x",))
    runner.extract_to_file(ckpt, corpus, args.out, args.tandem, args.window)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_probe(args):
    cfg = _config_or_defaults(args.config)
    p = cfg["probe"]
    probe = ProbeConfig(tuple(args.l2_grid or p["l2_grid"]), args.epochs or p["epochs"],
                        cfg["seed"] if args.seed is None else args.seed)
    folds = args.folds or p["folds"]
    n_rec = args.recognition_speakers or cfg["recognition_speakers"]
    if args.features:
        if args.checkpoint or args.corpus:
            raise UsageError("give either --features or --corpus [--checkpoint], not both")
        feats = load_features(args.features)
        method = feats.meta.get("method", "features")
        W = int(feats.meta.get("window", 1))
    elif args.corpus:
        corpus = load_corpus(args.corpus)
        if args.checkpoint:
            ckpt = load_checkpoint(args.checkpoint)
            method, W = ckpt.method, ckpt.window
            F = runner.extract(ckpt, corpus, args.tandem)
        else:
            method, W = "baseline-identity", args.window or cfg["window"]
            F = window_corpus(corpus, W, views=("x",))["x"]
        feats = runner.as_feature_corpus(F, corpus)
    else:
        raise UsageError("probe needs --features or --corpus")
    report, plan = runner.probe_features(feats, n_rec, folds, probe, method, W)
    runner.write_report(args.out, report, plan)
    print(report.to_markdown(), end="")
    return EXIT_OK


def cmd_cca(args):
    cfg = _config_or_defaults(args.config)
    corpus = load_corpus(args.corpus) if args.corpus else runner.source_corpus(cfg)
    data = runner.prepare(corpus, cfg)
    W = args.window or cfg["window"]
    k = args.k or cfg["z_dim"]
    reg = cfg["cca_reg"] if args.reg is None else args.reg
    win = window_corpus(data, W)
    pc = pcca_ml(win["x"], win["y"], k, reg)
    res = linear_cca(win["x"], win["y"], k, reg)
    angles = np.concatenate([principal_angles(pc.map_x, res.proj_x), principal_angles(pc.map_y, res.proj_y)])
    print("canonical correlations: " + " ".join(f"{c:.6f}" for c in res.correlations))
    print(f"max principal angle, probabilistic vs classical maps: {angles.max():.3e} rad")
    if args.out:
        ckpt = Checkpoint(
            "cca", params=runner.cca_params(res), window=W, frame_dims=(data.d_x, data.d_y),
            train_config={"reg": reg, "k": k}, corpus_fingerprint=corpus.digest(),
        )
        os.makedirs(args.out, exist_ok=True)
        save_checkpoint(ckpt, os.path.join(args.out, "checkpoint"))
    return EXIT_OK if angles.max() < args.tol else EXIT_CHECK


def cmd_gradcheck(args):
    ok = True
    for name, err in gradcheck_objectives(args.method, args.dims, args.seed):
        passed = err < GRADCHECK_TOL
        ok &= passed
        print(f"{args.method} {name}: max relative error {err:.3e} {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_report(args):
    runs, incomplete = runner.compare_runs(args.runs)
    md = runner.comparison_markdown(runs, incomplete)
    print(md, end="")
    if args.out:
        with open(args.out + ".md", "w", encoding="utf-8") as fh:
            fh.write(md)
        with open(args.out + ".csv", "w", encoding="utf-8") as fh:
            fh.write(runner.comparison_csv(runs))
    if incomplete:
        for p in incomplete:
            print(f"incomplete run: {p}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def build_parser():
    p = _Parser(prog="mvlatent", description="Multi-view latent-variable feature learning.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("synth", help="generate a synthetic two-view corpus")
    s.add_argument("--config", help="take generator settings from a config's 'synth' section")
    s.add_argument("--speakers", type=int)
    s.add_argument("--utts", type=int, help="utterances per speaker")
    s.add_argument("--frames", type=int, help="frames per utterance")
    s.add_argument("--states", type=int, help="number of latent states K")
    s.add_argument("--zdim", type=int)
    s.add_argument("--hxdim", type=int)
    s.add_argument("--hydim", type=int)
    s.add_argument("--noise", type=_floats, help="noise scale(s): one value for all, or z,x,y")
    s.add_argument("--offset", type=float, help="per-speaker offset scale")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="train a model from an experiment config")
    t.add_argument("--config", required=True)
    t.add_argument("--out", help="run directory (overrides 'output')")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("extract", help="write per-frame features of view x")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--corpus", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--view", choices=("x",), default="x", help="only view x is available downstream")
    e.add_argument("--tandem", action="store_true", help="append the raw centre frame of view x")
    e.add_argument("--window", type=int, help="assert the input window size")
    e.add_argument("--normalize-x", action="store_true")
    e.set_defaults(func=cmd_extract)

    r = sub.add_parser("probe", help="fold-protocol linear probe evaluation")
    r.add_argument("--config")
    r.add_argument("--features")
    r.add_argument("--corpus")
    r.add_argument("--checkpoint")
    r.add_argument("--tandem", action="store_true")
    r.add_argument("--window", type=int, help="window for the identity baseline (--corpus only)")
    r.add_argument("--folds", type=int)
    r.add_argument("--recognition-speakers", type=int)
    r.add_argument("--l2-grid", type=_floats)
    r.add_argument("--epochs", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", required=True, help="directory for report.csv, report.md and folds.json")
    r.set_defaults(func=cmd_probe)

    c = sub.add_parser("cca", help="linear CCA with a check against the probabilistic solution")
    c.add_argument("--config")
    c.add_argument("--corpus")
    c.add_argument("--k", type=int)
    c.add_argument("--window", type=int)
    c.add_argument("--reg", type=float)
    c.add_argument("--tol", type=float, default=1e-6, help="largest acceptable principal angle (radians)")
    c.add_argument("--out", help="run directory for a cca checkpoint")
    c.set_defaults(func=cmd_cca)

    g = sub.add_parser("gradcheck", help="finite-difference check of a training objective")
    g.add_argument("--method", required=True, choices=("vcca", "vccap", "vccap-gan", "contrastive"))
    g.add_argument("--dims", type=_ints, default=[6, 4, 3, 2, 2], help="x,y,z[,hx,hy] widths")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--config", help="accepted for a uniform grammar; unused")
    g.set_defaults(func=cmd_gradcheck)

    rp = sub.add_parser("report", help="compare finished runs")
    rp.add_argument("runs", nargs="+", help="run directories holding report.csv")
    rp.add_argument("--out", help="prefix for <out>.md and <out>.csv")
    rp.add_argument("--config", help="accepted for a uniform grammar; unused")
    rp.set_defaults(func=cmd_report)
    return p


def _thread_limit():
    raw = os.environ.get("MVLATENT_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"MVLATENT_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise UsageError("MVLATENT_THREADS must be at least 1")
    return n


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=_thread_limit()):
            return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CorpusFormatError, CheckpointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())

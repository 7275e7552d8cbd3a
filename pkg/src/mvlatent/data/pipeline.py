"""Windowing, per-speaker normalization, speaker folds and tandem features."""

import logging
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..rng import stream

log = logging.getLogger(__name__)


def _check_window(W):
    if not isinstance(W, (int, np.integer)) or W < 1 or W % 2 == 0:
        raise ValueError(f"window size must be a positive odd integer, got {W!r}")


def window_frames(seq, view, W):
    """T x (d * W) matrix of frames t - (W-1)/2 .. t + (W-1)/2, edges replicated."""
    _check_window(W)
    frames = np.ascontiguousarray(seq.view(view) if hasattr(seq, "view") else seq, dtype=np.float64)
    return kernels.window_frames(frames, int(W))


def window_corpus(corpus, W, views=("x", "y")):
    """Stack windowed frames of every sequence; windows never cross utterances.

    Returns a dict with one matrix per requested view plus ``labels`` (when
    every sequence is labeled) and ``speakers`` (one id per row).
    """
    _check_window(W)
    out = {}
    for v in views:
        d = corpus.d_x if v == "x" else corpus.d_y
        blocks = [window_frames(s, v, W) for s in corpus.sequences]
        out[v] = np.concatenate(blocks) if blocks else np.zeros((0, d * W))
    out["speakers"] = np.array([s.speaker_id for s in corpus.sequences for _ in range(s.n_frames)])
    if corpus.sequences and all(s.labels is not None for s in corpus.sequences):
        out["labels"] = corpus.labels()
    return out


def center_frame(windowed, d, W):
    """Recover the centre frame from windowed rows."""
    c = (W - 1) // 2
    return windowed[:, c * d:(c + 1) * d]


def normalize_per_speaker(corpus, views=("y",)):
    """Standardize each speaker's frames per dimension (population std).

    Only view y is normalized by default. Dimensions with zero variance
    for a speaker are centered and left unscaled, with a warning.
    """
    if isinstance(views, str):
        views = (views,)
    groups = {}
    for i, s in enumerate(corpus.sequences):
        groups.setdefault(s.speaker_id, []).append(i)
    new = list(corpus.sequences)
    for spk, idx in groups.items():
        for v in views:
            stacked = np.concatenate([corpus.sequences[i].view(v) for i in idx])
            if stacked.shape[0] < 2:
                raise ValueError(f"speaker {spk!r} has {stacked.shape[0]} frames; normalization needs at least 2")
            mean = stacked.mean(axis=0)
            std = stacked.std(axis=0)
            flat = std == 0.0
            if flat.any():
                log.warning("speaker %s view %s: %d zero-variance dimensions left centered", spk, v, flat.sum())
            std = np.where(flat, 1.0, std)
            for i in idx:
                key = "frames_x" if v == "x" else "frames_y"
                new[i] = new[i].replaced(**{key: (new[i].view(v) - mean) / std})
    return corpus.with_sequences(new)


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple  # of dicts with train/dev/test speaker lists

    def __post_init__(self):
        tests = [set(f["test"]) for f in self.folds]
        for f in self.folds:
            if set(f["train"]) & set(f["dev"]) or set(f["train"]) & set(f["test"]) or set(f["dev"]) & set(f["test"]):
                raise ValueError("train, dev and test speakers of a fold must be disjoint")
        if tests and sum(len(t) for t in tests) != len(set().union(*tests)):
            raise ValueError("test groups overlap across folds")

    def __len__(self):
        return len(self.folds)

    def __iter__(self):
        return iter(self.folds)

    def to_dict(self):
        return {"folds": [dict(f) for f in self.folds]}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple({k: list(v) for k, v in f.items()} for f in d["folds"]))


def make_folds(speaker_ids, n_folds=6, seed=0):
    """Shuffle speakers into ``n_folds`` test groups; dev is the next group cyclically."""
    speakers = list(speaker_ids)
    if len(set(speakers)) != len(speakers):
        raise ValueError("speaker ids must be unique")
    if n_folds < 3:
        raise ValueError("need at least 3 folds to keep train, dev and test disjoint")
    if len(speakers) % n_folds:
        raise ValueError(f"{len(speakers)} speakers cannot be split into {n_folds} equal test groups")
    order = stream(seed, "folds").permutation(len(speakers))
    size = len(speakers) // n_folds
    groups = [[speakers[j] for j in order[i * size:(i + 1) * size]] for i in range(n_folds)]
    folds = []
    for i in range(n_folds):
        dev_i = (i + 1) % n_folds
        train = [s for g, grp in enumerate(groups) if g not in (i, dev_i) for s in grp]
        folds.append({"train": train, "dev": list(groups[dev_i]), "test": list(groups[i])})
    return FoldPlan(tuple(folds))


def tandem_concat(learned, base):
    """Row-wise ``[learned | base]``."""
    learned = np.asarray(learned, dtype=np.float64)
    base = np.asarray(base, dtype=np.float64)
    if learned.ndim != 2 or base.ndim != 2:
        raise ValueError("tandem inputs must be matrices")
    if learned.shape[0] != base.shape[0]:
        raise ValueError(f"row counts differ: {learned.shape[0]} learned vs {base.shape[0]} base")
    return np.concatenate([learned, base], axis=1)

"""Paired two-view frame sequences and the MVC1 binary container.

MVC1 layout (all integers little-endian)::

    offset 0   4 bytes   magic b"MVC1"
    offset 4   1 byte    format version (1)
    offset 5   4 bytes   header length H (uint32)
    offset 9   H bytes   UTF-8 JSON header
    then, per sequence in header order:
        T x d_x float32 frames of view x
        T x d_y float32 frames of view y
        T int32 labels (only when the sequence has labels)

Frames are stored as 32-bit floats and widened to 64-bit on load. Feature
files written by ``extract`` use the same container with ``d_y = 0`` and
``"kind": "features"`` in the header.
"""

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"MVC1"
VERSION = 1
_PREFIX = struct.Struct("<4sBI")


class CorpusFormatError(ValueError):
    """Malformed MVC1 data; the message names the byte offset."""


@dataclass(frozen=True)
class FrameSequence:
    """One utterance: frame-synchronous views x and y plus optional labels."""

    speaker_id: str
    utterance_id: str
    frames_x: np.ndarray
    frames_y: np.ndarray
    labels: np.ndarray = None

    def __post_init__(self):
        fx = np.asarray(self.frames_x, dtype=np.float64)
        fy = np.asarray(self.frames_y, dtype=np.float64)
        if fx.ndim != 2 or fy.ndim != 2:
            raise ValueError("frames must be T x d matrices")
        if fx.shape[0] != fy.shape[0]:
            raise ValueError(
                f"{self.speaker_id}/{self.utterance_id}: views have {fx.shape[0]} and {fy.shape[0]} frames"
            )
        if not self.speaker_id:
            raise ValueError("speaker id must be non-empty")
        object.__setattr__(self, "frames_x", fx)
        object.__setattr__(self, "frames_y", fy)
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64)
            if lab.shape != (fx.shape[0],):
                raise ValueError(f"{self.utterance_id}: expected {fx.shape[0]} labels, got {lab.shape}")
            object.__setattr__(self, "labels", lab)

    @property
    def n_frames(self):
        return self.frames_x.shape[0]

    def view(self, name):
        if name == "x":
            return self.frames_x
        if name == "y":
            return self.frames_y
        raise ValueError(f"unknown view {name!r}; expected 'x' or 'y'")

    def replaced(self, **changes):
        fields = dict(speaker_id=self.speaker_id, utterance_id=self.utterance_id,
                      frames_x=self.frames_x, frames_y=self.frames_y, labels=self.labels)
        fields.update(changes)
        return FrameSequence(**fields)


@dataclass(frozen=True)
class MultiViewCorpus:
    sequences: tuple
    d_x: int
    d_y: int
    label_alphabet: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        seqs = tuple(self.sequences)
        for s in seqs:
            if s.frames_x.shape[1] != self.d_x or s.frames_y.shape[1] != self.d_y:
                raise ValueError(
                    f"{s.speaker_id}/{s.utterance_id}: frame widths {s.frames_x.shape[1]}/{s.frames_y.shape[1]}"
                    f" differ from corpus widths {self.d_x}/{self.d_y}"
                )
        object.__setattr__(self, "sequences", seqs)
        object.__setattr__(self, "label_alphabet", tuple(self.label_alphabet))

    def __len__(self):
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)

    @property
    def speakers(self):
        """Speaker ids in order of first appearance."""
        return list(dict.fromkeys(s.speaker_id for s in self.sequences))

    @property
    def n_frames(self):
        return sum(s.n_frames for s in self.sequences)

    def subset(self, speakers):
        keep = set(speakers)
        unknown = keep - set(self.speakers)
        if unknown:
            raise KeyError(f"unknown speakers {sorted(unknown)}")
        return self.with_sequences([s for s in self.sequences if s.speaker_id in keep])

    def with_sequences(self, sequences):
        seqs = list(sequences)
        d_x = seqs[0].frames_x.shape[1] if seqs else self.d_x
        d_y = seqs[0].frames_y.shape[1] if seqs else self.d_y
        return MultiViewCorpus(seqs, d_x, d_y, self.label_alphabet, dict(self.meta))

    def stacked(self, view):
        if not self.sequences:
            return np.zeros((0, self.d_x if view == "x" else self.d_y))
        return np.concatenate([s.view(view) for s in self.sequences])

    def labels(self):
        if any(s.labels is None for s in self.sequences):
            raise ValueError("corpus has unlabeled sequences")
        return np.concatenate([s.labels for s in self.sequences]) if self.sequences else np.zeros(0, np.int64)

    def digest(self):
        """SHA-256 of the canonical MVC1 encoding."""
        return hashlib.sha256(encode_corpus(self)).hexdigest()


def encode_corpus(corpus, kind="corpus"):
    header = {
        "kind": kind,
        "d_x": corpus.d_x,
        "d_y": corpus.d_y,
        "label_alphabet": list(corpus.label_alphabet),
        "meta": corpus.meta,
        "sequences": [
            {"speaker": s.speaker_id, "utterance": s.utterance_id, "frames": s.n_frames,
             "labels": s.labels is not None}
            for s in corpus.sequences
        ],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [_PREFIX.pack(MAGIC, VERSION, len(blob)), blob]
    for s in corpus.sequences:
        parts.append(np.ascontiguousarray(s.frames_x, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(s.frames_y, dtype="<f4").tobytes())
        if s.labels is not None:
            parts.append(np.ascontiguousarray(s.labels, dtype="<i4").tobytes())
    return b"".join(parts)


def _take(buf, offset, n, what):
    if offset + n > len(buf):
        raise CorpusFormatError(
            f"truncated file at offset {offset}: {what} needs {n} bytes, {len(buf) - offset} remain"
        )
    return buf[offset:offset + n], offset + n


def decode_corpus(buf):
    """Inverse of :func:`encode_corpus`; returns ``(corpus, kind)``."""
    buf = bytes(buf)
    prefix, off = _take(buf, 0, _PREFIX.size, "file prefix")
    magic, version, hlen = _PREFIX.unpack(prefix)
    if magic != MAGIC:
        raise CorpusFormatError(f"bad magic {magic!r} at offset 0, expected {MAGIC!r}")
    if version != VERSION:
        raise CorpusFormatError(f"unsupported format version {version} at offset 4")
    raw, off = _take(buf, off, hlen, "header")
    try:
        header = json.loads(raw.decode("utf-8"))
        d_x, d_y = int(header["d_x"]), int(header["d_y"])
        entries = header["sequences"]
    except (ValueError, KeyError, TypeError) as exc:
        raise CorpusFormatError(f"unreadable header at offset {_PREFIX.size}: {exc}") from None
    seqs = []
    for e in entries:
        n = int(e["frames"])
        try:
            block, off = _take(buf, off, 4 * n * d_x, f"view x of {e['utterance']}")
            fx = np.frombuffer(block, dtype="<f4").reshape(n, d_x).astype(np.float64)
            block, off = _take(buf, off, 4 * n * d_y, f"view y of {e['utterance']}")
            fy = np.frombuffer(block, dtype="<f4").reshape(n, d_y).astype(np.float64)
            labels = None
            if e["labels"]:
                block, off = _take(buf, off, 4 * n, f"labels of {e['utterance']}")
                labels = np.frombuffer(block, dtype="<i4").astype(np.int64)
            seqs.append(FrameSequence(e["speaker"], e["utterance"], fx, fy, labels))
        except ValueError as exc:
            if isinstance(exc, CorpusFormatError):
                raise
            raise CorpusFormatError(f"inconsistent sequence ending before offset {off}: {exc}") from None
    if off != len(buf):
        raise CorpusFormatError(f"{len(buf) - off} trailing bytes at offset {off}")
    corpus = MultiViewCorpus(seqs, d_x, d_y, header.get("label_alphabet", ()), header.get("meta", {}))
    return corpus, header.get("kind", "corpus")


def save_corpus(corpus, path, kind="corpus"):
    """Write ``corpus`` to ``path``. Frames are quantized to float32."""
    with open(path, "wb") as fh:
        fh.write(encode_corpus(corpus, kind))


def load_corpus(path):
    with open(path, "rb") as fh:
        corpus, _ = decode_corpus(fh.read())
    return corpus


def save_features(features, sequences_like, path, meta=None):
    """Store per-frame features with the utterance layout of ``sequences_like``."""
    seqs, pos = [], 0
    for s in sequences_like:
        block = features[pos:pos + s.n_frames]
        seqs.append(FrameSequence(s.speaker_id, s.utterance_id, block, np.zeros((s.n_frames, 0)), s.labels))
        pos += s.n_frames
    if pos != features.shape[0]:
        raise ValueError(f"{features.shape[0]} feature rows for {pos} frames")
    corpus = MultiViewCorpus(seqs, features.shape[1], 0, sequences_like.label_alphabet, dict(meta or {}))
    save_corpus(corpus, path, kind="features")
    return corpus


def load_features(path):
    with open(path, "rb") as fh:
        corpus, kind = decode_corpus(fh.read())
    if kind != "features":
        raise CorpusFormatError(f"{path} holds a {kind!r} file, not features")
    return corpus

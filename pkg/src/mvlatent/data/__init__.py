"""Two-view corpora: containers, synthetic generation and the feature pipeline."""

from .corpus import (
    CorpusFormatError,
    FrameSequence,
    MultiViewCorpus,
    decode_corpus,
    encode_corpus,
    load_corpus,
    load_features,
    save_corpus,
    save_features,
)
from .pipeline import (
    FoldPlan,
    center_frame,
    make_folds,
    normalize_per_speaker,
    tandem_concat,
    window_corpus,
    window_frames,
)
from .synth import SynthConfig, stationary_distribution, synth_generate, transition_matrix

__all__ = [
    "CorpusFormatError",
    "FoldPlan",
    "FrameSequence",
    "MultiViewCorpus",
    "SynthConfig",
    "center_frame",
    "decode_corpus",
    "encode_corpus",
    "load_corpus",
    "load_features",
    "make_folds",
    "normalize_per_speaker",
    "save_corpus",
    "save_features",
    "stationary_distribution",
    "synth_generate",
    "tandem_concat",
    "transition_matrix",
    "window_corpus",
    "window_frames",
]

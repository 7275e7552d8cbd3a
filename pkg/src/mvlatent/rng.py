"""Named, independently seeded random streams derived from one master seed."""

import zlib

import numpy as np


def stream(seed, name):
    """Generator for sub-stream ``name`` of master ``seed``.

    Streams with different names are statistically independent, and adding
    a new consumer never shifts the draws of an existing one.
    """
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(key,)))


def streams(seed, *names):
    return {n: stream(seed, n) for n in names}

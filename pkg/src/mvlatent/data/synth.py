"""Synthetic two-view corpus: a Markov chain of discrete states drives a shared
continuous latent that generates both views, each with its own private factors.

Per frame t of speaker k::

    s_t   Markov chain over K states, state 0 acts as silence
    z_t = mu[s_t] + noise_z * e
    x_t = f(A z_t) + B hx_t + offset_x[k] + noise_x * e
    y_t = f(C z_t) + D hy_t + offset_y[k] + noise_y * e

with f = tanh(gain * .) when mixing is on (identity otherwise) and hx, hy
unit-variance AR(1) processes. The chain starts in its stationary
distribution, so every frame has the stationary label marginal.
"""

from dataclasses import asdict, dataclass

import numpy as np

from ..rng import stream
from .corpus import FrameSequence, MultiViewCorpus


@dataclass(frozen=True)
class SynthConfig:
    n_speakers: int = 24
    utterances: int = 8
    frames: int = 120
    n_states: int = 10
    z_dim: int = 8
    hx_dim: int = 4
    hy_dim: int = 4
    x_dim: int = 39
    y_dim: int = 16
    self_loop: float = 0.8
    silence_loop: float = 0.9
    mixing: bool = True
    mixing_gain: float = 1.5
    state_scale: float = 1.0
    noise_z: float = 0.3
    noise_x: float = 0.5
    noise_y: float = 0.1
    private_scale: float = 1.0
    private_ar: float = 0.9
    speaker_offset: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_states < 2:
            raise ValueError("need at least 2 latent states (K >= 2)")
        for name in ("n_speakers", "utterances", "frames", "z_dim", "x_dim", "y_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.hx_dim < 0 or self.hy_dim < 0:
            raise ValueError("private dimensions must be nonnegative")
        for name in ("self_loop", "silence_loop"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie strictly between 0 and 1")
        if not 0.0 <= self.private_ar < 1.0:
            raise ValueError("private_ar must lie in [0, 1)")
        for name in ("noise_z", "noise_x", "noise_y", "private_scale", "speaker_offset", "state_scale",
                     "mixing_gain"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def to_dict(self):
        return asdict(self)


def transition_matrix(config):
    """Row-stochastic K x K matrix with the configured self-loops.

    Off-diagonal mass is spread with seeded Dirichlet weights so that the
    chain has some sequential structure beyond "stay or jump uniformly".
    """
    K = config.n_states
    rng = stream(config.seed, "synth/transitions")
    P = np.zeros((K, K))
    for s in range(K):
        stay = config.silence_loop if s == 0 else config.self_loop
        w = rng.dirichlet(np.ones(K - 1))
        P[s, np.arange(K) != s] = (1.0 - stay) * w
        P[s, s] = stay
    return P


def stationary_distribution(P):
    """Left eigenvector of ``P`` for eigenvalue 1, normalized to sum 1."""
    vals, vecs = np.linalg.eig(P.T)
    v = np.real(vecs[:, np.argmin(np.abs(vals - 1.0))])
    return v / v.sum()


def _structure(config):
    rng = stream(config.seed, "synth/structure")
    mu = config.state_scale * rng.standard_normal((config.n_states, config.z_dim))
    mu[0] = 0.0  # silence sits at the latent origin
    A = rng.standard_normal((config.x_dim, config.z_dim)) / np.sqrt(config.z_dim)
    C = rng.standard_normal((config.y_dim, config.z_dim)) / np.sqrt(config.z_dim)
    B = config.private_scale * rng.standard_normal((config.x_dim, config.hx_dim)) / np.sqrt(max(config.hx_dim, 1))
    D = config.private_scale * rng.standard_normal((config.y_dim, config.hy_dim)) / np.sqrt(max(config.hy_dim, 1))
    return mu, A, B, C, D


def _chain(P, pi, T, rng):
    cum = np.cumsum(P, axis=1)
    u = rng.random(T)
    s = np.empty(T, dtype=np.int64)
    s[0] = min(np.searchsorted(np.cumsum(pi), u[0], side="right"), len(pi) - 1)
    for t in range(1, T):
        s[t] = min(np.searchsorted(cum[s[t - 1]], u[t], side="right"), len(pi) - 1)
    return s


def _ar1(T, d, a, rng):
    h = np.zeros((T, d))
    if d == 0 or T == 0:
        return h
    e = rng.standard_normal((T, d))
    h[0] = e[0]
    scale = np.sqrt(1.0 - a * a)
    for t in range(1, T):
        h[t] = a * h[t - 1] + scale * e[t]
    return h


def synth_generate(config):
    """Generate a labeled two-view corpus; bitwise reproducible from ``config``.

    Frames are rounded to float32 precision so that the corpus survives a
    save/load round trip unchanged.
    """
    P = transition_matrix(config)
    pi = stationary_distribution(P)
    mu, A, B, C, D = _structure(config)

    def mix(v):
        return np.tanh(config.mixing_gain * v) if config.mixing else v

    seqs = []
    for k in range(config.n_speakers):
        spk = f"s{k:02d}"
        rng = stream(config.seed, f"synth/speaker/{k}")
        off_x = config.speaker_offset * rng.standard_normal(config.x_dim)
        off_y = config.speaker_offset * rng.standard_normal(config.y_dim)
        for u in range(config.utterances):
            T = config.frames
            s = _chain(P, pi, T, rng)
            z = mu[s] + config.noise_z * rng.standard_normal((T, config.z_dim))
            hx = _ar1(T, config.hx_dim, config.private_ar, rng)
            hy = _ar1(T, config.hy_dim, config.private_ar, rng)
            x = mix(z @ A.T) + hx @ B.T + off_x + config.noise_x * rng.standard_normal((T, config.x_dim))
            y = mix(z @ C.T) + hy @ D.T + off_y + config.noise_y * rng.standard_normal((T, config.y_dim))
            seqs.append(FrameSequence(
                spk, f"{spk}_u{u:03d}",
                x.astype(np.float32).astype(np.float64),
                y.astype(np.float32).astype(np.float64),
                s,
            ))
    alphabet = ["sil"] + [f"st{i}" for i in range(1, config.n_states)]
    return MultiViewCorpus(seqs, config.x_dim, config.y_dim, alphabet, {"synth": config.to_dict()})

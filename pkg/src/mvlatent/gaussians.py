"""Diagonal Gaussians: closed-form KL, isotropic log-densities, reparameterized draws.

All functions accept plain arrays or :class:`~mvlatent.nn.Tensor` values and
return Tensors, so they can sit inside a recorded objective. Inputs may be a
single vector or a batch with one distribution per row.
"""

from dataclasses import dataclass

import numpy as np

from .nn import tensor as T
from .nn.tensor import DimensionError, Tensor, as_tensor

LOG_VAR_BOUNDS = (-10.0, 10.0)


@dataclass(frozen=True)
class DiagGaussian:
    """N(mean, diag(exp(log_var))). In checked mode log_var is clamped to [-10, 10]."""

    mean: Tensor
    log_var: Tensor

    def __post_init__(self):
        mean, log_var = as_tensor(self.mean), as_tensor(self.log_var)
        if mean.shape != log_var.shape:
            raise DimensionError(f"mean shape {mean.shape} != log_var shape {log_var.shape}")
        if T.is_checked():
            log_var = T.clip(log_var, *LOG_VAR_BOUNDS)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "log_var", log_var)

    @classmethod
    def standard(cls, shape):
        return cls(np.zeros(shape), np.zeros(shape))

    @property
    def dim(self):
        return self.mean.shape[-1]

    @property
    def shape(self):
        return self.mean.shape

    def detached(self):
        return DiagGaussian(Tensor(self.mean.data), Tensor(self.log_var.data))


def _reshape_row(t):
    return T._node(t.data.reshape(1, -1), (t,), lambda g: (g.reshape(t.shape),))


def _as_rows(t):
    t = as_tensor(t)
    if t.ndim == 2:
        return t
    if t.ndim == 1:
        return _reshape_row(t) if t.requires_grad else Tensor(t.data.reshape(1, -1))
    raise DimensionError(f"expected a vector or a batch of row vectors, got shape {t.shape}")


def kl_rows(q, p):
    """Per-row KL(q || p). ``p`` may broadcast against ``q`` (e.g. a standard prior)."""
    mq, lq = _as_rows(q.mean), _as_rows(q.log_var)
    mp, lp = _as_rows(p.mean), _as_rows(p.log_var)
    if mq.shape[1] != mp.shape[1]:
        raise DimensionError(f"KL between {mq.shape[1]}-d and {mp.shape[1]}-d Gaussians")
    if mp.shape != mq.shape:
        if mp.requires_grad or lp.requires_grad:
            raise DimensionError("a trainable prior must match the posterior batch shape")
        mp = Tensor(np.broadcast_to(mp.data, mq.shape))
        lp = Tensor(np.broadcast_to(lp.data, mq.shape))
    return T.diag_kl_rows(mq, lq, mp, lp)


def kl_divergence(q, p):
    """KL(q || p) summed over dimensions (and over rows for batches)."""
    return kl_rows(q, p).sum()


def log_pdf_isotropic_rows(x, mean, sigma):
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return T.iso_logpdf_rows(_as_rows(x), _as_rows(mean), float(sigma))


def log_pdf_isotropic(x, mean, sigma):
    """log N(x; mean, sigma^2 I), normalization constant included."""
    return log_pdf_isotropic_rows(x, mean, sigma).sum()


def reparameterize(q, eps):
    """mean + exp(log_var / 2) * eps, differentiable in mean and log_var."""
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != q.mean.shape:
        raise DimensionError(f"noise shape {eps.shape} != distribution shape {q.mean.shape}")
    return q.mean + (q.log_var * 0.5).exp() * Tensor(eps)


def standard_normal(rng, d, rows=None):
    """``d`` independent N(0, 1) draws (or a ``rows x d`` block)."""
    if d < 1:
        raise ValueError("dimension must be at least 1")
    return rng.standard_normal(d if rows is None else (rows, d))

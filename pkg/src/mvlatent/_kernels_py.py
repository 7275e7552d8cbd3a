"""Pure-numpy reference versions of the fused kernels.

Every function here has a twin with the same signature in ``_kernels.pyx``.
Outputs are freshly allocated; inputs are never modified.
"""

import numpy as np

LOG_2PI = float(np.log(2.0 * np.pi))


def adam_update(param, grad, m, v, lr, beta1, beta2, eps, step):
    m_new = beta1 * m + (1.0 - beta1) * grad
    v_new = beta2 * v + (1.0 - beta2) * (grad * grad)
    c1 = 1.0 - beta1 ** step
    c2 = 1.0 - beta2 ** step
    p_new = param - lr * (m_new / c1) / (np.sqrt(v_new / c2) + eps)
    return p_new, m_new, v_new


def diag_kl_rows(mq, lq, mp, lp):
    diff = mq - mp
    terms = (lp - lq) + np.exp(lq - lp) + diff * diff * np.exp(-lp) - 1.0
    return 0.5 * terms.sum(axis=1)


def diag_kl_grads(g, mq, lq, mp, lp):
    """Gradients of ``diag_kl_rows`` scaled row-wise by ``g``."""
    gcol = g[:, None]
    diff = mq - mp
    inv_vp = np.exp(-lp)
    ratio = np.exp(lq - lp)
    d_mq = gcol * diff * inv_vp
    d_lq = gcol * 0.5 * (ratio - 1.0)
    d_lp = gcol * 0.5 * (1.0 - ratio - diff * diff * inv_vp)
    return d_mq, d_lq, -d_mq, d_lp


def iso_logpdf_rows(x, mean, sigma):
    d = x.shape[1]
    r = (x - mean) / sigma
    return -0.5 * (r * r).sum(axis=1) - d * np.log(sigma) - 0.5 * d * LOG_2PI


def iso_logpdf_grad_mean(g, x, mean, sigma):
    return g[:, None] * (x - mean) / (sigma * sigma)


def relu_dropout(pre, mask, scale):
    out = np.maximum(pre, 0.0)
    if mask is not None:
        out = out * mask * scale
    return out


def relu_dropout_grad(g, pre, mask, scale):
    out = np.where(pre > 0.0, g, 0.0)
    if mask is not None:
        out = out * mask * scale
    return out


def window_frames(frames, W):
    T = frames.shape[0]
    half = (W - 1) // 2
    idx = np.clip(np.arange(T)[:, None] + np.arange(-half, half + 1)[None, :], 0, T - 1)
    return frames[idx].reshape(T, W * frames.shape[1])

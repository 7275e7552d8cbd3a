# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled fused kernels. Signatures mirror ``_kernels_py``."""

import numpy as np
from libc.math cimport exp, log, sqrt, pow

cdef double LOG_2PI = log(2.0 * 3.141592653589793)


def adam_update(const double[:] param, const double[:] grad, const double[:] m,
                const double[:] v, double lr, double beta1, double beta2,
                double eps, long step):
    cdef Py_ssize_t n = param.shape[0], i
    p_new = np.empty(n)
    m_new = np.empty(n)
    v_new = np.empty(n)
    cdef double[:] po = p_new, mo = m_new, vo = v_new
    cdef double c1 = 1.0 - pow(beta1, <double>step)
    cdef double c2 = 1.0 - pow(beta2, <double>step)
    cdef double gi, mi, vi
    with nogil:
        for i in range(n):
            gi = grad[i]
            mi = beta1 * m[i] + (1.0 - beta1) * gi
            vi = beta2 * v[i] + (1.0 - beta2) * (gi * gi)
            mo[i] = mi
            vo[i] = vi
            po[i] = param[i] - lr * (mi / c1) / (sqrt(vi / c2) + eps)
    return p_new, m_new, v_new


def diag_kl_rows(const double[:, :] mq, const double[:, :] lq,
                 const double[:, :] mp, const double[:, :] lp):
    cdef Py_ssize_t n = mq.shape[0], d = mq.shape[1], i, j
    out = np.empty(n)
    cdef double[:] o = out
    cdef double acc, diff
    with nogil:
        for i in range(n):
            acc = 0.0
            for j in range(d):
                diff = mq[i, j] - mp[i, j]
                acc = acc + ((lp[i, j] - lq[i, j]) + exp(lq[i, j] - lp[i, j]) + diff * diff * exp(-lp[i, j]) - 1.0)
            o[i] = 0.5 * acc
    return out


def diag_kl_grads(const double[:] g, const double[:, :] mq, const double[:, :] lq,
                  const double[:, :] mp, const double[:, :] lp):
    cdef Py_ssize_t n = mq.shape[0], d = mq.shape[1], i, j
    a_mq = np.empty((n, d))
    a_lq = np.empty((n, d))
    a_mp = np.empty((n, d))
    a_lp = np.empty((n, d))
    cdef double[:, :] o_mq = a_mq, o_lq = a_lq, o_mp = a_mp, o_lp = a_lp
    cdef double diff, inv_vp, ratio, gi
    with nogil:
        for i in range(n):
            gi = g[i]
            for j in range(d):
                diff = mq[i, j] - mp[i, j]
                inv_vp = exp(-lp[i, j])
                ratio = exp(lq[i, j] - lp[i, j])
                o_mq[i, j] = gi * diff * inv_vp
                o_mp[i, j] = -(gi * diff * inv_vp)
                o_lq[i, j] = gi * 0.5 * (ratio - 1.0)
                o_lp[i, j] = gi * 0.5 * (1.0 - ratio - diff * diff * inv_vp)
    return a_mq, a_lq, a_mp, a_lp


def iso_logpdf_rows(const double[:, :] x, const double[:, :] mean, double sigma):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], i, j
    out = np.empty(n)
    cdef double[:] o = out
    cdef double acc, r
    cdef double const_term = -d * log(sigma) - 0.5 * d * LOG_2PI
    with nogil:
        for i in range(n):
            acc = 0.0
            for j in range(d):
                r = (x[i, j] - mean[i, j]) / sigma
                acc = acc + r * r
            o[i] = -0.5 * acc + const_term
    return out


def iso_logpdf_grad_mean(const double[:] g, const double[:, :] x,
                         const double[:, :] mean, double sigma):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], i, j
    out = np.empty((n, d))
    cdef double[:, :] o = out
    cdef double s2 = sigma * sigma
    with nogil:
        for i in range(n):
            for j in range(d):
                o[i, j] = g[i] * (x[i, j] - mean[i, j]) / s2
    return out


def relu_dropout(const double[:, :] pre, mask, double scale):
    cdef Py_ssize_t n = pre.shape[0], d = pre.shape[1], i, j
    out = np.empty((n, d))
    cdef double[:, :] o = out
    cdef const double[:, :] mk
    cdef double p
    if mask is None:
        with nogil:
            for i in range(n):
                for j in range(d):
                    p = pre[i, j]
                    o[i, j] = p if p > 0.0 else 0.0
    else:
        mk = mask
        with nogil:
            for i in range(n):
                for j in range(d):
                    p = pre[i, j]
                    o[i, j] = ((p if p > 0.0 else 0.0) * mk[i, j]) * scale
    return out


def relu_dropout_grad(const double[:, :] g, const double[:, :] pre, mask, double scale):
    cdef Py_ssize_t n = pre.shape[0], d = pre.shape[1], i, j
    out = np.empty((n, d))
    cdef double[:, :] o = out
    cdef const double[:, :] mk
    if mask is None:
        with nogil:
            for i in range(n):
                for j in range(d):
                    o[i, j] = g[i, j] if pre[i, j] > 0.0 else 0.0
    else:
        mk = mask
        with nogil:
            for i in range(n):
                for j in range(d):
                    o[i, j] = ((g[i, j] if pre[i, j] > 0.0 else 0.0) * mk[i, j]) * scale
    return out


def window_frames(const double[:, :] frames, int W):
    cdef Py_ssize_t T = frames.shape[0], d = frames.shape[1], t, k, j, src
    cdef Py_ssize_t half = (W - 1) // 2
    out = np.empty((T, W * d))
    cdef double[:, :] o = out
    with nogil:
        for t in range(T):
            for k in range(W):
                src = t + k - half
                if src < 0:
                    src = 0
                elif src > T - 1:
                    src = T - 1
                for j in range(d):
                    o[t, k * d + j] = frames[src, j]
    return out

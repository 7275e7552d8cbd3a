"""Every available kernel backend must agree with the numpy reference."""

import numpy as np
import pytest

from mvlatent import _kernels_py as ref
from mvlatent import kernels

BACKENDS = kernels.available_backends()


@pytest.fixture(params=sorted(BACKENDS))
def k(request):
    return BACKENDS[request.param]


def _arrays(seed, shape, n):
    rng = np.random.default_rng(seed)
    return [rng.normal(size=shape) for _ in range(n)]


def test_selected_backend_is_listed():
    assert kernels.BACKEND in BACKENDS


def test_adam(k):
    p, g, m, v = _arrays(0, 50, 4)
    v = np.abs(v)
    got = k.adam_update(p, g, m, v, 1e-3, 0.9, 0.999, 1e-8, 7)
    want = ref.adam_update(p, g, m, v, 1e-3, 0.9, 0.999, 1e-8, 7)
    for a, b in zip(got, want):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-15)


def test_kl(k):
    mq, lq, mp, lp = _arrays(1, (6, 5), 4)
    np.testing.assert_allclose(k.diag_kl_rows(mq, lq, mp, lp), ref.diag_kl_rows(mq, lq, mp, lp), rtol=1e-13)
    g = np.random.default_rng(2).normal(size=6)
    for a, b in zip(k.diag_kl_grads(g, mq, lq, mp, lp), ref.diag_kl_grads(g, mq, lq, mp, lp)):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-15)


def test_kl_broadcast_prior(k):
    (mq, lq) = _arrays(3, (4, 3), 2)
    zeros = np.broadcast_to(np.zeros(3), (4, 3))
    np.testing.assert_allclose(k.diag_kl_rows(mq, lq, zeros, zeros), ref.diag_kl_rows(mq, lq, zeros, zeros), rtol=1e-13)


def test_logpdf(k):
    x, m = _arrays(4, (7, 3), 2)
    np.testing.assert_allclose(k.iso_logpdf_rows(x, m, 0.1), ref.iso_logpdf_rows(x, m, 0.1), rtol=1e-13)
    g = np.arange(7.0)
    np.testing.assert_allclose(k.iso_logpdf_grad_mean(g, x, m, 0.1), ref.iso_logpdf_grad_mean(g, x, m, 0.1), rtol=1e-13)


@pytest.mark.parametrize("with_mask", [False, True])
def test_relu_dropout(k, with_mask):
    pre, g = _arrays(5, (8, 6), 2)
    pre[0, 0] = 0.0
    mask = (np.random.default_rng(6).random((8, 6)) > 0.2).astype(float) if with_mask else None
    assert np.array_equal(k.relu_dropout(pre, mask, 1.25), ref.relu_dropout(pre, mask, 1.25))
    assert np.array_equal(k.relu_dropout_grad(g, pre, mask, 1.25), ref.relu_dropout_grad(g, pre, mask, 1.25))


@pytest.mark.parametrize("W", [1, 3, 7])
def test_window(k, W):
    (frames,) = _arrays(7, (5, 2), 1)
    assert np.array_equal(k.window_frames(frames, W), ref.window_frames(frames, W))


def test_window_empty(k):
    assert k.window_frames(np.zeros((0, 3)), 5).shape == (0, 15)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from mvlatent.gaussians import (
    DiagGaussian,
    kl_divergence,
    kl_rows,
    log_pdf_isotropic,
    reparameterize,
    standard_normal,
)
from mvlatent.nn import DimensionError, ParamSet, Tensor, checked_mode, grad_check


def _mc_kl(q_mean, q_lv, p_mean, p_lv, n, rng):
    """Monte Carlo E_q[log q - log p] with independent scipy densities."""
    sq, sp = np.exp(0.5 * q_lv), np.exp(0.5 * p_lv)
    z = q_mean + sq * rng.standard_normal((n, q_mean.size))
    log_ratio = (stats.norm.logpdf(z, q_mean, sq) - stats.norm.logpdf(z, p_mean, sp)).sum(axis=1)
    return log_ratio.mean(), log_ratio.std(ddof=1) / np.sqrt(n)


class TestKL:
    @pytest.mark.parametrize("d", [1, 3, 17])
    def test_identical_standard_is_zero(self, d):
        assert kl_divergence(DiagGaussian.standard(d), DiagGaussian.standard(d)).item() == 0.0

    def test_shifted_mean(self):
        q = DiagGaussian(np.array([1.0, 0.0]), np.zeros(2))
        assert kl_divergence(q, DiagGaussian.standard(2)).item() == pytest.approx(0.5, abs=1e-15)

    def test_wide_against_unit_matches_monte_carlo(self):
        q = DiagGaussian(np.zeros(1), np.log([4.0]))
        kl = kl_divergence(q, DiagGaussian.standard(1)).item()
        mc, se = _mc_kl(np.zeros(1), np.log([4.0]), np.zeros(1), np.zeros(1), 10**6, np.random.default_rng(0))
        assert abs(kl - mc) < 3 * se
        assert kl == pytest.approx(0.80685, abs=5e-6)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            kl_divergence(DiagGaussian.standard(2), DiagGaussian.standard(3))
        with pytest.raises(DimensionError):
            DiagGaussian(np.zeros(2), np.zeros(3))

    def test_batch_rows_with_broadcast_prior(self):
        rng = np.random.default_rng(1)
        q = DiagGaussian(rng.normal(size=(4, 3)), rng.normal(size=(4, 3)))
        rows = kl_rows(q, DiagGaussian.standard(3)).data
        singles = [kl_divergence(DiagGaussian(q.mean.data[i], q.log_var.data[i]), DiagGaussian.standard(3)).item()
                   for i in range(4)]
        assert np.allclose(rows, singles, rtol=1e-14)

    def test_checked_mode_clamps_log_var(self):
        with checked_mode():
            q = DiagGaussian(np.zeros(2), np.array([-50.0, 50.0]))
        assert np.array_equal(q.log_var.data, [-10.0, 10.0])

    def test_gradients(self):
        rng = np.random.default_rng(2)
        params = ParamSet({k: rng.normal(size=(3, 4)) for k in ("mq", "lq", "mp", "lp")})

        def f(p):
            return kl_divergence(DiagGaussian(p["mq"], p["lq"]), DiagGaussian(p["mp"], p["lp"]))

        assert grad_check(f, params) < 1e-6


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 6))
def test_kl_nonnegative_and_zero_iff_equal(seed, d):
    rng = np.random.default_rng(seed)
    m, lv = rng.normal(size=d) * 3, rng.uniform(-5, 5, size=d)
    q = DiagGaussian(m, lv)
    assert kl_divergence(q, DiagGaussian(m.copy(), lv.copy())).item() == 0.0
    other = DiagGaussian(m + rng.normal(size=d), lv + rng.normal(size=d))
    assert kl_divergence(q, other).item() > 0.0


class TestLogPdf:
    def test_standard_mode(self):
        assert log_pdf_isotropic([0.3], [0.3], 1.0).item() == pytest.approx(-0.5 * np.log(2 * np.pi), abs=1e-15)
        assert log_pdf_isotropic([0.3], [0.3], 1.0).item() == pytest.approx(-0.918939, abs=1e-6)

    def test_narrow_is_positive(self):
        v = log_pdf_isotropic([1.0], [1.0], 0.1).item()
        assert v == pytest.approx(1.383647, abs=1e-6)
        assert v == pytest.approx(stats.norm.logpdf(1.0, 1.0, 0.1), abs=1e-14)

    def test_two_dims(self):
        v = log_pdf_isotropic([1.0, 1.0], [0.0, 0.0], 1.0).item()
        assert v == pytest.approx(-np.log(2 * np.pi) - 1.0, abs=1e-14)

    def test_bad_sigma(self):
        with pytest.raises(ValueError):
            log_pdf_isotropic([0.0], [0.0], 0.0)
        with pytest.raises(ValueError):
            log_pdf_isotropic([0.0], [0.0], -1.0)

    def test_gradients(self):
        rng = np.random.default_rng(3)
        params = ParamSet({"x": rng.normal(size=(5, 3)), "m": rng.normal(size=(5, 3))})
        assert grad_check(lambda p: log_pdf_isotropic(p["x"], p["m"], 0.3), params) < 1e-6


class TestReparameterize:
    def test_zero_noise_gives_mean(self):
        q = DiagGaussian(np.array([1.5, -2.0]), np.array([0.3, -1.0]))
        assert np.array_equal(reparameterize(q, np.zeros(2)).data, [1.5, -2.0])

    def test_unit_scale(self):
        q = DiagGaussian(np.array([1.0, 2.0]), np.zeros(2))
        assert np.array_equal(reparameterize(q, np.array([0.5, -0.25])).data, [1.5, 1.75])

    def test_half_std(self):
        q = DiagGaussian(np.array([2.0]), np.log([0.25]))
        assert reparameterize(q, np.ones(1)).data[0] == pytest.approx(2.5, abs=1e-15)

    def test_sample_moments(self):
        rng = np.random.default_rng(4)
        mean, lv = np.array([1.0, -3.0, 0.0]), np.array([0.0, np.log(0.25), np.log(9.0)])
        n = 10**6
        eps = rng.standard_normal((n, 3))
        z = reparameterize(DiagGaussian(np.tile(mean, (n, 1)), np.tile(lv, (n, 1))), eps).data
        var = np.exp(lv)
        assert np.all(np.abs(z.mean(axis=0) - mean) < 4 * np.sqrt(var / n))
        # variance of the sample variance for a Gaussian is 2 var^2 / n
        assert np.all(np.abs(z.var(axis=0) - var) < 4 * np.sqrt(2 * var**2 / n))
        c = np.cov(z.T)
        off = c[~np.eye(3, dtype=bool)]
        assert np.all(np.abs(off) < 4 * np.sqrt(np.outer(var, var)[~np.eye(3, dtype=bool)] / n))

    def test_differentiable(self):
        rng = np.random.default_rng(5)
        eps = rng.standard_normal((4, 2))
        params = ParamSet({"m": rng.normal(size=(4, 2)), "lv": rng.normal(size=(4, 2))})
        f = lambda p: reparameterize(DiagGaussian(p["m"], p["lv"]), eps).square().sum()  # noqa: E731
        assert grad_check(f, params) < 1e-6


class TestStandardNormal:
    def test_seeded(self):
        a = standard_normal(np.random.default_rng(9), 5)
        b = standard_normal(np.random.default_rng(9), 5)
        assert np.array_equal(a, b)

    def test_moments(self):
        x = standard_normal(np.random.default_rng(0), 10**6)
        assert abs(x.mean()) < 0.004
        assert abs(x.var() - 1.0) < 0.005

    def test_rejects_zero_dim(self):
        with pytest.raises(ValueError):
            standard_normal(np.random.default_rng(0), 0)


def test_tensor_inputs_accepted():
    q = DiagGaussian(Tensor(np.zeros(2)), Tensor(np.zeros(2)))
    assert kl_divergence(q, q).item() == 0.0

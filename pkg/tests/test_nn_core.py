import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvlatent import gaussians as G
from mvlatent.nn import (
    AdamState,
    DimensionError,
    MlpSpec,
    NumericError,
    ParamSet,
    Tensor,
    adam_step,
    checked_mode,
    forward_mlp,
    grad_check,
    gradients,
    init_mlp,
    make_dropout_masks,
)
from mvlatent.nn import tensor as T


def _params_from_wx(W, b, prefix="net", head="out"):
    # tests write weights in the y = W x convention; storage is x @ W
    return ParamSet({f"{prefix}.{head}.W": np.asarray(W, float).T, f"{prefix}.{head}.b": np.asarray(b, float)})


class TestForward:
    def test_zero_weights_give_zero_output(self):
        spec = MlpSpec((4, 8, 8, 3))
        params = init_mlp(spec, np.random.default_rng(0), "net").zeros_like()
        out = forward_mlp(spec, params, np.random.default_rng(1).normal(size=(5, 4)))
        assert np.array_equal(out.data, np.zeros((5, 3)))

    def test_identity_linear_layer(self):
        spec = MlpSpec((3, 3), activation="linear")
        x = np.array([[0.5, -2.0, 3.0]])
        out = forward_mlp(spec, _params_from_wx(np.eye(3), np.zeros(3)), x)
        assert np.array_equal(out.data, x)

    def test_hand_relu_layer(self):
        # one hidden ReLU layer (the case in question) followed by an identity head
        spec = MlpSpec((2, 2, 2))
        params = ParamSet(
            {
                "net.l0.W": np.array([[1.0, -1.0], [0.0, 2.0]]).T,
                "net.l0.b": np.array([0.0, -1.0]),
                "net.out.W": np.eye(2),
                "net.out.b": np.zeros(2),
            }
        )
        pre = T.affine(Tensor([[1.0, 1.0]]), params["net.l0.W"], params["net.l0.b"])
        assert np.array_equal(pre.data, [[0.0, 1.0]])
        out = forward_mlp(spec, params, np.array([1.0, 1.0]))
        assert np.array_equal(out.data, [[0.0, 1.0]])

    def test_mean_and_logvar_head(self):
        spec = MlpSpec((3, 5, 2), output_heads="mean_and_logvar")
        params = init_mlp(spec, np.random.default_rng(0), "enc")
        mean, logvar = forward_mlp(spec, params, np.ones((4, 3)), prefix="enc")
        assert mean.shape == logvar.shape == (4, 2)
        assert "enc.mean.W" in params and "enc.logvar.W" in params

    def test_width_mismatch(self):
        spec = MlpSpec((3, 2))
        params = init_mlp(spec, np.random.default_rng(0), "net")
        with pytest.raises(DimensionError):
            forward_mlp(spec, params, np.ones((2, 4)))

    def test_mask_shape_mismatch(self):
        spec = MlpSpec((3, 4, 2), dropout_rate=0.5)
        params = init_mlp(spec, np.random.default_rng(0), "net")
        with pytest.raises(DimensionError):
            forward_mlp(spec, params, np.ones((2, 3)), masks=[np.ones((2, 5))])

    def test_checked_mode_rejects_nonfinite(self):
        spec = MlpSpec((2, 2), activation="linear")
        params = _params_from_wx(np.eye(2), np.zeros(2))
        with checked_mode():
            with pytest.raises(NumericError):
                forward_mlp(spec, params, np.array([[np.inf, 0.0]]))

    def test_no_dropout_is_bitwise_deterministic(self):
        spec = MlpSpec((6, 16, 16, 4))
        params = init_mlp(spec, np.random.default_rng(3), "net")
        x = np.random.default_rng(4).normal(size=(10, 6))
        a = forward_mlp(spec, params, x).data
        b = forward_mlp(spec, params, x.copy()).data
        assert a.tobytes() == b.tobytes()

    def test_inverted_dropout_preserves_expectation(self):
        spec = MlpSpec((3, 6, 2), activation="linear", dropout_rate=0.2)
        params = init_mlp(spec, np.random.default_rng(0), "net")
        x = np.array([[0.3, -1.2, 0.8]])
        ref = forward_mlp(spec, params, x).data[0]
        rng = np.random.default_rng(11)
        n = 10_000
        outs = np.empty((n, 2))
        for k in range(n):
            outs[k] = forward_mlp(spec, params, x, masks=make_dropout_masks(0.2, [6], rng)).data[0]
        se = outs.std(axis=0, ddof=1) / np.sqrt(n)
        assert np.all(np.abs(outs.mean(axis=0) - ref) < 3 * se)


class TestBackward:
    def test_sum_gives_unit_gradients(self):
        params = ParamSet({"a": np.arange(6.0).reshape(2, 3), "b": np.array([1.0, -2.0])})
        leaves = params.to_leaves()
        loss = leaves["a"].sum() + leaves["b"].sum()
        g = gradients(loss, leaves)
        assert np.array_equal(g["a"], np.ones((2, 3)))
        assert np.array_equal(g["b"], np.ones(2))

    def test_quadratic_form_gradient(self):
        rng = np.random.default_rng(0)
        W = rng.normal(size=(3, 4))
        x = rng.normal(size=(4, 1))
        leaves = ParamSet({"W": W}).to_leaves()
        loss = (T.matmul(leaves["W"], Tensor(x)).square().sum()) * 0.5
        g = gradients(loss, leaves)["W"]
        expected = (W @ x) @ x.T  # entry (i, j) = (Wx)_i x_j
        assert np.allclose(g, expected, rtol=1e-14, atol=1e-14)

    def test_unreached_parameter_gets_zero(self):
        leaves = ParamSet({"used": np.ones(3), "unused": np.ones(2)}).to_leaves()
        g = gradients((leaves["used"] * 2.0).sum(), leaves)
        assert np.array_equal(g["unused"], np.zeros(2))

    def test_unrecorded_parameter_is_lookup_error(self):
        leaves = ParamSet({"a": np.ones(3)}).to_leaves()
        loss = leaves["a"].sum()
        with pytest.raises(LookupError):
            gradients(loss, {"a": leaves["a"], "b": Tensor(np.ones(2))})

    def test_nonscalar_loss_rejected(self):
        leaves = ParamSet({"a": np.ones(3)}).to_leaves()
        with pytest.raises(DimensionError):
            gradients(leaves["a"] * 2.0, leaves)

    def test_unknown_parameter_name(self):
        with pytest.raises(KeyError):
            ParamSet({"a": np.ones(1)})["b"]

    def test_broadcast_and_shared_use(self):
        leaves = ParamSet({"w": np.array([1.0, 2.0, 3.0]), "c": np.array([0.5])}).to_leaves()
        w, c = leaves["w"], leaves["c"]
        loss = ((w * w + c) * w).sum() + (w / (c + 2.0)).sum()
        assert grad_check(lambda p: ((p["w"] * p["w"] + p["c"]) * p["w"]).sum() + (p["w"] / (p["c"] + 2.0)).sum(),
                          ParamSet({"w": w.data, "c": c.data})) < 1e-8
        g = gradients(loss, leaves)
        assert np.allclose(g["w"], 3 * w.data**2 + c.data + 1.0 / 2.5)


class TestAdam:
    def test_zero_gradient_is_identity(self):
        params = ParamSet({"a": np.array([1.0, -2.0]), "b": np.ones((2, 2))})
        state = AdamState.init(params, learning_rate=0.1)
        new, new_state = adam_step(params, params.zeros_like(), state)
        assert new.bitwise_equal(params)
        assert new_state.step_count == 1

    def test_first_step_moves_by_learning_rate(self):
        params = ParamSet({"w": np.array([1.0])})
        state = AdamState.init(params, learning_rate=0.1, epsilon=1e-8)
        new, _ = adam_step(params, ParamSet({"w": np.array([0.3])}), state)
        step = params["w"][0] - new["w"][0]
        assert step == pytest.approx(0.1 * 0.3 / (0.3 + 1e-8), rel=1e-12)

    def test_two_constant_steps_match_hand_recursion(self):
        g, lr, b1, b2, eps = 0.3, 0.1, 0.9, 0.999, 1e-8
        m = v = 0.0
        expected = []
        for t in (1, 2):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            expected.append(lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps))
        params = ParamSet({"w": np.array([0.0])})
        state = AdamState.init(params, learning_rate=lr)
        grads = ParamSet({"w": np.array([g])})
        p1, state = adam_step(params, grads, state)
        p2, state = adam_step(p1, grads, state)
        assert -p1["w"][0] == pytest.approx(expected[0], rel=1e-12)
        assert p1["w"][0] - p2["w"][0] == pytest.approx(expected[1], rel=1e-12)
        assert state.step_count == 2

    def test_shape_mismatch(self):
        params = ParamSet({"w": np.zeros(3)})
        with pytest.raises(DimensionError):
            adam_step(params, ParamSet({"w": np.zeros(2)}), AdamState.init(params))


class TestGradCheck:
    def test_quadratic_exact(self):
        rng = np.random.default_rng(0)
        A = rng.normal(size=(4, 4))
        A = A @ A.T
        params = ParamSet({"x": rng.normal(size=(4, 1))})

        def f(p):
            return (Tensor(A) @ p["x"] * p["x"]).sum()

        assert grad_check(f, params, perturbation=1e-5) < 1e-8

    def test_relu_mlp_gaussian_loss(self):
        rng = np.random.default_rng(2)
        spec = MlpSpec((3, 5, 4, 2))
        params = init_mlp(spec, rng, "net")
        x = rng.normal(size=(7, 3))
        y = rng.normal(size=(7, 2))
        pre = (x @ params["net.l0.W"]) + params["net.l0.b"]
        assert np.min(np.abs(pre)) > 1e-4  # no kink within the perturbation

        def f(p):
            return -G.log_pdf_isotropic(y, forward_mlp(spec, p, x), 0.5)

        assert grad_check(f, params, perturbation=1e-6) < 1e-4

    def test_nonfinite_objective(self):
        params = ParamSet({"x": np.array([-1.0])})
        with np.errstate(invalid="ignore"), pytest.raises(NumericError):
            grad_check(lambda p: p["x"].log().sum(), params)

    def test_bad_perturbation(self):
        with pytest.raises(ValueError):
            grad_check(lambda p: p["x"].sum(), ParamSet({"x": np.ones(1)}), perturbation=0.0)

    def test_random_subset_is_seeded(self):
        rng = np.random.default_rng(0)
        params = ParamSet({"x": rng.normal(size=50)})
        f = lambda p: (p["x"].exp()).sum()  # noqa: E731
        assert grad_check(f, params, max_coords=10, seed=3) == grad_check(f, params, max_coords=10, seed=3)


class TestDropoutMasks:
    def test_rate_zero_all_ones(self):
        masks = make_dropout_masks(0.0, [3, 4], np.random.default_rng(0), rows=2)
        assert all(np.array_equal(m, np.ones_like(m)) for m in masks)

    def test_keep_fraction(self):
        (mask,) = make_dropout_masks(0.2, [10**6], np.random.default_rng(0))
        assert abs(mask.mean() - 0.8) < 0.002

    def test_seeded(self):
        a = make_dropout_masks(0.2, [100], np.random.default_rng(5), rows=3)
        b = make_dropout_masks(0.2, [100], np.random.default_rng(5), rows=3)
        assert np.array_equal(a[0], b[0])

    def test_invalid_rate(self):
        with pytest.raises(ValueError):
            make_dropout_masks(1.0, [3], np.random.default_rng(0))


def test_spec_validation():
    with pytest.raises(ValueError):
        MlpSpec((3,))
    with pytest.raises(ValueError):
        MlpSpec((3, 2), dropout_rate=1.0)
    with pytest.raises(ValueError):
        MlpSpec((3, 2), activation="tanh")


def test_paramset_flat_round_trip():
    p = init_mlp(MlpSpec((3, 4, 2), output_heads="mean_and_logvar"), np.random.default_rng(0), "e")
    q = ParamSet.from_flat(p.shapes(), p.flat())
    assert q.bitwise_equal(p)
    with pytest.raises(ValueError):
        ParamSet.from_flat(p.shapes(), np.zeros(p.count() + 1))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_adam_zero_gradient_identity_property(seed):
    rng = np.random.default_rng(seed)
    params = ParamSet({"w": rng.normal(size=(3, 2)), "b": rng.normal(size=2)})
    state = AdamState.init(params, learning_rate=float(rng.uniform(1e-5, 1.0)))
    new, _ = adam_step(params, params.zeros_like(), state)
    assert new.bitwise_equal(params)

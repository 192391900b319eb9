import numpy as np
import pytest

from cilkit.errors import ShapeError, StateError
from cilkit.losses import cross_entropy
from cilkit.nn import (
    Gradients,
    MlpClassifier,
    backward,
    expand_head,
    features,
    forward,
    init_mlp,
    sgd_step,
)
from cilkit.training import run_sgd_epoch


def straight_line_forward(model, batch):
    """Independent re-evaluation of the affine/ReLU stack, loop by loop."""
    out = []
    for row in batch:
        a = list(row)
        for layer in range(len(model.weights)):
            w, b = model.weights[layer], model.biases[layer]
            z = [sum(a[i] * w[i, j] for i in range(w.shape[0])) + b[j]
                 for j in range(w.shape[1])]
            if layer < len(model.weights) - 1:
                a = [max(v, 0.0) for v in z]
            else:
                a = z
        out.append(a)
    return np.array(out)


def fd_param_gradients(model, batch, loss_fn, h=1e-5):
    """Central finite differences of loss_fn(logits) w.r.t. every parameter."""
    def scalar_loss():
        logits, _ = forward(model, batch)
        return loss_fn(logits)[0]

    d_w, d_b = [], []
    for arr, grads in ((model.weights, d_w), (model.biases, d_b)):
        for p in arr:
            g = np.zeros_like(p)
            for idx in np.ndindex(p.shape):
                orig = p[idx]
                p[idx] = orig + h
                up = scalar_loss()
                p[idx] = orig - h
                down = scalar_loss()
                p[idx] = orig
                g[idx] = (up - down) / (2 * h)
            grads.append(g)
    return Gradients(d_w, d_b)


def max_rel_err(analytic: Gradients, numeric: Gradients) -> float:
    worst = 0.0
    for a_list, n_list in ((analytic.d_weights, numeric.d_weights),
                           (analytic.d_biases, numeric.d_biases)):
        for a, n in zip(a_list, n_list):
            denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))
            worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def zero_model(dims):
    return MlpClassifier(list(dims),
                         [np.zeros((a, b)) for a, b in zip(dims[:-1], dims[1:])],
                         [np.zeros(b) for b in dims[1:]])


class TestForward:
    def test_all_zero_parameters_give_zero_logits(self):
        model = zero_model([3, 4, 2])
        logits, _ = forward(model, np.random.default_rng(0).normal(size=(5, 3)))
        assert np.all(logits == 0.0)

    def test_single_identity_layer_is_identity(self):
        model = MlpClassifier([2, 2], [np.eye(2)], [np.zeros(2)])
        logits, _ = forward(model, np.array([[1.0, 2.0]]))
        np.testing.assert_array_equal(logits, [[1.0, 2.0]])

    def test_matches_straight_line_evaluator(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            dims = [int(d) for d in rng.integers(1, 6, size=3)]
            model = init_mlp(dims, rng.integers(0, 1 << 31))
            batch = rng.normal(size=(4, dims[0]))
            logits, _ = forward(model, batch)
            np.testing.assert_allclose(logits, straight_line_forward(model, batch),
                                       rtol=1e-12, atol=1e-12)

    def test_dimension_mismatch_raises(self):
        model = init_mlp([3, 2], 0)
        with pytest.raises(ShapeError):
            forward(model, np.zeros((2, 4)))


class TestFeatures:
    def test_zero_hidden_weights_give_zero_features(self):
        model = zero_model([2, 3, 2])
        assert np.all(features(model, np.ones((4, 2))) == 0.0)

    def test_identity_first_layer_passes_nonnegative_input_through(self):
        model = MlpClassifier([2, 2, 1], [np.eye(2), np.ones((2, 1))],
                              [np.zeros(2), np.zeros(1)])
        np.testing.assert_array_equal(features(model, np.array([[1.0, 2.0]])),
                                      [[1.0, 2.0]])

    def test_equals_last_hidden_activation_of_trace(self):
        rng = np.random.default_rng(3)
        model = init_mlp([4, 5, 3, 2], 11)
        batch = rng.normal(size=(6, 4))
        _, trace = forward(model, batch)
        np.testing.assert_array_equal(features(model, batch), trace.activations[-1])

    def test_no_hidden_layer_returns_input(self):
        model = init_mlp([3, 2], 5)
        batch = np.random.default_rng(1).normal(size=(2, 3))
        np.testing.assert_array_equal(features(model, batch), batch)


class TestBackward:
    def test_zero_upstream_gives_zero_gradients(self):
        model = init_mlp([3, 4, 2], 0)
        batch = np.random.default_rng(0).normal(size=(5, 3))
        logits, trace = forward(model, batch)
        grads = backward(model, trace, np.zeros_like(logits))
        assert all(np.all(g == 0.0) for g in grads.d_weights + grads.d_biases)

    def test_linear_model_gradient_is_batch_transpose_times_upstream(self):
        rng = np.random.default_rng(4)
        model = init_mlp([3, 2], 9)
        batch = rng.normal(size=(5, 3))
        upstream = rng.normal(size=(5, 2))
        _, trace = forward(model, batch)
        grads = backward(model, trace, upstream)
        np.testing.assert_allclose(grads.d_weights[0], batch.T @ upstream,
                                   rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(grads.d_biases[0], upstream.sum(axis=0),
                                   rtol=1e-12, atol=1e-12)

    def test_matches_finite_differences_on_random_nets(self):
        rng = np.random.default_rng(12)
        for trial in range(10):
            dims = [int(d) for d in rng.integers(2, 8, size=rng.integers(2, 4))]
            model = init_mlp(dims, int(rng.integers(0, 1 << 31)))
            batch = rng.normal(size=(int(rng.integers(1, 5)), dims[0]))
            labels = rng.integers(0, dims[-1], size=batch.shape[0])

            def loss_fn(logits):
                return cross_entropy(logits, labels)

            logits, trace = forward(model, batch)
            _, d_logits = loss_fn(logits)
            analytic = backward(model, trace, d_logits)
            numeric = fd_param_gradients(model, batch, loss_fn)
            assert max_rel_err(analytic, numeric) < 1e-4

    def test_foreign_trace_rejected(self):
        model_a = init_mlp([2, 2], 0)
        model_b = init_mlp([2, 2], 1)
        _, trace = forward(model_a, np.zeros((1, 2)))
        with pytest.raises(StateError):
            backward(model_b, trace, np.zeros((1, 2)))


class TestSgdStep:
    def test_zero_learning_rate_keeps_model(self):
        model = init_mlp([2, 3, 2], 0)
        before = [w.copy() for w in model.weights]
        _, trace = forward(model, np.ones((1, 2)))
        grads = backward(model, trace, np.ones((1, 2)))
        sgd_step(model, grads, 0.0)
        for w, b in zip(model.weights, before):
            np.testing.assert_array_equal(w, b)

    def test_single_parameter_arithmetic(self):
        model = MlpClassifier([1, 1], [np.array([[1.0]])], [np.zeros(1)])
        grads = Gradients([np.array([[0.5]])], [np.zeros(1)])
        sgd_step(model, grads, 0.1)
        assert model.weights[0][0, 0] == pytest.approx(0.95, abs=1e-15)

    def test_two_steps_equal_one_summed_step(self):
        grads = Gradients([np.array([[0.25]])], [np.array([0.5])])
        twice = MlpClassifier([1, 1], [np.array([[1.0]])], [np.array([0.0])])
        sgd_step(twice, grads, 0.1)
        sgd_step(twice, grads, 0.1)
        once = MlpClassifier([1, 1], [np.array([[1.0]])], [np.array([0.0])])
        sgd_step(once, grads.scaled(2.0), 0.1)
        np.testing.assert_allclose(twice.weights[0], once.weights[0], rtol=1e-15)
        np.testing.assert_allclose(twice.biases[0], once.biases[0], rtol=1e-15)

    def test_shape_mismatch_raises(self):
        model = init_mlp([2, 2], 0)
        with pytest.raises(ShapeError):
            sgd_step(model, Gradients([np.zeros((3, 2))], [np.zeros(2)]), 0.1)


class TestExpandHead:
    def test_old_logits_preserved_in_leading_positions(self):
        rng = np.random.default_rng(2)
        model = init_mlp([3, 4, 2], 6)
        batch = rng.normal(size=(5, 3))
        old_logits, _ = forward(model, batch)
        grown = expand_head(model, 1, 0.05, 123)
        new_logits, _ = forward(grown, batch)
        assert grown.output_dim == 3
        np.testing.assert_array_equal(new_logits[:, :2], old_logits)

    def test_zero_init_scale_gives_zero_new_logits(self):
        model = init_mlp([3, 4, 2], 6)
        grown = expand_head(model, 2, 0.0, 1)
        logits, _ = forward(grown, np.random.default_rng(0).normal(size=(4, 3)))
        assert np.all(logits[:, 2:] == 0.0)

    def test_same_seed_is_bit_identical(self):
        model = init_mlp([3, 4, 2], 6)
        a = expand_head(model, 3, 0.05, 42)
        b = expand_head(model, 3, 0.05, 42)
        np.testing.assert_array_equal(a.weights[-1], b.weights[-1])
        np.testing.assert_array_equal(a.biases[-1], b.biases[-1])

    def test_expand_preserves_logits_for_random_models(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            dims = [int(d) for d in rng.integers(1, 7, size=3)]
            model = init_mlp(dims, int(rng.integers(0, 1 << 31)))
            batch = rng.normal(size=(3, dims[0]))
            old_logits, _ = forward(model, batch)
            k = int(rng.integers(1, 4))
            grown = expand_head(model, k, 0.1, int(rng.integers(0, 1 << 31)))
            new_logits, _ = forward(grown, batch)
            np.testing.assert_array_equal(new_logits[:, :dims[-1]], old_logits)

    def test_extra_outputs_must_be_positive(self):
        with pytest.raises(ShapeError):
            expand_head(init_mlp([2, 2], 0), 0, 0.05, 0)


class TestDeterminism:
    def test_identical_seeds_give_bit_identical_training(self):
        def train_once():
            rng = np.random.default_rng(77)
            data_rng = np.random.default_rng(5)
            x = data_rng.normal(size=(40, 3))
            y = data_rng.integers(0, 2, size=40)
            model = init_mlp([3, 8, 2], 13)
            for _ in range(5):
                run_sgd_epoch(model, x, 16, 0.1, rng,
                              lambda logits, idx: cross_entropy(logits, y[idx]))
            return model

        a, b = train_once(), train_once()
        for wa, wb in zip(a.weights, b.weights):
            np.testing.assert_array_equal(wa, wb)
        for ba, bb in zip(a.biases, b.biases):
            np.testing.assert_array_equal(ba, bb)

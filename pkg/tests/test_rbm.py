import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbn_spread.errors import DivergenceError, ShapeError, ValidationError
from dbn_spread.rbm import (
    BERNOULLI, GAUSSIAN, CdConfig, DbnModel, RbmLayer, apply_gradient, cd_gradient, cd_update,
    dbn_pretrain, dbn_propagate, dbn_transform, exact_gradient, hidden_probabilities, init_layer,
    log_likelihood, reconstruction_mse, sigmoid, train_rbm, visible_reconstruction,
)


def zero_layer(kind, nv, nh):
    return RbmLayer(kind, np.zeros((nv, nh)), np.zeros(nv), np.zeros(nh))


def random_layer(rng, nv, nh, scale=0.5, kind=BERNOULLI):
    return RbmLayer(kind, rng.normal(0, scale, (nv, nh)), rng.normal(0, scale, nv), rng.normal(0, scale, nh))


def flat_params(layer):
    return np.concatenate([layer.weights.ravel(), layer.visible_bias, layer.hidden_bias])


def unflat(layer, t):
    nv, nh = layer.weights.shape
    return layer.with_params(t[:nv * nh].reshape(nv, nh), t[nv * nh:nv * nh + nv], t[nv * nh + nv:])


class TestSigmoid:
    def test_values(self):
        assert sigmoid(0.0) == 0.5
        assert sigmoid(1000.0) == 1.0
        assert sigmoid(-1000.0) == 0.0
        assert sigmoid(-3.0) == pytest.approx(1 - sigmoid(3.0), abs=1e-15)

    def test_no_overflow_warning(self):
        with np.errstate(over="raise", invalid="raise"):
            sigmoid(np.array([-1e5, 1e5]))


class TestConditionals:
    def test_zero_layer_hidden(self):
        np.testing.assert_array_equal(hidden_probabilities(zero_layer(BERNOULLI, 3, 4), np.ones((2, 3))), 0.5)

    def test_scalar_case(self):
        layer = RbmLayer(BERNOULLI, np.ones((1, 1)), np.zeros(1), np.zeros(1))
        assert hidden_probabilities(layer, [1.0])[0] == pytest.approx(0.7310585786300049, abs=1e-12)

    def test_zero_visible_gives_bias(self):
        layer = RbmLayer(BERNOULLI, np.ones((2, 3)), np.zeros(2), np.array([-1.0, 0.0, 2.0]))
        np.testing.assert_allclose(hidden_probabilities(layer, np.zeros(2)), sigmoid(layer.hidden_bias))

    def test_visible_means(self):
        h = np.array([[1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_array_equal(visible_reconstruction(zero_layer(BERNOULLI, 3, 2), h), 0.5)
        np.testing.assert_array_equal(visible_reconstruction(zero_layer(GAUSSIAN, 3, 2), h), 0.0)
        g = RbmLayer(GAUSSIAN, np.zeros((1, 2)), np.ones(1), np.zeros(2))
        np.testing.assert_array_equal(visible_reconstruction(g, h), 1.0)

    def test_gaussian_offset_scale_in_data_units(self):
        g = RbmLayer(GAUSSIAN, np.zeros((2, 1)), np.array([1.0, -1.0]), np.zeros(1),
                     np.array([10.0, 20.0]), np.array([2.0, 0.5]))
        np.testing.assert_allclose(visible_reconstruction(g, [1.0]), [12.0, 19.5])

    def test_offset_rejected_on_bernoulli(self):
        with pytest.raises(ValidationError):
            RbmLayer(BERNOULLI, np.zeros((1, 1)), np.zeros(1), np.zeros(1), np.ones(1), np.ones(1))

    def test_shape_checks(self):
        with pytest.raises(ShapeError):
            RbmLayer(BERNOULLI, np.zeros((2, 3)), np.zeros(3), np.zeros(3))
        with pytest.raises(ShapeError):
            hidden_probabilities(zero_layer(BERNOULLI, 3, 2), np.ones((2, 4)))


class TestCd:
    def test_zero_rate_is_identity(self):
        rng = np.random.default_rng(0)
        layer = random_layer(rng, 3, 2)
        out = cd_update(layer, np.ones((4, 3)), CdConfig(learning_rate=0.0), rng)
        assert out is layer

    def test_single_unit_statistics(self):
        layer = zero_layer(BERNOULLI, 1, 1)
        batch = np.ones((20000, 1))
        g = cd_gradient(layer, batch, 1, np.random.default_rng(1))
        exact = exact_gradient(layer, np.ones((1, 1)))
        # positive statistic <v h> is 1 x 0.5; the negative one averages 0.25
        assert g.weights[0, 0] == pytest.approx(0.25, abs=0.02)
        assert np.sign(g.weights[0, 0]) == np.sign(exact.weights[0, 0]) == 1

    def test_chain_length_changes_update(self):
        rng = np.random.default_rng(2)
        layer = random_layer(rng, 3, 2)
        data = (rng.random((10, 3)) < 0.5).astype(float)
        g1 = cd_gradient(layer, data, 1, np.random.default_rng(3)).flat()
        g3 = cd_gradient(layer, data, 3, np.random.default_rng(3)).flat()
        assert np.all(np.isfinite(g1)) and np.all(np.isfinite(g3))
        assert not np.array_equal(g1, g3)

    def test_cd_approaches_exact_on_3x3(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            layer = random_layer(rng, 3, 3, scale=1.0)
            data = (rng.random((6, 3)) < 0.5).astype(float)
            exact = exact_gradient(layer, data).flat()
            cd = cd_gradient(layer, np.repeat(data, 3000, axis=0), 10, rng).flat()
            assert exact @ cd / (np.linalg.norm(exact) * np.linalg.norm(cd)) > 0.9

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_raises(self):
        layer = RbmLayer(GAUSSIAN, np.full((2, 2), 1e307), np.zeros(2), np.zeros(2))
        with pytest.raises(DivergenceError) as info:
            cd_update(layer, np.ones((3, 2)) * 1e10, CdConfig(learning_rate=1e300), np.random.default_rng(0), epoch=4)
        assert info.value.epoch == 4

    def test_apply_gradient_ascends_exact_loglik(self):
        rng = np.random.default_rng(5)
        layer = random_layer(rng, 3, 2)
        data = (rng.random((12, 3)) < 0.5).astype(float)
        after = apply_gradient(layer, exact_gradient(layer, data), 0.01)
        assert log_likelihood(after, data) > log_likelihood(layer, data)


class TestExact:
    def test_zero_params_symmetric_data(self):
        data = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
        np.testing.assert_allclose(exact_gradient(zero_layer(BERNOULLI, 2, 2), data).weights, 0.0, atol=1e-15)

    def test_log_likelihood_of_zero_model(self):
        assert log_likelihood(zero_layer(BERNOULLI, 3, 2), np.ones((1, 3))) == pytest.approx(-3 * np.log(2))

    @given(st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_finite_differences_2x2(self, seed):
        rng = np.random.default_rng(seed)
        layer = random_layer(rng, 2, 2, scale=0.3)
        data = (rng.random((5, 2)) < 0.5).astype(float)
        theta = flat_params(layer)
        fd = np.empty_like(theta)
        h = 1e-5
        for i in range(theta.size):
            e = np.zeros_like(theta)
            e[i] = h
            fd[i] = (log_likelihood(unflat(layer, theta + e), data) - log_likelihood(unflat(layer, theta - e), data)) / (2 * h)
        np.testing.assert_allclose(exact_gradient(layer, data).flat(), fd, atol=1e-6)

    def test_enumeration_bound(self):
        with pytest.raises(ValidationError):
            log_likelihood(zero_layer(BERNOULLI, 10, 10), np.zeros((1, 10)))
        with pytest.raises(ValidationError):
            exact_gradient(zero_layer(GAUSSIAN, 2, 2), np.zeros((1, 2)))


@pytest.fixture(scope="module")
def features():
    rng = np.random.default_rng(11)
    base = rng.random((600, 4))
    X = np.column_stack([base, base @ rng.random((4, 16)) / 4 + 0.05 * rng.random((600, 16))])
    return X[:500], X[500:]


class TestTraining:
    def test_zero_epochs_identity(self, features):
        train, val = features
        layer = init_layer(GAUSSIAN, 20, 5, np.random.default_rng(0))
        out, trace = train_rbm(layer, train, val, CdConfig(epochs=0))
        assert out is layer and len(trace) == 0

    def test_mse_decreases(self, features):
        train, val = features
        model, traces = dbn_pretrain(train, val, (15, 20), CdConfig(epochs=30, rng_seed=3))
        for tr in traces:
            assert tr.train_mse[-1] < tr.train_mse[0]
        assert reconstruction_mse(model.layers[0], train) == pytest.approx(traces[0].train_mse[-1])

    def test_same_seed_bitwise(self, features):
        train, val = features
        cfg = CdConfig(epochs=5, rng_seed=9)
        m1, t1 = dbn_pretrain(train, val, (15, 20), cfg)
        m2, t2 = dbn_pretrain(train, val, (15, 20), cfg)
        assert [t.to_csv() for t in t1] == [t.to_csv() for t in t2]
        assert m1.to_dict() == m2.to_dict()

    def test_different_seed_differs(self, features):
        train, val = features
        m1, _ = dbn_pretrain(train, val, (15, 20), CdConfig(epochs=1, rng_seed=1))
        m2, _ = dbn_pretrain(train, val, (15, 20), CdConfig(epochs=1, rng_seed=2))
        assert not np.array_equal(m1.layers[0].weights, m2.layers[0].weights)

    def test_shapes_and_untrained_stack(self, features):
        train, val = features
        model, traces = dbn_pretrain(train, val, (15, 20), CdConfig(epochs=0))
        assert [l.weights.shape for l in model.layers] == [(20, 15), (15, 20)]
        assert [l.kind for l in model.layers] == [GAUSSIAN, BERNOULLI]
        assert model.output_width == 20
        assert all(len(t) == 0 for t in traces)

    def test_standardize_input_sets_offset(self, features):
        train, val = features
        model, _ = dbn_pretrain(train, val, (3,), CdConfig(epochs=0))
        np.testing.assert_allclose(model.layers[0].visible_offset, train.mean(axis=0))
        plain, _ = dbn_pretrain(train, val, (3,), CdConfig(epochs=0), standardize_input=False)
        np.testing.assert_array_equal(plain.layers[0].visible_scale, 1.0)

    def test_serialization_round_trip(self, features):
        train, val = features
        model, _ = dbn_pretrain(train, val, (15, 20), CdConfig(epochs=1))
        back = DbnModel.from_dict(model.to_dict())
        np.testing.assert_array_equal(dbn_propagate(back, val), dbn_propagate(model, val))


class TestTransform:
    def zero_dbn(self):
        return DbnModel((zero_layer(GAUSSIAN, 20, 15), zero_layer(BERNOULLI, 15, 20)))

    def test_zero_model_threshold_inclusive(self):
        out = dbn_transform(self.zero_dbn(), np.random.default_rng(0).random((7, 20)))
        assert out.shape == (7, 20)
        np.testing.assert_array_equal(out, 1.0)

    def test_threshold_deterministic(self, features):
        train, val = features
        model, _ = dbn_pretrain(train, val, (15, 20), CdConfig(epochs=2))
        np.testing.assert_array_equal(dbn_transform(model, val), dbn_transform(model, val))

    def test_sample_mode(self):
        out = dbn_transform(self.zero_dbn(), np.zeros((4000, 20)), "sample", np.random.default_rng(1))
        assert set(np.unique(out)) <= {0.0, 1.0}
        assert out.mean() == pytest.approx(0.5, abs=0.01)
        with pytest.raises(ValidationError):
            dbn_transform(self.zero_dbn(), np.zeros((1, 20)), "sample")

    def test_layer_chain_checked(self):
        with pytest.raises(ShapeError):
            DbnModel((zero_layer(GAUSSIAN, 20, 15), zero_layer(BERNOULLI, 14, 20)))
        with pytest.raises(ShapeError):
            DbnModel((zero_layer(BERNOULLI, 20, 15),))

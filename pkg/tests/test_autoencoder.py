import numpy as np
import pytest

from zonewatch import autoencoder as ae
from zonewatch.errors import DivergedError, InsufficientDataError, ValidationError
from zonewatch.rng import Rng


def _rel_err(a, b, eps=1e-8):
    return np.abs(a - b) / np.maximum(eps, np.maximum(np.abs(a), np.abs(b)))


class TestArchitecture:
    def test_default_layer_sizes_for_115(self):
        # compression ratios 0.75 / 0.5 / 0.33 / 0.25, mirrored
        assert ae.default_layer_sizes(115) == (115, 86, 58, 38, 29, 38, 58, 86, 115)

    def test_symmetry_enforced(self):
        with pytest.raises(ValidationError):
            ae.Architecture((8, 4, 6), "tanh")

    def test_minimum_depth(self):
        with pytest.raises(ValidationError):
            ae.Architecture((8, 8), "tanh")

    def test_bottleneck_must_compress(self):
        with pytest.raises(ValidationError):
            ae.Architecture((4, 4, 4), "tanh")

    def test_activation_broadcast(self):
        arch = ae.Architecture((8, 6, 4, 6, 8), "tanh")
        assert arch.activation == ("tanh", "tanh", "tanh")

    def test_unknown_activation(self):
        with pytest.raises(ValidationError):
            ae.Architecture((6, 3, 6), "sigmoid")


class TestInit:
    def test_same_seed_identical(self):
        arch = ae.Architecture((6, 3, 6), "tanh")
        m1, m2 = ae.init_model(arch, 5), ae.init_model(arch, 5)
        for a, b in zip(m1.weights, m2.weights):
            assert np.array_equal(a, b)

    def test_biases_zero(self):
        model = ae.init_model(ae.Architecture((6, 3, 6), "tanh"), 1)
        for b in model.biases:
            assert np.array_equal(b, np.zeros_like(b))

    def test_glorot_bound_holds(self):
        arch = ae.Architecture((10, 7, 4, 7, 10), "tanh")
        model = ae.init_model(arch, 2)
        sizes = arch.layer_sizes
        for i, W in enumerate(model.weights):
            bound = np.sqrt(6.0 / (sizes[i] + sizes[i + 1]))
            assert np.abs(W).max() <= bound


class TestForward:
    def test_zero_model_outputs_zero(self):
        model = ae.init_model(ae.Architecture((5, 2, 5), "tanh"), 0)
        for W in model.weights:
            W[:] = 0.0
        x = Rng(1).normal(size=5)
        assert np.array_equal(ae.forward(model, x), np.zeros(5))

    def test_identity_embedding_reconstructs_exactly(self):
        # relu 4-2-4 carrying duplicated positive coordinates (a, b, a, b)
        model = ae.init_model(ae.Architecture((4, 2, 4), "relu"), 0)
        model.weights[0][:] = np.array([[1.0, 0.0], [0.0, 1.0],
                                        [0.0, 0.0], [0.0, 0.0]])
        model.weights[1][:] = np.array([[1.0, 0.0, 1.0, 0.0],
                                        [0.0, 1.0, 0.0, 1.0]])
        for b in model.biases:
            b[:] = 0.0
        x = np.array([2.5, 0.75, 2.5, 0.75])
        assert np.array_equal(ae.forward(model, x), x)

    def test_forward_is_pure(self):
        model = ae.init_model(ae.Architecture((6, 3, 6), "tanh"), 3)
        x = Rng(2).normal(size=6)
        assert np.array_equal(ae.forward(model, x), ae.forward(model, x))

    def test_dimension_mismatch(self):
        model = ae.init_model(ae.Architecture((6, 3, 6), "tanh"), 3)
        with pytest.raises(ValidationError):
            ae.forward(model, np.zeros(5))


class TestMse:
    def test_zero_for_identical(self):
        x = Rng(3).normal(size=7)
        assert ae.mse(x, x) == 0.0

    def test_hand_value(self):
        # ((0-3)^2 + (0-4)^2) / 2 = 12.5
        assert ae.mse(np.array([0.0, 0.0]), np.array([3.0, 4.0])) == 12.5

    def test_symmetric(self):
        x, y = Rng(4).normal(size=5), Rng(5).normal(size=5)
        assert ae.mse(x, y) == ae.mse(y, x)

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            ae.mse(np.zeros(3), np.zeros(4))


class TestBackward:
    def test_zero_loss_means_zero_gradients(self):
        # identity-embedding model reconstructs the batch perfectly
        model = ae.init_model(ae.Architecture((4, 2, 4), "relu"), 0)
        model.weights[0][:] = np.array([[1.0, 0.0], [0.0, 1.0],
                                        [0.0, 0.0], [0.0, 0.0]])
        model.weights[1][:] = np.array([[1.0, 0.0, 1.0, 0.0],
                                        [0.0, 1.0, 0.0, 1.0]])
        batch = np.abs(Rng(6).normal(size=(3, 2)))
        batch = np.hstack([batch, batch])
        wg, bg = ae.backward(model, batch)
        for g in wg + bg:
            assert np.allclose(g, 0.0, atol=1e-15)

    @pytest.mark.parametrize("sizes,act", [
        ((5, 4, 5), "tanh"),
        ((6, 4, 2, 4, 6), "tanh"),
        ((5, 3, 5), "relu"),
    ])
    def test_matches_central_finite_differences(self, sizes, act):
        model = ae.init_model(ae.Architecture(sizes, act), 7)
        batch = Rng(8).normal(size=(3, sizes[0]))
        wg, bg = ae.backward(model, batch)
        fwg, fbg = ae.finite_diff_gradients(model, batch, h=1e-5)
        worst = 0.0
        for a, n in zip(wg + bg, fwg + fbg):
            worst = max(worst, _rel_err(a, n).max())
        assert worst < 1e-5

    def test_duplicated_batch_same_gradient(self):
        model = ae.init_model(ae.Architecture((5, 3, 5), "tanh"), 9)
        batch = Rng(10).normal(size=(4, 5))
        doubled = np.vstack([batch, batch])
        wg1, bg1 = ae.backward(model, batch)
        wg2, bg2 = ae.backward(model, doubled)
        for a, b in zip(wg1 + bg1, wg2 + bg2):
            assert np.allclose(a, b, rtol=1e-12, atol=1e-15)

    def test_empty_batch_rejected(self):
        model = ae.init_model(ae.Architecture((5, 3, 5), "tanh"), 9)
        with pytest.raises((InsufficientDataError, ValidationError)):
            ae.backward(model, np.zeros((0, 5)))


class TestNormalizer:
    def test_roundtrip(self):
        X = Rng(11).normal(5.0, 3.0, size=(50, 8))
        norm = ae.Normalizer.fit(X)
        back = norm.denormalize(norm.normalize(X))
        assert np.allclose(back, X, rtol=0, atol=1e-12)

    def test_zero_variance_clamped(self):
        X = np.ones((10, 3))
        X[:, 1] = np.arange(10)
        norm = ae.Normalizer.fit(X)
        assert norm.std[0] == 1.0 and norm.std[2] == 1.0
        z = norm.normalize(X)
        assert np.all(np.isfinite(z))
        assert np.allclose(z[:, 0], 0.0)


class TestTrain:
    def _small(self, seed=0):
        return ae.init_model(ae.Architecture((6, 4, 6), "tanh"), seed)

    def test_degenerate_identical_points_converge(self):
        model = self._small()
        X = np.tile(Rng(12).normal(size=6), (30, 1))
        cfg = ae.TrainConfig(lr_n=0.05, epochs=400, batch_size=8, seed=1,
                             patience=400)
        result = ae.train(model, X, X, cfg)
        assert ae.batch_loss(result.model, X) < 1e-4

    def test_history_deterministic(self):
        X = Rng(13).normal(size=(48, 6))
        cfg = ae.TrainConfig(lr_n=0.01, epochs=15, batch_size=8, seed=3)
        h1 = ae.train(self._small(1), X[:32], X[32:], cfg).history
        h2 = ae.train(self._small(1), X[:32], X[32:], cfg).history
        assert h1 == h2

    def test_returns_best_epoch_weights(self):
        X = Rng(14).normal(size=(60, 6))
        cfg = ae.TrainConfig(lr_n=0.02, epochs=25, batch_size=8, seed=4)
        result = ae.train(self._small(2), X[:40], X[40:], cfg)
        best = min([result.initial_opt_mse] + result.history)
        assert ae.batch_loss(result.model, X[40:]) == best
        assert result.best_epoch <= len(result.history)

    def test_optimization_improves_on_reconstructable_data(self):
        # rank-2 data fits through a width-2 bottleneck
        rng = Rng(15)
        latent = rng.normal(size=(80, 2))
        basis = rng.normal(size=(2, 6))
        X = latent @ basis
        cfg = ae.TrainConfig(lr_n=0.05, epochs=60, batch_size=16, seed=5)
        model = ae.init_model(ae.Architecture((6, 2, 6), "tanh"), 16)
        result = ae.train(model, X[:60], X[60:], cfg)
        assert min(result.history) < result.initial_opt_mse

    def test_early_stop_cuts_epoch_budget(self):
        X = np.tile(Rng(17).normal(size=6), (30, 1))
        cfg = ae.TrainConfig(lr_n=0.5, epochs=500, batch_size=8, seed=6,
                             patience=3)
        result = ae.train(self._small(3), X, X, cfg)
        assert result.epochs_run < 500

    def test_divergence_raises(self):
        X = Rng(18).normal(size=(40, 6)) * 10
        cfg = ae.TrainConfig(lr_n=1e4, epochs=50, batch_size=8, seed=7)
        with pytest.raises(DivergedError, match="lr_n"):
            ae.train(self._small(4), X[:30], X[30:], cfg)

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            ae.TrainConfig(lr_n=0.0)
        with pytest.raises(ValidationError):
            ae.TrainConfig(epochs=0)
        with pytest.raises(ValidationError):
            ae.TrainConfig(patience=0)


class TestEarlyStopRule:
    def test_best_epoch_prefers_lowest(self):
        assert ae.best_epoch([0.5, 0.3, 0.4, 0.35], initial=1.0) == 2

    def test_strictly_worsening_returns_initial(self):
        assert ae.best_epoch([2.0, 3.0, 4.0], initial=1.0) == 0

    def test_ties_keep_earliest(self):
        assert ae.best_epoch([0.3, 0.3, 0.3], initial=1.0) == 1


class TestPersistence:
    def test_save_load_bit_exact(self, tmp_path):
        X = Rng(19).normal(size=(60, 6))
        model = ae.init_model(ae.Architecture((6, 3, 6), "tanh"), 8)
        model.normalizer = ae.Normalizer.fit(X)
        cfg = ae.TrainConfig(lr_n=0.05, epochs=10, batch_size=8, seed=9)
        model = ae.train(model, X[:40], X[40:], cfg).model

        path = tmp_path / "model.npz"
        ae.save_model(path, model, extra={"th_v": 1.25})
        loaded, extra = ae.load_model(path)

        assert loaded.architecture == model.architecture
        for a, b in zip(loaded.weights, model.weights):
            assert a.tobytes() == b.tobytes()
        assert float(extra["th_v"]) == 1.25
        probe = Rng(20).normal(size=(5, 6))
        assert np.array_equal(ae.forward(loaded, probe), ae.forward(model, probe))

    def test_save_twice_identical_bytes(self, tmp_path):
        model = ae.init_model(ae.Architecture((6, 3, 6), "tanh"), 10)
        model.normalizer = ae.Normalizer.fit(Rng(21).normal(size=(20, 6)))
        p1, p2 = tmp_path / "a.npz", tmp_path / "b.npz"
        ae.save_model(p1, model)
        ae.save_model(p2, model)
        assert p1.read_bytes() == p2.read_bytes()

    def test_unsaveable_without_normalizer(self, tmp_path):
        model = ae.init_model(ae.Architecture((6, 3, 6), "tanh"), 11)
        with pytest.raises(ValidationError):
            ae.save_model(tmp_path / "m.npz", model)

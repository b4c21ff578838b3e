import json

import numpy as np
import pytest
from scipy.optimize import minimize

from confevade.classifier import (LinearSvm, TrainParams, accuracy, discriminant, gradient,
                                  hinge_objective, predict, top_features, train, train_arrays)
from confevade.data import Dataset
from confevade.errors import PreconditionError, StructuralError, TrainingError

from conftest import real_model


def svm_of(w, b=0.0):
    return LinearSvm(np.asarray(w, dtype=float), b)


def qp_reference(X, y, C):
    """Soft-margin optimum from a generic constrained solver over (w, b, slack)."""
    n, d = X.shape

    def obj(z):
        return 0.5 * z[:d] @ z[:d] + C * z[d + 1:].sum()

    cons = [{"type": "ineq", "fun": lambda z: y * (X @ z[:d] + z[d]) - 1 + z[d + 1:]},
            {"type": "ineq", "fun": lambda z: z[d + 1:]}]
    res = minimize(obj, np.zeros(d + 1 + n), constraints=cons, method="SLSQP",
                   options={"maxiter": 1000, "ftol": 1e-12})
    return res.x[:d], res.x[d], res.fun


class TestTrain:
    def test_two_points_against_grid_search(self):
        X, y = np.array([[-1.0], [1.0]]), np.array([-1, 1])
        grid = np.linspace(-3, 3, 601)
        W, B = np.meshgrid(grid, grid, indexing="ij")
        J = 0.5 * W**2 + np.maximum(0, 1 + (-W + B)) + np.maximum(0, 1 - (W + B))
        i, j = np.unravel_index(np.argmin(J), J.shape)
        svm = train_arrays(X, y)
        assert predict(svm, X).tolist() == [-1, 1]
        assert svm.weights[0] > 0
        assert svm.weights[0] == pytest.approx(grid[i], abs=0.02)
        assert svm.bias == pytest.approx(grid[j], abs=0.02)

    def test_symmetric_data_has_zero_bias(self, rng):
        P = rng.normal(size=(40, 3)) + 2.0
        X = np.vstack([P, -P])
        y = np.concatenate([np.ones(40), -np.ones(40)])
        assert abs(train_arrays(X, y).bias) < 1e-3

    def test_deterministic(self, rng):
        X = rng.normal(size=(60, 4))
        y = np.where(X[:, 0] + 0.3 * rng.normal(size=60) > 0, 1, -1)
        a, b = train_arrays(X, y, TrainParams(seed=3)), train_arrays(X, y, TrainParams(seed=3))
        assert np.array_equal(a.weights, b.weights) and a.bias == b.bias

    @pytest.mark.parametrize("solver", ["smo", "sgd"])
    def test_separable_reaches_full_training_accuracy(self, rng, solver):
        X = rng.uniform(-5, 5, size=(200, 3))
        y = np.where(X @ [1.0, -2.0, 0.5] + 0.7 > 0, 1, -1)
        keep = np.abs(X @ [1.0, -2.0, 0.5] + 0.7) > 0.5
        X, y = X[keep], y[keep]
        svm = train_arrays(X, y, TrainParams(solver=solver, epochs=300, regularization=100.0))
        assert np.mean(predict(svm, X) == y) == 1.0

    @pytest.mark.parametrize("seed", range(3))
    def test_objective_matches_constrained_solver(self, seed):
        rng = np.random.default_rng(seed)
        X = np.column_stack([rng.uniform(0, 20, 40), rng.integers(0, 2, 40), rng.uniform(-1, 1, 40)])
        y = np.where(0.2 * X[:, 0] - X[:, 1] + rng.normal(size=40) > 1.5, 1, -1)
        w_ref, b_ref, j_ref = qp_reference(X, y, 1.0)
        svm = train_arrays(X, y)
        j = hinge_objective(svm.weights, svm.bias, X, y, 1.0)
        assert j <= j_ref * 1.005 + 1e-6
        assert np.allclose(svm.weights, w_ref, atol=0.02 * np.abs(w_ref).max() + 1e-3)

    def test_sgd_gets_close_to_the_optimum(self, rng):
        X = np.column_stack([rng.uniform(0, 20, 60), rng.integers(0, 2, 60)])
        y = np.where(0.2 * X[:, 0] - X[:, 1] + rng.normal(size=60) > 1.5, 1, -1)
        _, _, j_ref = qp_reference(X, y, 1.0)
        svm = train_arrays(X, y, TrainParams(solver="sgd", epochs=200))
        assert hinge_objective(svm.weights, svm.bias, X, y, 1.0) < 1.2 * j_ref

    def test_single_class_rejected(self):
        with pytest.raises(TrainingError):
            train_arrays(np.zeros((3, 2)), np.ones(3))

    def test_params_validated(self):
        with pytest.raises(PreconditionError):
            TrainParams(epochs=0)
        with pytest.raises(PreconditionError):
            TrainParams(solver="newton")

    def test_sgd_loss_non_increasing_over_epochs(self):
        rng = np.random.default_rng(0)
        X = np.column_stack([rng.uniform(0, 27.64, 200), rng.integers(0, 2, 200), rng.integers(0, 7, 200)])
        y = np.where(X[:, 0] + 2 * X[:, 1] + rng.normal(0, 2, 200) > 20, 1, -1)
        curves = []
        for seed in range(10):
            hist = []
            train_arrays(X, y, TrainParams(solver="sgd", epochs=30, seed=seed), history=hist)
            curves.append([hinge_objective(w, b, X, y, 1.0) for w, b in hist])
        med = np.median(np.array(curves), axis=0)
        assert np.all(np.diff(med) <= 1e-9 * med[:-1] + 1e-9)

    def test_smo_checkpoints_end_at_the_optimum(self, rng):
        X = np.column_stack([rng.uniform(0, 27.64, 150), rng.integers(0, 2, 150)])
        y = np.where(X[:, 0] + 4 * X[:, 1] + rng.normal(0, 3, 150) > 18, 1, -1)
        hist = []
        svm = train_arrays(X, y, history=hist)
        losses = [hinge_objective(w, b, X, y, 1.0) for w, b in hist]
        assert losses[-1] == pytest.approx(hinge_objective(svm.weights, svm.bias, X, y, 1.0))
        assert losses[-1] <= min(losses) + 1e-6
        assert losses[-1] <= qp_reference(X, y, 1.0)[2] * (1 + 1e-4) + 1e-6

    def test_scaling_is_recorded_and_works(self, rng):
        X = np.column_stack([rng.uniform(0, 1000, 100), rng.uniform(0, 1, 100)])
        y = np.where(X[:, 0] / 1000 + X[:, 1] > 1, 1, -1)
        svm = train_arrays(X, y, TrainParams(scale=True, regularization=50.0))
        assert svm.params.scale
        assert np.mean(predict(svm, X) == y) > 0.95

    def test_appended_rows_keep_old_visiting_order(self, rng):
        from confevade.classifier import _epoch_order
        a = _epoch_order(4, 2, 30)
        b = _epoch_order(4, 2, 35)
        assert [i for i in b if i < 30] == a.tolist()


class TestDiscriminant:
    def test_examples(self):
        assert discriminant(svm_of([3, 4]), [0, 0]) == 0
        assert discriminant(svm_of([3, 4], 1), [1, 1]) == 8

    def test_dimension_mismatch(self):
        with pytest.raises(StructuralError):
            discriminant(svm_of([3, 4]), [1, 2, 3])

    def test_predict_examples(self):
        s = svm_of([1.0])
        assert predict(s, [-25.0]) == -1
        assert predict(s, [0.0]) == 1

    def test_decomposition(self, rng):
        s = svm_of(rng.normal(size=5), 0.3)
        X = rng.normal(size=(10000, 5))
        g = discriminant(s, X)
        assert np.array_equal(predict(s, X), np.where(g >= 0, 1, -1))

    def test_gradient_constant(self):
        s = svm_of([3, 4])
        assert gradient(s, [10, -2]).tolist() == [3, 4]
        assert gradient(s).tolist() == [3, 4]

    def test_gradient_finite_differences(self, rng):
        s = svm_of(rng.normal(size=6) * 3, rng.normal())
        h = 1e-4
        worst = 0.0
        for _ in range(100):
            x = rng.normal(size=6) * 10
            fd = np.array([(discriminant(s, x + h * e) - discriminant(s, x - h * e)) / (2 * h) for e in np.eye(6)])
            worst = max(worst, np.max(np.abs(fd - gradient(s, x)) / np.abs(gradient(s, x))))
        assert worst < 1e-6

    def test_zero_weights(self):
        assert gradient(svm_of([0.0, 0.0])).tolist() == [0.0, 0.0]


class TestAccuracy:
    def test_all_correct_and_complement(self, rng):
        m = real_model(2)
        X = rng.normal(size=(100, 2))
        s = svm_of([1.0, -1.0], 0.1)
        y = predict(s, X)
        assert accuracy(s, Dataset(m, X, y)) == 1.0
        noisy = np.where(rng.random(100) < 0.2, -y, y)
        assert accuracy(s, Dataset(m, X, -noisy)) == pytest.approx(1 - accuracy(s, Dataset(m, X, noisy)))

    def test_empty(self):
        m = real_model(2)
        with pytest.raises(PreconditionError):
            accuracy(svm_of([1, 1]), Dataset(m, np.empty((0, 2)), []))


class TestTopFeatures:
    def test_order(self):
        s = svm_of([0.0, 5.0, -7.0])
        assert [n for n, _ in top_features(s, 3)] == ["f3", "f2", "f1"]
        assert top_features(s, 0) == []

    def test_ties_keep_model_order(self):
        assert [n for n, _ in top_features(svm_of([1.0, -2.0, 2.0, 1.0]), 4)] == ["f2", "f3", "f1", "f4"]

    def test_finds_oracle_features(self, rng):
        m = real_model(12, 0, 10)
        X = rng.uniform(0, 10, size=(400, 12))
        relevant = [2, 5, 7, 11]
        y = np.where(X[:, relevant].sum(axis=1) > 20, 1, -1)
        s = train(Dataset(m, X, y))
        assert {n for n, _ in top_features(s, 4)} == {f"x{i}" for i in relevant}


def test_json_round_trip(tmp_path, rng):
    X = rng.normal(size=(30, 3))
    s = train_arrays(X, np.where(X[:, 0] > 0, 1, -1), feature_names=("a", "b", "c"))
    s.save(tmp_path / "s.json")
    doc = json.loads((tmp_path / "s.json").read_text())
    assert {"weights", "bias", "params"} <= set(doc)
    back = LinearSvm.load(tmp_path / "s.json")
    assert np.array_equal(back.weights, s.weights) and back.bias == s.bias and back.params == s.params

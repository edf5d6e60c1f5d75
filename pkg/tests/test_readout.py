import numpy as np
import pytest

from gesn.readout import (
    ReadoutError,
    RidgeReadout,
    _solve_spd,
    accuracy,
    fit_ridge,
    predict,
    sufficient_statistics,
)
from gesn.reservoir import Embeddings
from oracles import stacked_ridge


def random_instance(rng, n=None, h=None, c=None):
    n = n or int(rng.integers(20, 80))
    h = h or int(rng.integers(1, 17))
    c = c or int(rng.integers(2, 5))
    states = rng.uniform(-1, 1, size=(n, h))
    labels = rng.integers(0, c, size=n)
    labels[:c] = np.arange(c)
    return states, labels, c


def one_hot(labels, c):
    y = np.zeros((labels.size, c))
    y[np.arange(labels.size), labels] = 1.0
    return y


class TestFit:
    def test_scalar_interpolation_toy(self):
        gram, cross = sufficient_statistics(np.array([[1.0], [2.0]]),
                                            np.array([[1.0], [2.0]]), bias=False)
        assert _solve_spd(gram, cross, 0.0)[0, 0] == pytest.approx(1.0, rel=1e-15)

    def test_one_hot_no_bias_is_least_squares(self):
        # One-hot targets [1,0] and [0,1] on column [1,2]: slopes 1/5 and 2/5.
        readout = fit_ridge(np.array([[1.0], [2.0]]), [0, 1], [True, True], 0.0, bias=False)
        assert readout.weights[:, 0] == pytest.approx([1 / 5, 2 / 5])
        assert np.all(readout.bias == 0)

    def test_shrinkage_bound(self):
        rng = np.random.default_rng(0)
        states, labels, c = random_instance(rng)
        lam = 1e6
        readout = fit_ridge(states, labels, np.ones(labels.size, bool), lam, c)
        gram, cross = sufficient_statistics(states, one_hot(labels, c))
        w = np.vstack([readout.weights.T, readout.bias])
        assert np.linalg.norm(w) <= np.linalg.norm(cross) / lam

    @pytest.mark.parametrize("seed", range(100))
    def test_matches_stacked_lstsq_oracle(self, seed):
        rng = np.random.default_rng(seed)
        states, labels, c = random_instance(rng)
        lam = 10 ** rng.uniform(-3, 1)
        readout = fit_ridge(states, labels, np.ones(labels.size, bool), lam, c)
        ref = stacked_ridge(states, one_hot(labels, c), lam)
        ours = np.vstack([readout.weights.T, readout.bias])
        np.testing.assert_allclose(ours, ref, rtol=1e-8, atol=1e-8 * np.abs(ref).max())

    def test_monotone_shrinkage(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            states, labels, c = random_instance(rng)
            mask = np.ones(labels.size, bool)
            norms = [np.linalg.norm(fit_ridge(states, labels, mask, lam, c).weights)
                     for lam in (1e-4, 1e-2, 1.0, 1e2, 1e4)]
            assert all(a >= b for a, b in zip(norms, norms[1:]))

    def test_only_train_rows_used(self):
        rng = np.random.default_rng(1)
        states, labels, c = random_instance(rng, n=50)
        mask = rng.random(50) < 0.5
        mask[:c] = True
        a = fit_ridge(states, labels, mask, 0.1, c)
        perturbed = states.copy()
        perturbed[~mask] = rng.normal(size=perturbed[~mask].shape) * 100
        b = fit_ridge(perturbed, labels, mask, 0.1, c)
        assert a.weights.tobytes() == b.weights.tobytes()
        assert a.bias.tobytes() == b.bias.tobytes()

    def test_non_train_labels_ignored_even_when_nonfinite_rows(self):
        states = np.array([[1.0, 0.0], [0.0, 1.0], [np.nan, np.inf]])
        readout = fit_ridge(states, [0, 1, 1], [True, True, False], 0.1)
        assert np.all(np.isfinite(readout.weights))

    def test_class_permutation_symmetry(self):
        rng = np.random.default_rng(2)
        states, labels, c = random_instance(rng, c=4)
        perm = rng.permutation(4)
        mask = np.ones(labels.size, bool)
        a = fit_ridge(states, labels, mask, 0.5, 4)
        b = fit_ridge(states, perm[labels], mask, 0.5, 4)
        np.testing.assert_allclose(b.weights[perm], a.weights, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(b.bias[perm], a.bias, rtol=1e-12, atol=1e-14)
        assert np.array_equal(np.argsort(perm)[predict(b, states)], predict(a, states))

    def test_singular_without_regularization(self):
        states = np.ones((5, 3))
        with pytest.raises(ReadoutError, match="positive regularization"):
            fit_ridge(states, [0, 1, 0, 1, 0], np.ones(5, bool), 0.0)

    def test_singular_is_fine_with_regularization(self):
        readout = fit_ridge(np.ones((5, 3)), [0, 1, 0, 1, 0], np.ones(5, bool), 1e-3)
        assert np.all(np.isfinite(readout.weights))

    def test_tiny_lambda_ill_conditioned_still_solves(self):
        rng = np.random.default_rng(3)
        base = rng.normal(size=(40, 1))
        states = np.hstack([base, base + 1e-9 * rng.normal(size=(40, 1))])
        readout = fit_ridge(states, (base[:, 0] > 0).astype(int), np.ones(40, bool), 1e-10)
        assert np.all(np.isfinite(readout.weights))

    def test_non_finite_rejected(self):
        states = np.array([[1.0], [np.nan]])
        with pytest.raises(ReadoutError, match="non-finite"):
            fit_ridge(states, [0, 1], [True, True], 1.0)

    def test_empty_train_mask(self):
        with pytest.raises(ReadoutError):
            fit_ridge(np.ones((2, 1)), [0, 1], [False, False], 1.0)

    def test_negative_lambda(self):
        with pytest.raises(ReadoutError):
            fit_ridge(np.ones((2, 1)), [0, 1], [True, True], -1.0)

    def test_accepts_embeddings_object(self):
        states = np.random.default_rng(4).normal(size=(10, 3))
        labels = np.arange(10) % 2
        a = fit_ridge(Embeddings(states, 1), labels, np.ones(10, bool), 1.0)
        b = fit_ridge(states, labels, np.ones(10, bool), 1.0)
        assert np.array_equal(a.weights, b.weights)

    def test_blocked_statistics_equal_single_block(self):
        rng = np.random.default_rng(5)
        states, y = rng.normal(size=(100, 4)), rng.normal(size=(100, 2))
        g1, c1 = sufficient_statistics(states, y, block_rows=7)
        g2, c2 = sufficient_statistics(states, y, block_rows=1000)
        np.testing.assert_allclose(g1, g2, rtol=1e-13)
        np.testing.assert_allclose(c1, c2, rtol=1e-13)


class TestPredict:
    def test_bias_only(self):
        readout = RidgeReadout(np.zeros((2, 3)), np.array([0.1, 0.5]), 0.0)
        assert predict(readout, np.random.default_rng(0).normal(size=(6, 3))).tolist() == [1] * 6

    def test_tie_goes_to_lowest_index(self):
        readout = RidgeReadout(np.zeros((3, 1)), np.array([0.2, 0.7, 0.7]), 0.0)
        assert predict(readout, np.ones((2, 1))).tolist() == [1, 1]

    def test_width_mismatch(self):
        readout = RidgeReadout(np.zeros((2, 3)), np.zeros(2), 0.0)
        with pytest.raises(ReadoutError):
            predict(readout, np.ones((2, 4)))

    def test_separable_instance_fits_training_set(self):
        rng = np.random.default_rng(6)
        centers = rng.normal(size=(3, 8)) * 5
        labels = rng.integers(0, 3, size=90)
        states = centers[labels] + rng.normal(size=(90, 8)) * 0.1
        readout = fit_ridge(states, labels, np.ones(90, bool), 1e-6, 3)
        scores = states @ readout.weights.T + readout.bias
        assert np.array_equal(np.argmax(scores, axis=1), labels)
        assert accuracy(predict(readout, states), labels) == 1.0

    def test_csv_roundtrip(self, tmp_path):
        rng = np.random.default_rng(7)
        readout = RidgeReadout(rng.normal(size=(3, 4)), rng.normal(size=3), 0.1)
        readout.to_csv(tmp_path / "r.csv")
        back = RidgeReadout.from_csv(tmp_path / "r.csv")
        assert np.array_equal(back.weights, readout.weights)
        assert np.array_equal(back.bias, readout.bias)
        assert (tmp_path / "r.csv").read_text().splitlines()[0] == "w0,w1,w2,w3,bias"


class TestAccuracy:
    def test_perfect(self):
        labels = np.array([0, 1, 2, 1])
        assert accuracy(labels, labels) == 1.0

    def test_shifted(self):
        labels = np.array([0, 1, 2, 1])
        assert accuracy((labels + 1) % 3, labels) == 0.0

    def test_half(self):
        labels = np.zeros(10, dtype=int)
        pred = np.array([0] * 5 + [1] * 5)
        assert accuracy(pred, labels, np.ones(10, bool)) == 0.5

    def test_masked(self):
        assert accuracy([0, 1, 1], [0, 0, 1], [True, False, True]) == 1.0

    def test_empty_mask(self):
        with pytest.raises(ReadoutError):
            accuracy([0], [0], [False])

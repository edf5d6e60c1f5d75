"""Closed-form ridge readout on frozen node embeddings."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = ["RidgeReadout", "ReadoutError", "fit_ridge", "sufficient_statistics", "predict",
           "accuracy"]


class ReadoutError(ValueError):
    pass


@dataclass(frozen=True)
class RidgeReadout:
    """Linear classifier ``scores = weights @ h + bias``.

    weights has shape (C, H); bias has shape (C,).
    """

    weights: np.ndarray
    bias: np.ndarray
    regularization: float

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    def scores(self, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=np.float64)
        if states.shape[1] != self.weights.shape[1]:
            raise ReadoutError(
                f"embedding width {states.shape[1]} != readout width {self.weights.shape[1]}")
        return states @ self.weights.T + self.bias

    def to_csv(self, path) -> None:
        """One row per class: the weight row followed by the bias."""
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            h = self.weights.shape[1]
            writer.writerow([f"w{i}" for i in range(h)] + ["bias"])
            for row, b in zip(self.weights, self.bias):
                writer.writerow([repr(float(x)) for x in row] + [repr(float(b))])

    @classmethod
    def from_csv(cls, path, regularization: float = float("nan")) -> RidgeReadout:
        with open(path, newline="") as f:
            rows = list(csv.reader(f))[1:]
        table = np.array([[float(x) for x in r] for r in rows], dtype=np.float64)
        return cls(table[:, :-1].copy(), table[:, -1].copy(), regularization)


def _states_of(embeddings) -> np.ndarray:
    return np.asarray(getattr(embeddings, "states", embeddings), dtype=np.float64)


def sufficient_statistics(states: np.ndarray, targets: np.ndarray, bias: bool = True,
                          block_rows: int = 4096) -> tuple[np.ndarray, np.ndarray]:
    """Accumulate ``G^T G`` and ``G^T Y`` for the design ``G = [states | 1]``.

    Single pass over row blocks in fixed order.
    """
    n, h = states.shape
    d = h + 1 if bias else h
    gram = np.zeros((d, d))
    cross = np.zeros((d, targets.shape[1]))
    for start in range(0, n, block_rows):
        g = states[start:start + block_rows]
        if bias:
            g = np.hstack([g, np.ones((g.shape[0], 1))])
        y = targets[start:start + block_rows]
        gram += g.T @ g
        cross += g.T @ y
    return gram, cross


def fit_ridge(embeddings, labels, train_mask, lam: float, num_classes: int | None = None,
              bias: bool = True) -> RidgeReadout:
    """Fit readout weights against one-hot targets of the training nodes.

    Solves ``(G^T G + lam I) W = G^T Y``; the bias column is regularized
    with the same ``lam``. With ``bias=False`` the bias is fixed at zero.
    """
    states = _states_of(embeddings)
    labels = np.asarray(labels, dtype=np.int64)
    train_mask = np.asarray(train_mask, dtype=bool)
    if lam < 0:
        raise ReadoutError("regularization must be >= 0")
    if not np.any(train_mask):
        raise ReadoutError("train mask selects no nodes")
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    x = states[train_mask]
    if not np.all(np.isfinite(x)):
        raise ReadoutError("embeddings contain non-finite values")
    y = np.zeros((x.shape[0], num_classes))
    y[np.arange(x.shape[0]), labels[train_mask]] = 1.0
    gram, cross = sufficient_statistics(x, y, bias=bias)
    gram[np.diag_indices_from(gram)] += lam
    solution = _solve_spd(gram, cross, lam)
    if bias:
        return RidgeReadout(solution[:-1].T.copy(), solution[-1].copy(), float(lam))
    return RidgeReadout(solution.T.copy(), np.zeros(num_classes), float(lam))


def _solve_spd(gram: np.ndarray, rhs: np.ndarray, lam: float) -> np.ndarray:
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
        pivots = np.abs(np.diag(factor[0]))
        # Tiny pivots mean rounding let a singular matrix through.
        if pivots.min() ** 2 > gram.shape[0] * np.finfo(float).eps * pivots.max() ** 2:
            return scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    except scipy.linalg.LinAlgError:
        pass
    # Pivoted LU fallback for matrices that are only semi-definite numerically.
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            return scipy.linalg.solve(gram, rhs, assume_a="sym", check_finite=False)
        except (scipy.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as exc:
            hint = "; use a positive regularization" if lam == 0 else ""
            raise ReadoutError(f"normal matrix is singular{hint}") from exc


def predict(readout: RidgeReadout, embeddings) -> np.ndarray:
    """Argmax class per node; ties go to the lowest class index."""
    return np.argmax(readout.scores(_states_of(embeddings)), axis=1)


def accuracy(pred, labels, mask=None) -> float:
    pred, labels = np.asarray(pred), np.asarray(labels)
    if mask is None:
        mask = np.ones(labels.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if not np.any(mask):
        raise ReadoutError("accuracy over an empty mask")
    return float(np.mean(pred[mask] == labels[mask]))

"""Iterative estimators for spectral radii and spectral norms.

All estimators are deterministic: start vectors are fixed, never drawn from
global random state.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Estimate:
    """Result of an iterative estimator.

    ``converged`` is False when ``max_iters`` was exhausted before the
    relative change dropped below the tolerance; ``value`` is then the last
    iterate rather than a converged answer.
    """

    value: float
    converged: bool
    iterations: int

    def __float__(self) -> float:
        return self.value


def norm_growth_power_iteration(matrix, tol: float = 1e-8, max_iters: int = 10_000,
                                start: np.ndarray | None = None) -> Estimate:
    """Power iteration returning the limit of ``||M x_k||`` for unit ``x_k``.

    For a symmetric matrix this converges to the spectral radius even when
    both ``+rho`` and ``-rho`` are eigenvalues (bipartite graphs), where the
    Rayleigh quotient would oscillate.
    """
    n = matrix.shape[0]
    if start is None:
        x = np.ones(n)
    else:
        x = np.asarray(start, dtype=float).copy()
    x /= np.linalg.norm(x)
    prev = 0.0
    for it in range(1, max_iters + 1):
        y = matrix @ x
        value = float(np.linalg.norm(y))
        if value == 0.0:
            return Estimate(0.0, True, it)
        if abs(value - prev) <= tol * value:
            return Estimate(value, True, it)
        prev = value
        x = y / value
    logger.warning("power iteration did not converge in %d iterations", max_iters)
    return Estimate(prev, False, max_iters)


def spectral_norm(matrix, tol: float = 1e-12, max_iters: int = 100_000) -> Estimate:
    """Largest singular value via power iteration on ``M^T M``.

    Converges from below, so the estimate never exceeds the true norm by
    more than rounding error.
    """
    if sp.issparse(matrix):
        matrix = sp.csr_matrix(matrix)
        gram = sp.linalg.aslinearoperator(matrix.T) @ sp.linalg.aslinearoperator(matrix)
    else:
        matrix = np.asarray(matrix, dtype=float)
        gram = matrix.T @ matrix if matrix.shape[1] <= 512 else _DenseGram(matrix)
    n = matrix.shape[1]
    x = np.ones(n)
    x /= np.linalg.norm(x)
    prev = 0.0
    for it in range(1, max_iters + 1):
        y = gram @ x
        # Rayleigh quotient of the PSD Gram matrix; sqrt gives sigma_max.
        value = float(x @ y)
        ynorm = float(np.linalg.norm(y))
        if ynorm == 0.0:
            return Estimate(0.0, True, it)
        if abs(value - prev) <= tol * value:
            return Estimate(float(np.sqrt(value)), True, it)
        prev = value
        x = y / ynorm
    logger.warning("spectral norm estimate did not converge in %d iterations", max_iters)
    return Estimate(float(np.sqrt(max(prev, 0.0))), False, max_iters)


class _DenseGram:
    """Applies ``M^T M`` without forming it."""

    def __init__(self, matrix: np.ndarray):
        self.matrix = matrix

    def __matmul__(self, x):
        return self.matrix.T @ (self.matrix @ x)


def subspace_spectral_radius(matrix, tol: float = 1e-6, max_iters: int = 5_000,
                             block: int = 8) -> Estimate:
    """Spectral radius of a general (non-symmetric) square matrix.

    Block power (subspace) iteration with a Rayleigh-Ritz step: the moduli of
    the eigenvalues of the projected ``block x block`` matrix converge to the
    dominant eigenvalue moduli, including complex-conjugate dominant pairs
    for which single-vector norm growth oscillates.
    """
    n = matrix.shape[0]
    b = min(n, block)
    # Fixed start block, independent of any caller-provided generator.
    start = np.random.default_rng(0x5EED).standard_normal((n, b))
    q, _ = np.linalg.qr(start)
    if b == n:
        # Eigenvalues of a nilpotent matrix come back as O(eps^(1/n)) noise;
        # detect structural nilpotency directly.
        z = q
        for _ in range(n):
            z = np.asarray(matrix @ z)
        if not np.any(z):
            return Estimate(0.0, True, n)
    prev = 0.0
    for it in range(1, max_iters + 1):
        z = np.asarray(matrix @ q)
        ritz = np.linalg.eigvals(q.T @ z)
        value = float(np.max(np.abs(ritz)))
        if not np.any(z):
            return Estimate(0.0, True, it)
        if b == n or (it > 1 and abs(value - prev) <= tol * value):
            return Estimate(value, True, it)
        prev = value
        q, _ = np.linalg.qr(z)
    logger.warning("subspace iteration did not converge in %d iterations", max_iters)
    return Estimate(prev, False, max_iters)

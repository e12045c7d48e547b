"""First-stage penalized least squares and log-residual construction."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels


@dataclass
class LassoFit:
    """Solution of the l1-penalized squared-error problem for one node."""

    beta: np.ndarray
    intercept: float
    lambda1: float
    objective_trace: np.ndarray
    n_iter: int
    kkt: float
    converged: bool

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.beta.size == 0:
            return np.full(X.shape[0], self.intercept)
        return X @ self.beta + self.intercept


@dataclass
class LogResiduals:
    """log|residual| response for the quantile stage, clipped away from 0."""

    y_hat: np.ndarray
    clip_count: int


def lasso_fit(
    X: np.ndarray,
    y: np.ndarray,
    lambda1: float,
    tol: float = 1e-8,
    max_iter: int = 10000,
    coord_penalty: np.ndarray | None = None,
) -> LassoFit:
    """Minimize ``(1/2n) sum (y_i - x_i'b - b0)^2 + lambda1 ||b||_1``.

    The intercept is unpenalized. ``coord_penalty`` replaces the uniform
    ``lambda1`` with a per-coordinate penalty vector (used by the
    reweighted selection stage). Non-convergence is reported on the
    returned fit rather than raised.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be n x d with matching response length")
    if X.shape[0] < 2:
        raise ValueError("need at least two observations")
    if lambda1 < 0:
        raise ValueError("lambda1 must be nonnegative")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("design and response must be finite")
    if coord_penalty is None:
        lam = np.full(X.shape[1], float(lambda1))
    else:
        lam = np.asarray(coord_penalty, dtype=np.float64)
        if lam.shape != (X.shape[1],) or np.any(lam < 0):
            raise ValueError("coord_penalty must be a nonnegative d-vector")
    beta, intercept, trace, n_iter, kkt, converged = _kernels.lasso_pg(
        X, y, lam, tol, max_iter
    )
    return LassoFit(
        beta=beta,
        intercept=intercept,
        lambda1=float(lambda1),
        objective_trace=trace,
        n_iter=n_iter,
        kkt=kkt,
        converged=converged,
    )


def log_abs_residuals(
    fit: LassoFit, X: np.ndarray, y: np.ndarray, clip_floor: float = 1e-10
) -> LogResiduals:
    """``log(max(|y_i - fit(x_i)|, clip_floor))`` with a clamp counter."""
    if clip_floor <= 0:
        raise ValueError("clip_floor must be positive")
    resid = np.abs(np.asarray(y, dtype=np.float64) - fit.predict(X))
    clipped = resid < clip_floor
    return LogResiduals(
        y_hat=np.log(np.maximum(resid, clip_floor)),
        clip_count=int(clipped.sum()),
    )


def lambda1_default(n: int, p_active: int, C1: float = 1.0) -> float:
    """``C1 * sqrt(log(max(n, p_active)) / n)``."""
    if n < 1 or p_active < 1:
        raise ValueError("n and p_active must be positive")
    return C1 * math.sqrt(math.log(max(n, p_active)) / n)


def lambda1_cv(
    X: np.ndarray,
    y: np.ndarray,
    n_folds: int = 5,
    c_grid: tuple[float, ...] = (0.25, 0.5, 1.0, 2.0, 4.0),
    tol: float = 1e-8,
    max_iter: int = 10000,
) -> tuple[float, dict[float, float]]:
    """Pick the penalty constant by k-fold cross-validated squared error.

    Folds are contiguous index blocks, so the selection is deterministic
    for a fixed row order. Returns the winning constant and the per-
    constant mean validation errors.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    n = X.shape[0]
    if n < n_folds:
        raise ValueError("need at least one observation per fold")
    base = lambda1_default(n, max(X.shape[1], 1))
    bounds = np.linspace(0, n, n_folds + 1).astype(int)
    errors: dict[float, float] = {}
    for c in c_grid:
        fold_err = []
        for f in range(n_folds):
            lo, hi = bounds[f], bounds[f + 1]
            mask = np.ones(n, dtype=bool)
            mask[lo:hi] = False
            fit = lasso_fit(X[mask], y[mask], c * base, tol=tol, max_iter=max_iter)
            pred = fit.predict(X[~mask])
            fold_err.append(float(np.mean((y[~mask] - pred) ** 2)))
        errors[c] = float(np.mean(fold_err))
    best = min(errors, key=lambda c: (errors[c], c))
    return best, errors

"""Monomial feature maps and column standardization for the regressions."""

from __future__ import annotations

import numpy as np

MAX_DEGREE = 3


class FeatureMap:
    """Per-variable monomial expansion ``x -> (x, x^2, ..., x^degree)``.

    Columns are laid out in contiguous blocks, one block per source
    variable in the order the variables are given. Subsetting the
    variable list keeps the surviving blocks bit-identical, so the map
    is monotone under set inclusion.
    """

    def __init__(self, degree: int = 1):
        if not 1 <= int(degree) <= MAX_DEGREE:
            raise ValueError(f"degree must be in 1..{MAX_DEGREE}")
        self.degree = int(degree)

    def width(self, n_vars: int) -> int:
        return self.degree * n_vars

    def expand(self, data: np.ndarray) -> np.ndarray:
        """Expand an ``n x m`` matrix to ``n x (degree * m)`` basis columns."""
        data = np.asarray(data, dtype=np.float64)
        if data.ndim == 1:
            data = data[:, None]
        if not np.all(np.isfinite(data)):
            raise ValueError("feature expansion requires finite input")
        n, m = data.shape
        out = np.empty((n, self.degree * m), dtype=np.float64)
        for l in range(m):
            block = out[:, l * self.degree : (l + 1) * self.degree]
            block[:, 0] = data[:, l]
            for d in range(1, self.degree):
                block[:, d] = block[:, d - 1] * data[:, l]
        return out

    def source_of(self, q: int, n_vars: int) -> int:
        """Index (within the given variable list) owning basis column ``q``."""
        if not 0 <= q < self.width(n_vars):
            raise IndexError(f"column {q} out of range")
        return q // self.degree

    def basis_index(self, q: int, n_vars: int) -> tuple[int, int]:
        """(source variable position, monomial order) for column ``q``."""
        return self.source_of(q, n_vars), q % self.degree + 1


class ColumnScaler:
    """Affine per-column map to empirical mean 0 / variance 1.

    Constant columns are centered only (scale pinned to 1) so downstream
    solvers see a zero column rather than NaNs.
    """

    def __init__(self):
        self.mean_: np.ndarray | None = None
        self.scale_: np.ndarray | None = None

    def fit(self, X: np.ndarray) -> "ColumnScaler":
        X = np.asarray(X, dtype=np.float64)
        self.mean_ = X.mean(axis=0) if X.size else np.zeros(X.shape[1])
        sd = X.std(axis=0) if X.size else np.ones(X.shape[1])
        sd = np.where(sd > 0, sd, 1.0)
        self.scale_ = sd
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean_) / self.scale_

    def fit_transform(self, X: np.ndarray) -> np.ndarray:
        return self.fit(X).transform(X)

    def unscale_coef(
        self, beta: np.ndarray, intercept: float
    ) -> tuple[np.ndarray, float]:
        """Map standardized-scale coefficients back to the raw basis."""
        beta = np.asarray(beta, dtype=np.float64)
        raw = beta / self.scale_
        return raw, float(intercept - raw @ self.mean_)

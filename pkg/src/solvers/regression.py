"""Least-squares conditional expectations on a total-degree polynomial basis."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np

LOGGER = logging.getLogger(__name__)

_MIN_SCALE = 1e-12

__all__ = ["PolynomialBasis", "RegressionFit", "fit_regression", "total_degree_exponents"]


def total_degree_exponents(dim: int, degree: int) -> np.ndarray:
    """Exponent rows ``e`` with ``sum(e) <= degree``, ordered by total degree."""

    if degree < 0:
        raise ValueError("degree must be non-negative")
    rows = [e for e in itertools.product(range(degree + 1), repeat=dim) if sum(e) <= degree]
    rows.sort(key=lambda e: (sum(e), tuple(-v for v in e)))
    return np.asarray(rows, dtype=int).reshape(len(rows), dim)


@dataclass(frozen=True)
class PolynomialBasis:
    """Monomials in standardized features; constant features are dropped."""

    exponents: np.ndarray
    center: np.ndarray
    scale: np.ndarray
    active: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray, degree: int) -> "PolynomialBasis":
        features = np.asarray(features, dtype=float)
        center = features.mean(axis=0) if features.shape[1] else np.zeros(0)
        scale = features.std(axis=0) if features.shape[1] else np.zeros(0)
        active = scale > _MIN_SCALE
        if not np.any(active):
            LOGGER.debug("All %d regression features are constant; using a constant basis", features.shape[1])
            degree = 0
        exponents = total_degree_exponents(int(active.sum()), degree)
        return cls(exponents=exponents, center=center, scale=np.where(active, scale, 1.0), active=active)

    @property
    def num_terms(self) -> int:
        return self.exponents.shape[0]

    @property
    def degree(self) -> int:
        return int(self.exponents.sum(axis=1).max()) if self.exponents.size else 0

    def design(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=float)
        z = ((features - self.center) / self.scale)[:, self.active]
        out = np.ones((features.shape[0], self.num_terms))
        for col, powers in enumerate(self.exponents):
            for dim, power in enumerate(powers):
                if power:
                    out[:, col] *= z[:, dim] ** power
        return out


@dataclass(frozen=True)
class RegressionFit:
    basis: PolynomialBasis
    coefficients: np.ndarray
    cv_rmse: float

    @property
    def degree(self) -> int:
        return self.basis.degree

    def predict(self, features: np.ndarray) -> np.ndarray:
        return self.basis.design(features) @ self.coefficients


def _lstsq(design: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, int]:
    coefficients, _, rank, _ = np.linalg.lstsq(design, targets, rcond=None)
    return coefficients, int(rank)


def _cross_validate(basis: PolynomialBasis, design: np.ndarray, targets: np.ndarray, folds: int) -> float:
    rows = design.shape[0]
    if folds < 2 or rows < 2 * folds:
        return 0.0
    labels = np.arange(rows) % folds
    squared = 0.0
    for fold in range(folds):
        held = labels == fold
        coefficients, _ = _lstsq(design[~held], targets[~held])
        residual = targets[held] - design[held] @ coefficients
        squared += float(np.sum(residual * residual))
    return float(np.sqrt(squared / targets.size))


def fit_regression(
    features: np.ndarray,
    targets: np.ndarray,
    degree: int,
    *,
    cv_folds: int = 2,
    label: str = "",
) -> RegressionFit:
    """Fit ``targets`` (rows, outputs) on ``features`` (rows, dim).

    A rank-deficient design lowers the degree one step at a time with a warning.
    ``cv_rmse`` is the out-of-fold residual RMS over ``cv_folds`` interleaved folds.
    """

    features = np.asarray(features, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if features.ndim != 2 or targets.shape[0] != features.shape[0]:
        raise ValueError("features must be (rows, dim) with one target row per feature row")

    for current in range(degree, -1, -1):
        basis = PolynomialBasis.fit(features, current)
        design = basis.design(features)
        coefficients, rank = _lstsq(design, targets)
        if rank == design.shape[1] or basis.num_terms == 1:
            break
        LOGGER.warning(
            "Regression design%s has rank %d < %d terms; reducing degree %d -> %d",
            f" ({label})" if label else "",
            rank,
            design.shape[1],
            current,
            current - 1,
        )
    cv_rmse = _cross_validate(basis, design, targets, cv_folds)
    return RegressionFit(basis=basis, coefficients=coefficients, cv_rmse=cv_rmse)

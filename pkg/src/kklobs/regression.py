"""Kernel ridge regression, kernel interpolation, and tuning utilities."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.spatial import cKDTree

from .kernels import RadialKernel, gram

__all__ = [
    "ConditioningError",
    "PseudoInverseModel",
    "InterpolantModel",
    "krr_fit",
    "krr_predict",
    "kernel_interpolate",
    "cross_validate",
    "grid_search",
    "fill_distance",
    "CrossValidationResult",
    "GridPoint",
    "GridSearchResult",
]


class ConditioningError(RuntimeError):
    """A symmetric solve failed because the matrix is numerically singular."""

    def __init__(self, message, smallest_pivot=None):
        super().__init__(message)
        self.smallest_pivot = smallest_pivot


def _smallest_eigenvalue(mat) -> float:
    try:
        return float(scipy.linalg.eigh(mat, eigvals_only=True, subset_by_index=[0, 0])[0])
    except Exception:
        return float("nan")


def _solve_spd(mat: np.ndarray, rhs: np.ndarray, context: str) -> np.ndarray:
    """Solve ``mat @ x = rhs`` for symmetric positive-definite ``mat``.

    Uses a Cholesky factorization, falling back to a pivoted symmetric
    indefinite factorization if definiteness is lost to rounding.
    """
    try:
        factor = scipy.linalg.cho_factor(mat, lower=True, check_finite=False)
        return scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    except scipy.linalg.LinAlgError:
        pass
    try:
        return scipy.linalg.solve(mat, rhs, assume_a="sym", check_finite=False)
    except scipy.linalg.LinAlgError:
        pivot = _smallest_eigenvalue(mat)
        raise ConditioningError(
            f"{context}: matrix numerically singular (smallest pivot ~ {pivot:.3e})",
            smallest_pivot=pivot,
        ) from None


def _as_matrix(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


@dataclass
class PseudoInverseModel:
    """Kernel-expansion model mapping observer states back to system states.

    Prediction at z is ``coefficients @ kappa(centers, z)``; row k of
    ``coefficients`` solves (G + alpha I) c_k = x_k.
    """

    kernel: RadialKernel
    centers: np.ndarray
    coefficients: np.ndarray
    alpha: float

    @property
    def n_centers(self) -> int:
        return self.centers.shape[0]

    @property
    def output_dim(self) -> int:
        return self.coefficients.shape[0]

    def predict(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        single = z.ndim == 1
        pts = z[None, :] if single else z
        if pts.shape[1] != self.centers.shape[1]:
            raise ValueError(
                f"query dimension {pts.shape[1]} != center dimension {self.centers.shape[1]}"
            )
        k = gram(self.kernel, pts, self.centers)
        out = k @ self.coefficients.T
        return out[0] if single else out


@dataclass
class InterpolantModel:
    """Kernel interpolant of a scalar function on scattered points."""

    kernel: RadialKernel
    centers: np.ndarray
    coefficients: np.ndarray
    jitter: float = 0.0

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = x[None, :] if single else x
        values = gram(self.kernel, pts, self.centers) @ self.coefficients
        return values[0] if single else values

    __call__ = predict


def krr_fit(centers, targets, kernel: RadialKernel, alpha: float) -> PseudoInverseModel:
    """Kernel ridge regression of targets on centers.

    Solves the symmetric system (G + alpha I) c_k = x_k per output
    component; alpha is the literal diagonal shift.
    """
    if alpha < 0:
        raise ValueError(f"ridge parameter must be >= 0, got {alpha}")
    z = _as_matrix(centers)
    x = _as_matrix(targets)
    if x.shape[0] != z.shape[0]:
        raise ValueError(f"{z.shape[0]} centers but {x.shape[0]} targets")
    g = gram(kernel, z)
    sol = _solve_spd(g + alpha * np.eye(z.shape[0]), x, context="KRR fit")
    return PseudoInverseModel(kernel=kernel, centers=z, coefficients=sol.T, alpha=alpha)


def krr_predict(model: PseudoInverseModel, z) -> np.ndarray:
    return model.predict(z)


def kernel_interpolate(points, values, kernel: RadialKernel, max_jitter_scale: float = 1e-6) -> InterpolantModel:
    """Interpolate scalar values exactly: solve G c = y.

    If the Gram factorization fails, retries with diagonal jitter starting
    at 1e-10 * trace(G)/n and growing tenfold up to ``max_jitter_scale``
    times trace(G)/n; the jitter actually used is recorded on the model.
    """
    pts = _as_matrix(points)
    y = np.asarray(values, dtype=float)
    if y.shape != (pts.shape[0],):
        raise ValueError(f"values must be ({pts.shape[0]},), got {y.shape}")
    g = gram(kernel, pts)
    scale = np.trace(g) / pts.shape[0]
    jitter = 0.0
    while True:
        try:
            factor = scipy.linalg.cho_factor(
                g + jitter * np.eye(pts.shape[0]) if jitter else g,
                lower=True, check_finite=False,
            )
            coef = scipy.linalg.cho_solve(factor, y, check_finite=False)
            return InterpolantModel(kernel=kernel, centers=pts, coefficients=coef, jitter=jitter)
        except scipy.linalg.LinAlgError:
            if jitter == 0.0:
                jitter = 1e-10 * scale
            elif jitter < max_jitter_scale * scale:
                jitter = min(jitter * 10.0, max_jitter_scale * scale)
            else:
                raise ConditioningError(
                    f"kernel interpolation failed even with jitter {jitter:.3e}",
                    smallest_pivot=_smallest_eigenvalue(g),
                ) from None


@dataclass
class CrossValidationResult:
    fold_mse: np.ndarray
    mean_mse: float


def _fold_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """Contiguous blocks of a seeded shuffle; deterministic given the seed."""
    order = np.random.default_rng(seed).permutation(n)
    return [np.sort(block) for block in np.array_split(order, folds)]


def cross_validate(
    centers, targets, kernel: RadialKernel, alpha: float, folds: int = 5, seed: int = 0
) -> CrossValidationResult:
    """K-fold cross-validated mean squared prediction error.

    The per-fold MSE is the mean over validation points of the squared
    Euclidean norm of the full state error.
    """
    z = _as_matrix(centers)
    x = _as_matrix(targets)
    n = z.shape[0]
    if folds < 2 or n < folds:
        raise ValueError(f"need 2 <= folds <= n, got folds={folds}, n={n}")
    errors = np.empty(folds)
    for k, val_idx in enumerate(_fold_indices(n, folds, seed)):
        mask = np.ones(n, dtype=bool)
        mask[val_idx] = False
        model = krr_fit(z[mask], x[mask], kernel, alpha)
        pred = model.predict(z[val_idx])
        errors[k] = float(np.mean(np.sum((pred - x[val_idx]) ** 2, axis=1)))
    return CrossValidationResult(fold_mse=errors, mean_mse=float(errors.mean()))


@dataclass
class GridPoint:
    sigma: float
    alpha: float
    fold_mse: Optional[np.ndarray]
    mean_mse: Optional[float]
    error: Optional[str] = None


@dataclass
class GridSearchResult:
    best_sigma: float
    best_alpha: float
    best_mse: float
    records: list[GridPoint] = field(default_factory=list)


def grid_search(
    centers, targets, kernel: RadialKernel, sigmas, alphas, folds: int = 5, seed: int = 0
) -> GridSearchResult:
    """Cross-validate every (sigma, alpha) cell and return the argmin.

    Conditioning failures in single cells are recorded and skipped.  Ties
    break toward larger alpha, then larger sigma, which also makes the
    result independent of grid ordering.
    """
    sigmas = [float(s) for s in sigmas]
    alphas = [float(a) for a in alphas]
    if not sigmas or not alphas:
        raise ValueError("sigma and alpha grids must be non-empty")
    records = []
    for sigma in sigmas:
        for alpha in alphas:
            try:
                cv = cross_validate(centers, targets, kernel.with_bandwidth(sigma), alpha, folds, seed)
                records.append(GridPoint(sigma, alpha, cv.fold_mse, cv.mean_mse))
            except ConditioningError as err:
                records.append(GridPoint(sigma, alpha, None, None, error=str(err)))
    usable = [r for r in records if r.error is None]
    if not usable:
        raise ConditioningError("every grid cell failed to factorize")
    best = min(usable, key=lambda r: (r.mean_mse, -r.alpha, -r.sigma))
    return GridSearchResult(
        best_sigma=best.sigma, best_alpha=best.alpha, best_mse=best.mean_mse, records=records
    )


def fill_distance(samples, probes) -> float:
    """Largest distance from any probe point to its nearest sample point."""
    s = _as_matrix(samples)
    p = _as_matrix(probes)
    if s.shape[0] == 0 or p.shape[0] == 0:
        raise ValueError("samples and probes must be non-empty")
    dist, _ = cKDTree(s).query(p)
    return float(np.max(dist))

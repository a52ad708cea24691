"""Snapshot-regime machinery: residual-validated approximate eigenfunctions.

Given successor-predecessor pairs, a grid of unit-circle candidate
eigenvalues is screened by the minimal RKHS residual of the eigen-equation
(the residual-DMD idea).  Retained candidate pairs decompose kernel
sections and yield injection values through explicit eigenvalue powers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .dynamics import SnapshotSet
from .kernels import RadialKernel, gram
from .observer import DeepKKLParams, weight_matrix
from .regression import ConditioningError, InterpolantModel

__all__ = [
    "SnapshotMatrices",
    "build_snapshot_matrices",
    "CandidateGrid",
    "candidate_grid",
    "CandidateSolution",
    "solve_candidate",
    "SpectralModel",
    "fit_spectral_model",
    "decompose_kernel_section",
    "spectral_injection",
    "default_gram_ridge",
]


@dataclass(frozen=True)
class SnapshotMatrices:
    """Gram matrices of kernel sections at snapshot points and predecessors.

    g[i, j] = kappa(x_i, x_j), a[i, j] = kappa(xprev_i, x_j) and
    r[i, j] = kappa(xprev_i, xprev_j); g and r are symmetric by
    construction.
    """

    g: np.ndarray
    a: np.ndarray
    r: np.ndarray

    @property
    def n_points(self) -> int:
        return self.g.shape[0]


def build_snapshot_matrices(snapshots: SnapshotSet, kernel: RadialKernel) -> SnapshotMatrices:
    return SnapshotMatrices(
        g=gram(kernel, snapshots.states),
        a=gram(kernel, snapshots.predecessors, snapshots.states),
        r=gram(kernel, snapshots.predecessors),
    )


def default_gram_ridge(g: np.ndarray) -> float:
    return 1e-10 * float(np.trace(g)) / g.shape[0]


@dataclass(frozen=True)
class CandidateGrid:
    """Midpoints of p equal arcs of the unit circle, plus the mesh size."""

    points: np.ndarray
    mesh_size: float


def candidate_grid(p: int) -> CandidateGrid:
    """Candidates exp(i pi (2j - 1)/p), j = 1..p, sorted by angle."""
    if p < 1:
        raise ValueError(f"need p >= 1, got {p}")
    angles = np.pi * (2.0 * np.arange(1, p + 1) - 1.0) / p
    return CandidateGrid(points=np.exp(1j * angles), mesh_size=2.0 * math.sin(math.pi / p))


@dataclass(frozen=True)
class CandidateSolution:
    vector: np.ndarray
    residual: float


def _pencil(lam: complex, matrices: SnapshotMatrices) -> np.ndarray:
    """Hermitian matrix whose minimal Rayleigh quotient is the squared residual."""
    return (
        matrices.r
        - lam * matrices.a.T
        - np.conj(lam) * matrices.a
        + abs(lam) ** 2 * matrices.g
    )


def solve_candidate(
    lam: complex, matrices: SnapshotMatrices, gram_ridge: Optional[float] = None
) -> CandidateSolution:
    """Minimal-residual eigenfunction coefficients for one candidate.

    Solves the Hermitian generalized eigenproblem (M(lam), G + ridge I) for
    its smallest eigenpair; the returned vector satisfies
    v^H (G + ridge I) v = 1 and the residual is sqrt(max(0, smallest
    eigenvalue)).
    """
    if abs(abs(lam) - 1.0) > 1e-9:
        raise ValueError(f"candidate eigenvalue must lie on the unit circle, got {lam}")
    ridge = default_gram_ridge(matrices.g) if gram_ridge is None else float(gram_ridge)
    m = _pencil(lam, matrices)
    b = matrices.g + ridge * np.eye(matrices.n_points) if ridge else matrices.g
    try:
        w, v = scipy.linalg.eigh(m, b, subset_by_index=[0, 0], check_finite=False)
    except scipy.linalg.LinAlgError as err:
        raise ArithmeticError(f"eigensolver failed at candidate {lam}: {err}") from None
    return CandidateSolution(vector=v[:, 0], residual=math.sqrt(max(float(w[0]), 0.0)))


@dataclass
class SpectralModel:
    """Retained candidate eigenvalues with eigenfunction coefficients.

    ``vectors[:, j]`` holds the coefficients of the j-th approximate
    eigenfunction in the kernel sections at ``points``; candidates are
    sorted by angle in [0, 2 pi).  The Gram matrix and the decomposition
    factorization are cached for reuse across queries.
    """

    points: np.ndarray
    kernel: RadialKernel
    eigenvalues: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    gram_matrix: np.ndarray
    gram_ridge: float
    mesh_size: float
    _decomp_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_candidates(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def filtered(self, residual_threshold: float) -> "SpectralModel":
        """Model restricted to candidates with residual <= threshold."""
        keep = self.residuals <= residual_threshold
        return SpectralModel(
            points=self.points,
            kernel=self.kernel,
            eigenvalues=self.eigenvalues[keep],
            vectors=self.vectors[:, keep],
            residuals=self.residuals[keep],
            gram_matrix=self.gram_matrix,
            gram_ridge=self.gram_ridge,
            mesh_size=self.mesh_size,
        )

    def _decomposition_factor(self, ridge: float):
        cached = self._decomp_cache.get(ridge)
        if cached is None:
            psi = self.vectors.conj().T @ self.gram_matrix @ self.vectors
            psi += ridge * np.eye(self.n_candidates)
            try:
                cached = scipy.linalg.cho_factor(psi, lower=True, check_finite=False)
            except scipy.linalg.LinAlgError:
                raise ConditioningError(
                    "eigenfunction normal matrix is numerically singular; "
                    f"increase the decomposition ridge (got {ridge:.3e})"
                ) from None
            self._decomp_cache[ridge] = cached
        return cached


def fit_spectral_model(
    snapshots: SnapshotSet,
    kernel: RadialKernel,
    p: int,
    residual_threshold: Optional[float] = None,
    gram_ridge: Optional[float] = None,
    matrices: Optional[SnapshotMatrices] = None,
    workers: Optional[int] = None,
) -> SpectralModel:
    """Screen all p grid candidates and retain those passing the threshold.

    The generalized problems share the right-hand matrix G + ridge I, so
    all candidates are solved in a basis that diagonalizes it: one
    symmetric eigendecomposition of G up front, then one standard Hermitian
    solve per candidate.  Directions of G below the ridge carry no usable
    function content and are dropped from the trial space.  For real data
    the residual curve is conjugate-symmetric and v(conj lam) may be taken
    as conj(v(lam)), so only the upper half-circle is solved explicitly.
    """
    grid = candidate_grid(p)
    if matrices is None:
        matrices = build_snapshot_matrices(snapshots, kernel)
    n = matrices.n_points
    ridge = default_gram_ridge(matrices.g) if gram_ridge is None else float(gram_ridge)

    evals, q = scipy.linalg.eigh(matrices.g, check_finite=False)
    keep = evals > ridge
    if not np.any(keep):
        keep = np.zeros_like(evals, dtype=bool)
        keep[-1] = True
    scale = 1.0 / np.sqrt(evals[keep] + ridge)
    w_basis = q[:, keep] * scale  # (n, r), B-orthonormal columns
    g_reduced = evals[keep] / (evals[keep] + ridge)
    h_fixed = w_basis.T @ matrices.r @ w_basis
    h_fixed[np.diag_indices_from(h_fixed)] += g_reduced
    a_reduced = w_basis.T @ matrices.a @ w_basis

    lams = grid.points
    vectors = np.empty((n, p), dtype=complex)
    residuals = np.empty(p)

    def solve_index(i: int) -> None:
        lam = lams[i]
        m_red = h_fixed - lam * a_reduced.T - np.conj(lam) * a_reduced
        try:
            w, u = scipy.linalg.eigh(m_red, subset_by_index=[0, 0], check_finite=False)
        except scipy.linalg.LinAlgError as err:
            raise ArithmeticError(f"eigensolver failed at candidate {lam}: {err}") from None
        residuals[i] = math.sqrt(max(float(w[0]), 0.0))
        vectors[:, i] = w_basis @ u[:, 0]

    solve_indices = [i for i in range(p) if 2 * i + 1 <= p]
    if workers is not None and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(solve_index, solve_indices))
    else:
        for i in solve_indices:
            solve_index(i)
    for i in range(p):
        if 2 * i + 1 > p:
            partner = p - 1 - i
            residuals[i] = residuals[partner]
            vectors[:, i] = np.conj(vectors[:, partner])

    model = SpectralModel(
        points=np.asarray(snapshots.states),
        kernel=kernel,
        eigenvalues=lams,
        vectors=vectors,
        residuals=residuals,
        gram_matrix=matrices.g,
        gram_ridge=ridge,
        mesh_size=grid.mesh_size,
    )
    if residual_threshold is not None:
        model = model.filtered(residual_threshold)
    return model


def decompose_kernel_section(x, model: SpectralModel, ridge: float = 1e-8) -> np.ndarray:
    """Least-squares coefficients of kappa(x, .) on the eigenfunction basis.

    Solves (V^H G V + ridge I) c = V^H k_x.  Accepts a single point (d,)
    or a batch (q, d); returns (n_candidates,) or (q, n_candidates).
    """
    if model.n_candidates == 0:
        raise ValueError("spectral model holds no candidates")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    k_x = gram(model.kernel, model.points, pts)  # (n, q)
    rhs = model.vectors.conj().T @ k_x
    coef = scipy.linalg.cho_solve(model._decomposition_factor(ridge), rhs, check_finite=False)
    return coef[:, 0] if single else coef.T


def spectral_injection(
    x,
    model: SpectralModel,
    h_interpolant: InterpolantModel,
    params: DeepKKLParams,
    decomposition_ridge: float = 1e-8,
) -> np.ndarray:
    """Truncated injection values evaluated through the spectral model.

    Every eigenfunction contributes through powers of its eigenvalue; the
    retained vectors solve the adjoint-oriented candidate problem, so the
    backward operator acts through the conjugate eigenvalue.  Conjugate
    candidate pairs make the result real up to roundoff; the imaginary
    part is checked against 1e-6 of the value's magnitude and dropped.
    """
    if h_interpolant.centers.shape != model.points.shape or not np.array_equal(
        h_interpolant.centers, model.points
    ):
        raise ValueError("h interpolant must be built on the spectral model's points")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x

    m = params.order
    weights = weight_matrix(params)  # (m, L)
    horizon = weights.shape[1]
    lam_back = np.conj(model.eigenvalues)
    powers = lam_back[None, :] ** np.arange(horizon)[:, None]  # (L, q)
    series = weights @ powers  # (m, q)
    series *= lam_back[None, :] ** (np.arange(1, m + 1)[:, None])

    inner = model.vectors.T @ (model.gram_matrix @ h_interpolant.coefficients)  # (q,)
    coef = decompose_kernel_section(pts, model, decomposition_ridge)  # (batch, q)
    values = coef @ (series * inner[None, :]).T  # (batch, m)

    scale = np.maximum(np.linalg.norm(values, axis=1), 1e-30)
    imag_ratio = np.linalg.norm(np.imag(values), axis=1) / scale
    worst = float(np.max(imag_ratio))
    if worst > 1e-6 and np.max(np.linalg.norm(values, axis=1)) > 1e-12:
        raise ArithmeticError(
            f"spectral injection lost conjugate pairing: imaginary fraction {worst:.3e}"
        )
    out = np.real(values)
    return out[0] if single else out

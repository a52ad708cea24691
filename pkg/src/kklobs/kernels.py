"""Radial kernel families whose native spaces are Sobolev-Hilbert spaces.

Three families are provided: compactly supported Wendland kernels,
half-integer Matern kernels, and the Gaussian kernel.  All kernels are
normalized so that ``kappa(x, x) = 1`` and evaluate as
``kappa(x, x') = profile(||x - x'|| / bandwidth)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

__all__ = [
    "RadialKernel",
    "WendlandKernel",
    "MaternKernel",
    "GaussianKernel",
    "WendlandProfile",
    "wendland_profile",
    "gram",
    "kernel_from_spec",
]

MAX_WENDLAND_SMOOTHNESS = 3


@lru_cache(maxsize=None)
def _wendland_coefficients(dim: int, k: int) -> tuple[float, ...]:
    """Polynomial coefficients (ascending powers) of the normalized profile.

    Starts from the truncated power ``(1 - r)^ell`` with
    ``ell = floor(dim/2) + k + 1`` and applies ``k`` times the integral
    operator ``I phi(r) = int_r^1 r' phi(r') dr'``, which maps polynomials
    on [0, 1] to polynomials on [0, 1].  Exact rational arithmetic keeps the
    coefficients free of rounding; the result is scaled so profile(0) = 1.
    """
    ell = dim // 2 + k + 1
    coef = [Fraction((-1) ** j * math.comb(ell, j)) for j in range(ell + 1)]
    for _ in range(k):
        lifted = [Fraction(0)] * (len(coef) + 2)
        for j, a in enumerate(coef):
            lifted[0] += a / (j + 2)
            lifted[j + 2] -= a / (j + 2)
        coef = lifted
    norm = coef[0]
    return tuple(float(c / norm) for c in coef)


class WendlandProfile:
    """Piecewise-polynomial Wendland profile on [0, inf), zero beyond 1."""

    def __init__(self, dim: int, smoothness: int):
        self.dim = int(dim)
        self.smoothness = int(smoothness)
        self.coefficients = np.asarray(_wendland_coefficients(dim, smoothness))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        inside = r < 1.0
        values = np.polynomial.polynomial.polyval(r, self.coefficients)
        return np.where(inside, values, 0.0)

    def __repr__(self):
        return f"WendlandProfile(dim={self.dim}, smoothness={self.smoothness})"


def wendland_profile(dim: int, smoothness: int) -> WendlandProfile:
    """Normalized Wendland profile for the given dimension and smoothness.

    Only smoothness orders 0..3 are supported; higher orders are not needed
    by any supported kernel and are rejected.
    """
    if dim < 1:
        raise ValueError(f"dimension must be positive, got {dim}")
    if not 0 <= smoothness <= MAX_WENDLAND_SMOOTHNESS:
        raise ValueError(
            f"Wendland smoothness {smoothness} unsupported; "
            f"supported orders are 0..{MAX_WENDLAND_SMOOTHNESS}"
        )
    return WendlandProfile(dim, smoothness)


@dataclass(frozen=True)
class RadialKernel:
    """Base class: kappa(x, x') = profile(||x - x'|| / bandwidth)."""

    bandwidth: float

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")

    # subclasses implement the normalized univariate profile
    def profile(self, r):
        raise NotImplementedError

    def check_dim(self, dim: int) -> None:
        """Hook for families with a declared ambient dimension."""

    def with_bandwidth(self, bandwidth: float) -> "RadialKernel":
        return replace(self, bandwidth=bandwidth)

    def __call__(self, x, y) -> float:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError(f"point shapes differ: {x.shape} vs {y.shape}")
        self.check_dim(x.shape[0])
        r = float(np.linalg.norm(x - y)) / self.bandwidth
        return float(self.profile(r))

    def spec_string(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class WendlandKernel(RadialKernel):
    """Compactly supported kernel, zero whenever ||x - x'|| >= bandwidth.

    The native space is equivalent to the Sobolev space of order
    ``(dim + 1)/2 + smoothness``.
    """

    dim: int = 3
    smoothness: int = 1

    def __post_init__(self):
        super().__post_init__()
        wendland_profile(self.dim, self.smoothness)  # validates orders

    @property
    def _profile(self) -> WendlandProfile:
        cached = self.__dict__.get("_profile_cache")
        if cached is None:
            cached = WendlandProfile(self.dim, self.smoothness)
            self.__dict__["_profile_cache"] = cached
        return cached

    def profile(self, r):
        return self._profile(r)

    def check_dim(self, dim: int) -> None:
        if dim != self.dim:
            raise ValueError(
                f"Wendland kernel declared for dimension {self.dim}, "
                f"got points of dimension {dim}"
            )

    def spec_string(self) -> str:
        return f"wendland({self.dim},{self.smoothness},sigma={self.bandwidth!r})"


_MATERN_ORDERS = (0.5, 1.5, 2.5)


@dataclass(frozen=True)
class MaternKernel(RadialKernel):
    """Matern kernel at half-integer order with elementary closed form.

    Orders 1/2, 3/2 and 5/2 are supported; general orders would require
    modified Bessel functions and are not needed here.
    """

    order: float = 1.5

    def __post_init__(self):
        super().__post_init__()
        if self.order not in _MATERN_ORDERS:
            raise ValueError(
                f"Matern order {self.order} unsupported; choose from {_MATERN_ORDERS}"
            )

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        if self.order == 0.5:
            return np.exp(-r)
        if self.order == 1.5:
            s = math.sqrt(3.0) * r
            return (1.0 + s) * np.exp(-s)
        s = math.sqrt(5.0) * r
        return (1.0 + s + s * s / 3.0) * np.exp(-s)

    def spec_string(self) -> str:
        return f"matern({self.order},sigma={self.bandwidth!r})"


@dataclass(frozen=True)
class GaussianKernel(RadialKernel):
    """Gaussian radial basis function exp(-||x - x'||^2 / bandwidth^2)."""

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        return np.exp(-(r * r))

    def spec_string(self) -> str:
        return f"gaussian(sigma={self.bandwidth!r})"


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError(f"expected a non-empty (n, d) point array, got shape {pts.shape}")
    return pts


def gram(kernel: RadialKernel, points, points2=None) -> np.ndarray:
    """Matrix of pairwise kernel values.

    With one point set the result is assembled from the condensed distance
    matrix, so it is bitwise symmetric with an exact unit diagonal.
    """
    x = _as_points(points)
    kernel.check_dim(x.shape[1])
    if points2 is None:
        dist = squareform(pdist(x))
        return np.asarray(kernel.profile(dist / kernel.bandwidth))
    y = _as_points(points2)
    if y.shape[1] != x.shape[1]:
        raise ValueError(f"point dimensions differ: {x.shape[1]} vs {y.shape[1]}")
    dist = cdist(x, y)
    return np.asarray(kernel.profile(dist / kernel.bandwidth))


def kernel_from_spec(spec: str) -> RadialKernel:
    """Parse a kernel given as 'family(param, ..., sigma=value)'.

    Inverse of :meth:`RadialKernel.spec_string`; also accepts the family
    name with plain positional parameters, e.g. ``wendland(3,1,sigma=10)``,
    ``matern(1.5,sigma=2)``, ``gaussian(sigma=1)``.
    """
    text = spec.strip().lower()
    open_idx = text.find("(")
    if open_idx < 0 or not text.endswith(")"):
        raise ValueError(f"malformed kernel spec: {spec!r}")
    family = text[:open_idx].strip()
    args = [a.strip() for a in text[open_idx + 1 : -1].split(",") if a.strip()]
    positional: list[float] = []
    sigma = None
    for arg in args:
        if "=" in arg:
            key, _, value = arg.partition("=")
            if key.strip() not in ("sigma", "bandwidth"):
                raise ValueError(f"unknown kernel parameter {key!r} in {spec!r}")
            sigma = float(value)
        else:
            positional.append(float(arg))
    if sigma is None:
        raise ValueError(f"kernel spec {spec!r} is missing sigma=")
    if family == "wendland":
        if len(positional) != 2:
            raise ValueError(f"wendland spec needs (dim, smoothness): {spec!r}")
        return WendlandKernel(bandwidth=sigma, dim=int(positional[0]), smoothness=int(positional[1]))
    if family == "matern":
        if len(positional) != 1:
            raise ValueError(f"matern spec needs (order): {spec!r}")
        return MaternKernel(bandwidth=sigma, order=float(positional[0]))
    if family == "gaussian":
        if positional:
            raise ValueError(f"gaussian spec takes only sigma: {spec!r}")
        return GaussianKernel(bandwidth=sigma)
    raise ValueError(f"unknown kernel family {family!r}")

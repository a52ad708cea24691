"""Cascade-filter KKL observer: matrices, injection series, and runtime.

The observer state follows z+ = A z + b y with A lower bidiagonal
(diagonal beta, subdiagonal 1-beta) and b = (1-beta, 0, ..., 0).  The
injection that this filter realizes is a binomially weighted series of
backward outputs; with finite histories it is truncated, and the
truncation error admits an explicit bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import DivergenceError

__all__ = [
    "DeepKKLParams",
    "ObserverMatrices",
    "build_matrices",
    "series_weights",
    "weight_matrix",
    "truncated_injection",
    "truncation_bound",
    "minimal_valid_truncation",
    "analytic_injection",
    "analytic_pseudo_inverse",
    "filter_states",
    "run_observer",
]


@dataclass(frozen=True)
class DeepKKLParams:
    """Observer order m, filter parameter beta in (0, 1), truncation length."""

    order: int
    beta: float
    truncation_length: int

    def __post_init__(self):
        if self.order < 1:
            raise ValueError(f"order must be >= 1, got {self.order}")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.truncation_length < self.order:
            raise ValueError(
                f"truncation length {self.truncation_length} shorter than order {self.order}"
            )

    @property
    def beta_tilde(self) -> float:
        """Inflated rate governing the truncation bound's validity."""
        m, ell = self.order, self.truncation_length
        if m == 1:
            return self.beta
        if ell <= m:
            return math.inf
        return self.beta * (1.0 + (m - 1) / (ell - m))

    @property
    def bound_valid(self) -> bool:
        return self.beta_tilde < 1.0


@dataclass(frozen=True)
class ObserverMatrices:
    """The pair (A, b) of the linear filter."""

    a: np.ndarray
    b: np.ndarray

    @property
    def order(self) -> int:
        return self.b.shape[0]


def build_matrices(params: DeepKKLParams) -> ObserverMatrices:
    m, beta = params.order, params.beta
    a = np.diag(np.full(m, beta))
    if m > 1:
        a[np.arange(1, m), np.arange(m - 1)] = 1.0 - beta
    b = np.zeros(m)
    b[0] = 1.0 - beta
    return ObserverMatrices(a=a, b=b)


def series_weights(k: int, beta: float, horizon: int) -> np.ndarray:
    """Weights w[t] = C(k+t, k) beta^t (1-beta)^(k+1) for t = 0..horizon.

    Computed by the stable forward recurrence
    w[t+1] = w[t] * beta * (k+t+1) / (t+1); all weights are positive and
    the full series sums to one.
    """
    if k < 0 or horizon < 0:
        raise ValueError("need k >= 0 and horizon >= 0")
    w = np.empty(horizon + 1)
    w[0] = (1.0 - beta) ** (k + 1)
    for t in range(horizon):
        w[t + 1] = w[t] * beta * (k + t + 1) / (t + 1)
    return w


def weight_matrix(params: DeepKKLParams) -> np.ndarray:
    """Rows k = 0..m-1 of truncation weights, shape (m, ell - m + 1)."""
    horizon = params.truncation_length - params.order
    return np.vstack([series_weights(k, params.beta, horizon) for k in range(params.order)])


def truncated_injection(backward_outputs, params: DeepKKLParams) -> np.ndarray:
    """Truncated injection values from backward output histories.

    ``backward_outputs[..., j]`` must hold y at backward time -(j+1); at
    least ell entries are required.  Returns an (..., m) array with
    z[k] = sum_t w[k, t] * y[-(k+t+1)].  Sums are accumulated with
    compensated summation since the weights span many magnitudes.
    """
    ys = np.asarray(backward_outputs, dtype=float)
    squeeze = ys.ndim == 1
    if squeeze:
        ys = ys[None, :]
    m, ell = params.order, params.truncation_length
    if ys.shape[-1] < ell:
        raise ValueError(f"history of length {ys.shape[-1]} shorter than ell = {ell}")
    weights = weight_matrix(params)
    horizon = ell - m
    out = np.empty(ys.shape[:-1] + (m,))
    flat = ys.reshape(-1, ys.shape[-1])
    flat_out = out.reshape(-1, m)
    for i in range(flat.shape[0]):
        row = flat[i]
        for k in range(m):
            flat_out[i, k] = math.fsum(weights[k, t] * row[k + t] for t in range(horizon + 1))
    return out[0] if squeeze else out


def minimal_valid_truncation(order: int, beta: float) -> int:
    """Smallest ell making the truncation bound applicable (beta_tilde < 1)."""
    if order == 1:
        return 1
    return order + math.floor(beta * (order - 1) / (1.0 - beta)) + 1


def truncation_bound(params: DeepKKLParams, sup_output: float) -> float:
    """Upper bound on the truncation error of the injection series.

    Evaluates C(ell-1, m-1) * sqrt(m) * sup|h| * (1-beta)/(1-beta_tilde)
    * beta_tilde * beta^(ell-m) in the log domain, so the binomial factor
    cannot overflow for large ell.
    """
    if sup_output < 0:
        raise ValueError(f"sup|h| must be nonnegative, got {sup_output}")
    m, beta, ell = params.order, params.beta, params.truncation_length
    bt = params.beta_tilde
    if not bt < 1.0:
        raise ValueError(
            f"truncation bound needs beta*(1+(m-1)/(ell-m)) < 1; with m={m}, "
            f"beta={beta} the smallest valid ell is {minimal_valid_truncation(m, beta)}"
        )
    if sup_output == 0.0:
        return 0.0
    log_comb = math.lgamma(ell) - math.lgamma(m) - math.lgamma(ell - m + 1)
    log_value = (
        log_comb
        + 0.5 * math.log(m)
        + math.log(sup_output)
        + math.log1p(-beta)
        - math.log1p(-bt)
        + math.log(bt)
        + (ell - m) * math.log(beta)
    )
    return math.exp(log_value)


def _rotation_factor(beta: float, gamma: float) -> complex:
    return (1.0 - beta) / (np.exp(1j * gamma) - beta)


def analytic_injection(theta, beta: float, gamma: float) -> np.ndarray:
    """Closed-form order-2 injection for the circle rotation with y = 2 x1.

    Each component is a complex number plus its conjugate, hence real:
    z0 = 2 Re[w e^{i theta}] and z1 = 2 Re[w^2 e^{i theta}] with
    w = (1-beta)/(e^{i gamma} - beta).  beta = 0 is admitted here; it gives
    the pure one-step-delayed output 2 cos(theta - gamma).
    """
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"beta must lie in [0, 1), got {beta}")
    theta = np.asarray(theta, dtype=float)
    w = _rotation_factor(beta, gamma)
    phase = np.exp(1j * theta)
    return np.stack([2.0 * np.real(w * phase), 2.0 * np.real(w * w * phase)], axis=-1)


def analytic_pseudo_inverse(z, beta: float, gamma: float) -> np.ndarray:
    """Invert the analytic order-2 injection back to (cos theta, sin theta).

    Treats (e^{i theta}, e^{-i theta}) as independent unknowns of the 2x2
    complex linear system, solves it in closed form, and normalizes the
    recovered phase onto the unit circle.
    """
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != 2:
        raise ValueError(f"expected 2-component observer states, got shape {z.shape}")
    w = _rotation_factor(beta, gamma)
    wc = np.conj(w)
    # [[w, wc], [w^2, wc^2]] @ (u, v) = (z0, z1), u = e^{i theta}
    det = w * wc * wc - wc * w * w
    u = (wc * wc * z[..., 0] - wc * z[..., 1]) / det
    theta = np.angle(u)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def filter_states(matrices: ObserverMatrices, outputs, z_init=None) -> np.ndarray:
    """Iterate z+ = A z + b y over the output stream; returns z_0..z_T."""
    ys = np.asarray(outputs, dtype=float)
    if ys.ndim != 1:
        raise ValueError(f"outputs must be a 1-D stream, got shape {ys.shape}")
    m = matrices.order
    a, b = matrices.a, matrices.b
    z = np.zeros(m) if z_init is None else np.asarray(z_init, dtype=float).copy()
    if z.shape != (m,):
        raise ValueError(f"z_init must have shape ({m},), got {z.shape}")
    zs = np.empty((ys.shape[0] + 1, m))
    zs[0] = z
    for t, y in enumerate(ys):
        z = a @ z + b * y
        zs[t + 1] = z
    if not np.all(np.isfinite(zs)):
        raise DivergenceError("observer filter state diverged", state=zs)
    return zs


def run_observer(matrices: ObserverMatrices, pseudo_inverse, outputs, z_init=None) -> np.ndarray:
    """State estimates x_hat_t = pinv(z_t) for t = 0..T-1 along the stream.

    ``pseudo_inverse`` is either a fitted model with a ``predict`` method or
    a plain callable mapping a batch of observer states to state estimates.
    """
    ys = np.asarray(outputs, dtype=float)
    zs = filter_states(matrices, ys, z_init)[: ys.shape[0]]
    predict = getattr(pseudo_inverse, "predict", pseudo_inverse)
    estimates = np.asarray(predict(zs))
    if estimates.shape[0] != ys.shape[0]:
        raise ValueError(
            f"pseudo-inverse returned {estimates.shape[0]} estimates for {ys.shape[0]} steps"
        )
    return estimates

"""End-to-end observer synthesis for the three dataset regimes."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .dynamics import DiscreteSystem, LongOrbit, OrbitSet, SnapshotSet, trajectory
from .kernels import GaussianKernel, RadialKernel, WendlandKernel
from .observer import DeepKKLParams, build_matrices, run_observer, truncated_injection
from .regression import PseudoInverseModel, kernel_interpolate, krr_fit
from .spectral import (
    SnapshotMatrices,
    SpectralModel,
    build_snapshot_matrices,
    fit_spectral_model,
    spectral_injection,
)

__all__ = [
    "SynthesisConfig",
    "EvaluationReport",
    "algorithm1",
    "algorithm2",
    "algorithm3",
    "pseudo_inverse_from_spectral",
    "training_mse",
    "evaluate_observer",
]


@dataclass(frozen=True)
class SynthesisConfig:
    """Shared knobs of the synthesis pipelines.

    Defaults follow the Lorenz study: third-order observer with beta = 0.9,
    truncation length 50, Wendland(3, 1) state kernel and Gaussian observer
    kernel, both with bandwidth 10, and ridge 1e-4.
    """

    order: int = 3
    beta: float = 0.9
    truncation_length: int = 50
    x_kernel: RadialKernel = field(default_factory=lambda: WendlandKernel(bandwidth=10.0, dim=3, smoothness=1))
    z_kernel: RadialKernel = field(default_factory=lambda: GaussianKernel(bandwidth=10.0))
    krr_alpha: float = 1e-4
    spectral_p: int = 800
    residual_threshold: Optional[float] = None
    gram_ridge: Optional[float] = None
    decomposition_ridge: float = 1e-8
    workers: Optional[int] = None
    seed: int = 0

    @property
    def params(self) -> DeepKKLParams:
        return DeepKKLParams(self.order, self.beta, self.truncation_length)

    def with_updates(self, **changes) -> "SynthesisConfig":
        return replace(self, **changes)


def training_mse(model: PseudoInverseModel, injections, states) -> float:
    """Mean squared state error of the fitted pseudo-inverse on its sample."""
    pred = model.predict(np.asarray(injections))
    err = pred - np.asarray(states)
    return float(np.mean(np.sum(err * err, axis=1)))


def algorithm1(orbits: OrbitSet, output, config: SynthesisConfig) -> PseudoInverseModel:
    """Many-orbit synthesis: truncated injections, then ridge regression."""
    params = config.params
    if orbits.history_length < params.truncation_length:
        raise ValueError(
            f"orbit histories of length {orbits.history_length} are shorter than "
            f"the truncation length {params.truncation_length}"
        )
    injections = truncated_injection(orbits.backward_outputs(output), params)
    return krr_fit(injections, orbits.anchors, config.z_kernel, config.krr_alpha)


def algorithm1_injections(orbits: OrbitSet, output, config: SynthesisConfig) -> np.ndarray:
    return truncated_injection(orbits.backward_outputs(output), config.params)


def algorithm2(orbit: LongOrbit, output, config: SynthesisConfig) -> PseudoInverseModel:
    """Single-orbit synthesis.

    Interpolates the measurement map on the tail points of the orbit, reads
    the truncated injection directly off the orbit indices, and fits the
    pseudo-inverse on the tail samples.
    """
    model, _ = algorithm2_stages(orbit, output, config)
    return model


def algorithm2_stages(orbit: LongOrbit, output, config: SynthesisConfig):
    """As :func:`algorithm2`, also returning the measurement interpolant."""
    params = config.params
    ell = params.truncation_length
    n = orbit.n_states
    if n <= ell:
        raise ValueError(f"orbit of {n} states is too short for truncation length {ell}")
    states = orbit.states
    interp = kernel_interpolate(states[ell:], np.asarray(output(states[ell:])), config.x_kernel)
    h_hat = interp.predict(states)
    # backward output matrix for anchors j = ell..n-1: entry s is h_hat at x^(j-1-s)
    anchor_idx = np.arange(ell, n)
    back_idx = anchor_idx[:, None] - 1 - np.arange(ell)[None, :]
    injections = truncated_injection(h_hat[back_idx], params)
    model = krr_fit(injections, states[ell:], config.z_kernel, config.krr_alpha)
    return model, interp


def pseudo_inverse_from_spectral(
    spectral_model: SpectralModel,
    h_interpolant,
    states,
    config: SynthesisConfig,
):
    """Injections through a spectral model, then ridge regression.

    Returns (pseudo-inverse model, injection samples).
    """
    injections = spectral_injection(
        np.asarray(states), spectral_model, h_interpolant, config.params,
        decomposition_ridge=config.decomposition_ridge,
    )
    model = krr_fit(injections, states, config.z_kernel, config.krr_alpha)
    return model, injections


def algorithm3(
    snapshots: SnapshotSet,
    output,
    config: SynthesisConfig,
    matrices: Optional[SnapshotMatrices] = None,
) -> PseudoInverseModel:
    """Snapshot synthesis: spectral screening, decomposition, regression."""
    model, _, _ = algorithm3_stages(snapshots, output, config, matrices)
    return model


def algorithm3_stages(
    snapshots: SnapshotSet,
    output,
    config: SynthesisConfig,
    matrices: Optional[SnapshotMatrices] = None,
):
    """As :func:`algorithm3`, returning (model, spectral model, interpolant)."""
    if matrices is None:
        matrices = build_snapshot_matrices(snapshots, config.x_kernel)
    spectral_model = fit_spectral_model(
        snapshots,
        config.x_kernel,
        config.spectral_p,
        residual_threshold=config.residual_threshold,
        gram_ridge=config.gram_ridge,
        matrices=matrices,
        workers=config.workers,
    )
    interp = kernel_interpolate(snapshots.states, np.asarray(output(snapshots.states)), config.x_kernel)
    model, _ = pseudo_inverse_from_spectral(spectral_model, interp, snapshots.states, config)
    return model, spectral_model, interp


@dataclass
class EvaluationReport:
    """Closed-loop observation error against the state-variance baseline."""

    observation_mse: float
    state_variance: float
    settle_time: int
    n_steps: int
    states: np.ndarray = field(repr=False, default=None)
    estimates: np.ndarray = field(repr=False, default=None)

    @property
    def relative_mse(self) -> float:
        return self.observation_mse / self.state_variance


def evaluate_observer(
    system: DiscreteSystem,
    pseudo_inverse,
    matrices,
    test_init,
    n_steps: int,
    settle_time: int = 300,
    keep_trajectories: bool = True,
) -> EvaluationReport:
    """Run the observer on a fresh trajectory and report post-settle MSE.

    The filter starts from z = 0; the baseline is the mean squared
    deviation of the true states from their mean over the same window.
    """
    if n_steps <= settle_time:
        raise ValueError(f"need n_steps > settle_time, got {n_steps} <= {settle_time}")
    states = trajectory(system, np.asarray(test_init, dtype=float), n_steps - 1)
    ys = np.asarray(system.output(states))
    estimates = run_observer(matrices, pseudo_inverse, ys)
    err = np.sum((estimates[settle_time:] - states[settle_time:]) ** 2, axis=1)
    window = states[settle_time:]
    centered = window - window.mean(axis=0)
    return EvaluationReport(
        observation_mse=float(err.mean()),
        state_variance=float(np.sum(centered * centered, axis=1).mean()),
        settle_time=settle_time,
        n_steps=n_steps,
        states=states if keep_trajectories else None,
        estimates=estimates if keep_trajectories else None,
    )


def synthesize_observer(config: SynthesisConfig):
    """Observer matrices for a configuration (convenience wrapper)."""
    return build_matrices(config.params)

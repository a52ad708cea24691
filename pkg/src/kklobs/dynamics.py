"""Reference systems, fixed-step RK4 discretization, and dataset generation.

Systems are immutable maps acting on states of shape ``(d,)`` or batches
``(n, d)``.  Datasets come in three regimes: many short backward histories
(:class:`OrbitSet`), one long forward orbit (:class:`LongOrbit`), and
predecessor-successor pairs (:class:`SnapshotSet`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "DivergenceError",
    "DiscreteSystem",
    "OrbitSet",
    "LongOrbit",
    "SnapshotSet",
    "rk4_step",
    "discretize",
    "lorenz_field",
    "lorenz_system",
    "limit_cycle_system",
    "circle_rotation",
    "circle_state",
    "circle_angle",
    "trajectory",
    "generate_orbit_set",
    "generate_long_orbit",
    "generate_snapshots",
]


class DivergenceError(ArithmeticError):
    """Raised when integration produces a non-finite state."""

    def __init__(self, message, state=None, sample_index=None):
        super().__init__(message)
        self.state = state
        self.sample_index = sample_index


def _first_component(x):
    return np.asarray(x)[..., 0]


@dataclass(frozen=True)
class DiscreteSystem:
    """Discrete-time system x+ = f(x) with scalar measurement y = h(x)."""

    dim: int
    step: Callable[[np.ndarray], np.ndarray]
    output: Callable[[np.ndarray], np.ndarray] = _first_component
    inverse_step: Optional[Callable[[np.ndarray], np.ndarray]] = None
    dt: float = 1.0
    name: str = ""
    sample_box: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def has_inverse(self) -> bool:
        return self.inverse_step is not None


def rk4_step(field, x, h):
    """One classical Runge-Kutta step of size h for dx/dt = field(x)."""
    k1 = field(x)
    k2 = field(x + 0.5 * h * k1)
    k3 = field(x + 0.5 * h * k2)
    k4 = field(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_finite(x):
    if not np.all(np.isfinite(x)):
        bad = np.asarray(x)
        raise DivergenceError("integration produced a non-finite state", state=bad)


def discretize(
    vector_field,
    dt: float,
    substeps: int = 1,
    dim: int | None = None,
    output=_first_component,
    name: str = "",
    sample_box=None,
) -> DiscreteSystem:
    """Sample-and-hold discretization of a vector field by fixed-step RK4.

    The inverse map integrates the time-reversed field with the same
    integrator, so f_inv(f(x)) returns x up to integration error.
    """
    if dt <= 0:
        raise ValueError(f"sampling time must be positive, got {dt}")
    if substeps < 1:
        raise ValueError(f"substeps must be >= 1, got {substeps}")
    h = dt / substeps

    def step(x):
        x = np.asarray(x, dtype=float)
        for _ in range(substeps):
            x = rk4_step(vector_field, x, h)
        _check_finite(x)
        return x

    def inverse_step(x):
        x = np.asarray(x, dtype=float)
        for _ in range(substeps):
            x = rk4_step(lambda s: -vector_field(s), x, h)
        _check_finite(x)
        return x

    if dim is None:
        dim = np.atleast_1d(np.asarray(sample_box)).shape[0] if sample_box is not None else 1
    box = None if sample_box is None else np.asarray(sample_box, dtype=float)
    return DiscreteSystem(
        dim=dim, step=step, output=output, inverse_step=inverse_step,
        dt=dt, name=name, sample_box=box,
    )


def lorenz_field(x):
    """Velocity of the Lorenz system at the classical parameter values."""
    x = np.asarray(x, dtype=float)
    x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
    return np.stack(
        [10.0 * (x2 - x1), x1 * (28.0 - x3) - x2, x1 * x2 - (8.0 / 3.0) * x3],
        axis=-1,
    )


def lorenz_system() -> DiscreteSystem:
    """Chaotic Lorenz system sampled at dt = 0.01 with measurement y = x2."""

    def second_component(x):
        return np.asarray(x)[..., 1]

    return discretize(
        lorenz_field,
        dt=0.01,
        substeps=1,
        dim=3,
        output=second_component,
        name="lorenz",
        sample_box=np.array([[-15.0, 15.0]] * 3),
    )


def _double_first(x):
    return 2.0 * np.asarray(x)[..., 0]


def limit_cycle_system(alpha: float = 0.2, gamma: float = 0.25) -> DiscreteSystem:
    """Planar system attracted to the unit circle, rotating at rate gamma.

    Sampled at dt = 1 with 100 RK4 substeps; measurement y = 2 x1.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")

    def cycle_field(x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        radial = alpha * (1.0 - x1 * x1 - x2 * x2)
        return np.stack([radial * x1 - gamma * x2, radial * x2 + gamma * x1], axis=-1)

    return discretize(
        cycle_field,
        dt=1.0,
        substeps=100,
        dim=2,
        output=_double_first,
        name="limit_cycle",
        sample_box=np.array([[-1.5, 1.5]] * 2),
    )


def circle_state(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def circle_angle(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.arctan2(x[..., 1], x[..., 0])


def circle_rotation(gamma: float = 0.25) -> DiscreteSystem:
    """Exact rotation by gamma on the unit circle, with exact inverse.

    States are (cos theta, sin theta); the map works in angle coordinates,
    so iterates never drift off the circle.  Off-circle inputs are projected
    radially, which makes any burn-in land exactly on the invariant set.
    """

    def step(x):
        return circle_state(circle_angle(x) + gamma)

    def inverse_step(x):
        return circle_state(circle_angle(x) - gamma)

    return DiscreteSystem(
        dim=2,
        step=step,
        output=_double_first,
        inverse_step=inverse_step,
        dt=1.0,
        name="circle",
        sample_box=np.array([[-1.0, 1.0]] * 2),
    )


def trajectory(system: DiscreteSystem, x0, n_steps: int) -> np.ndarray:
    """States x0, f(x0), ..., f^n(x0) as an (n_steps + 1, d) array."""
    x0 = np.asarray(x0, dtype=float)
    out = np.empty((n_steps + 1,) + x0.shape)
    out[0] = x0
    x = x0
    for t in range(n_steps):
        x = system.step(x)
        out[t + 1] = x
    return out


@dataclass(frozen=True)
class OrbitSet:
    """n anchors with backward histories of length ell.

    ``states[i, j]`` is the state at offset ``-(ell - j)`` on orbit i, in
    forward time order, so the anchor of orbit i is ``states[i, -1]``.
    """

    states: np.ndarray

    def __post_init__(self):
        if self.states.ndim != 3:
            raise ValueError(f"OrbitSet states must be (n, ell+1, d), got {self.states.shape}")

    @property
    def n_orbits(self) -> int:
        return self.states.shape[0]

    @property
    def history_length(self) -> int:
        return self.states.shape[1] - 1

    @property
    def dim(self) -> int:
        return self.states.shape[2]

    @property
    def anchors(self) -> np.ndarray:
        return self.states[:, -1, :]

    def state_at_offset(self, t_offset: int) -> np.ndarray:
        """States x^(i, t_offset) for t_offset in -ell..0."""
        if not -self.history_length <= t_offset <= 0:
            raise ValueError(f"offset {t_offset} outside -{self.history_length}..0")
        return self.states[:, self.history_length + t_offset, :]

    def backward_outputs(self, output) -> np.ndarray:
        """Matrix Y with Y[i, j] = h(x^(i, -(j+1))), shape (n, ell)."""
        flat = output(self.states.reshape(-1, self.dim))
        ys = np.asarray(flat).reshape(self.n_orbits, self.history_length + 1)
        return ys[:, ::-1][:, 1:]


@dataclass(frozen=True)
class LongOrbit:
    """Consecutive states x^(0), ..., x^(n-1) of a single orbit."""

    states: np.ndarray

    def __post_init__(self):
        if self.states.ndim != 2:
            raise ValueError(f"LongOrbit states must be (n, d), got {self.states.shape}")

    @property
    def n_states(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]


@dataclass(frozen=True)
class SnapshotSet:
    """Successor-predecessor pairs (x^(i), f^{-1}(x^(i)))."""

    states: np.ndarray
    predecessors: np.ndarray

    def __post_init__(self):
        if self.states.shape != self.predecessors.shape or self.states.ndim != 2:
            raise ValueError(
                f"snapshot arrays must share an (n, d) shape, got "
                f"{self.states.shape} and {self.predecessors.shape}"
            )

    @property
    def n_pairs(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def subsample(self, n: int, seed: int = 0) -> "SnapshotSet":
        """Deterministic subsample of n pairs (without replacement)."""
        if n >= self.n_pairs:
            return self
        idx = np.sort(np.random.default_rng((seed, 0xC0FFEE)).choice(self.n_pairs, n, replace=False))
        return SnapshotSet(self.states[idx], self.predecessors[idx])


def _resolve_box(system, init_box):
    box = system.sample_box if init_box is None else np.asarray(init_box, dtype=float)
    if box is None:
        raise ValueError("no init box given and system declares no sample box")
    if box.shape != (system.dim, 2):
        raise ValueError(f"init box must be ({system.dim}, 2), got {box.shape}")
    return box


def _sample_inits(box, n, seed):
    """One uniform draw per sample from a stream keyed by (seed, index)."""
    inits = np.empty((n, box.shape[0]))
    for i in range(n):
        rng = np.random.default_rng((int(seed), i))
        inits[i] = rng.uniform(box[:, 0], box[:, 1])
    return inits


def _advance(system, x, n_steps, context=""):
    for _ in range(n_steps):
        try:
            x = system.step(x)
        except DivergenceError as err:
            idx = None
            if err.state is not None and np.asarray(err.state).ndim == 2:
                bad = ~np.all(np.isfinite(err.state), axis=1)
                idx = int(np.argmax(bad))
            raise DivergenceError(
                f"trajectory diverged{context}", state=err.state, sample_index=idx
            ) from None
    return x


def generate_orbit_set(
    system: DiscreteSystem,
    n_orbits: int,
    history_length: int,
    burn_in: int = 300,
    init_box=None,
    seed: int = 0,
) -> OrbitSet:
    """Sample n orbits: uniform init, burn-in, then ell+1 recorded states.

    The last recorded state of each orbit is its anchor; earlier recorded
    states form the backward history (forward simulation read backwards).
    """
    if n_orbits < 1 or history_length < 0:
        raise ValueError("need n_orbits >= 1 and history_length >= 0")
    box = _resolve_box(system, init_box)
    x = _sample_inits(box, n_orbits, seed)
    x = _advance(system, x, burn_in, context=" during burn-in")
    states = np.empty((n_orbits, history_length + 1, system.dim))
    states[:, 0] = x
    for j in range(history_length):
        x = _advance(system, x, 1, context=f" at record step {j + 1}")
        states[:, j + 1] = x
    return OrbitSet(states)


def generate_long_orbit(
    system: DiscreteSystem,
    n_states: int,
    init=None,
    burn_in: int = 300,
    init_box=None,
    seed: int = 0,
) -> LongOrbit:
    """A single orbit of exactly n_states states recorded after burn-in."""
    if n_states < 2:
        raise ValueError(f"need at least 2 states, got {n_states}")
    if init is None:
        box = _resolve_box(system, init_box)
        x = _sample_inits(box, 1, seed)[0]
    else:
        x = np.asarray(init, dtype=float)
    x = _advance(system, x, burn_in, context=" during burn-in")
    states = np.empty((n_states, system.dim))
    states[0] = x
    for t in range(1, n_states):
        x = _advance(system, x, 1, context=f" at state {t}")
        states[t] = x
    return LongOrbit(states)


def generate_snapshots(
    system: DiscreteSystem,
    n_orbits: int,
    steps_per_orbit: int,
    burn_in: int = 300,
    init_box=None,
    seed: int = 0,
) -> SnapshotSet:
    """steps_per_orbit successor-predecessor pairs from each of n_orbits orbits."""
    if n_orbits < 1 or steps_per_orbit < 1:
        raise ValueError("need n_orbits >= 1 and steps_per_orbit >= 1")
    box = _resolve_box(system, init_box)
    x = _sample_inits(box, n_orbits, seed)
    x = _advance(system, x, burn_in, context=" during burn-in")
    recorded = np.empty((steps_per_orbit + 1, n_orbits, system.dim))
    recorded[0] = x
    for t in range(steps_per_orbit):
        x = _advance(system, x, 1, context=f" at record step {t + 1}")
        recorded[t + 1] = x
    # orbit-major pair ordering: all pairs of orbit 0, then orbit 1, ...
    predecessors = recorded[:-1].transpose(1, 0, 2).reshape(-1, system.dim)
    states = recorded[1:].transpose(1, 0, 2).reshape(-1, system.dim)
    return SnapshotSet(states=states.copy(), predecessors=predecessors.copy())

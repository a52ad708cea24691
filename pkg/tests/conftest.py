import numpy as np
import pytest

from kklobs.dynamics import SnapshotSet, circle_rotation, circle_state
from kklobs.kernels import WendlandKernel


@pytest.fixture(scope="session")
def circle_snapshots():
    """200 evenly spread snapshot pairs of the gamma = 1/4 rotation."""
    gamma = 0.25
    thetas = np.linspace(0.0, 2.0 * np.pi, 200, endpoint=False)
    snaps = SnapshotSet(
        states=circle_state(thetas),
        predecessors=circle_state(thetas - gamma),
    )
    return {
        "gamma": gamma,
        "thetas": thetas,
        "snapshots": snaps,
        "system": circle_rotation(gamma),
        "kernel": WendlandKernel(bandwidth=1.0, dim=2, smoothness=1),
    }


def rigid_motion(rng, dim):
    """Random rotation + translation pair for radial-invariance checks."""
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    shift = rng.uniform(-2.0, 2.0, size=dim)
    return q, shift


def circle_backward_outputs(thetas, gamma, length):
    """Exact backward outputs y(-1)..y(-length) of the rotation, h = 2 x1."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    offsets = np.arange(1, length + 1)
    return 2.0 * np.cos(thetas[:, None] - offsets[None, :] * gamma)

import math

import numpy as np
import pytest

from kklobs.dynamics import (
    DivergenceError,
    LongOrbit,
    OrbitSet,
    SnapshotSet,
    circle_angle,
    circle_rotation,
    circle_state,
    discretize,
    generate_long_orbit,
    generate_orbit_set,
    generate_snapshots,
    limit_cycle_system,
    lorenz_field,
    lorenz_system,
    trajectory,
)


def identity_system(dim=1):
    return discretize(lambda x: np.zeros_like(x), dt=1.0, substeps=1, dim=dim,
                      sample_box=np.array([[-1.0, 1.0]] * dim))


class TestDiscretize:
    def test_zero_field_gives_identity(self):
        sys_ = identity_system(3)
        x = np.array([0.3, -1.0, 2.5])
        np.testing.assert_array_equal(sys_.step(x), x)

    def test_linear_field_matches_exponential(self):
        sys_ = discretize(lambda x: -x, dt=0.01, substeps=1, dim=2)
        x = np.array([1.0, -2.0])
        expected = math.exp(-0.01) * x
        rel = np.abs(sys_.step(x) - expected) / np.abs(expected)
        assert rel.max() < 1e-8

    def test_inverse_round_trip_on_lorenz(self):
        sys_ = lorenz_system()
        x = np.array([5.0, 5.0, 5.0])
        back = sys_.inverse_step(sys_.step(x))
        assert np.linalg.norm(back - x) < 1e-6 * (1.0 + np.linalg.norm(x))

    def test_round_trip_on_attractor_states(self):
        sys_ = lorenz_system()
        pts = trajectory(sys_, np.array([5.0, 5.0, 5.0]), 500)[300:]
        allowance = 1e-6 * (1.0 + np.linalg.norm(pts, axis=1))
        back = sys_.inverse_step(sys_.step(pts))
        assert np.all(np.linalg.norm(back - pts, axis=1) <= allowance)
        forth = sys_.step(sys_.inverse_step(pts))
        assert np.all(np.linalg.norm(forth - pts, axis=1) <= allowance)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            discretize(lambda x: x, dt=0.0)
        with pytest.raises(ValueError):
            discretize(lambda x: x, dt=1.0, substeps=0)

    def test_divergence_raises(self):
        sys_ = discretize(lambda x: x**3, dt=1.0, substeps=1, dim=1)
        with pytest.raises(DivergenceError):
            trajectory(sys_, np.array([10.0]), 10)


class TestLorenz:
    def test_origin_is_equilibrium(self):
        sys_ = lorenz_system()
        np.testing.assert_array_equal(sys_.step(np.zeros(3)), np.zeros(3))

    def test_field_hand_values(self):
        np.testing.assert_allclose(
            lorenz_field(np.array([5.0, 5.0, 5.0])),
            [0.0, 110.0, 25.0 - 40.0 / 3.0],
            rtol=1e-15,
        )

    def test_measurement_is_second_component(self):
        sys_ = lorenz_system()
        assert sys_.output(np.array([1.0, 2.0, 3.0])) == 2.0

    def test_long_run_stays_bounded(self):
        sys_ = lorenz_system()
        x = np.array([5.0, 5.0, 5.0])
        sup = 0.0
        for _ in range(100_000):
            x = sys_.step(x)
            sup = max(sup, np.abs(x).max())
        assert sup < 100.0


class TestCircleAndLimitCycle:
    def test_rotation_step(self):
        sys_ = circle_rotation(0.25)
        out = sys_.step(np.array([1.0, 0.0]))
        np.testing.assert_allclose(out, [math.cos(0.25), math.sin(0.25)], atol=1e-15)

    def test_rotation_exact_inverse(self):
        sys_ = circle_rotation(0.25)
        x = circle_state(1.234)
        np.testing.assert_allclose(sys_.inverse_step(sys_.step(x)), x, atol=1e-15)

    def test_rotation_preserves_unit_norm(self):
        sys_ = circle_rotation(0.3)
        x = circle_state(0.1)
        for _ in range(1000):
            x = sys_.step(x)
            assert abs(x @ x - 1.0) < 1e-15

    def test_output_at_angle_zero(self):
        assert circle_rotation(0.25).output(circle_state(0.0)) == 2.0

    def test_limit_cycle_invariant_on_circle(self):
        sys_ = limit_cycle_system(alpha=0.2, gamma=0.25)
        x = circle_state(0.7)
        stepped = sys_.step(x)
        assert abs(stepped @ stepped - 1.0) < 1e-8

    def test_limit_cycle_rotates_at_gamma(self):
        sys_ = limit_cycle_system(alpha=0.2, gamma=0.25)
        x = circle_state(0.0)
        stepped = sys_.step(x)
        assert circle_angle(stepped) == pytest.approx(0.25, abs=1e-9)

    def test_limit_cycle_attracts(self):
        sys_ = limit_cycle_system(alpha=0.2, gamma=0.25)
        states = trajectory(sys_, np.array([0.2, 0.1]), 60)
        radius = np.linalg.norm(states[-1])
        assert abs(radius - 1.0) < 1e-3

    def test_alpha_must_be_positive(self):
        with pytest.raises(ValueError):
            limit_cycle_system(alpha=0.0)


class TestOrbitSet:
    def test_single_anchor_no_history(self):
        orbits = generate_orbit_set(identity_system(), 1, 0, burn_in=0, seed=1)
        assert orbits.states.shape == (1, 1, 1)
        np.testing.assert_array_equal(orbits.anchors, orbits.states[:, 0])

    def test_identity_history_equals_anchor(self):
        orbits = generate_orbit_set(identity_system(2), 4, 5, burn_in=3, seed=2)
        for j in range(6):
            np.testing.assert_array_equal(orbits.states[:, j], orbits.anchors)

    def test_histories_are_consecutive_under_f(self):
        sys_ = lorenz_system()
        orbits = generate_orbit_set(sys_, 5, 10, burn_in=50, seed=3)
        resim = orbits.states[:, 0]
        for j in range(1, 11):
            resim = sys_.step(resim)
            np.testing.assert_array_equal(resim, orbits.states[:, j])

    def test_backward_outputs_ordering(self):
        sys_ = circle_rotation(0.25)
        orbits = generate_orbit_set(sys_, 3, 4, burn_in=2, seed=4)
        ys = orbits.backward_outputs(sys_.output)
        assert ys.shape == (3, 4)
        for j in range(4):
            np.testing.assert_array_equal(ys[:, j], sys_.output(orbits.state_at_offset(-(j + 1))))

    def test_deterministic_given_seed(self):
        a = generate_orbit_set(lorenz_system(), 6, 8, burn_in=20, seed=9)
        b = generate_orbit_set(lorenz_system(), 6, 8, burn_in=20, seed=9)
        np.testing.assert_array_equal(a.states, b.states)
        c = generate_orbit_set(lorenz_system(), 6, 8, burn_in=20, seed=10)
        assert not np.array_equal(a.states, c.states)

    def test_lorenz_shape_matches_requested_sizes(self):
        orbits = generate_orbit_set(lorenz_system(), 12, 7, burn_in=30, seed=0)
        assert orbits.states.shape == (12, 8, 3)
        assert orbits.history_length == 7
        assert orbits.n_orbits == 12


class TestLongOrbitAndSnapshots:
    def test_circle_orbit_states(self):
        gamma = 0.25
        orbit = generate_long_orbit(circle_rotation(gamma), 3, init=circle_state(0.0), burn_in=0)
        expected = circle_state(np.array([0.0, gamma, 2 * gamma]))
        np.testing.assert_allclose(orbit.states, expected, atol=1e-15)

    def test_needs_two_states(self):
        with pytest.raises(ValueError):
            generate_long_orbit(circle_rotation(0.25), 1, init=circle_state(0.0))

    def test_burn_in_applied(self):
        sys_ = lorenz_system()
        orbit = generate_long_orbit(sys_, 5, init=np.array([5.0, 5.0, 5.0]), burn_in=10)
        expected = trajectory(sys_, np.array([5.0, 5.0, 5.0]), 14)[10:]
        np.testing.assert_array_equal(orbit.states, expected)

    def test_snapshot_pair_count(self):
        snaps = generate_snapshots(circle_rotation(0.25), 250, 20, burn_in=1, seed=0)
        assert snaps.n_pairs == 5000

    def test_snapshots_are_consecutive(self):
        sys_ = lorenz_system()
        snaps = generate_snapshots(sys_, 5, 4, burn_in=20, seed=5)
        assert snaps.n_pairs == 20
        np.testing.assert_array_equal(sys_.step(snaps.predecessors), snaps.states)

    def test_snapshot_subsample(self):
        snaps = generate_snapshots(lorenz_system(), 5, 4, burn_in=20, seed=5)
        sub = snaps.subsample(8, seed=1)
        assert sub.n_pairs == 8
        np.testing.assert_array_equal(sub.subsample(20).states, sub.states)
        np.testing.assert_array_equal(lorenz_system().step(sub.predecessors), sub.states)

    def test_divergence_reports_sample_index(self):
        sys_ = discretize(lambda x: x**3, dt=1.0, substeps=1, dim=1,
                          sample_box=np.array([[5.0, 6.0]]))
        with pytest.raises(DivergenceError):
            generate_orbit_set(sys_, 3, 4, burn_in=2, seed=0)


class TestDatasetContainers:
    def test_orbit_set_validates_shape(self):
        with pytest.raises(ValueError):
            OrbitSet(np.zeros((3, 4)))

    def test_long_orbit_validates_shape(self):
        with pytest.raises(ValueError):
            LongOrbit(np.zeros((3, 4, 5)))

    def test_snapshot_validates_shapes(self):
        with pytest.raises(ValueError):
            SnapshotSet(np.zeros((3, 2)), np.zeros((4, 2)))

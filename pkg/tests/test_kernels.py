import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gamma as gamma_fn, kv

from kklobs.kernels import (
    GaussianKernel,
    MaternKernel,
    WendlandKernel,
    gram,
    kernel_from_spec,
    wendland_profile,
)

from conftest import rigid_motion


def quadrature_profile(dim, k):
    """Independent oracle: repeated numeric quadrature of I phi(r) = int_r^1 s phi(s) ds."""
    ell = dim // 2 + k + 1

    def base(r):
        return max(1.0 - r, 0.0) ** ell

    f = base
    for _ in range(k):
        prev = f
        f = lambda r, prev=prev: quad(lambda s: s * prev(s), r, 1.0, limit=200)[0] if r < 1.0 else 0.0
    norm = f(0.0)
    return lambda r: f(r) / norm


class TestWendlandProfile:
    @pytest.mark.parametrize("dim,k", [(1, 0), (1, 1), (2, 1), (3, 0), (3, 1), (3, 2), (3, 3)])
    def test_closed_form_matches_quadrature(self, dim, k):
        oracle = quadrature_profile(dim, k)
        prof = wendland_profile(dim, k)
        radii = np.linspace(0.0, 1.0, 100)
        errs = [abs(prof(r) - oracle(r)) for r in radii]
        assert max(errs) < 1e-8

    def test_low_order_closed_forms(self):
        radii = np.linspace(0.0, 1.0, 50)
        np.testing.assert_allclose(wendland_profile(3, 0)(radii), (1 - radii) ** 2, atol=1e-14)
        np.testing.assert_allclose(wendland_profile(1, 0)(radii), 1 - radii, atol=1e-14)
        np.testing.assert_allclose(
            wendland_profile(3, 1)(radii), (1 - radii) ** 4 * (4 * radii + 1), atol=1e-14
        )

    def test_value_at_half_radius(self):
        # frozen from the quadrature oracle: normalized I^1 profile at r = 0.5
        assert wendland_profile(3, 1)(0.5) == pytest.approx(0.1875, abs=1e-12)

    def test_normalized_at_zero(self):
        for dim, k in [(1, 2), (2, 0), (3, 1), (5, 3)]:
            assert wendland_profile(dim, k)(0.0) == 1.0

    def test_unsupported_order_rejected(self):
        with pytest.raises(ValueError, match="[Uu]nsupported"):
            wendland_profile(3, 4)


class TestEval:
    def test_wendland_at_zero_distance(self):
        kern = WendlandKernel(bandwidth=1.0, dim=3, smoothness=1)
        x = np.array([0.3, -0.2, 1.0])
        assert kern(x, x) == 1.0

    def test_wendland_compact_support(self):
        kern = WendlandKernel(bandwidth=1.0, dim=3, smoothness=1)
        assert kern(np.zeros(3), np.array([1.5, 0.0, 0.0])) == 0.0
        assert kern(np.zeros(3), np.array([1.0, 0.0, 0.0])) == 0.0
        assert kern(np.zeros(3), np.array([0.999, 0.0, 0.0])) > 0.0

    def test_wendland_value_inside_support(self):
        kern = WendlandKernel(bandwidth=1.0, dim=3, smoothness=1)
        value = kern(np.zeros(3), np.array([0.5, 0.0, 0.0]))
        assert value == pytest.approx(0.1875, abs=1e-12)

    def test_gaussian_definition(self):
        kern = GaussianKernel(bandwidth=10.0)
        value = kern(np.zeros(3), np.array([10.0, 0.0, 0.0]))
        assert value == pytest.approx(math.exp(-1.0), rel=1e-14)

    def test_bandwidth_rescales_distance(self):
        base = WendlandKernel(bandwidth=1.0, dim=2, smoothness=1)
        scaled = base.with_bandwidth(4.0)
        x, y = np.zeros(2), np.array([2.0, 0.0])
        assert scaled(x, y) == pytest.approx(base(x, y / 4.0), abs=1e-15)

    def test_dimension_mismatch_rejected(self):
        kern = WendlandKernel(bandwidth=1.0, dim=3, smoothness=1)
        with pytest.raises(ValueError):
            kern(np.zeros(2), np.ones(2))
        with pytest.raises(ValueError):
            kern(np.zeros(3), np.ones(2))

    def test_radial_invariance_under_rigid_motions(self):
        rng = np.random.default_rng(7)
        kernels = [
            WendlandKernel(bandwidth=2.0, dim=3, smoothness=1),
            GaussianKernel(bandwidth=1.5),
            MaternKernel(bandwidth=0.8, order=1.5),
        ]
        for kern in kernels:
            for _ in range(20):
                x = rng.uniform(-1, 1, size=3)
                y = rng.uniform(-1, 1, size=3)
                q, shift = rigid_motion(rng, 3)
                moved = kern(q @ x + shift, q @ y + shift)
                assert moved == pytest.approx(kern(x, y), abs=1e-12)


class TestMatern:
    @pytest.mark.parametrize("order", [0.5, 1.5, 2.5])
    def test_closed_form_matches_bessel(self, order):
        # reference: 2^(1-nu)/Gamma(nu) (sqrt(2 nu) r)^nu K_nu(sqrt(2 nu) r)
        kern = MaternKernel(bandwidth=1.0, order=order)
        for r in [0.05, 0.2, 0.7, 1.3, 3.0]:
            s = math.sqrt(2.0 * order) * r
            reference = 2.0 ** (1.0 - order) / gamma_fn(order) * s**order * kv(order, s)
            assert kern.profile(r) == pytest.approx(reference, rel=1e-10)

    def test_normalized_at_zero(self):
        for order in (0.5, 1.5, 2.5):
            assert MaternKernel(bandwidth=2.0, order=order).profile(0.0) == 1.0

    def test_unsupported_order_rejected(self):
        with pytest.raises(ValueError, match="unsupported"):
            MaternKernel(bandwidth=1.0, order=2.0)


class TestGram:
    def test_single_point(self):
        g = gram(GaussianKernel(bandwidth=1.0), np.array([[0.3, 0.4]]))
        np.testing.assert_array_equal(g, [[1.0]])

    def test_two_identical_points(self):
        g = gram(GaussianKernel(bandwidth=1.0), np.array([[1.0, 2.0], [1.0, 2.0]]))
        np.testing.assert_array_equal(g, [[1.0, 1.0], [1.0, 1.0]])
        eigs = np.sort(np.linalg.eigvalsh(g))
        np.testing.assert_allclose(eigs, [0.0, 2.0], atol=1e-14)

    @pytest.mark.parametrize(
        "kern",
        [
            WendlandKernel(bandwidth=2.0, dim=3, smoothness=1),
            WendlandKernel(bandwidth=0.7, dim=3, smoothness=2),
            GaussianKernel(bandwidth=0.5),
            MaternKernel(bandwidth=1.0, order=2.5),
        ],
    )
    def test_self_gram_symmetric_psd(self, kern):
        rng = np.random.default_rng(11)
        pts = rng.uniform(-1, 1, size=(50, 3))
        g = gram(kern, pts)
        np.testing.assert_array_equal(g, g.T)
        np.testing.assert_array_equal(np.diag(g), np.ones(50))
        eigs = np.linalg.eigvalsh(g)
        assert eigs.min() >= -1e-8 * eigs.max()

    def test_cross_gram_matches_eval(self):
        rng = np.random.default_rng(3)
        kern = WendlandKernel(bandwidth=2.0, dim=3, smoothness=1)
        xs = rng.uniform(-1, 1, size=(4, 3))
        ys = rng.uniform(-1, 1, size=(6, 3))
        g = gram(kern, xs, ys)
        for i in range(4):
            for j in range(6):
                assert g[i, j] == pytest.approx(kern(xs[i], ys[j]), abs=1e-15)

    def test_empty_points_rejected(self):
        with pytest.raises(ValueError):
            gram(GaussianKernel(bandwidth=1.0), np.empty((0, 3)))

    def test_dimension_mismatch_rejected(self):
        kern = GaussianKernel(bandwidth=1.0)
        with pytest.raises(ValueError):
            gram(kern, np.zeros((3, 2)), np.zeros((3, 4)))


class TestSpecStrings:
    @pytest.mark.parametrize(
        "kern",
        [
            WendlandKernel(bandwidth=10.0, dim=3, smoothness=1),
            MaternKernel(bandwidth=2.5, order=1.5),
            GaussianKernel(bandwidth=0.125),
        ],
    )
    def test_round_trip(self, kern):
        assert kernel_from_spec(kern.spec_string()) == kern

    def test_rejects_malformed(self):
        for bad in ["wendland", "wendland(3,1)", "cubic(sigma=1)", "gaussian(2,sigma=1)"]:
            with pytest.raises(ValueError):
                kernel_from_spec(bad)

    def test_invalid_bandwidth_rejected(self):
        with pytest.raises(ValueError):
            GaussianKernel(bandwidth=0.0)

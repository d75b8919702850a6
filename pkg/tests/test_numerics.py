from math import gamma, pi, sqrt

import numpy as np
import pytest
from scipy import integrate

from starlab.numerics import (
    RngStream,
    as_generator,
    circle_angles,
    exponential_volume_constant,
    gamma_ratio,
    gaussian_neg_moment,
    log_unit_ball_volume,
    nt_constants,
    sample_positive_stable,
    sample_tilted_weight,
    sphere_quadrature,
    stable_neg_moment,
    uniform_sphere,
    unit_ball_volume,
)


class TestRngStream:
    def test_replay(self):
        a = RngStream(7, 3).generator().random(5)
        b = RngStream(7, 3).generator().random(5)
        np.testing.assert_array_equal(a, b)

    def test_streams_differ(self):
        a = RngStream(7, 3).generator().random(5)
        b = RngStream(7, 4).generator().random(5)
        c = RngStream(8, 3).generator().random(5)
        assert not np.allclose(a, b)
        assert not np.allclose(a, c)

    def test_children_are_distinct_and_stable(self):
        s = RngStream(1)
        x = s.child(0).generator().random(3)
        y = s.child(1).generator().random(3)
        assert not np.allclose(x, y)
        np.testing.assert_array_equal(x, RngStream(1, 0, (0,)).generator().random(3))

    def test_validation(self):
        with pytest.raises(ValueError):
            RngStream(-1)
        with pytest.raises(ValueError):
            RngStream(2**64)
        with pytest.raises(ValueError):
            RngStream(1, -2)

    def test_as_generator(self):
        g = np.random.default_rng(0)
        assert as_generator(g) is g
        assert isinstance(as_generator(5), np.random.Generator)
        with pytest.raises(TypeError):
            as_generator("seed")


class TestConstants:
    @pytest.mark.parametrize("n,expected", [(1, 2.0), (2, pi), (3, 4 * pi / 3)])
    def test_unit_ball_volume(self, n, expected):
        assert unit_ball_volume(n) == pytest.approx(expected, rel=1e-14)
        assert np.exp(log_unit_ball_volume(n)) == pytest.approx(expected, rel=1e-14)

    @pytest.mark.parametrize("n", [0, -1, 2.5])
    def test_unit_ball_volume_rejects(self, n):
        with pytest.raises(ValueError):
            unit_ball_volume(n)

    def test_gaussian_neg_moment_values(self):
        assert gaussian_neg_moment(2, 1) == pytest.approx(sqrt(pi / 2), rel=1e-14)
        assert gaussian_neg_moment(2, 1e-9) == pytest.approx(1.0, rel=1e-8)

    def test_gaussian_neg_moment_matches_integral(self):
        # E||xi||^-s with ||xi|| chi-distributed
        for n, s in [(3, 1.0), (4, 2.5), (2, 1.5)]:
            dens = lambda r: r ** (n - 1) * np.exp(-r * r / 2) / (2 ** (n / 2 - 1) * gamma(n / 2))  # noqa: E731
            val = integrate.quad(lambda r: r**-s * dens(r), 0, np.inf)[0]
            assert gaussian_neg_moment(n, s) == pytest.approx(val, rel=1e-8)

    @pytest.mark.parametrize("s", [0.0, 2.0, 3.0, -1.0])
    def test_gaussian_neg_moment_range(self, s):
        with pytest.raises(ValueError):
            gaussian_neg_moment(2, s)

    def test_nt_constants_identity(self):
        for N in (1, 3, 10, 200):
            for n in (1, 2, 3):
                for p in (0.3, 0.5, 1.0, 1.5, 1.9):
                    c = nt_constants(N, n, p)
                    assert c.a_Nnp == pytest.approx(c.c_np * c.d_p**N, rel=1e-12)
                    assert np.exp(c.log_a_Nnp) == pytest.approx(c.a_Nnp, rel=1e-12)

    def test_nt_constants_values(self):
        assert nt_constants(1, 2, 1.999999999).c_np == pytest.approx(1.0, rel=1e-8)
        assert nt_constants(1, 1, 1.0).a_Nnp == pytest.approx(2 / sqrt(pi), rel=1e-14)
        assert nt_constants(1, 1, 1.0).c_np == pytest.approx(1.0)

    def test_d_p_mixture_identity(self):
        # exp(-|x|^p) = d_p E_tilt[sqrt(w) exp(-w x^2)]; with the tilt written out,
        # E_tilt[sqrt(w) exp(-w x^2)] = exp(-|x|^p) / E[w^-1/2], so d_p = E[w^-1/2]
        for p in (0.5, 1.0, 1.5):
            assert nt_constants(1, 1, p).d_p == pytest.approx(stable_neg_moment(p / 2, 0.5), rel=1e-12)
            # integrating the identity over R gives 2 Gamma(1+1/p) = d_p sqrt(pi)
            assert nt_constants(1, 1, p).d_p * sqrt(pi) == pytest.approx(2 * gamma(1 + 1 / p), rel=1e-12)

    def test_d_p_identity_by_sampling(self):
        p = 1.0
        d = sample_tilted_weight(p, RngStream(11), 400_000)
        for x in (0.3, 1.0, 2.0):
            vals = np.sqrt(d.w) * np.exp(-d.w * x * x)
            est = nt_constants(1, 1, p).d_p * d.expectation(vals)
            assert est == pytest.approx(np.exp(-abs(x) ** p), rel=0.03)

    @pytest.mark.parametrize("p", [0.0, 2.0, -0.5])
    def test_nt_constants_range(self, p):
        with pytest.raises(ValueError):
            nt_constants(1, 1, p)

    def test_exponential_volume_constant(self):
        # |B_2^2| = c_{2,2} * integral of exp(-|x|^2) = 1 * pi
        assert exponential_volume_constant(2, 2.0) == pytest.approx(1.0)
        with pytest.raises(ValueError):
            exponential_volume_constant(2, 0.0)

    def test_gamma_ratio(self):
        assert gamma_ratio(5.0, 3.0) == pytest.approx(12.0)


class TestStable:
    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.75])
    def test_laplace_transform(self, alpha):
        w = sample_positive_stable(alpha, RngStream(3, 1), 200_000)
        assert np.all(w > 0)
        for t in (0.25, 1.0, 4.0):
            x = np.exp(-t * w)
            se = x.std() / np.sqrt(x.size)
            assert abs(x.mean() - np.exp(-(t**alpha))) < 4 * se

    def test_half_stable_is_levy(self):
        # W = 1 / (4 G) with G ~ Gamma(1/2); compare medians
        w = sample_positive_stable(0.5, RngStream(4), 200_000)
        from scipy import stats

        ref = 1.0 / (4.0 * stats.gamma(0.5).ppf(0.5))
        assert np.median(w) == pytest.approx(ref, rel=0.02)

    @pytest.mark.parametrize("alpha", [0.0, 1.0, 1.5])
    def test_rejects(self, alpha):
        with pytest.raises(ValueError):
            sample_positive_stable(alpha, RngStream(0), 3)

    def test_tilted_weights(self):
        d = sample_tilted_weight(1.0, RngStream(5), 100_000)
        assert np.all(d.w > 0) and np.all(d.importance_weight > 0)
        assert d.expectation(np.ones_like(d.w)) == pytest.approx(1.0, abs=1e-12)
        # analytic normalisation: mean weight is 1
        se = d.importance_weight.std() / np.sqrt(d.w.size)
        assert abs(d.importance_weight.mean() - 1.0) < 4 * se

    def test_tilted_rejects(self):
        with pytest.raises(ValueError):
            sample_tilted_weight(2.0, RngStream(0), 3)
        with pytest.raises(ValueError):
            sample_tilted_weight(0.0, RngStream(0), 3)

    def test_deterministic_replay(self):
        a = sample_positive_stable(0.5, RngStream(9, 2), 10)
        b = sample_positive_stable(0.5, RngStream(9, 2), 10)
        np.testing.assert_array_equal(a, b)


class TestSphere:
    def test_uniform_sphere(self):
        x = uniform_sphere(3, 1000, RngStream(1))
        np.testing.assert_allclose(np.linalg.norm(x, axis=1), 1.0, atol=1e-12)

    @pytest.mark.parametrize("n,res", [(2, 8), (2, 64), (3, 8), (3, 24)])
    def test_deterministic_grid(self, n, res):
        g = sphere_quadrature(n, res)
        assert g.deterministic
        assert g.weights.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(np.linalg.norm(g.nodes, axis=1), 1.0, atol=1e-12)
        assert g.integrate(np.ones(len(g))) == pytest.approx(1.0, abs=1e-12)
        assert g.integrate(g.nodes[:, 0] ** 2) == pytest.approx(1.0 / n, abs=1e-12)

    def test_circle_exact_for_trig_polynomials(self):
        R = 16
        g = sphere_quadrature(2, R)
        th = circle_angles(R)
        for k in range(1, R):
            assert abs(g.integrate(np.cos(k * th))) < 1e-12

    def test_disc_radial_square(self):
        g = sphere_quadrature(2, 32)
        assert g.integrate(np.ones(len(g)) ** 2) == pytest.approx(1.0)

    def test_s2_polynomial_exactness(self):
        g = sphere_quadrature(3, 12)
        z = g.nodes[:, 2]
        assert g.integrate(z**4) == pytest.approx(1 / 5, abs=1e-12)
        assert g.integrate(g.nodes[:, 0] ** 2 * g.nodes[:, 1] ** 2) == pytest.approx(1 / 15, abs=1e-12)

    def test_monte_carlo_grid(self):
        g = sphere_quadrature(5, 4000, rng=RngStream(2))
        assert not g.deterministic
        assert g.integrate(g.nodes[:, 0] ** 2) == pytest.approx(0.2, abs=0.02)
        with pytest.raises(ValueError):
            sphere_quadrature(4, 100)

    @pytest.mark.parametrize("n,res,mode", [(1, 16, "deterministic"), (2, 4, "deterministic"), (2, 16, "bogus")])
    def test_rejects(self, n, res, mode):
        with pytest.raises(ValueError):
            sphere_quadrature(n, res, mode)

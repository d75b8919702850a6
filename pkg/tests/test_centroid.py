from math import gamma, pi, sqrt

import numpy as np
import pytest
from scipy.special import beta

from starlab.bodies import BlockSampleMatrix, cm_alpha, cube, euclidean_ball, sample_block_matrix, segment
from starlab.centroid import (
    classical_centroid_support,
    dual_centroid_body,
    dual_centroid_radial,
    empirical_dual_centroid,
    empirical_intersection_sums,
    empirical_lp_intersection,
    empirical_sphere_sums,
    intersection_radial,
    lp_intersection_radial,
    marginal_moment,
    resolve_centroid_method,
    sample_blocks,
)
from starlab.densities import Gaussian, UniformAnnulus, UniformBall, UniformCube, marginal_1d
from starlab.numerics import sphere_quadrature

DISC = UniformBall(2, 1.0)
SQUARE = UniformCube(2, 1.0)


def _ball_abs_moment(n, p):
    """E|<x,u>|^p for x uniform in B_2^n."""
    # marginal density c (1 - t^2)^((n-1)/2) on [-1, 1]
    return beta((p + 1) / 2, (n + 1) / 2) / beta(0.5, (n + 1) / 2)


class TestExactRadial:
    def test_disc_p1(self):
        rv = dual_centroid_radial(DISC, segment(), 1.0, [1.0, 0.0])
        assert rv.values[0] == pytest.approx(3 * pi / 4, rel=1e-10)
        assert rv.method == "quadrature"

    @pytest.mark.parametrize("p", [-0.75, -0.5, 0.25, 0.5, 2.0, 3.0])
    @pytest.mark.parametrize("n", [2, 3])
    def test_ball_moments(self, n, p):
        u = np.eye(n)[0]
        rv = dual_centroid_radial(UniformBall(n, 1.0), segment(), p, u)
        assert rv.values[0] == pytest.approx(_ball_abs_moment(n, p) ** (-1 / p), rel=1e-8)

    def test_p0_against_monte_carlo(self, stream):
        exact = dual_centroid_radial(SQUARE, segment(), 0.0, [0.6, 0.8]).values[0]
        mc = dual_centroid_radial(SQUARE, segment(), 0.0, [0.6, 0.8], budget=400_000, rng=stream, method="monte_carlo")
        assert abs(mc.values[0] - exact) < 4 * mc.stderr[0]

    def test_homogeneity(self):
        a = dual_centroid_radial(SQUARE, segment(), 0.5, [[0.3, 0.4], [0.6, 0.8]]).values
        assert a[0] == pytest.approx(2 * a[1])

    def test_tensor_matches_quadrature_for_interval(self):
        u = np.array([[1.0, 0.0], [0.6, 0.8]])
        q = dual_centroid_radial(SQUARE, segment(), 0.5, u, method="quadrature").values
        t = dual_centroid_radial(SQUARE, segment(), 0.5, u, method="tensor", nodes=64).values
        np.testing.assert_allclose(t, q, rtol=1e-4)

    def test_tensor_cube_body_against_monte_carlo(self, stream):
        C = cube(2)
        u = np.array([0.6, 0.8])
        t = dual_centroid_radial(SQUARE, C, 0.5, u).values[0]
        mc = dual_centroid_radial(SQUARE, C, 0.5, u, budget=400_000, rng=stream, method="monte_carlo")
        assert abs(mc.values[0] - t) < 4 * mc.stderr[0]

    def test_rotation_invariant_shortcut(self):
        U = np.array([[1.0, 0.0], [0.0, 1.0], [0.6, -0.8]])
        ann = UniformAnnulus(2, 0.5, 1.0)
        vals = dual_centroid_radial(ann, segment(), 0.5, U).values
        np.testing.assert_allclose(vals, vals[0], rtol=1e-12)

    def test_method_resolution(self):
        assert resolve_centroid_method(SQUARE, segment(), 0.5) == "quadrature"
        assert resolve_centroid_method(SQUARE, cube(2), 0.5) == "tensor"
        assert resolve_centroid_method(SQUARE, cube(2), -0.5) == "monte_carlo"
        assert resolve_centroid_method(SQUARE, cube(4), 0.5) == "monte_carlo"
        assert resolve_centroid_method(SQUARE, cube(2), 0.5, "monte_carlo") == "monte_carlo"

    def test_errors(self):
        with pytest.raises(ValueError):
            dual_centroid_radial(DISC, segment(), -1.5, [1.0, 0.0])
        with pytest.raises(ValueError):
            dual_centroid_radial(DISC, segment(), 0.5, [0.0, 0.0])
        with pytest.raises(ValueError):
            dual_centroid_radial(DISC, segment(), 0.5, [1.0, 0.0, 0.0])
        with pytest.raises(ValueError):
            dual_centroid_radial(DISC, cube(2), 0.5, [1.0, 0.0], method="quadrature")
        with pytest.raises(ValueError):
            dual_centroid_radial(DISC, cube(2), -0.5, [1.0, 0.0], method="tensor")
        with pytest.raises(ValueError, match="random stream"):
            dual_centroid_radial(DISC, cube(2), 0.5, [1.0, 0.0], method="monte_carlo")

    def test_marginal_moment_divergence(self):
        m = marginal_1d(DISC, [1.0, 0.0])
        assert marginal_moment(m, -1.0) == np.inf
        assert marginal_moment(m, 0.0) == pytest.approx(np.log(0.5) - 0.5, rel=1e-8)

    def test_gaussian_moment(self):
        g = Gaussian(2, 1.0)
        m = marginal_1d(g, [1.0, 0.0])
        expected = 2 ** 0.25 * gamma(0.75) / sqrt(pi)
        assert marginal_moment(m, 0.5) == pytest.approx(expected, rel=1e-6)

    def test_body_wrapper(self):
        K = dual_centroid_body(DISC, segment(), 1.0)
        x = np.array([[[2.0, 0.0], [0.0, 0.5]]])
        np.testing.assert_allclose(K(x), [[3 * pi / 8, 3 * pi / 2]], rtol=1e-10)


class TestIntersection:
    def test_disc(self):
        np.testing.assert_allclose(intersection_radial(DISC, [[1.0, 0.0], [0.0, 2.0]]), [2 / pi, 1 / pi])

    def test_square_diagonal(self):
        # the line through the origin orthogonal to (1,1)/sqrt2 meets [-1,1]^2 in a segment of length 2 sqrt2
        assert intersection_radial(SQUARE, [1.0, 1.0])[0] == pytest.approx(2 * sqrt(2) / 4 / sqrt(2))

    def test_lp_intersection_quadrature_vs_monte_carlo(self, stream):
        q = lp_intersection_radial(SQUARE, -1.0, 0.2, [0.6, 0.8]).values[0]
        mc = lp_intersection_radial(SQUARE, -1.0, 0.2, [0.6, 0.8], budget=400_000, rng=stream, method="monte_carlo")
        assert abs(mc.values[0] - q) < 4 * mc.stderr[0]

    def test_lp_intersection_errors(self):
        for p, a in ((-1.5, 0.2), (0.5, 0.2), (-0.5, 0.0)):
            with pytest.raises(ValueError):
                lp_intersection_radial(DISC, p, a, [1.0, 0.0])

    def test_empirical_lp_intersection(self, gen):
        X = gen.normal(size=(2, 5))
        u = np.array([0.3, -0.7])
        q = 0.5
        direct = np.mean(((u @ X) ** 2 + 0.04 * u @ u) ** (-q / 2)) ** (1 / q)
        assert empirical_lp_intersection(X, -q, 0.2, u) == pytest.approx(direct)


class TestEmpirical:
    def test_classical_support(self, gen):
        X = gen.normal(size=(2, 7))
        u = np.array([0.2, 0.9])
        assert classical_centroid_support(X, 2.0, u) == pytest.approx(np.sqrt(np.mean((u @ X) ** 2)))
        assert classical_centroid_support(X, np.inf, u) == pytest.approx(np.max(np.abs(u @ X)))
        with pytest.raises(ValueError):
            classical_centroid_support(X, 0.5, u)

    def test_empirical_converges_to_exact(self, gen):
        X = sample_block_matrix(DISC, (1,) * 200_000, gen)
        K = empirical_dual_centroid(X, segment(), 1.0)
        assert K(np.array([1.0, 0.0])) == pytest.approx(3 * pi / 4, rel=0.01)

    @pytest.mark.parametrize(
        "C,p",
        [(segment(), 0.5), (segment(), 0.0), (euclidean_ball(3), -1.0), (cm_alpha(2, 0.3), -0.5), (cube(2), 0.5)],
        ids=["segment", "segment-p0", "ball", "cm_alpha", "cube"],
    )
    def test_sphere_sums_match_bodies(self, C, p, gen):
        grid = sphere_quadrature(2, 64)
        X = sample_blocks(SQUARE, 4, C.m, 3, gen)
        sums, fw, ninf = empirical_sphere_sums(X, C, p, grid, 2.0)
        for t in range(3):
            cols = np.concatenate([X[t, i].T for i in range(4)], axis=1)
            body = empirical_dual_centroid(BlockSampleMatrix(cols, (C.m,) * 4), C, p)
            rho = body(grid.nodes)
            fin = np.isfinite(rho)
            assert sums[t] == pytest.approx(np.dot(grid.weights[fin], rho[fin] ** 2), rel=1e-10)
            assert fw[t] == pytest.approx(grid.weights[fin].sum(), rel=1e-12)
            assert ninf[t] == (~fin).sum()

    def test_intersection_sums(self, gen):
        grid = sphere_quadrature(2, 32)
        X = SQUARE.sample(gen, (2, 5))
        sums, fw, _ = empirical_intersection_sums(X, 0.2, 1.0, grid, 2.0)
        rho = empirical_lp_intersection(X[0].T, -1.0, 0.2, grid.nodes)
        assert sums[0] == pytest.approx(np.dot(grid.weights, rho**2), rel=1e-10)

from math import pi

import numpy as np
import pytest

from starlab.bodies import cross_polytope, cube, euclidean_ball, rotated, segment
from starlab.densities import UniformAnnulus, UniformBall, UniformCube
from starlab.estimate import Estimate
from starlab.experiments import (
    HypothesisError,
    ball_flattening_inequality,
    busemann_ratio,
    cefpp_probe,
    compare,
    convergence_study,
    empirical_volumes,
    exact_centroid_volume,
    exact_intersection_volume,
    moment_bound_probe,
    polar_measure_samples,
    rearrangement_inequality,
    validate_flattening,
    validate_hypotheses,
)
from starlab.numerics import RngStream

DISC = UniformBall(2, 1.0)
SQUARE = UniformCube(2, 1.0)


class TestCompare:
    def test_verdicts(self):
        a, b = Estimate(1.0, 0.01), Estimate(1.1, 0.01)
        assert compare(a, b)[3] == "confirmed"
        assert compare(b, a)[3] == "VIOLATION"
        assert compare(a, Estimate(1.02, 0.01))[3] == "equality-consistent"

    def test_band_includes_quadrature_error(self):
        a, b = Estimate(1.0, 0.0, quad_error=0.2), Estimate(1.1, 0.0)
        margin, se, band, verdict = compare(a, b)
        assert se == 0.0 and band >= 0.2 and verdict == "equality-consistent"

    def test_inconclusive(self):
        assert compare(Estimate(1.0, 0.2), Estimate(2.0, 0.01))[3] == "inconclusive"
        assert compare(Estimate(np.nan, 0.0), Estimate(1.0, 0.0))[3] == "inconclusive"

    def test_paired_stderr(self):
        a, b = Estimate(1.0, 0.03), Estimate(1.05, 0.03)
        assert compare(a, b)[3] == "equality-consistent"
        assert compare(a, b, margin_stderr=0.001)[3] == "confirmed"


class TestHypotheses:
    def test_integrality(self):
        with pytest.raises(HypothesisError, match="n/|p|"):
            validate_hypotheses("centroid", 2, -0.3, "exact")
        validate_hypotheses("centroid", 2, -0.5, "exact")
        validate_hypotheses("centroid", 2, -1.0, "empirical", [euclidean_ball(3)])

    def test_block_dimension(self):
        with pytest.raises(HypothesisError, match="n\\+1"):
            validate_hypotheses("centroid", 2, -1.0, "empirical", [segment()])

    def test_exact_unbounded(self):
        with pytest.raises(HypothesisError, match="unbounded"):
            validate_hypotheses("centroid", 2, -1.0, "exact")

    def test_range_and_intersection(self):
        with pytest.raises(HypothesisError):
            validate_hypotheses("centroid", 2, -1.5, "exact")
        with pytest.raises(HypothesisError):
            validate_hypotheses("intersection", 2, -1.0, "empirical", alpha=None)
        with pytest.raises(HypothesisError):
            validate_hypotheses("intersection", 2, 0.5, "empirical", alpha=0.2)
        with pytest.raises(ValueError):
            validate_hypotheses("nope", 2, 0.5, "exact")
        with pytest.raises(ValueError):
            validate_hypotheses("centroid", 2, 0.5, "nope")

    def test_flattening(self):
        Q = np.array([[0.6, -0.8], [0.8, 0.6]])
        with pytest.raises(HypothesisError, match="unconditional"):
            validate_flattening("centroid", 2, 0.5, "exact", rotated(cube(2), Q))
        with pytest.raises(HypothesisError, match="p <= 1"):
            validate_flattening("centroid", 2, 1.5, "exact", segment())
        with pytest.raises(HypothesisError, match="empirical"):
            validate_flattening("intersection", 2, -1.0, "exact", alpha=0.2)

    def test_raised_before_sampling(self):
        with pytest.raises(HypothesisError):
            rearrangement_inequality(SQUARE, segment(), -0.3, mode="empirical", trials=10**9)


class TestExactVolumes:
    def test_disc_oracle(self):
        est = exact_centroid_volume(DISC, segment(), 1.0)
        assert est.value == pytest.approx(pi * (3 * pi / 4) ** 2, rel=1e-10)

    def test_intersection_of_disc(self):
        assert exact_intersection_volume(DISC).value == pytest.approx(pi * (2 / pi) ** 2, rel=1e-10)

    def test_square_quad_error_is_informative(self):
        est = exact_centroid_volume(SQUARE, segment(), 0.5, resolution=64)
        fine = exact_centroid_volume(SQUARE, segment(), 0.5, resolution=256)
        assert est.quad_error > 0
        assert abs(est.value - fine.value) <= est.quad_error

    def test_monte_carlo_route(self, stream):
        est = exact_centroid_volume(SQUARE, cube(2), -0.5, resolution=64, stream=stream)
        assert est.method != "radial" and est.stderr > 0
        with pytest.raises(ValueError):
            exact_centroid_volume(SQUARE, cube(2), -0.5, budget=10, stream=stream)


class TestEmpirical:
    def test_worker_independence(self):
        s = RngStream(3, 1)
        a = empirical_volumes(SQUARE, segment(), 0.5, 4, 600, s, resolution=32, chunk=100, workers=1)
        b = empirical_volumes(SQUARE, segment(), 0.5, 4, 600, s, resolution=32, chunk=100, workers=3)
        np.testing.assert_array_equal(a, b)

    def test_mean_approaches_exact(self):
        vols = empirical_volumes(DISC, segment(), 1.0, 64, 2000, RngStream(4), resolution=64)
        assert vols.mean() == pytest.approx(pi * (3 * pi / 4) ** 2, rel=0.05)

    def test_intersection_kind(self):
        vols = empirical_volumes(DISC, None, -1.0, 8, 300, RngStream(5), resolution=32, kind="intersection", alpha=0.2)
        assert vols.shape == (300,) and np.all(vols > 0)


class TestInequalities:
    def test_exact_rearrangement(self):
        rep = rearrangement_inequality(SQUARE, segment(), 0.5, resolution=128)
        assert rep.verdict == "confirmed"
        assert rep.margin > 0.4

    def test_equality_fixture(self):
        rep = rearrangement_inequality(DISC, segment(), 0.5, resolution=64)
        assert rep.verdict == "equality-consistent"

    def test_empirical_rearrangement(self):
        rep = rearrangement_inequality(SQUARE, segment(), 0.5, mode="empirical", N=8, trials=10_000,
                                       stream=RngStream(6), resolution=64)
        assert rep.verdict in ("confirmed", "equality-consistent")
        assert rep.margin > 0
        rows = rep.rows()
        assert [r["quantity"] for r in rows] == ["lhs", "rhs", "margin"]

    def test_polar_coupling(self):
        rep = rearrangement_inequality(SQUARE, segment(), 0.5, mode="empirical", N=8, trials=10_000,
                                       stream=RngStream(6), resolution=64, coupling="polar")
        indep = rearrangement_inequality(SQUARE, segment(), 0.5, mode="empirical", N=8, trials=10_000,
                                         stream=RngStream(6), resolution=64)
        assert rep.params["coupling"] == "polar"
        assert rep.margin_stderr < indep.margin_stderr

    def test_min_trials(self):
        with pytest.raises(ValueError, match="trials"):
            rearrangement_inequality(SQUARE, mode="empirical", trials=100)

    def test_flattening_annulus(self):
        rep = ball_flattening_inequality(UniformAnnulus(2, 1.0, 2**0.5), segment(), 0.5, resolution=64)
        assert rep.verdict == "confirmed"
        assert rep.params["flat_radius"] == pytest.approx(1.0)


class TestBusemann:
    def test_equality_cases(self):
        assert busemann_ratio(DISC, 64).verdict == "equality-consistent"
        r3 = busemann_ratio(UniformBall(3, 1.0), 16)
        assert r3.lhs.value == pytest.approx(1.0, rel=1e-10)

    def test_shifted_disc(self):
        rep = busemann_ratio(UniformBall(2, 1.0, (0.5, 0.0)), 256)
        assert rep.verdict == "confirmed"
        assert rep.lhs.value < 0.95

    def test_rejects_non_indicator(self):
        with pytest.raises(ValueError):
            busemann_ratio(UniformAnnulus(2, 0.5, 1.0))


class TestStudiesAndProbes:
    def test_alpha_study(self):
        rep = convergence_study("alpha_to_zero", resolution=16)
        assert rep.trend_ok and rep.passed
        assert rep.errors[-1] < rep.errors[0]
        assert {r["quantity"] for r in rep.rows()} == {"estimate", "error", "target"}

    def test_m_study_hypotheses(self):
        with pytest.raises(HypothesisError):
            convergence_study("m_to_infinity", N=2, trials=10)
        with pytest.raises(HypothesisError):
            convergence_study("m_to_infinity", values=(1, 2), trials=10)
        with pytest.raises(ValueError):
            convergence_study("nope")

    def test_moment_probe(self):
        rep = moment_bound_probe(DISC, segment(), 0.0, 0.5, Ns=(3, 6), trials=2000, stream=RngStream(8),
                                 directions=16)
        assert rep.passed
        assert rep.values == (3, 6)
        with pytest.raises(HypothesisError):
            moment_bound_probe(DISC, segment(), -1.0)

    def test_polar_measure_samples_are_fractions(self):
        fs = [UniformBall(2, 1.0)] * 2
        a = polar_measure_samples(fs, cross_polytope(2), "gaussian", 500, RngStream(9), points=16)
        assert a.shape == (500,) and np.all((a >= 0) & (a <= 1))

    def test_cefpp(self):
        rep = cefpp_probe([SQUARE] * 4, cross_polytope(4), trials=10_000, stream=RngStream(10), points=32)
        assert rep.verdict in ("confirmed", "equality-consistent")
        with pytest.raises(ValueError):
            cefpp_probe([SQUARE] * 4, cross_polytope(4), measure="uniform")
        with pytest.raises(ValueError):
            cefpp_probe([SQUARE] * 4, cross_polytope(4), trials=10)

"""Acceptance criteria, one test (and one printed line) per criterion.

Every random quantity uses a fixed stream chosen before the run; the
tolerances are the ones stated for each criterion.
"""
from math import exp, pi

import numpy as np
import pytest
import yaml
from scipy import stats

from conftest import ACCEPTANCE_LINES
from starlab import config as cfg
from starlab.bodies import (
    GeneralizedBall,
    cube,
    cross_polytope,
    euclidean_ball,
    generalized_ball_gauge,
    generalized_ball_support,
    sample_block_matrix,
    segment,
)
from starlab.centroid import dual_centroid_radial, empirical_dual_centroid
from starlab.cli import main
from starlab.densities import (
    GridDensity,
    Gaussian,
    RadialStep,
    UniformAnnulus,
    UniformBall,
    UniformCube,
    lp_distance,
    radial_step,
    rearrange,
)
from starlab.experiments import busemann_ratio, convergence_study, rearrangement_inequality
from starlab.numerics import (
    RngStream,
    gaussian_neg_moment,
    sample_positive_stable,
    sample_tilted_weight,
    sphere_quadrature,
)
from starlab.volume import (
    MixtureConfig,
    indicator_rep_check,
    nt_mixture_volume,
    section_volume_quadrature,
    volume_exponential,
    volume_gaussian_extrapolated,
    volume_radial,
)

SEED = 20240601
SQUARE = UniformCube(2, 1.0)
DISC = UniformBall(2, 1.0)


def record(k: int, ok: bool, detail: str):
    line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[k] = line
    print(line)
    assert ok, line


def stream(k: int) -> RngStream:
    return RngStream(SEED, 1000 + k)


def test_criterion_01_gaussian_constants():
    gen = stream(1).generator()
    parts, ok = [], True
    for n in (2, 3):
        xi = gen.standard_normal((1_000_000, n))
        x = 1.0 / np.linalg.norm(xi, axis=1)
        z = (x.mean() - gaussian_neg_moment(n, 1.0)) / (x.std(ddof=1) / np.sqrt(x.size))
        ok &= abs(z) < 4
        parts.append(f"b_{n},1 z={z:+.2f}")
    record(1, ok, ", ".join(parts) + " (|z| < 4 at 1e6 draws)")


def test_criterion_02_stable_sampler():
    s = stream(2)
    parts, ok = [], True
    for i, alpha in enumerate((0.5, 0.75)):
        w = sample_positive_stable(alpha, s.child(i), 1_000_000)
        for t in (0.25, 1.0, 4.0):
            x = np.exp(-t * w)
            z = (x.mean() - exp(-(t**alpha))) / (x.std(ddof=1) / np.sqrt(x.size))
            ok &= abs(z) < 4
            parts.append(f"a={alpha} t={t} z={z:+.2f}")
    # p = 1: sampling-importance-resampling from the tilted law, then xi/sqrt(2w)
    gen = s.child(2).generator()
    draw = sample_tilted_weight(1.0, gen, 1_000_000)
    prob = draw.importance_weight / draw.importance_weight.sum()
    w = draw.w[gen.choice(draw.w.size, size=20_000, replace=False, p=prob)]
    y = gen.standard_normal(w.size) / np.sqrt(2.0 * w)
    pval = stats.kstest(y, stats.laplace.cdf).pvalue
    ok &= pval > 1e-3
    parts.append(f"p=1 KS p-value={pval:.3g}")
    record(2, ok, "; ".join(parts))


def _random_empirical_body(gen, n):
    f = [SQUARE if n == 2 else UniformCube(3, 1.0), UniformBall(n, 1.0), Gaussian(n, 1.0),
         UniformAnnulus(n, 0.5, 1.0)][gen.integers(4)]
    p = [0.0, 0.5, 1.0, -0.5][gen.integers(4)]
    if p < 0:
        # n/|p| must be an integer and blocks need dimension n+1
        C = euclidean_ball(n + 1) if gen.uniform() < 0.5 else cube(n + 1)
    else:
        C = [segment(), cube(2), cross_polytope(2)][gen.integers(3)]
    N = int(gen.integers(n + 2, 10))
    X = sample_block_matrix(f, (C.m,) * N, gen)
    return empirical_dual_centroid(X, C, p, allow_unbounded=False), f"{f.family}/p={p}/{C.kind}/N={N}"


def test_criterion_03_volume_concordance():
    s = stream(3)
    gen = s.generator()
    worst, ok = 0.0, True
    for i in range(20):
        n = 2 if i < 10 else 3
        K, label = _random_empirical_body(gen, n)
        res = 2048 if n == 2 else 96
        rad = volume_radial(K, sphere_quadrature(n, res))
        if n == 3:
            coarse = volume_radial(K, sphere_quadrature(3, res // 2))
            qerr = abs(rad.value - coarse.value)
        else:
            qerr = rad.quad_error
        gau = volume_gaussian_extrapolated(K, n, 100_000, s.child(2 * i))
        ex = volume_exponential(K, n, 1.0, mode="direct", budget=100_000, rng=s.child(2 * i + 1))
        for other in (gau, ex):
            band = 4 * np.hypot(other.stderr, rad.stderr) + qerr
            worst = max(worst, abs(other.value - rad.value) / band)
        band = 4 * np.hypot(gau.stderr, ex.stderr)
        worst = max(worst, abs(gau.value - ex.value) / band)
    ok = worst <= 1.0
    record(3, ok, f"20 bodies, largest discrepancy = {worst:.2f} of the 4-stderr band")


def test_criterion_04_mixture_formula():
    s = stream(4)
    parts, ok = [], True
    for i, (n, target) in enumerate(((2, 2.0), (3, 4.0 / 3.0))):
        est = nt_mixture_volume(np.eye(n), MixtureConfig(1.0, 100_000), s.child(i))
        rel = abs(est.value / target - 1)
        ok &= rel < 0.02
        parts.append(f"|B_1^{n}| = {est.value:.4f} (rel err {rel:.2%})")
    gen = s.child(9).generator()
    worst = 0.0
    for j in range(5):
        X = gen.normal(size=(2, 3))
        est = nt_mixture_volume(X, MixtureConfig(1.0, 100_000), s.child(10 + j))
        ref = section_volume_quadrature(X, 1.0).value
        worst = max(worst, abs(est.value / ref - 1))
    ok &= worst < 0.02
    parts.append(f"5 random 2x3 sections, worst rel err {worst:.2%}")
    record(4, ok, "; ".join(parts))


def test_criterion_05_exact_body_oracle():
    rho = dual_centroid_radial(DISC, segment(), 1.0, [1.0, 0.0], method="tensor").values[0]
    K_rel = abs(rho / (3 * pi / 4) - 1)

    def radial(U):
        return dual_centroid_radial(DISC, segment(), 1.0, U, method="tensor").values

    vol = volume_radial(radial, sphere_quadrature(2, 64)).value
    V_rel = abs(vol / (pi * (3 * pi / 4) ** 2) - 1)
    record(5, K_rel < 1e-3 and V_rel < 1e-3, f"rho rel err {K_rel:.1e}, volume rel err {V_rel:.1e} (< 1e-3)")


def test_criterion_06_rearrangement_desk_scale():
    parts, ok = [], True
    for i, p in enumerate((0.25, 0.5, 0.75)):
        ex = rearrangement_inequality(SQUARE, segment(), p, mode="exact", stream=stream(6).child(i))
        em = rearrangement_inequality(SQUARE, segment(), p, mode="empirical", N=8, trials=10_000,
                                      stream=stream(6).child(10 + i))
        ok &= ex.verdict == "confirmed" and em.verdict == "confirmed"
        parts.append(f"p={p}: exact {ex.verdict} (margin {ex.margin:.4f}, band {ex.band:.1e}), "
                     f"empirical {em.verdict} (z={em.z:.2f})")
    record(6, ok, "; ".join(parts))


def test_criterion_07_negative_p_orderings():
    s = stream(7)
    z = rearrangement_inequality(SQUARE, euclidean_ball(3), -1.0, mode="empirical", N=32, trials=10_000,
                                 stream=s.child(0))
    i = rearrangement_inequality(SQUARE, None, -1.0, mode="empirical", kind="intersection", alpha=0.2, N=32,
                                 trials=10_000, stream=s.child(1))
    ok = z.verdict == "confirmed" and i.verdict == "confirmed"
    record(7, ok, f"centroid with B_2^3 blocks {z.verdict} (z={z.z:.2f}); "
                  f"intersection alpha=0.2 {i.verdict} (z={i.z:.2f}); N=32")


def test_criterion_08_busemann():
    disc, ball, shifted = busemann_ratio(DISC), busemann_ratio(UniformBall(3, 1.0)), busemann_ratio(
        UniformBall(2, 1.0, (0.5, 0.0)))
    ok = (
        disc.verdict == "equality-consistent"
        and ball.verdict == "equality-consistent"
        and shifted.verdict == "confirmed"
    )
    record(8, ok, f"disc ratio {disc.lhs.value:.10f}, ball ratio {ball.lhs.value:.10f}, "
                  f"shifted disc ratio {shifted.lhs.value:.4f} ({shifted.verdict})")


def test_criterion_09_limits():
    s = stream(9)
    a = convergence_study("alpha_to_zero")
    n = convergence_study("N_to_infinity", DISC, 0.5, segment(), (4, 8, 16, 32, 64), trials=10_000,
                          stream=s.child(0))
    m = convergence_study("m_to_infinity", DISC, -1.0, values=(2, 4, 8, 16), N=8, alpha=0.2, trials=10_000,
                          stream=s.child(1))
    ok = a.passed and n.passed and m.passed
    last, target = m.estimates[-1], m.target
    record(9, ok, f"alpha: {a.verdict} (final err {a.final_error:.2%}, trend_ok={a.trend_ok}); "
                  f"N: {n.verdict} (final err {n.final_error:.2%} at N=64); "
                  f"m: {m.verdict} (m=16 {last.value:.4f}+-{last.stderr:.4f} vs {target.value:.4f}+-{target.stderr:.4f})")


def test_criterion_10_identity_suites():
    s = stream(10)
    gen = s.generator()
    reports = []
    u = np.array([0.6, 0.8])
    for j, N in enumerate((1, 2, 1, 2)):
        X = sample_block_matrix(SQUARE, (1,) * N, gen)
        reports.append(indicator_rep_check(X, segment(), 0.0, u, rng=s.child(j), s=[1.0, 1.0, 1.5, 0.5][j]))
    cases = [(-0.5, 1), (-0.5, 2), (-0.5, 3), (-1.0, 1)]
    for j, (p, k) in enumerate(cases):
        X = sample_block_matrix(SQUARE, (3,) * 3, gen)
        reports.append(indicator_rep_check(X, cube(3), p, u, rng=s.child(10 + j), k=k))
    worst_z = max(abs(r.z) for r in reports)
    ok = all(r.passed for r in reports)

    worst_dual, worst_sec = 0.0, 0.0
    for _ in range(1000):
        N = int(gen.integers(1, 6))
        bodies = [(cube if gen.uniform() < 0.5 else cross_polytope)(int(gen.integers(1, 4)), float(gen.uniform(0.3, 3)))
                  for _ in range(N)]
        ys = [gen.normal(size=C.m) for C in bodies]
        a = generalized_ball_support(GeneralizedBall(bodies, 1.0), ys)
        b = generalized_ball_gauge(GeneralizedBall([C.polar() for C in bodies], np.inf), ys)
        worst_dual = max(worst_dual, abs(a - b) / abs(b))
    for k in range(1000):
        p = [0.0, 0.5, 1.0, 2.0, -0.5, -1.0][k % 6]
        N = int(gen.integers(1, 7))
        bodies = [euclidean_ball(3) if gen.uniform() < 0.5 else cube(3, float(gen.uniform(0.5, 2))) for _ in range(N)]
        X = sample_block_matrix(SQUARE, (3,) * N, gen)
        v = gen.normal(size=2)
        rho = empirical_dual_centroid(X, bodies, p, allow_unbounded=False)(v)
        g = generalized_ball_gauge(GeneralizedBall(bodies, p), X.transpose_apply(v))
        expected = 1.0 / g if p == 0 else N ** (1.0 / p) / g
        worst_sec = max(worst_sec, abs(rho - expected) / expected)
    ok &= worst_dual <= 1e-10 and worst_sec <= 1e-10
    record(10, ok, f"{len(reports)} indicator checks, max |z| = {worst_z:.2f} (< 4); "
                   f"duality max rel err {worst_dual:.1e}; section max rel err {worst_sec:.1e} (<= 1e-10, 1000 each)")


def _catalog_pair(gen, k):
    n = 2 + k % 2
    if k % 4 < 2:
        fs = []
        for _ in range(2):
            j = int(gen.integers(2, 7))
            fs.append(radial_step(n, np.sort(gen.uniform(0.05, 2.0, size=j)), gen.uniform(0, 1, size=j)))
        return fs
    shape = (int(gen.integers(3, 9)),) * n
    lo, hi = (-1.0,) * n, (1.0,) * n
    fs = []
    for _ in range(2):
        v = gen.uniform(0, 1, size=shape) * (gen.uniform(size=shape) < 0.7)
        v[(0,) * n] += 0.1
        fs.append(GridDensity(lo, hi, v / (v.sum() * 2.0**n / v.size)))
    return fs


def test_criterion_11_rearrangement_properties():
    gen = stream(11).generator()
    bad = {"contraction": 0, "equimeasurability": 0, "monotonicity": 0}
    for k in range(100):
        f, g = _catalog_pair(gen, k)
        fs, gs = rearrange(f), rearrange(g)
        for p in (1.0, 2.0, 3.0):
            if lp_distance(fs, gs, p) > lp_distance(f, g, p) * (1 + 1e-12) + 1e-14:
                bad["contraction"] += 1
        for t in gen.uniform(0, max(f.sup_norm, 1e-12), size=5):
            if abs(fs.level_set_volume(t) - f.level_set_volume(t)) > 1e-12 * max(1.0, f.level_set_volume(t)):
                bad["equimeasurability"] += 1
        # f <= max(f, g) pointwise must give f* <= max(f, g)*
        if isinstance(f, RadialStep):
            r = np.union1d(f.radii, g.radii)
            mid = 0.5 * (r[1:] + r[:-1])
            h = RadialStep(f.n, tuple(r.tolist()), tuple(np.maximum(f.profile(mid), g.profile(mid)).tolist()))
        else:
            h = GridDensity(f.lo, f.hi, np.maximum(f.values, g.values))
        hs = rearrange(h)
        rr = gen.uniform(0, 2.5, size=200)
        if np.any(hs.profile(rr) < fs.profile(rr) - 1e-15):
            bad["monotonicity"] += 1
    ok = not any(bad.values())
    record(11, ok, "100 radial-step and raster pairs, failures: " + ", ".join(f"{k}={v}" for k, v in bad.items()))


def _summary_verdicts(path):
    out = {}
    for line in path.read_text().splitlines()[1:]:
        name, rest = line.split(": ", 1)
        out[name] = rest.split(" ", 1)[0]
    return out


@pytest.mark.slow
def test_criterion_12_determinism(tmp_path):
    default = cfg.default_config_path()
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    codes = [
        main(["run", "--config", str(default), "--out", str(a)]),
        main(["run", "--config", str(default), "--out", str(b), "--workers", "4"]),
        main(["run", "--config", str(default), "--out", str(c), "--master_seed=7"]),
    ]
    names = sorted(p.name for p in a.iterdir())
    identical = all((a / x).read_bytes() == (b / x).read_bytes() for x in names)
    n_exp = len(yaml.safe_load(default.read_text())["experiments"])
    va, vc = _summary_verdicts(a / "summary.txt"), _summary_verdicts(c / "summary.txt")
    changed = sorted(k for k in va if va[k] != vc[k])
    ok = identical and not changed and codes == [0, 0, 0] and len(names) == n_exp + 2
    record(12, ok, f"{len(names)} files byte-identical across workers 1 and 4: {identical}; exit codes {codes}; "
                   f"verdicts changed by seed 7: {changed or 'none'}")

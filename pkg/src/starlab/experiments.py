"""Statistical checks of rearrangement inequalities and limit theorems.

Every comparison estimates a left side and a right side (exact bodies by
quadrature, empirical bodies by Monte Carlo over independent trials) and
turns the margin ``rhs - lhs`` into a verdict with a three-sigma band:

* ``confirmed``: margin exceeds the band;
* ``equality-consistent``: |margin| is inside the band;
* ``VIOLATION``: margin is below minus the band;
* ``inconclusive``: an estimate is non-finite or too noisy to judge
  (relative standard error above ``max_rel_se``).

The band is ``sigma * stderr(margin)`` plus the quadrature error of both
sides plus a relative floor of ``RTOL`` that absorbs floating round-off
when both sides are deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import asinh

import numpy as np

from .bodies import SupportBody, cm_alpha, segment
from .centroid import (
    dual_centroid_radial,
    empirical_intersection_sums,
    empirical_sphere_sums,
    intersection_radial,
    lp_intersection_radial,
    resolve_centroid_method,
)
from .densities import Density, UniformAnnulus, UniformBall, UniformCube, ball_flatten, marginal_1d, rearrange
from .estimate import Estimate, mean_estimate
from .numerics import RngStream, as_generator, sphere_quadrature, unit_ball_volume
from .parallel import map_chunks, run_chunked
from .volume import volume_radial, volumes_from_sums

SIGMA = 3.0
RTOL = 1e-9
MAX_REL_SE = 0.05
MIN_TRIALS = 10_000
MIN_MC_POINTS = 100_000
DEFAULT_RESOLUTION = {2: 256, 3: 48}
EMPIRICAL_RESOLUTION = {2: 256, 3: 24}


class HypothesisError(ValueError):
    """Inputs outside the range where the inequality is claimed."""


# ---------------------------------------------------------------------------
# Reports and verdicts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonReport:
    """Two estimates and the verdict on ``lhs <= rhs``."""

    experiment: str
    lhs: Estimate
    rhs: Estimate
    margin: float
    margin_stderr: float
    band: float
    verdict: str
    params: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @property
    def z(self) -> float:
        """Margin in units of its standard error (inf for exact margins)."""
        if self.margin_stderr > 0:
            return self.margin / self.margin_stderr
        return float(np.sign(self.margin) * np.inf) if self.margin else 0.0

    def with_provenance(self, **kw) -> "ComparisonReport":
        return replace(self, provenance={**self.provenance, **kw})

    def rows(self) -> list:
        """Long-format rows: one per quantity (lhs, rhs, margin)."""
        base = {"experiment": self.experiment, "verdict": self.verdict, **_flat(self.params)}
        out = []
        for name, est in (("lhs", self.lhs), ("rhs", self.rhs)):
            out.append(
                {
                    **base,
                    "quantity": name,
                    "parameter": "",
                    "value": est.value,
                    "stderr": est.stderr,
                    "quad_error": est.quad_error,
                    "n_samples": est.n_samples,
                    "method": est.method,
                }
            )
        out.append(
            {
                **base,
                "quantity": "margin",
                "parameter": "",
                "value": self.margin,
                "stderr": self.margin_stderr,
                "quad_error": self.band,
                "n_samples": min(self.lhs.n_samples, self.rhs.n_samples),
                "method": "band" if self.band else "",
            }
        )
        return out


@dataclass(frozen=True)
class TrendReport:
    """Error (or value) sequence over a doubling parameter."""

    kind: str
    parameter: str
    values: tuple
    estimates: tuple
    target: Estimate | None
    errors: tuple
    error_stderr: tuple
    trend_ok: bool
    final_error: float
    tolerance: float
    passed: bool
    params: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not len(self.values) == len(self.estimates) == len(self.errors) == len(self.error_stderr):
            raise ValueError("trend sequences must have equal length")

    def with_provenance(self, **kw) -> "TrendReport":
        return replace(self, provenance={**self.provenance, **kw})

    @property
    def verdict(self) -> str:
        return "confirmed" if self.passed else "not-confirmed"

    def rows(self) -> list:
        base = {"experiment": self.kind, "verdict": self.verdict, **_flat(self.params)}
        out = []
        for v, est, e, se in zip(self.values, self.estimates, self.errors, self.error_stderr):
            out.append(
                {
                    **base,
                    "quantity": "estimate",
                    "parameter": f"{self.parameter}={v}",
                    "value": est.value,
                    "stderr": est.stderr,
                    "quad_error": est.quad_error,
                    "n_samples": est.n_samples,
                    "method": est.method,
                }
            )
            out.append(
                {
                    **base,
                    "quantity": "error",
                    "parameter": f"{self.parameter}={v}",
                    "value": e,
                    "stderr": se,
                    "quad_error": 0.0,
                    "n_samples": est.n_samples,
                    "method": "",
                }
            )
        if self.target is not None:
            t = self.target
            out.append(
                {
                    **base,
                    "quantity": "target",
                    "parameter": "",
                    "value": t.value,
                    "stderr": t.stderr,
                    "quad_error": t.quad_error,
                    "n_samples": t.n_samples,
                    "method": t.method,
                }
            )
        return out


def _flat(params: dict) -> dict:
    return {k: (v if isinstance(v, (int, float, str, bool)) or v is None else str(v)) for k, v in params.items()}


def compare(
    lhs: Estimate,
    rhs: Estimate,
    sigma: float = SIGMA,
    margin_stderr: float | None = None,
    max_rel_se: float = MAX_REL_SE,
) -> tuple:
    """Verdict on ``lhs <= rhs``; returns (margin, stderr, band, verdict).

    ``margin_stderr`` overrides the independent-sides value
    hypot(se_lhs, se_rhs), for paired estimates.
    """
    margin = rhs.value - lhs.value
    se = float(np.hypot(lhs.stderr, rhs.stderr)) if margin_stderr is None else float(margin_stderr)
    scale = max(abs(lhs.value), abs(rhs.value))
    band = sigma * se + lhs.quad_error + rhs.quad_error + RTOL * scale
    if not (np.isfinite(margin) and np.isfinite(band)):
        return margin, se, band, "inconclusive"
    if max(lhs.stderr / max(abs(lhs.value), 1e-300), rhs.stderr / max(abs(rhs.value), 1e-300)) > max_rel_se:
        return margin, se, band, "inconclusive"
    if margin > band:
        verdict = "confirmed"
    elif margin < -band:
        verdict = "VIOLATION"
    else:
        verdict = "equality-consistent"
    return margin, se, band, verdict


def _report(name, lhs, rhs, params, provenance, margin_stderr=None, sigma=SIGMA) -> ComparisonReport:
    margin, se, band, verdict = compare(lhs, rhs, sigma, margin_stderr)
    return ComparisonReport(name, lhs, rhs, margin, se, band, verdict, params, provenance)


def _stream(stream) -> RngStream:
    if stream is None:
        return RngStream(0)
    if isinstance(stream, RngStream):
        return stream
    return RngStream(int(stream))


def _provenance(stream: RngStream, **extra) -> dict:
    return {"master_seed": stream.master_seed, "stream": ".".join(map(str, (stream.stream_index, *stream.path))), **extra}


# ---------------------------------------------------------------------------
# Hypotheses
# ---------------------------------------------------------------------------

def _ratio_is_integer(n: int, p: float) -> bool:
    r = n / abs(p)
    return abs(r - round(r)) <= 1e-9 * max(1.0, r)


def _negative_p_condition(n: int, p: float):
    if not _ratio_is_integer(n, p):
        raise HypothesisError(
            f"for p < 0 the inequality needs n/|p| to be a positive integer; "
            f"n/|p| = {n / abs(p):.6g} with n = {n}, p = {p}"
        )


def validate_hypotheses(kind: str, n: int, p: float, mode: str, bodies=(), alpha: float | None = None):
    """Raise ``HypothesisError`` unless the inequality is claimed for the inputs.

    kind : {"centroid", "intersection"}
    mode : {"exact", "empirical"}
    """
    if mode not in ("exact", "empirical"):
        raise ValueError(f"unknown mode {mode!r}")
    if kind == "intersection":
        if alpha is None or not alpha > 0:
            raise HypothesisError("regularised intersection bodies need alpha > 0")
        if not -1.0 <= p < 0.0:
            raise HypothesisError(f"regularised intersection bodies need -1 <= p < 0, got p = {p}")
        _negative_p_condition(n, p)
        return
    if kind != "centroid":
        raise ValueError(f"unknown kind {kind!r}")
    if p < -1.0:
        raise HypothesisError(f"p must be at least -1, got p = {p}")
    if p >= 0:
        return
    _negative_p_condition(n, p)
    if mode == "exact" and p <= -1.0:
        raise HypothesisError("exact bodies need p > -1 (the body is unbounded at p = -1)")
    if mode == "empirical":
        small = sorted({C.m for C in bodies if C.m < n + 1})
        if small:
            raise HypothesisError(f"for p < 0 every block dimension must be at least n+1 = {n + 1}; got {small}")


def validate_flattening(kind: str, n: int, p: float, mode: str, C: SupportBody | None = None, alpha=None):
    """Hypotheses of the ball-flattening comparison; raises ``HypothesisError``."""
    if kind == "intersection":
        if mode != "empirical":
            raise HypothesisError("the intersection-body form is stated for empirical bodies")
        validate_hypotheses("intersection", n, p, mode, (), alpha)
        return
    if C is not None and not C.unconditional:
        raise HypothesisError("ball flattening needs an unconditional body C")
    if p > 1.0:
        raise HypothesisError(f"ball flattening needs p <= 1, got p = {p}")
    if p < 0:
        if p < -1.0:
            raise HypothesisError(f"p must be at least -1, got p = {p}")
        _negative_p_condition(n, p)
        if mode == "exact" and p <= -1:
            raise HypothesisError("exact bodies need p > -1 (the body is unbounded at p = -1)")


# ---------------------------------------------------------------------------
# Exact-mode volumes
# ---------------------------------------------------------------------------

def _two_grid_volume(radial, n: int, resolution: int) -> Estimate:
    """omega_n * sphere average of rho^n with a coarser-rule error estimate."""
    if n == 2:
        return volume_radial(radial, sphere_quadrature(2, resolution))
    fine = sphere_quadrature(n, resolution)
    coarse = sphere_quadrature(n, max(8, resolution // 2))
    v_fine = volume_radial(lambda U: radial(U), fine)
    v_coarse = volume_radial(lambda U: radial(U), coarse)
    return replace(v_fine, quad_error=abs(v_fine.value - v_coarse.value))


def _mc_centroid_volume(f: Density, C: SupportBody, p: float, resolution: int, budget: int, stream) -> Estimate:
    """Delta-method Monte Carlo volume; all directions share the same blocks."""
    n = f.n
    grid = sphere_quadrature(n, resolution)
    U, w = grid.nodes, grid.weights
    gen = as_generator(stream)
    X = f.sample(gen, (budget, C.m))
    step = max(1, 4_000_000 // (len(w) * C.m))

    def values(a):
        P = np.einsum("bmd,gd->gbm", X[a : a + step], U)
        H = C.support(P)
        with np.errstate(divide="ignore"):
            return np.log(H) if p == 0 else H**p

    starts = range(0, budget, step)
    mu = sum(values(a).sum(axis=1) for a in starts) / budget
    with np.errstate(divide="ignore", over="ignore"):
        if p == 0:
            rn = np.exp(-n * mu)
            deriv = -n * rn
        else:
            rn = mu ** (-n / p)
            deriv = (-n / p) * rn / mu
    if not np.all(np.isfinite(rn)):
        return Estimate(np.inf, np.inf, budget, stream.master_seed if isinstance(stream, RngStream) else None, "monte_carlo")
    coef = w * deriv
    psi = np.concatenate([coef @ (values(a) - mu[:, None]) for a in starts])
    omega = unit_ball_volume(n)
    value = omega * float(np.dot(w, rn))
    se = omega * float(psi.std(ddof=1)) / np.sqrt(budget)
    seed = stream.master_seed if isinstance(stream, RngStream) else None
    return Estimate(value, se, budget, seed, "monte_carlo_delta")


def exact_centroid_volume(
    f: Density,
    C: SupportBody,
    p: float,
    resolution: int | None = None,
    budget: int = MIN_MC_POINTS,
    stream=None,
    method: str = "auto",
) -> Estimate:
    """|Z_{p,C}(f)| by quadrature when available, otherwise Monte Carlo."""
    n = f.n
    resolution = resolution or DEFAULT_RESOLUTION.get(n, 4096)
    method = resolve_centroid_method(f, C, p, method)
    if method == "monte_carlo":
        if budget < MIN_MC_POINTS:
            raise ValueError(f"exact-mode Monte Carlo needs at least {MIN_MC_POINTS} points")
        return _mc_centroid_volume(f, C, p, resolution, budget, _stream(stream))

    def radial(U):
        return dual_centroid_radial(f, C, p, U, method=method).values

    return _two_grid_volume(radial, n, resolution)


def exact_intersection_volume(f: Density, p: float | None = None, alpha: float = 0.0, resolution=None) -> Estimate:
    """|I(f)| (alpha = 0) or |I^alpha_{|p|}(f)| by marginal quadrature."""
    n = f.n
    resolution = resolution or DEFAULT_RESOLUTION.get(n, 4096)
    if alpha == 0:
        return _two_grid_volume(lambda U: intersection_radial(f, U), n, resolution)
    return _two_grid_volume(lambda U: lp_intersection_radial(f, p, alpha, U, method="quadrature").values, n, resolution)


# ---------------------------------------------------------------------------
# Empirical-mode volumes
# ---------------------------------------------------------------------------

def _empirical_grid(n, resolution):
    return sphere_quadrature(n, resolution or EMPIRICAL_RESOLUTION.get(n, 4096))


def empirical_volumes(
    f: Density,
    C: SupportBody,
    p: float,
    N: int,
    trials: int,
    stream,
    resolution: int | None = None,
    chunk: int = 250,
    workers: int = 1,
    kind: str = "centroid",
    alpha: float | None = None,
) -> np.ndarray:
    """Volumes of ``trials`` independent empirical bodies.

    ``kind="centroid"`` uses blocks of width C.m and the body C;
    ``kind="intersection"`` uses single columns and the regularised
    ellipsoids with q = |p|.
    """
    n = f.n
    grid = _empirical_grid(n, resolution)

    def task(size, s):
        gen = s.generator()
        if kind == "intersection":
            X = f.sample(gen, (size, N))
            sums = empirical_intersection_sums(X, alpha, -p, grid, n)
        else:
            X = f.sample(gen, (size, N, C.m))
            sums = empirical_sphere_sums(X, C, p, grid, n)
        return volumes_from_sums(*sums, n, grid)

    return run_chunked(task, trials, _stream(stream), chunk, workers)


def _coupled_volumes(f, g, C, p, N, trials, stream, resolution, chunk, workers, kind, alpha):
    """Paired volumes for f and g driven by the same uniforms (planar only)."""
    n = f.n
    grid = _empirical_grid(n, resolution)
    width = 1 if kind == "intersection" else C.m
    stream = _stream(stream)
    sizes = [chunk] * (trials // chunk) + ([trials % chunk] if trials % chunk else [])

    def one(X):
        if kind == "intersection":
            return volumes_from_sums(*empirical_intersection_sums(X[:, :, 0, :], alpha, -p, grid, n), n, grid)
        return volumes_from_sums(*empirical_sphere_sums(X, C, p, grid, n), n, grid)

    def task(i):
        V = stream.child(i).generator().random((sizes[i], N, width, 2))
        return np.stack([one(f.from_uniforms(V)), one(g.from_uniforms(V))], axis=1)

    return np.concatenate(map_chunks(task, len(sizes), workers))


# ---------------------------------------------------------------------------
# Rearrangement and ball-flattening inequalities
# ---------------------------------------------------------------------------

def _compare_densities(
    name,
    f,
    g,
    C,
    p,
    mode,
    kind,
    alpha,
    N,
    trials,
    stream,
    resolution,
    budget,
    workers,
    coupling,
    params,
):
    stream = _stream(stream)
    if mode == "exact":
        if kind == "intersection":
            lhs = exact_intersection_volume(f, p, alpha, resolution)
            rhs = exact_intersection_volume(g, p, alpha, resolution)
        else:
            lhs = exact_centroid_volume(f, C, p, resolution, budget, stream.child(0))
            rhs = exact_centroid_volume(g, C, p, resolution, budget, stream.child(1))
        return _report(name, lhs, rhs, params, _provenance(stream))
    if trials < MIN_TRIALS:
        raise ValueError(f"empirical comparisons need at least {MIN_TRIALS} trials")
    seed = stream.master_seed
    if coupling == "polar":
        pairs = _coupled_volumes(f, g, C, p, N, trials, stream, resolution, 250, workers, kind, alpha)
        lhs = mean_estimate(pairs[:, 0], seed, "empirical_coupled")
        rhs = mean_estimate(pairs[:, 1], seed, "empirical_coupled")
        se = float(np.std(pairs[:, 1] - pairs[:, 0], ddof=1) / np.sqrt(trials))
        return _report(name, lhs, rhs, {**params, "coupling": "polar"}, _provenance(stream), margin_stderr=se)
    if coupling not in (None, "none", "independent"):
        raise ValueError(f"unknown coupling {coupling!r}")
    common = dict(N=N, trials=trials, resolution=resolution, workers=workers, kind=kind, alpha=alpha)
    vf = empirical_volumes(f, C, p, stream=stream.child(0), **common)
    vg = empirical_volumes(g, C, p, stream=stream.child(1), **common)
    lhs = mean_estimate(vf, seed, "empirical")
    rhs = mean_estimate(vg, seed, "empirical")
    return _report(name, lhs, rhs, params, _provenance(stream))


def rearrangement_inequality(
    f: Density,
    C: SupportBody | None = None,
    p: float = 0.5,
    mode: str = "exact",
    kind: str = "centroid",
    alpha: float | None = None,
    N: int = 8,
    trials: int = MIN_TRIALS,
    stream=None,
    resolution: int | None = None,
    budget: int = MIN_MC_POINTS,
    workers: int = 1,
    coupling: str | None = None,
) -> ComparisonReport:
    """|Z(f)| <= |Z(f*)|, or the empirical E|Z_N(F)| <= E|Z_N(F#)|.

    Parameters
    ----------
    kind : {"centroid", "intersection"}
        Dual L_{p,C} centroid bodies, or regularised L_{|p|}^alpha
        intersection bodies (C unused).
    mode : {"exact", "empirical"}
        Exact bodies by quadrature (Monte Carlo with ``budget`` points when
        no quadrature applies), or ``trials`` independent empirical bodies
        built from ``N`` blocks.
    coupling : {None, "polar"}
        By default the f and f* runs use independent streams.  ``"polar"``
        feeds the same uniforms to both planar densities, which keeps the
        expectations and only reduces the variance of the margin.
    """
    C = segment() if C is None else C
    validate_hypotheses(kind, f.n, p, mode, [C] if kind == "centroid" else (), alpha)
    g = rearrange(f)
    params = {"kind": kind, "mode": mode, "p": p, "n": f.n, "family": f.family}
    if kind == "centroid":
        params.update(body=C.kind, m=C.m)
    else:
        params["alpha"] = alpha
    if mode == "empirical":
        params.update(N=N, trials=trials)
    return _compare_densities(
        "rearrangement", f, g, C, p, mode, kind, alpha, N, trials, stream, resolution, budget, workers, coupling, params
    )


def ball_flattening_inequality(
    f: Density,
    C: SupportBody | None = None,
    p: float = 0.5,
    mode: str = "exact",
    kind: str = "centroid",
    alpha: float | None = None,
    N: int = 8,
    trials: int = MIN_TRIALS,
    stream=None,
    resolution: int | None = None,
    budget: int = MIN_MC_POINTS,
    workers: int = 1,
) -> ComparisonReport:
    """|Z_{p,C}(f)| <= |Z_{p,C}(g)| with g the ball flattening of f.

    C must be unconditional.  Allowed p: [0, 1], or [-1, 0) with n/|p| an
    integer (p > -1 for exact bodies).  ``kind="intersection"`` compares
    E|I^alpha_{|p|,N}| and requires ``mode="empirical"``.
    """
    C = segment() if C is None else C
    validate_flattening(kind, f.n, p, mode, C, alpha)
    g = ball_flatten(f)
    params = {"kind": kind, "mode": mode, "p": p, "n": f.n, "family": f.family, "flat_radius": g.radius}
    if kind == "centroid":
        params.update(body=C.kind, m=C.m)
    else:
        params["alpha"] = alpha
    if mode == "empirical":
        params.update(N=N, trials=trials)
    return _compare_densities(
        "ball_flattening", f, g, C, p, mode, kind, alpha, N, trials, stream, resolution, budget, workers, None, params
    )


# ---------------------------------------------------------------------------
# Busemann intersection inequality
# ---------------------------------------------------------------------------

def _indicator_volume(f: Density) -> float:
    if isinstance(f, (UniformBall, UniformCube)):
        return f.volume
    raise ValueError(f"Busemann ratio needs a uniform density on a body, got {f.family}")


def busemann_ratio(f: Density, resolution: int | None = None) -> ComparisonReport:
    """Ratio of the two sides of the Busemann intersection inequality.

    For f uniform on K the central sections are |K cap u-perp| = |K| f_u(0),
    and the ratio is

        integral of |K cap u-perp|^n dsigma / ((omega_{n-1}^n / omega_n^(n-1)) |K|^(n-1)).

    The report compares lhs = ratio with rhs = 1.
    """
    n = f.n
    if n not in (2, 3):
        raise ValueError(f"Busemann ratio is implemented for n in (2, 3), got n = {n}")
    vol = _indicator_volume(f)
    resolution = resolution or DEFAULT_RESOLUTION[n]
    const = unit_ball_volume(n - 1) ** n / unit_ball_volume(n) ** (n - 1) * vol ** (n - 1)

    def sections(U):
        return np.array([vol * float(marginal_1d(f, u)(np.array([0.0]))[0]) for u in U])

    def average(grid):
        return grid.integrate(sections(grid.nodes) ** n)

    fine = sphere_quadrature(n, resolution)
    coarse = sphere_quadrature(n, max(8, resolution // 2))
    a_fine, a_coarse = average(fine), average(coarse)
    ratio = Estimate(a_fine / const, 0.0, len(fine), None, "quadrature", abs(a_fine - a_coarse) / const)
    one = Estimate(1.0, 0.0, 0, None, "exact")
    params = {"n": n, "family": f.family, "volume": vol}
    return _report("busemann", ratio, one, params, {})


# ---------------------------------------------------------------------------
# Limit studies
# ---------------------------------------------------------------------------

def _trend(kind, parameter, values, estimates, target, tolerance, params, provenance, slack_sigma=1.0):
    tv = target.value
    errors = tuple(abs(e.value - tv) / tv for e in estimates)
    err_se = tuple(float(np.hypot(e.stderr, target.stderr)) / tv for e in estimates)
    monotone = all(
        errors[i + 1] <= errors[i] + slack_sigma * float(np.hypot(err_se[i], err_se[i + 1]))
        for i in range(len(errors) - 1)
    )
    final = errors[-1]
    return TrendReport(
        kind,
        parameter,
        tuple(values),
        tuple(estimates),
        target,
        errors,
        err_se,
        monotone,
        final,
        tolerance,
        bool(monotone and final < tolerance),
        params,
        provenance,
    )


def _cm_blocks_volumes(f, m, alpha, p, N, trials, stream, resolution, workers):
    """Volumes of empirical bodies for C_m^alpha with columns [x ~ f, z_1..z_m ~ unif(B)]."""
    n = f.n
    grid = _empirical_grid(n, resolution)
    ball = UniformBall(n)

    def task(size, s):
        gen = s.generator()
        X = np.empty((size, N, m + 1, n))
        X[:, :, 0, :] = f.sample(gen, (size, N))
        X[:, :, 1:, :] = ball.sample(gen, (size, N, m))
        return volumes_from_sums(*empirical_sphere_sums(X, cm_alpha(m, alpha), p, grid, n), n, grid)

    return run_chunked(task, trials, _stream(stream), 250, workers)


def convergence_study(
    kind: str,
    f: Density | None = None,
    p: float | None = None,
    C: SupportBody | None = None,
    values=None,
    N: int = 8,
    alpha: float = 0.2,
    trials: int = MIN_TRIALS,
    stream=None,
    resolution: int | None = None,
    tolerance: float | None = None,
    workers: int = 1,
) -> TrendReport:
    """Error sequence of a limit theorem over a doubling parameter.

    kind : {"N_to_infinity", "alpha_to_zero", "m_to_infinity"}
        ``N_to_infinity``: E|Z_{p,C,N}(f)| against the exact |Z_{p,C}(f)|
        (defaults p = 1/2, C = [-1, 1], N in 4..64, tolerance 2%).
        ``alpha_to_zero``: (2 s_alpha)^(-n) |I^alpha_1(f)| against |I(f)|
        with s_alpha = asinh(1/alpha) (alpha in 0.5..0.05, tolerance 5%).
        ``m_to_infinity``: E|Z_{p,C_m^alpha,N}(F_m)| against
        E|I^alpha_{|p|,N}(f)| (p = -1, m in 2..16); passes when the 95%
        intervals at the last m overlap.
    """
    stream = _stream(stream)
    prov = _provenance(stream)
    if kind == "N_to_infinity":
        f = f or UniformBall(2)
        p = 0.5 if p is None else p
        C = C or segment()
        values = values or (4, 8, 16, 32, 64)
        tolerance = 0.02 if tolerance is None else tolerance
        if p < 0:
            validate_hypotheses("centroid", f.n, p, "exact", [C])
        target = exact_centroid_volume(f, C, p, stream=stream.child(1_000))
        ests = []
        for k, NN in enumerate(values):
            vols = empirical_volumes(f, C, p, NN, trials, stream.child(k), resolution, workers=workers)
            ests.append(mean_estimate(vols, stream.master_seed, "empirical"))
        params = {"p": p, "n": f.n, "family": f.family, "body": C.kind, "trials": trials}
        return _trend(kind, "N", values, ests, target, tolerance, params, prov)
    if kind == "alpha_to_zero":
        f = f or UniformAnnulus(3, 0.9, 1.0)
        values = values or (0.5, 0.2, 0.1, 0.05)
        tolerance = 0.05 if tolerance is None else tolerance
        n = f.n
        target = exact_intersection_volume(f, resolution=resolution)
        ests = [
            exact_intersection_volume(f, -1.0, a, resolution).scaled((2.0 * asinh(1.0 / a)) ** (-n)) for a in values
        ]
        params = {"n": n, "family": f.family}
        return _trend(kind, "alpha", values, ests, target, tolerance, params, {})
    if kind == "m_to_infinity":
        f = f or UniformBall(2)
        p = -1.0 if p is None else p
        values = values or (2, 4, 8, 16)
        n = f.n
        validate_hypotheses("intersection", n, p, "empirical", (), alpha)
        if N < n + 1:
            raise HypothesisError(f"the m-limit needs N >= n+1 = {n + 1}")
        if min(values) < n:
            raise HypothesisError(f"C_m^alpha blocks need m + 1 >= n + 1, so m >= {n}")
        vols = empirical_volumes(f, None, p, N, trials, stream.child(1_000), resolution, workers=workers,
                                 kind="intersection", alpha=alpha)
        target = mean_estimate(vols, stream.master_seed, "empirical")
        ests = [
            mean_estimate(_cm_blocks_volumes(f, m, alpha, p, N, trials, stream.child(k), resolution, workers),
                          stream.master_seed, "empirical")
            for k, m in enumerate(values)
        ]
        params = {"p": p, "n": n, "family": f.family, "alpha": alpha, "N": N, "trials": trials}
        rep = _trend(kind, "m", values, ests, target, np.inf, params, prov)
        last = ests[-1]
        overlap = abs(last.value - target.value) <= 1.959963984540054 * (last.stderr + target.stderr)
        return replace(rep, passed=bool(overlap), tolerance=float("nan"))
    raise ValueError(f"unknown convergence study {kind!r}")


# ---------------------------------------------------------------------------
# Moment bound probe
# ---------------------------------------------------------------------------

def _empirical_radial(X, C: SupportBody, p: float, U) -> np.ndarray:
    """Radial values (T, G) of empirical bodies from blocks X (T, N, m, n)."""
    P = np.einsum("tkmd,gd->tkgm", X, U)
    H = C.support(P)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        if p == 0:
            return np.exp(-np.mean(np.log(H), axis=1))
        return np.mean(H**p, axis=1) ** (-1.0 / p)


def moment_bound_probe(
    f: Density,
    C: SupportBody,
    p: float,
    eps: float = 0.5,
    Ns=None,
    trials: int = MIN_TRIALS,
    stream=None,
    directions: int = 32,
    workers: int = 1,
) -> TrendReport:
    """sup over directions of E rho(Z_{p,C,N}(f), u)^(n+eps) for growing N.

    The expectation is estimated per direction of a grid with ``directions``
    nodes (per circle for n = 2, Gauss-Legendre nodes for n = 3).  Sample
    means of power functions decrease in convex order as N grows, so the
    sequence is expected to stay below its value at the smallest N; it is
    flagged when a later value exceeds that one by more than three
    combined standard errors.
    """
    n = f.n
    if not f.is_compact:
        raise HypothesisError("the moment bound needs a compactly supported density")
    if not C.inradius > 0 and p < 0:
        raise HypothesisError("the moment bound needs a body with positive inradius")
    if p < 0:
        validate_hypotheses("centroid", n, p, "empirical", [C])
    if eps <= 0:
        raise ValueError("eps must be positive")
    stream = _stream(stream)
    Ns = tuple(Ns or (n + 1, 2 * n, 4 * n, 8 * n))
    U = sphere_quadrature(n, max(8, directions) if n == 2 else max(8, directions // 4)).nodes
    power = n + eps
    ests = []
    for k, NN in enumerate(Ns):

        def task(size, s, NN=NN):
            X = f.sample(s.generator(), (size, NN, C.m))
            return _empirical_radial(X, C, p, U) ** power

        R = run_chunked(task, trials, stream.child(k), 500, workers)
        mean = R.mean(axis=0)
        se = R.std(axis=0, ddof=1) / np.sqrt(trials)
        g = int(np.argmax(mean))
        ests.append(Estimate(float(mean[g]), float(se[g]), trials, stream.master_seed, "sup_direction"))
    vals = tuple(e.value for e in ests)
    ses = tuple(e.stderr for e in ests)
    ok = all(
        vals[k] - vals[0] <= SIGMA * float(np.hypot(ses[0], ses[k])) for k in range(1, len(vals))
    ) and all(np.isfinite(vals))
    params = {"p": p, "n": n, "eps": eps, "family": f.family, "body": C.kind, "trials": trials}
    return TrendReport(
        "moment_bound", "N", Ns, tuple(ests), None, vals, ses, bool(ok), float(vals[-1]), float("nan"), bool(ok),
        params, _provenance(stream),
    )


# ---------------------------------------------------------------------------
# Polar measures of random operator images
# ---------------------------------------------------------------------------

MEASURES = ("gaussian", "lebesgue-on-ball")


def _measure_points(n, size, measure, gen):
    if measure == "gaussian":
        return gen.standard_normal((size, n)), 1.0
    if measure == "lebesgue-on-ball":
        return UniformBall(n).sample(gen, size), unit_ball_volume(n)
    raise ValueError(f"unsupported measure {measure!r}; use one of {MEASURES}")


def polar_measure_samples(fs, C: SupportBody, measure: str, trials: int, stream, points: int = 64, workers: int = 1):
    """Per-trial estimates of nu((X C)^o) with column i of X drawn from fs[i].

    (X C)^o = {y : h(C, X^T y) <= 1}; each trial averages the indicator over
    ``points`` draws from nu.
    """
    fs = list(fs)
    n = fs[0].n
    if C.m != len(fs):
        raise ValueError("C must live in R^N with N the number of densities")

    def task(size, s):
        gen = s.generator()
        X = np.stack([fi.sample(gen, size) for fi in fs], axis=1)  # (size, N, n)
        Y, scale = _measure_points(n, size * points, measure, gen)
        Y = Y.reshape(size, points, n)
        H = C.support(np.einsum("tkd,tjd->tjk", X, Y))
        return scale * np.mean(H <= 1.0, axis=1)

    return run_chunked(task, trials, _stream(stream), 500, workers)


def cefpp_probe(
    fs,
    C: SupportBody,
    measure: str = "gaussian",
    variant: str = "rearrangement",
    trials: int = MIN_TRIALS,
    stream=None,
    points: int = 64,
    workers: int = 1,
) -> ComparisonReport:
    """E nu((X C)^o) <= E nu((X# C)^o) for a radial decreasing measure nu.

    variant : {"rearrangement", "ball_flattening"}
        Compare against rearranged columns, or against ball-flattened
        columns (C must then be unconditional).
    """
    if measure not in MEASURES:
        raise ValueError(f"unsupported measure {measure!r}; use one of {MEASURES}")
    fs = list(fs)
    if variant == "rearrangement":
        gs = [rearrange(f) for f in fs]
    elif variant == "ball_flattening":
        if not C.unconditional:
            raise HypothesisError("the ball-flattening variant needs an unconditional body C")
        gs = [ball_flatten(f) for f in fs]
    else:
        raise ValueError(f"unknown variant {variant!r}")
    if trials < MIN_TRIALS:
        raise ValueError(f"probes need at least {MIN_TRIALS} trials")
    stream = _stream(stream)
    a = polar_measure_samples(fs, C, measure, trials, stream.child(0), points, workers)
    b = polar_measure_samples(gs, C, measure, trials, stream.child(1), points, workers)
    seed = stream.master_seed
    lhs, rhs = mean_estimate(a, seed, "membership"), mean_estimate(b, seed, "membership")
    params = {"measure": measure, "variant": variant, "N": len(fs), "n": fs[0].n, "body": C.kind,
              "families": "+".join(sorted({f.family for f in fs})), "trials": trials}
    return _report("cefpp", lhs, rhs, params, _provenance(stream))


__all__ = [
    "HypothesisError",
    "ComparisonReport",
    "TrendReport",
    "compare",
    "validate_hypotheses",
    "validate_flattening",
    "exact_centroid_volume",
    "exact_intersection_volume",
    "empirical_volumes",
    "rearrangement_inequality",
    "ball_flattening_inequality",
    "busemann_ratio",
    "convergence_study",
    "moment_bound_probe",
    "polar_measure_samples",
    "cefpp_probe",
]

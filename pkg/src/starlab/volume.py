"""Volume estimators for star bodies and the Gaussian-mixture machinery.

Four routes to |K| are provided and cross-checked against one another:

* ``volume_radial``: omega_n times the sphere average of rho^n;
* ``volume_gaussian``: Gaussian negative-moment identity
  E rho(K, xi)^s = b_{n,s} * integral of rho^s, pushed to s -> n;
* ``volume_exponential``: |K| = c_{n,p} * integral of exp(-rho(K,x)^-p);
* ``nt_mixture_volume``: Gaussian-mixture formula for sections of l_p balls.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from math import factorial, lgamma

import numpy as np

from .bodies import BlockSampleMatrix, StarBody, block_support, polar_membership
from .estimate import Estimate, mean_estimate
from .numerics import (
    SphereGrid,
    as_generator,
    exponential_volume_constant,
    gaussian_neg_moment,
    nt_constants,
    sample_positive_stable,
    sphere_quadrature,
    stable_neg_moment,
    uniform_sphere,
    unit_ball_volume,
)

MAX_INFINITE_FRACTION = 0.01


class UnboundedBodyError(ValueError):
    """Too many directions with infinite radial value."""


def _radial_on(K, U):
    if isinstance(K, StarBody):
        return np.asarray(K.radial(U), dtype=float)
    return np.asarray(K(U), dtype=float)


def _finite_average(vals, weights, what="radial"):
    fin = np.isfinite(vals)
    n_inf = int((~fin).sum())
    if n_inf > MAX_INFINITE_FRACTION * vals.size:
        raise UnboundedBodyError(
            f"{n_inf} of {vals.size} {what} values are infinite; the body is likely unbounded"
        )
    w = weights[fin]
    return float(np.dot(w, vals[fin]) / w.sum()), n_inf


def volume_radial(K, grid: SphereGrid, seed=None, error_check: bool = True) -> Estimate:
    """omega_n * sum_j w_j rho(K, u_j)^n over the grid.

    Nodes with infinite rho are dropped and the remaining weights
    renormalised; more than 1% infinite nodes raises ``UnboundedBodyError``.
    For deterministic circle grids the discrepancy with the independent
    midpoint rule of half the resolution is reported as ``quad_error``.  A
    subset of the fine nodes would not do: for bodies with a reflection
    symmetry the even and odd nodes can give identical sums.
    """
    n = grid.n
    rho = _radial_on(K, grid.nodes)
    avg, n_inf = _finite_average(rho**n, grid.weights)
    vol = unit_ball_volume(n) * avg
    if not grid.deterministic:
        vals = unit_ball_volume(n) * rho[np.isfinite(rho)] ** n
        est = mean_estimate(vals, seed, "radial_mc")
        return Estimate(est.value, est.stderr, est.n_samples, seed, "radial_mc")
    qerr = 0.0
    if error_check and n == 2 and len(grid) >= 16:
        coarse = sphere_quadrature(2, len(grid) // 2)
        half, _ = _finite_average(_radial_on(K, coarse.nodes) ** n, coarse.weights)
        qerr = abs(vol - unit_ball_volume(n) * half)
    return Estimate(vol, 0.0, len(grid) - n_inf, seed, "radial", qerr)


def _richardson_weights(h):
    """Lagrange weights that extrapolate values at nodes h to h = 0."""
    h = np.asarray(h, dtype=float)
    w = np.ones_like(h)
    for i in range(h.size):
        for j in range(h.size):
            if i != j:
                w[i] *= (0.0 - h[j]) / (h[i] - h[j])
    return w


def volume_gaussian(
    K,
    n: int,
    s: float,
    budget: int,
    rng,
    mode: str = "conditioned",
) -> Estimate:
    """Estimate of the sphere average of rho^s from Gaussian draws.

    ``raw`` averages rho(K, xi)^s / b_{n,s}; its variance is infinite once
    s >= n/2.  ``conditioned`` integrates the radial part of xi exactly,
    which by degree -1 homogeneity replaces rho(K, xi)^s / b_{n,s} with
    rho(K, xi/||xi||)^s and has finite variance for every s < n.
    """
    if not 0.0 < s < n:
        raise ValueError(f"need 0 < s < n, got s={s}")
    gen = as_generator(rng)
    xi = gen.standard_normal((budget, n))
    if mode == "raw":
        vals = _radial_on(K, xi) ** s / gaussian_neg_moment(n, s)
    elif mode == "conditioned":
        r = np.linalg.norm(xi, axis=1)
        vals = _radial_on(K, xi / r[:, None]) ** s
    else:
        raise ValueError(f"unknown mode {mode!r}")
    fin = np.isfinite(vals)
    if (~fin).sum() > MAX_INFINITE_FRACTION * budget:
        raise UnboundedBodyError("too many infinite radial values")
    return mean_estimate(vals[fin], None, f"gaussian_{mode}")


def volume_gaussian_extrapolated(K, n: int, budget: int, rng, ells=(2, 4, 8, 16)) -> Estimate:
    """|K| from the Gaussian identity at s = n - 1/l, extrapolated to s = n.

    All exponents use the same Gaussian draws; the per-draw Lagrange
    combination is averaged so the standard error accounts for the
    correlation between exponents.
    """
    h = 1.0 / np.asarray(ells, dtype=float)
    lw = _richardson_weights(h)
    gen = as_generator(rng)
    xi = gen.standard_normal((budget, n))
    u = xi / np.linalg.norm(xi, axis=1, keepdims=True)
    rho = _radial_on(K, u)
    fin = np.isfinite(rho)
    if (~fin).sum() > MAX_INFINITE_FRACTION * budget:
        raise UnboundedBodyError("too many infinite radial values")
    rho = rho[fin]
    combined = sum(w * rho ** (n - hh) for w, hh in zip(lw, h))
    est = mean_estimate(unit_ball_volume(n) * combined, None, "gaussian_extrapolated")
    return est


def volume_exponential(
    K, n: int, p: float, mode: str = "polar", grid: SphereGrid = None, budget: int = 100_000, rng=None
) -> Estimate:
    """|K| = c_{n,p} * integral over R^n of exp(-rho(K,x)^-p).

    ``polar``: the radial integral is done in closed form per direction,
    integral_0^inf r^(n-1) exp(-(r/rho)^p) dr = rho^n Gamma(n/p)/p, and the
    directions use ``grid``.  ``direct``: importance sampling in R^n from
    the radially symmetric law x = s G^(1/p) theta, G ~ Gamma(n/p),
    theta uniform, with scale s above the largest radial value seen in a
    pilot run so that the weights stay bounded.
    """
    if p <= 0:
        raise ValueError("p must be positive")
    c = exponential_volume_constant(n, p)
    area = n * unit_ball_volume(n)
    if mode == "polar":
        if grid is None:
            raise ValueError("polar mode needs a sphere grid")
        rho = _radial_on(K, grid.nodes)
        radial_int = np.exp(n * np.log(rho) + lgamma(n / p) - np.log(p))
        avg, n_inf = _finite_average(radial_int, grid.weights)
        if grid.deterministic:
            return Estimate(c * area * avg, 0.0, len(grid) - n_inf, None, "exponential_polar")
        vals = c * area * radial_int[np.isfinite(radial_int)]
        return mean_estimate(vals, None, "exponential_polar_mc")
    if mode != "direct":
        raise ValueError(f"unknown mode {mode!r}")
    if rng is None:
        raise ValueError("direct mode needs a random stream")
    gen = as_generator(rng)
    pilot = _radial_on(K, uniform_sphere(n, 4096, gen))
    pilot = pilot[np.isfinite(pilot)]
    scale = 1.25 * float(pilot.max())
    theta = uniform_sphere(n, budget, gen)
    r = scale * gen.standard_gamma(n / p, budget) ** (1.0 / p)
    rho = _radial_on(K, theta)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        expo = -((r / rho) ** p) + (r / scale) ** p
    vals = np.where(np.isfinite(expo), np.exp(expo), 0.0) * scale**n * unit_ball_volume(n)
    return mean_estimate(vals, None, "exponential_direct")


def polar_volume_determinant(X, w=None) -> Estimate:
    """|(X_W B_2^N) deg| = omega_n det(sum_i w_i x_i x_i^T)^(-1/2); X has shape (n, N)."""
    X = np.asarray(X, dtype=float)
    n, N = X.shape
    w = np.ones(N) if w is None else np.asarray(w, dtype=float)
    if N < n:
        raise ValueError(f"need N >= n, got N={N}, n={n}")
    G = (X * w) @ X.T
    rank = np.linalg.matrix_rank(G)
    if rank < n:
        raise ValueError(f"sum of w_i x_i x_i^T has rank {rank} < {n}")
    sign, logdet = np.linalg.slogdet(G)
    return Estimate(float(unit_ball_volume(n) * np.exp(-0.5 * logdet)), method="determinant")


@dataclass(frozen=True)
class MixtureConfig:
    """Settings for :func:`nt_mixture_volume`."""

    p: float
    budget: int = 100_000
    inner: str = "determinant"
    grid_resolution: int = 256

    def __post_init__(self):
        if not 0 < self.p < 2:
            raise ValueError("p must lie in (0, 2)")
        if self.budget < 1000:
            raise ValueError("mixture budget must be at least 1000")
        if self.inner not in ("determinant", "sphere-quadrature"):
            raise ValueError(f"unknown inner method {self.inner!r}")


def _ratio_estimate(a, b, method):
    R = float(a.sum() / b.sum())
    se = float(np.sqrt(np.sum((a - R * b) ** 2)) / b.sum())
    return Estimate(R, se, int(a.size), None, method)


def nt_mixture_volume(X, cfg: MixtureConfig, rng, bodies=None) -> Estimate:
    """|{y : ||X^T y||_p <= 1}| = |B_p^N cap Im X^T| / det(X X^T)^(1/2).

    Uses exp(-|t|^p) as a mixture of Gaussians over square-root-tilted
    positive (p/2)-stable weights w_i:

        |K| = a_{N,n,p} pi^(n/2) E_tilt[ sqrt(w_1...w_N) det(sum w_i x_i x_i^T)^(-1/2) ].

    The tilted expectation is a self-normalised importance average over
    untilted stable draws.  With ``bodies`` (one per column block) the
    determinant is replaced by the polar volume of the body with
    h(u)^2 = sum_i w_i h(C_i, X_i^T u)^2 computed on a sphere grid.
    """
    X = np.asarray(X, dtype=float) if not isinstance(X, BlockSampleMatrix) else X
    if isinstance(X, BlockSampleMatrix):
        n, N = X.n, X.N
    else:
        n, N = X.shape
    p = cfg.p
    const = nt_constants(N, n, p)
    gen = as_generator(rng)
    W = sample_positive_stable(0.5 * p, gen, (cfg.budget, N))
    log_iw = -0.5 * np.sum(np.log(W), axis=1) - N * np.log(stable_neg_moment(0.5 * p, 0.5))
    iw = np.exp(log_iw)
    if bodies is None and cfg.inner == "determinant":
        if isinstance(X, BlockSampleMatrix):
            X = X.columns
        if np.linalg.matrix_rank(X) < n:
            raise ValueError("X must have full rank n")
        G = np.einsum("in,bn,jn->bij", X, W, X)
        _, logdet = np.linalg.slogdet(G)
        F = np.exp(0.5 * np.sum(np.log(W), axis=1) - 0.5 * logdet)
    else:
        Xb = X if isinstance(X, BlockSampleMatrix) else BlockSampleMatrix(X, (1,) * N)
        if bodies is None:
            from .bodies import segment

            bodies = [segment()] * N
        grid = sphere_quadrature(n, cfg.grid_resolution)
        H2 = np.stack([block_support(C, B, grid.nodes) ** 2 for C, B in zip(bodies, Xb.blocks)], axis=1)
        # integral of exp(-sum_i w_i h_i(y)^2) dy = pi^(n/2) * sphere average of h_w^-n,
        # which reduces to pi^(n/2) det(sum w_i x_i x_i^T)^(-1/2) for intervals
        inner = np.empty(cfg.budget)
        for a in range(0, cfg.budget, 4096):
            hw2 = W[a : a + 4096] @ H2.T
            inner[a : a + 4096] = (hw2 ** (-0.5 * n)) @ grid.weights
        F = np.exp(0.5 * np.sum(np.log(W), axis=1)) * inner
    est = _ratio_estimate(iw * F, iw, "nt_mixture")
    return est.scaled(const.a_Nnp * np.pi ** (0.5 * n))


def section_volume_quadrature(X, p: float, resolution: int = 4096) -> Estimate:
    """|{y : ||X^T y||_p <= 1}| by radial quadrature of rho(y) = 1/||X^T y||_p."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    grid = sphere_quadrature(n, resolution)
    body = StarBody(n, lambda U: np.sum(np.abs(U @ X) ** p, axis=-1) ** (-1.0 / p))
    return volume_radial(body, grid)


def gaussian_measure_polar(X: BlockSampleMatrix, bodies, t, budget: int, rng) -> Estimate:
    """gamma_n of the intersection of the polars (t_i X_i C_i) deg, by Monte Carlo."""
    gen = as_generator(rng)
    u = gen.standard_normal((budget, X.n))
    hit = polar_membership(u, X, bodies, t).astype(float)
    est = mean_estimate(hit, None, "gaussian_measure")
    p = est.value
    return Estimate(p, float(np.sqrt(max(p * (1 - p), 1.0 / budget**2) / budget)), budget, None, "gaussian_measure")


@dataclass(frozen=True)
class IndicatorReport:
    """Outcome of an indicator-representation identity check at one direction."""

    target: float
    estimate: Estimate
    z: float
    passed: bool
    inconclusive: bool
    exponent: float
    p: float


def _multi_indices(N, k):
    for ks in product(range(k + 1), repeat=N):
        if sum(ks) == k:
            yield ks


def _orthant_integral(X, bodies, u, exps, active, budget, gen):
    """Integral over t in R_+^|active| of the membership indicator.

    Block i (if active) enters with scale t_i^exps[i]; inactive blocks are
    dropped.  Importance sampling from independent exponentials whose mean
    is the block's threshold h_i^(-1/exps[i]).
    """
    idx = [i for i in range(X.N) if active[i]]
    blocks = X.blocks
    sub = BlockSampleMatrix(np.concatenate([blocks[i] for i in idx], axis=1), tuple(X.widths[i] for i in idx))
    subbodies = [bodies[i] for i in idx]
    h = np.array([float(block_support(bodies[i], blocks[i], u)) for i in idx])
    e = np.array([exps[i] for i in idx])
    with np.errstate(divide="ignore"):
        scale = np.where(h > 0, h ** (-1.0 / e), 1.0)
    lam = 1.0 / scale
    T = gen.standard_exponential((budget, len(idx))) * scale
    logq = np.sum(np.log(lam) - lam * T, axis=1)
    hits = polar_membership(u, sub, subbodies, T**e)
    return np.where(hits, np.exp(-logq), 0.0)


def indicator_rep_check(
    X: BlockSampleMatrix,
    bodies,
    p: float,
    u,
    budget: int = 200_000,
    rng=None,
    s: float = None,
    k: int = 1,
    z_tol: float = 4.0,
    max_rel_se: float = 0.05,
) -> IndicatorReport:
    """Check an orthant-integral representation of a radial power at u.

    p = 0: rho(u)^s = prod_i h_i^(-s/N) equals the integral over R_+^N of
    the indicator of u in the intersection of (t_i^(N/s) X_i C_i) deg.

    -1 <= p < 0, q = |p|: rho(u)^(kq) = (N^-1 sum_i h_i^-q)^k expands by the
    multinomial theorem into N^-k sum over k_vec with |k_vec| = k of
    binom(k; k_vec) prod_i h_i^(-k_i q); each product is the orthant integral
    of the indicator of u in the intersection of (t_i^(1/(k_i q)) X_i C_i) deg
    over the blocks with k_i > 0.
    """
    bodies = list(bodies) if isinstance(bodies, (list, tuple)) else [bodies] * X.N
    gen = as_generator(rng)
    u = np.asarray(u, dtype=float)
    h = np.array([float(block_support(C, B, u)) for C, B in zip(bodies, X.blocks)])
    N = X.N
    if p == 0:
        if s is None or s <= 0:
            raise ValueError("p = 0 needs an exponent s > 0")
        target = float(np.prod(h ** (-s / N)))
        vals = _orthant_integral(X, bodies, u, [N / s] * N, [True] * N, budget, gen)
        est = mean_estimate(vals, None, "indicator_p0")
        exponent = s
    elif -1 <= p < 0:
        q = -p
        if k < 1 or k * q >= X.n:
            raise ValueError(f"need k >= 1 and k|p| < n, got k={k}, |p|={q}, n={X.n}")
        target = float(np.mean(h ** (-q)) ** k)
        value, var = 0.0, 0.0
        for ks in _multi_indices(N, k):
            coef = factorial(k) / np.prod([factorial(x) for x in ks]) / N**k
            exps = [1.0 / (ki * q) if ki > 0 else 1.0 for ki in ks]
            vals = _orthant_integral(X, bodies, u, exps, [ki > 0 for ki in ks], budget, gen)
            e = mean_estimate(vals)
            value += coef * e.value
            var += (coef * e.stderr) ** 2
        est = Estimate(value, float(np.sqrt(var)), budget, None, "indicator_multinomial")
        exponent = k * q
    else:
        raise ValueError("indicator representations need -1 <= p <= 0")
    z = (est.value - target) / est.stderr if est.stderr > 0 else 0.0
    inconclusive = est.stderr > max_rel_se * target
    return IndicatorReport(target, est, float(z), bool(abs(z) <= z_tol and not inconclusive), bool(inconclusive), exponent, p)


# ---------------------------------------------------------------------------
# Batched empirical volumes
# ---------------------------------------------------------------------------

def volumes_from_sums(sums, finite_weight, n_inf, n: int, grid: SphereGrid) -> np.ndarray:
    """Per-trial omega_n * average of rho^n, enforcing the infinite-node limit."""
    if np.any(n_inf > MAX_INFINITE_FRACTION * len(grid)):
        worst = int(np.max(n_inf))
        raise UnboundedBodyError(f"{worst} of {len(grid)} grid nodes have infinite radial value")
    return unit_ball_volume(n) * sums / finite_weight


__all__ = [
    "UnboundedBodyError",
    "volume_radial",
    "volume_gaussian",
    "volume_gaussian_extrapolated",
    "volume_exponential",
    "polar_volume_determinant",
    "MixtureConfig",
    "nt_mixture_volume",
    "section_volume_quadrature",
    "gaussian_measure_polar",
    "IndicatorReport",
    "indicator_rep_check",
    "volumes_from_sums",
    "Estimate",
]

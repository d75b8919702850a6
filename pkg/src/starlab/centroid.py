"""Dual centroid bodies and intersection bodies, exact and empirical.

For a density f on R^n, a body C in R^m and p >= -1 the dual centroid body
has radial function

    rho(u)^(-p) = E h(C, (<x_1,u>, ..., <x_m,u>))^p,      x_j i.i.d. ~ f,

with log rho(u) = -E log h(...) when p = 0.  Replacing the expectation by
an average over N blocks X_i of sample columns gives the empirical body.
The regularised intersection bodies use
rho(u)^q = E (<x,u>^2 + alpha^2 ||u||^2)^(-q/2) with q = |p|.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import kernels
from .bodies import (
    BlockSampleMatrix,
    StarBody,
    SupportBody,
    block_support,
    ellipsoid_polar_radial,
)
from .densities import Density, marginal_1d
from .estimate import Estimate
from .numerics import as_generator


@dataclass(frozen=True)
class RadialValues:
    """Radial function values at a set of directions, with standard errors."""

    values: np.ndarray
    stderr: np.ndarray
    method: str
    n_samples: int = 0


def _unit_rows(u):
    u = np.atleast_2d(np.asarray(u, dtype=float))
    norms = np.linalg.norm(u, axis=1)
    if np.any(norms == 0):
        raise ValueError("direction must be nonzero")
    return u / norms[:, None], norms


def _check_p(p):
    if not p >= -1.0:
        raise ValueError(f"p must be at least -1, got {p}")


def marginal_moment(m1d, p: float) -> float:
    """E|T|^p (E log|T| for p = 0) for a one-dimensional density.

    Integrable endpoint singularities at t = 0 are handled by algebraic and
    logarithmic quadrature weights.  Returns inf when the integral diverges
    (p <= -1 with positive density at 0).
    """
    if p <= -1.0 and m1d(np.array([0.0]))[0] > 0:
        return np.inf
    pts = sorted({m1d.lo, m1d.hi, 0.0, *[b for b in m1d.breakpoints if m1d.lo < b < m1d.hi]})
    pts = [x for x in pts if m1d.lo <= x <= m1d.hi]
    pdf = lambda t: float(m1d(np.array([t]))[0])  # noqa: E731
    weight = "alg-loga" if p == 0 else "alg"
    wvar = (0.0, 0.0) if p == 0 else (p, 0.0)
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if b <= a:
            continue
        if b == 0.0:
            val = integrate.quad(lambda s: pdf(-s), 0.0, -a, weight=weight, wvar=wvar, limit=200)[0]
        elif a == 0.0:
            val = integrate.quad(pdf, 0.0, b, weight=weight, wvar=wvar, limit=200)[0]
        elif p == 0:
            val = integrate.quad(lambda t: pdf(t) * np.log(abs(t)), a, b, limit=200)[0]
        else:
            val = integrate.quad(lambda t: pdf(t) * abs(t) ** p, a, b, limit=200)[0]
        total += val
    return total


def _radial_from_moment(mom, p):
    if p == 0:
        return float(np.exp(-mom))
    if mom == 0:
        return np.inf
    if not np.isfinite(mom):
        return np.inf if p < 0 else 0.0
    return float(mom ** (-1.0 / p))


def _tensor_moment(f: Density, C: SupportBody, p: float, u, nodes: int):
    """E h^p(C, T) with T_j i.i.d. from the marginal f_u, by tensor Gauss-Legendre."""
    m1d = marginal_1d(f, u)
    pts = sorted({m1d.lo, m1d.hi, 0.0, *[b for b in m1d.breakpoints if m1d.lo < b < m1d.hi]})
    x, w = np.polynomial.legendre.leggauss(nodes)
    tt, ww = [], []
    for a, b in zip(pts[:-1], pts[1:]):
        if b > a:
            tt.append(0.5 * (b - a) * x + 0.5 * (a + b))
            ww.append(0.5 * (b - a) * w)
    t = np.concatenate(tt)
    wt = np.concatenate(ww) * m1d(t)
    keep = wt > 0
    t, wt = t[keep], wt[keep]
    grids = np.meshgrid(*([t] * C.m), indexing="ij")
    T = np.stack(grids, axis=-1).reshape(-1, C.m)
    W = wt
    for _ in range(C.m - 1):
        W = np.multiply.outer(W, wt).ravel()
    H = C.support(T)
    with np.errstate(divide="ignore"):
        vals = np.log(H) if p == 0 else H**p
    return float(np.dot(W, vals))


def resolve_centroid_method(f: Density, C: SupportBody, p: float, method: str = "auto") -> str:
    """The method ``dual_centroid_radial`` uses for ``method="auto"``."""
    if method != "auto":
        return method
    try:
        marginal_1d(f, np.eye(f.n)[0])
    except NotImplementedError:
        return "monte_carlo"
    if C.m == 1 and C.kind in ("segment", "ball"):
        return "quadrature"
    if C.m <= 3 and p >= 0:
        return "tensor"
    return "monte_carlo"


def dual_centroid_radial(
    f: Density,
    C: SupportBody,
    p: float,
    u,
    budget: int = 100_000,
    rng=None,
    method: str = "auto",
    nodes: int = 48,
) -> RadialValues:
    """Radial function of the dual L_{p,C} centroid body of f.

    Parameters
    ----------
    u : array, shape (n,) or (G, n)
        Nonzero directions; homogeneity of degree -1 is applied.
    method : {"auto", "quadrature", "tensor", "monte_carlo"}
        ``quadrature`` needs C to be the interval [-1, 1] and a closed-form
        marginal of f.  ``tensor`` uses a tensor Gauss rule over m marginal
        copies (m <= 3, p >= 0).  ``monte_carlo`` draws ``budget`` blocks
        shared by all directions.
    """
    _check_p(p)
    U, norms = _unit_rows(u)
    if U.shape[1] != f.n:
        raise ValueError("direction dimension differs from the density dimension")
    is_interval = C.m == 1 and C.kind in ("segment", "ball")
    method = resolve_centroid_method(f, C, p, method)
    radial_f = getattr(f, "is_rotation_invariant", False)
    if method == "quadrature":
        if not is_interval:
            raise ValueError("quadrature mode needs C = [-1, 1]")
        scale = C.params.get("radius", 1.0)
        dirs = U[:1] if radial_f else U
        vals = [_radial_from_moment(marginal_moment(marginal_1d(f, d), p), p) / scale for d in dirs]
        vals = np.full(len(U), vals[0]) if radial_f else np.asarray(vals)
        return RadialValues(vals / norms, np.zeros(len(U)), "quadrature")
    if method == "tensor":
        if C.m > 3 or p < 0:
            raise ValueError("tensor quadrature is limited to m <= 3 and p >= 0")
        dirs = U[:1] if radial_f else U
        vals = [_radial_from_moment(_tensor_moment(f, C, p, d, nodes), p) for d in dirs]
        vals = np.full(len(U), vals[0]) if radial_f else np.asarray(vals)
        return RadialValues(vals / norms, np.zeros(len(U)), "tensor")
    if method != "monte_carlo":
        raise ValueError(f"unknown method {method!r}")
    if rng is None:
        raise ValueError("Monte Carlo mode needs a random stream")
    gen = as_generator(rng)
    X = f.sample(gen, (budget, C.m))  # (budget, m, n)
    P = np.einsum("bmd,gd->gbm", X, U)
    H = C.support(P)  # (G, budget)
    with np.errstate(divide="ignore"):
        vals = np.log(H) if p == 0 else H**p
    mu = vals.mean(axis=1)
    se_mu = vals.std(axis=1, ddof=1) / np.sqrt(budget)
    if p == 0:
        rho = np.exp(-mu)
        se = rho * se_mu
    else:
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            rho = mu ** (-1.0 / p)
            se = np.abs(rho / (p * mu)) * se_mu
    return RadialValues(rho / norms, se / norms, "monte_carlo", budget)


def dual_centroid_body(f: Density, C: SupportBody, p: float, **kwargs) -> StarBody:
    """StarBody wrapper around :func:`dual_centroid_radial`."""

    def rho(x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, f.n)
        return dual_centroid_radial(f, C, p, flat, **kwargs).values.reshape(x.shape[:-1])

    return StarBody(f.n, rho, f"dual_centroid(p={p})")


# ---------------------------------------------------------------------------
# Empirical bodies
# ---------------------------------------------------------------------------

def check_block_dimensions(bodies, n: int, p: float, allow_unbounded: bool = False):
    """Enforce dim(C_i) >= n + 1 for p < 0 empirical volume work."""
    if p < 0 and not allow_unbounded:
        small = [C.m for C in bodies if C.m < n + 1]
        if small:
            raise ValueError(
                f"p < 0 empirical bodies need every block dimension >= n+1 = {n + 1}; got {small}"
                " (pass allow_unbounded=True for radial-function-only work)"
            )


def empirical_dual_centroid(X: BlockSampleMatrix, bodies, p: float, allow_unbounded: bool = True) -> StarBody:
    """Empirical body with rho(u)^(-p) = N^-1 sum_i h(C_i, X_i^T u)^p."""
    _check_p(p)
    bodies = list(bodies) if isinstance(bodies, (list, tuple)) else [bodies] * X.N
    if len(bodies) != X.N or any(C.m != w for C, w in zip(bodies, X.widths)):
        raise ValueError("bodies must match the block widths")
    check_block_dimensions(bodies, X.n, p, allow_unbounded)

    def rho(u):
        H = np.stack([block_support(C, B, u) for C, B in zip(bodies, X.blocks)], axis=-1)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            if p == 0:
                return np.exp(-np.mean(np.log(H), axis=-1))
            m = np.mean(H**p, axis=-1)
            return np.where(m == 0, np.inf, m ** (-1.0 / p))

    return StarBody(X.n, rho, f"empirical_dual_centroid(p={p}, N={X.N})")


def classical_centroid_support(X, p: float, u) -> np.ndarray:
    """Support function of the empirical L_p centroid body, columns of X (n, N)."""
    if not p >= 1:
        raise ValueError("the classical centroid body needs p >= 1")
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    P = np.abs(np.asarray(u, dtype=float) @ X)
    if np.isinf(p):
        return np.max(P, axis=-1)
    return np.mean(P**p, axis=-1) ** (1.0 / p)


def intersection_radial(f: Density, u) -> np.ndarray:
    """rho(I(f), u) = integral of f over u-perp, the marginal density at 0."""
    U, norms = _unit_rows(u)
    if getattr(f, "is_rotation_invariant", False):
        v = float(marginal_1d(f, U[0])(np.array([0.0]))[0])
        return np.full(len(U), v) / norms
    return np.array([float(marginal_1d(f, d)(np.array([0.0]))[0]) for d in U]) / norms


def intersection_body(f: Density) -> StarBody:
    return StarBody(f.n, lambda x: intersection_radial(f, np.reshape(x, (-1, f.n))).reshape(np.shape(x)[:-1]), "I(f)")


def _check_lp_intersection(p, alpha):
    if not -1.0 <= p < 0.0:
        raise ValueError(f"need -1 <= p < 0, got {p}")
    if alpha <= 0:
        raise ValueError("alpha must be positive")


def lp_intersection_radial(
    f: Density, p: float, alpha: float, u, budget: int = 100_000, rng=None, method: str = "auto"
) -> RadialValues:
    """rho(u)^q = E (<x,u>^2 + alpha^2||u||^2)^(-q/2), q = |p|."""
    _check_lp_intersection(p, alpha)
    q = -p
    U, norms = _unit_rows(u)
    if method == "auto":
        try:
            marginal_1d(f, U[0])
            method = "quadrature"
        except NotImplementedError:
            method = "monte_carlo"
    if method == "quadrature":
        dirs = U[:1] if getattr(f, "is_rotation_invariant", False) else U
        vals = []
        for d in dirs:
            m1d = marginal_1d(f, d)
            vals.append(m1d.integrate(lambda t: (t * t + alpha**2) ** (-0.5 * q)) ** (1.0 / q))
        vals = np.full(len(U), vals[0]) if len(dirs) == 1 and len(U) > 1 else np.asarray(vals)
        return RadialValues(vals / norms, np.zeros(len(U)), "quadrature")
    if rng is None:
        raise ValueError("Monte Carlo mode needs a random stream")
    X = f.sample(as_generator(rng), budget)
    vals = (np.square(U @ X.T) + alpha**2) ** (-0.5 * q)
    mu = vals.mean(axis=1)
    se_mu = vals.std(axis=1, ddof=1) / np.sqrt(budget)
    rho = mu ** (1.0 / q)
    se = rho / (q * mu) * se_mu
    return RadialValues(rho / norms, se / norms, "monte_carlo", budget)


def empirical_lp_intersection(X, p: float, alpha: float, u) -> np.ndarray:
    """rho(u)^q = N^-1 sum_i rho(E^alpha(X_i), u)^q, columns X_i of X (n, N)."""
    _check_lp_intersection(p, alpha)
    q = -p
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    terms = np.stack([ellipsoid_polar_radial(X[:, i], alpha, u) ** q for i in range(X.shape[1])], axis=-1)
    return np.mean(terms, axis=-1) ** (1.0 / q)


def empirical_lp_intersection_body(X, p: float, alpha: float) -> StarBody:
    X = np.asarray(X, dtype=float)
    return StarBody(X.shape[0], lambda u: empirical_lp_intersection(X, p, alpha, u), "empirical_lp_intersection")


# ---------------------------------------------------------------------------
# Batched sphere sums for many empirical draws
# ---------------------------------------------------------------------------

def sample_blocks(f: Density, N: int, m: int, trials: int, rng, coupled_uniforms=None) -> np.ndarray:
    """Columns for ``trials`` empirical bodies, shape (trials, N, m, n)."""
    if coupled_uniforms is not None:
        return f.from_uniforms(coupled_uniforms)
    return f.sample(as_generator(rng), (trials, N, m))


def empirical_sphere_sums(X, bodies: SupportBody, p: float, grid, npow: float):
    """Per-trial sums_g w_g rho_g^npow for empirical dual centroid bodies.

    ``X`` has shape (T, N, m, n) and every block uses the same body C.
    Dispatches to compiled kernels for intervals, unit balls and C_m^alpha
    bodies, and evaluates the support function in numpy otherwise.
    """
    C = bodies
    U, w = grid.nodes, grid.weights
    T, N, m, n = X.shape
    if C.m != m:
        raise ValueError("block width differs from the body dimension")
    if m == 1 and C.kind in ("segment", "ball"):
        scale = C.params.get("radius", 1.0)
        s, fw, ninf = kernels.segment_sums(X[:, :, 0, :] * scale, U, w, p, npow)
        return s, fw, ninf
    if C.kind == "ball":
        return kernels.ball_block_sums(X, U, w, p, npow)
    if C.kind == "cm_alpha":
        return kernels.cm_alpha_block_sums(X, U, w, C.params["alpha"], p, npow)
    out = []
    step = max(1, 2_000_000 // max(1, N * m * len(w)))
    for a in range(0, T, step):
        P = np.einsum("tkmd,gd->tkgm", X[a : a + step], U)
        H = C.support(P)
        out.append(kernels.power_mean_sums(H, w, p, npow))
    return tuple(np.concatenate(parts) for parts in zip(*out))


def empirical_intersection_sums(X, alpha: float, q: float, grid, npow: float):
    """Per-trial sphere sums for empirical L_q^alpha intersection bodies, X (T, N, n)."""
    return kernels.ellipsoid_sums(X, grid.nodes, grid.weights, alpha, q, npow)


def radial_estimate(rv: RadialValues, index: int = 0) -> Estimate:
    return Estimate(float(rv.values[index]), float(rv.stderr[index]), rv.n_samples, None, rv.method)


__all__ = [
    "RadialValues",
    "marginal_moment",
    "resolve_centroid_method",
    "dual_centroid_radial",
    "dual_centroid_body",
    "check_block_dimensions",
    "empirical_dual_centroid",
    "classical_centroid_support",
    "intersection_radial",
    "intersection_body",
    "lp_intersection_radial",
    "empirical_lp_intersection",
    "empirical_lp_intersection_body",
    "sample_blocks",
    "empirical_sphere_sums",
    "empirical_intersection_sums",
    "radial_estimate",
]

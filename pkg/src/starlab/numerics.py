"""Special-function constants, random sampling and sphere quadrature.

Everything random in the package is driven by :class:`RngStream`, a
(master_seed, stream path) pair that maps deterministically onto a numpy
``SeedSequence``.  Streams are split by index, never shared, so results do
not depend on how work is distributed over processes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import exp, lgamma, log, pi

import numpy as np
from scipy.special import roots_legendre


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RngStream:
    """Addressable random stream.

    Parameters
    ----------
    master_seed : int
        64-bit experiment seed.
    stream_index : int
        Index of this stream below the master seed.
    path : tuple of int
        Further sub-stream indices created by :meth:`child`.
    """

    master_seed: int
    stream_index: int = 0
    path: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if int(self.stream_index) < 0:
            raise ValueError("stream_index must be nonnegative")

    def seed_sequence(self) -> np.random.SeedSequence:
        key = (int(self.stream_index),) + tuple(int(i) for i in self.path)
        return np.random.SeedSequence(entropy=int(self.master_seed), spawn_key=key)

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at draw index 0 of this stream."""
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))

    def child(self, index: int) -> "RngStream":
        """Independent sub-stream number ``index``."""
        return RngStream(self.master_seed, self.stream_index, self.path + (int(index),))


def as_generator(rng) -> np.random.Generator:
    """Accept an :class:`RngStream`, a ``Generator`` or an integer seed."""
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"cannot build a random generator from {type(rng).__name__}")


# ---------------------------------------------------------------------------
# Constants
# ---------------------------------------------------------------------------

def unit_ball_volume(n: int) -> float:
    """Volume of the Euclidean unit ball in R^n, pi^(n/2) / Gamma(n/2 + 1)."""
    if int(n) != n or n < 1:
        raise ValueError(f"dimension must be a positive integer, got {n}")
    return exp(0.5 * n * log(pi) - lgamma(0.5 * n + 1.0))


def log_unit_ball_volume(n: int) -> float:
    if int(n) != n or n < 1:
        raise ValueError(f"dimension must be a positive integer, got {n}")
    return 0.5 * n * log(pi) - lgamma(0.5 * n + 1.0)


def gaussian_neg_moment(n: int, s: float) -> float:
    """Negative moment E ||xi||^(-s) of a standard Gaussian vector in R^n.

    Equals n Gamma((n-s)/2) / (2^(s/2+1) Gamma(n/2+1)) for 0 < s < n.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"dimension must be a positive integer, got {n}")
    if not 0.0 < s < n:
        raise ValueError(f"need 0 < s < n, got s={s}, n={n}")
    return exp(log(n) + lgamma(0.5 * (n - s)) - (0.5 * s + 1.0) * log(2.0) - lgamma(0.5 * n + 1.0))


@dataclass(frozen=True)
class NTConstants:
    """Normalising constants of the Gaussian-mixture volume formula."""

    c_np: float
    d_p: float
    a_Nnp: float
    log_a_Nnp: float


def nt_constants(N: int, n: int, p: float) -> NTConstants:
    """Constants c_{n,p}, d_p and a_{N,n,p} = c_{n,p} d_p^N.

    ``c_{n,p} = 1/Gamma(1+n/p)`` turns an exponential integral into a volume.
    ``d_p = 2 Gamma(1+1/p)/sqrt(pi)`` is the constant for which
    ``exp(-|x|^p) = d_p E exp(-x^2 w)`` with ``w`` drawn from the
    square-root-tilted normalised positive (p/2)-stable law.
    """
    if N < 1 or n < 1:
        raise ValueError("N and n must be positive")
    if not 0.0 < p < 2.0:
        raise ValueError(f"need 0 < p < 2, got {p}")
    log_c = -lgamma(1.0 + n / p)
    log_d = log(2.0) + lgamma(1.0 + 1.0 / p) - 0.5 * log(pi)
    log_a = log_c + N * log_d
    return NTConstants(exp(log_c), exp(log_d), exp(log_a), log_a)


def exponential_volume_constant(n: int, p: float) -> float:
    """c_{n,p} = 1/Gamma(1+n/p), defined for every p > 0."""
    if p <= 0:
        raise ValueError(f"need p > 0, got {p}")
    return exp(-lgamma(1.0 + n / p))


def stable_neg_moment(alpha: float, s: float) -> float:
    """E W^(-s) for W normalised positive alpha-stable: Gamma(1+s/alpha)/Gamma(1+s)."""
    return exp(lgamma(1.0 + s / alpha) - lgamma(1.0 + s))


# ---------------------------------------------------------------------------
# Stable laws
# ---------------------------------------------------------------------------

def sample_positive_stable(alpha: float, rng, size=None) -> np.ndarray:
    """Exact draws with Laplace transform E exp(-t W) = exp(-t^alpha).

    Uses Kanter's representation W = (A(U)/E)^((1-alpha)/alpha) with
    U uniform on (0, pi), E standard exponential and
    A(U) = [sin(alpha U)/sin U]^(1/(1-alpha)) sin((1-alpha) U)/sin(alpha U).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0,1), got {alpha}")
    gen = as_generator(rng)
    u = gen.uniform(0.0, pi, size)
    e = gen.standard_exponential(size)
    # guard the open interval; uniform() may return exactly 0
    u = np.where(u <= 0.0, np.nextafter(0.0, 1.0), u)
    sa = np.sin(alpha * u)
    a = (sa / np.sin(u)) ** (1.0 / (1.0 - alpha)) * np.sin((1.0 - alpha) * u) / sa
    w = (a / e) ** ((1.0 - alpha) / alpha)
    return np.maximum(w, np.finfo(float).tiny)


@dataclass(frozen=True)
class TiltedStableDraw:
    """Importance sample for the square-root-tilted stable law.

    ``w`` are untilted positive (p/2)-stable values; ``importance_weight``
    is ``w^(-1/2)`` divided by its exact mean, so its expectation is 1.
    """

    w: np.ndarray
    importance_weight: np.ndarray

    def expectation(self, values) -> float:
        """Self-normalised weighted mean of ``values`` (one per draw)."""
        values = np.asarray(values, dtype=float)
        return float(np.sum(self.importance_weight * values) / np.sum(self.importance_weight))


def sample_tilted_weight(p: float, rng, size=None) -> TiltedStableDraw:
    """Draws for the density proportional to s^(-1/2) g_{p/2}(s)."""
    if not 0.0 < p < 2.0:
        raise ValueError(f"need 0 < p < 2, got {p}")
    alpha = 0.5 * p
    if alpha == 1.0:
        raise ValueError("p = 2 is degenerate")
    w = sample_positive_stable(alpha, rng, size)
    iw = w ** -0.5 / stable_neg_moment(alpha, 0.5)
    return TiltedStableDraw(np.asarray(w), np.asarray(iw))


# ---------------------------------------------------------------------------
# Sphere sampling and quadrature
# ---------------------------------------------------------------------------

def uniform_sphere(n: int, size: int, rng) -> np.ndarray:
    """``size`` i.i.d. uniform points on S^(n-1), shape (size, n)."""
    gen = as_generator(rng)
    x = gen.standard_normal((size, n))
    r = np.linalg.norm(x, axis=1)
    while np.any(r == 0.0):  # pragma: no cover - probability zero
        bad = r == 0.0
        x[bad] = gen.standard_normal((int(bad.sum()), n))
        r = np.linalg.norm(x, axis=1)
    return x / r[:, None]


@dataclass(frozen=True)
class SphereGrid:
    """Weighted nodes approximating the normalised surface measure."""

    n: int
    nodes: np.ndarray
    weights: np.ndarray
    deterministic: bool = True

    def __post_init__(self):
        if self.nodes.shape != (self.weights.shape[0], self.n):
            raise ValueError("nodes must have shape (len(weights), n)")

    def __len__(self):
        return self.weights.shape[0]

    def integrate(self, values) -> float:
        """Sum of weights times ``values`` (one per node)."""
        return float(np.dot(self.weights, np.asarray(values, dtype=float)))


def circle_angles(resolution: int) -> np.ndarray:
    return 2.0 * pi * (np.arange(resolution) + 0.5) / resolution


def sphere_quadrature(n: int, resolution: int, mode: str = "deterministic", rng=None) -> SphereGrid:
    """Quadrature on S^(n-1) with weights summing to one.

    Parameters
    ----------
    n : int
        Ambient dimension, at least 2.
    resolution : int
        On the circle, the number of equally spaced angles.  On S^2 the
        number of Gauss-Legendre nodes in the polar cosine; the azimuth uses
        twice as many equally spaced angles.  For Monte Carlo grids, the
        number of random nodes.
    mode : {"deterministic", "monte_carlo"}
        Monte Carlo is forced for n >= 4.
    rng : RngStream, optional
        Required for Monte Carlo grids.
    """
    if n < 2:
        raise ValueError(f"sphere quadrature needs n >= 2, got {n}")
    if resolution < 8:
        raise ValueError(f"resolution must be at least 8, got {resolution}")
    if mode not in ("deterministic", "monte_carlo"):
        raise ValueError(f"unknown quadrature mode {mode!r}")
    if mode == "deterministic" and n == 2:
        th = circle_angles(resolution)
        nodes = np.stack([np.cos(th), np.sin(th)], axis=1)
        return SphereGrid(2, nodes, np.full(resolution, 1.0 / resolution))
    if mode == "deterministic" and n == 3:
        z, wz = roots_legendre(resolution)
        phi = circle_angles(2 * resolution)
        zz, pp = np.meshgrid(z, phi, indexing="ij")
        rr = np.sqrt(np.clip(1.0 - zz**2, 0.0, None))
        nodes = np.stack([rr * np.cos(pp), rr * np.sin(pp), zz], axis=-1).reshape(-1, 3)
        nodes /= np.linalg.norm(nodes, axis=1, keepdims=True)
        weights = (np.repeat(wz, 2 * resolution) / (2.0 * 2 * resolution))
        return SphereGrid(3, nodes, weights / weights.sum())
    if rng is None:
        raise ValueError("a random stream is required for Monte Carlo sphere grids")
    nodes = uniform_sphere(n, resolution, rng)
    return SphereGrid(n, nodes, np.full(resolution, 1.0 / resolution), deterministic=False)


def gamma_ratio(a: float, b: float) -> float:
    """Gamma(a)/Gamma(b) evaluated in log space."""
    return exp(lgamma(a) - lgamma(b))


__all__ = [
    "RngStream",
    "as_generator",
    "unit_ball_volume",
    "log_unit_ball_volume",
    "gaussian_neg_moment",
    "NTConstants",
    "nt_constants",
    "exponential_volume_constant",
    "stable_neg_moment",
    "sample_positive_stable",
    "TiltedStableDraw",
    "sample_tilted_weight",
    "uniform_sphere",
    "SphereGrid",
    "sphere_quadrature",
    "circle_angles",
    "gamma_ratio",
]

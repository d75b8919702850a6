"""Convex bodies by support function, star bodies by radial function.

Also the block random matrices X = [X_1 ... X_N] used to build empirical
bodies, the generalized balls B_p^N(C) and polar membership predicates.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Callable

import numpy as np

from .numerics import as_generator


@dataclass(frozen=True, eq=False)
class SupportBody:
    """Origin-symmetric convex body in R^m given by its support function.

    Parameters
    ----------
    m : int
        Ambient dimension.
    h : callable
        Vectorised support function, maps an array of shape (..., m) to (...).
    inradius, circumradius : float
        Certified r0 and R0 with r0 ||u|| <= h(u) <= R0 ||u||.  A segment in
        R^m with m > 1 has r0 = 0.
    unconditional : bool
        Symmetric under every coordinate reflection.
    kind : str
        Tag used to dispatch compiled kernels ("segment", "ball",
        "cm_alpha" or "generic").
    params : dict
        Constructor parameters, used for polarity and serialisation.
    """

    m: int
    h: Callable
    inradius: float
    circumradius: float
    unconditional: bool = False
    kind: str = "generic"
    params: dict = field(default_factory=dict)

    def support(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.m:
            raise ValueError(f"support function of a body in R^{self.m} evaluated at a vector of length {u.shape[-1]}")
        return self.h(u)

    __call__ = support

    def polar(self) -> "SupportBody":
        """Polar body, for the constructors with a closed-form polar."""
        k, p = self.kind, self.params
        if k in ("segment", "ball") and self.m == 1:
            return scaled(1.0 / p.get("radius", 1.0), euclidean_ball(1))
        if k == "ball" or p.get("shape") == "ball":
            return euclidean_ball(self.m, 1.0 / p.get("radius", 1.0))
        if k == "cube":
            return cross_polytope(self.m, 1.0 / p["half_width"])
        if k == "cross_polytope":
            return cube(self.m, 1.0 / p["radius"])
        raise NotImplementedError(f"no closed-form polar for {k} bodies")

    def polar_vertices(self) -> np.ndarray:
        """Vertices of the polar body, for polytopes."""
        k, p = self.kind, self.params
        if self.m == 1 and k in ("segment", "ball"):
            r = p.get("radius", 1.0)
            return np.array([[1.0 / r], [-1.0 / r]])
        if k == "cube":
            # polar of [-a,a]^m is the cross-polytope with vertices +-e_j / a
            eye = np.eye(self.m) / p["half_width"]
            return np.concatenate([eye, -eye])
        if k == "cross_polytope":
            return np.asarray(list(product((1.0, -1.0), repeat=self.m))) / p["radius"]
        raise NotImplementedError(f"{k} bodies are not polytopes")


def segment(v=None) -> SupportBody:
    """Segment [-v, v]; with no argument the unit interval [-1, 1] in R^1."""
    v = np.ones(1) if v is None else np.asarray(v, dtype=float)
    nv = float(np.linalg.norm(v))
    if nv == 0:
        raise ValueError("segment direction must be nonzero")
    m = v.size
    return SupportBody(
        m,
        lambda u: np.abs(u @ v),
        nv if m == 1 else 0.0,
        nv,
        unconditional=m == 1 or np.count_nonzero(v) == 1,
        kind="segment" if (m == 1 and nv == 1.0) else "generic",
        params={"v": v.tolist(), "radius": nv} if m == 1 else {"v": v.tolist()},
    )


def euclidean_ball(m: int, radius: float = 1.0) -> SupportBody:
    if radius <= 0:
        raise ValueError("radius must be positive")
    return SupportBody(
        m,
        lambda u: radius * np.linalg.norm(u, axis=-1),
        radius,
        radius,
        unconditional=True,
        kind="ball" if radius == 1.0 else "generic",
        params={"radius": radius, "shape": "ball"},
    )


def cube(m: int, half_width: float = 1.0) -> SupportBody:
    """[-a, a]^m, with h(u) = a ||u||_1."""
    if half_width <= 0:
        raise ValueError("half_width must be positive")
    a = half_width
    return SupportBody(
        m,
        lambda u: a * np.sum(np.abs(u), axis=-1),
        a,
        a * np.sqrt(m),
        unconditional=True,
        kind="cube",
        params={"half_width": a},
    )


def cross_polytope(m: int, radius: float = 1.0) -> SupportBody:
    """conv{+-r e_j}, with h(u) = r ||u||_inf."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    r = radius
    return SupportBody(
        m,
        lambda u: r * np.max(np.abs(u), axis=-1),
        r / np.sqrt(m),
        r,
        unconditional=True,
        kind="cross_polytope",
        params={"radius": r},
    )


def l2_sum(C: SupportBody, D: SupportBody) -> SupportBody:
    """C +_2 D, with h^2 = h_C^2 + h_D^2."""
    if C.m != D.m:
        raise ValueError("l2_sum needs bodies of equal dimension")
    return SupportBody(
        C.m,
        lambda u: np.sqrt(C.h(u) ** 2 + D.h(u) ** 2),
        float(np.hypot(C.inradius, D.inradius)),
        float(np.hypot(C.circumradius, D.circumradius)),
        unconditional=C.unconditional and D.unconditional,
    )


def scaled(lam: float, C: SupportBody) -> SupportBody:
    if lam <= 0:
        raise ValueError("scaling factor must be positive")
    params = dict(C.params)
    kind = "generic"
    for key in ("radius", "half_width"):
        if key in params:
            params[key] = lam * params[key]
            kind = C.kind if C.kind in ("cube", "cross_polytope") else "generic"
    return SupportBody(
        C.m,
        lambda u: lam * C.h(u),
        lam * C.inradius,
        lam * C.circumradius,
        unconditional=C.unconditional,
        kind=kind,
        params=params,
    )


def cm_alpha(m: int, alpha: float) -> SupportBody:
    """[-e_1, e_1] +_2 alpha conv{+-e_j : 2 <= j <= m+1}, a body in R^(m+1).

    h(u)^2 = u_1^2 + alpha^2 max_{j >= 2} u_j^2.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if m < 1:
        raise ValueError("m must be at least 1")

    def h(u):
        return np.sqrt(u[..., 0] ** 2 + alpha**2 * np.max(u[..., 1:] ** 2, axis=-1))

    return SupportBody(
        m + 1,
        h,
        min(1.0, alpha / np.sqrt(m)),
        float(np.hypot(1.0, alpha)),
        unconditional=True,
        kind="cm_alpha",
        params={"m": m, "alpha": alpha},
    )


def rotated(C: SupportBody, Q) -> SupportBody:
    """Image Q C under an orthogonal matrix Q; h(QC, u) = h(C, Q^T u)."""
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (C.m, C.m) or not np.allclose(Q.T @ Q, np.eye(C.m), atol=1e-10):
        raise ValueError("rotation must be an orthogonal m x m matrix")
    return SupportBody(C.m, lambda u: C.h(u @ Q), C.inradius, C.circumradius, unconditional=False)


def make_support_body(spec) -> SupportBody:
    """Build a body from a dictionary (or a bare kind name).

    Kinds: ``segment`` (v, default [-1,1] in R^1), ``euclidean_ball`` (m,
    radius), ``cube`` (m, half_width), ``cross_polytope`` (m, radius),
    ``l2_sum`` (left, right), ``scaled`` (factor, body), ``cm_alpha``
    (m, alpha), ``rotated`` (body, matrix).
    """
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec.get("kind")
    if kind == "segment":
        return segment(spec.get("v"))
    if kind in ("euclidean_ball", "ball"):
        return euclidean_ball(int(spec["m"]), float(spec.get("radius", 1.0)))
    if kind == "cube":
        return cube(int(spec["m"]), float(spec.get("half_width", 1.0)))
    if kind == "cross_polytope":
        return cross_polytope(int(spec["m"]), float(spec.get("radius", 1.0)))
    if kind == "l2_sum":
        return l2_sum(make_support_body(spec["left"]), make_support_body(spec["right"]))
    if kind == "scaled":
        factor = float(spec["factor"])
        if factor <= 0:
            raise ValueError("field 'factor' must be positive")
        return scaled(factor, make_support_body(spec["body"]))
    if kind == "cm_alpha":
        a = float(spec["alpha"])
        if a <= 0:
            raise ValueError("field 'alpha' must be positive")
        return cm_alpha(int(spec["m"]), a)
    if kind == "rotated":
        return rotated(make_support_body(spec["body"]), spec["matrix"])
    raise ValueError(f"unknown body kind {kind!r}")


# ---------------------------------------------------------------------------
# Star bodies
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StarBody:
    """Star-shaped set given by a vectorised radial function.

    ``rho`` maps an array of shape (..., n) of nonzero vectors to values in
    (0, inf]; it must be homogeneous of degree -1.
    """

    n: int
    rho: Callable
    label: str = ""

    def radial(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise ValueError(f"radial function of a body in R^{self.n} evaluated at length {x.shape[-1]}")
        return self.rho(x)

    __call__ = radial

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(r > 0, self.rho(np.where(r[..., None] > 0, x, 1.0)), np.inf)
        return (r == 0) | (val >= 1.0)


def ball_body(n: int, radius: float = 1.0) -> StarBody:
    return StarBody(n, lambda x: radius / np.linalg.norm(x, axis=-1), f"ball({radius})")


def polar_body(C: SupportBody) -> StarBody:
    """C as a star body through rho(C deg, u) = 1/h(C, u)."""
    def rho(x):
        with np.errstate(divide="ignore"):
            return 1.0 / C.h(x)

    return StarBody(C.m, rho, "polar")


def polar_radial(C: SupportBody, u) -> np.ndarray:
    """rho(C deg, u) = 1/h(C, u) for nonzero u."""
    u = np.asarray(u, dtype=float)
    if np.any(np.linalg.norm(u, axis=-1) == 0):
        raise ValueError("direction must be nonzero")
    with np.errstate(divide="ignore"):
        return 1.0 / C.support(u)


def ellipsoid_polar_radial(x, alpha: float, u) -> np.ndarray:
    """Radial function of ([-x, x] +_2 alpha B_2^n) deg: (<x,u>^2 + alpha^2||u||^2)^(-1/2)."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    u = np.asarray(u, dtype=float)
    uu = np.sum(u * u, axis=-1)
    if np.any(uu == 0):
        raise ValueError("direction must be nonzero")
    return (np.asarray(u @ np.asarray(x, dtype=float)) ** 2 + alpha**2 * uu) ** -0.5


# ---------------------------------------------------------------------------
# Block matrices and generalized balls
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BlockSampleMatrix:
    """n x M matrix with column blocks X_i of widths m_i.

    ``columns`` has shape (n, M); ``provenance`` records the densities and
    seed used to draw it.
    """

    columns: np.ndarray
    widths: tuple
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=float)
        if cols.ndim != 2 or cols.shape[1] != sum(self.widths):
            raise ValueError("column count must equal the sum of block widths")
        if not np.all(np.isfinite(cols)):
            raise ValueError("block matrix has non-finite entries")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))

    @property
    def n(self):
        return self.columns.shape[0]

    @property
    def N(self):
        return len(self.widths)

    @property
    def M(self):
        return self.columns.shape[1]

    @property
    def blocks(self):
        edges = np.cumsum((0,) + self.widths)
        return [self.columns[:, a:b] for a, b in zip(edges[:-1], edges[1:])]

    def transpose_apply(self, u) -> list:
        """Blockwise X_i^T u, each of shape (..., m_i)."""
        u = np.asarray(u, dtype=float)
        return [u @ B for B in self.blocks]


def sample_block_matrix(family, widths, rng) -> BlockSampleMatrix:
    """Draw independent columns; ``family`` is one density or one per column."""
    widths = tuple(int(w) for w in widths)
    M = sum(widths)
    gen = as_generator(rng)
    dens = list(family) if isinstance(family, (list, tuple)) else [family] * M
    if len(dens) != M:
        raise ValueError("need one density per column")
    cols = np.stack([d.sample(gen) for d in dens], axis=1)
    return BlockSampleMatrix(cols, widths, {"families": [d.family for d in dens]})


def block_support(C: SupportBody, X_i, u) -> np.ndarray:
    """h(C, X_i^T u) = h(X_i C, u) for an n x m block X_i."""
    X_i = np.asarray(X_i, dtype=float)
    if X_i.ndim == 1:
        X_i = X_i[:, None]
    u = np.asarray(u, dtype=float)
    if X_i.shape[1] != C.m or u.shape[-1] != X_i.shape[0]:
        raise ValueError(f"block of shape {X_i.shape} does not match body dimension {C.m} and vector length {u.shape[-1]}")
    return C.support(u @ X_i)


@dataclass(frozen=True, eq=False)
class GeneralizedBall:
    """B_p^N(C) = {(x_1..x_N) : (sum_i h(C_i, x_i)^p)^(1/p) <= 1}, blocks orthogonal."""

    bodies: tuple
    p: float

    def __post_init__(self):
        if not (self.p >= -1.0):
            raise ValueError("generalized balls need p >= -1")
        object.__setattr__(self, "bodies", tuple(self.bodies))

    @property
    def N(self):
        return len(self.bodies)

    def block_values(self, xs) -> np.ndarray:
        """h(C_i, x_i) stacked along the last axis."""
        if len(xs) != self.N:
            raise ValueError("need one block vector per body")
        return np.stack([C.support(x) for C, x in zip(self.bodies, xs)], axis=-1)


def power_gauge(H, p: float) -> np.ndarray:
    """(sum_i H_i^p)^(1/p) over the last axis, geometric mean for p = 0, max for p = inf."""
    H = np.asarray(H, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        if np.isinf(p):
            return np.max(H, axis=-1)
        if p == 0:
            return np.exp(np.mean(np.log(H), axis=-1))
        if p < 0:
            out = np.sum(H**p, axis=-1) ** (1.0 / p)
            return np.where(np.any(H == 0, axis=-1), 0.0, out)
        return np.sum(H**p, axis=-1) ** (1.0 / p)


def generalized_ball_gauge(B: GeneralizedBall, xs) -> np.ndarray:
    """Gauge of B_p^N(C) at the point (x_1, ..., x_N)."""
    return power_gauge(B.block_values(xs), B.p)


def generalized_ball_support(B: GeneralizedBall, ys) -> np.ndarray:
    """Support function of B_1^N(C) from the vertices of the polars C_i deg.

    B_1^N(C) is the convex hull of the blockwise embedded C_i deg, so its
    support function is the largest vertex product over all blocks.
    """
    if B.p != 1:
        raise ValueError("vertex support is implemented for p = 1")
    vals = [np.max(np.asarray(y, dtype=float) @ C.polar_vertices().T, axis=-1) for C, y in zip(B.bodies, ys)]
    return np.max(np.stack(vals, axis=-1), axis=-1)


def polar_membership(u, X: BlockSampleMatrix, bodies, t=None) -> np.ndarray:
    """u in the intersection of (t_i X_i C_i) deg, i.e. max_i t_i h(C_i, X_i^T u) <= 1.

    ``u`` has shape (..., n) and ``t`` shape (..., N); leading axes broadcast.
    """
    bodies = list(bodies)
    if len(bodies) != X.N:
        raise ValueError("need one body per block")
    t = np.ones(X.N) if t is None else np.asarray(t, dtype=float)
    if t.shape[-1] != X.N:
        raise ValueError("need one scale per block")
    if np.any(t <= 0):
        raise ValueError("scales must be positive")
    H = np.stack([block_support(C, B, u) for C, B in zip(bodies, X.blocks)], axis=-1)
    return np.max(t * H, axis=-1) <= 1.0


__all__ = [
    "SupportBody",
    "segment",
    "euclidean_ball",
    "cube",
    "cross_polytope",
    "l2_sum",
    "scaled",
    "cm_alpha",
    "rotated",
    "make_support_body",
    "StarBody",
    "ball_body",
    "polar_body",
    "polar_radial",
    "ellipsoid_polar_radial",
    "BlockSampleMatrix",
    "sample_block_matrix",
    "block_support",
    "GeneralizedBall",
    "power_gauge",
    "generalized_ball_gauge",
    "generalized_ball_support",
    "polar_membership",
]

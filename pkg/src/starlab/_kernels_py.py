"""Pure numpy kernels; reference implementation and fallback for ``_kernels``.

Every kernel reduces a batch of empirical star bodies to per-trial sphere
sums ``sum_g w_g rho_g^npow`` over the nodes where rho is finite, together
with the finite weight and the number of infinite nodes.  Radial values come
from power means of support values h:

* p != 0: rho^(-p) = mean_i h_i^p
* p == 0: log rho = -mean_i log h_i
"""
import numpy as np

_CHUNK = 64


def _reduce(H, weights, p, npow):
    """H has shape (T, N, G); returns (sums, finite_weight, n_inf)."""
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        if p == 0.0:
            m = np.mean(np.log(H), axis=1)
            rn = np.exp(-npow * m)
        else:
            m = np.mean(H**p, axis=1)
            rn = m ** (-npow / p)
    fin = np.isfinite(rn)
    rn = np.where(fin, rn, 0.0)
    sums = rn @ weights
    fw = fin.astype(float) @ weights
    n_inf = (~fin).sum(axis=1).astype(np.int64)
    return sums, fw, n_inf


def _batched(fn, T):
    out = [fn(slice(a, min(a + _CHUNK, T))) for a in range(0, T, _CHUNK)]
    if not out:
        return np.zeros(0), np.zeros(0), np.zeros(0, dtype=np.int64)
    return tuple(np.concatenate(parts) for parts in zip(*out))


def power_mean_sums(H, weights, p, npow):
    """Sphere sums from precomputed support values H of shape (T, N, G)."""
    H = np.asarray(H, dtype=float)
    weights = np.asarray(weights, dtype=float)
    return _batched(lambda s: _reduce(H[s], weights, float(p), float(npow)), H.shape[0])


def segment_sums(X, U, weights, p, npow):
    """Segments [-x_i, x_i]: h_i(u) = |<x_i, u>|.  X has shape (T, N, n)."""
    X = np.asarray(X, dtype=float)
    U = np.asarray(U, dtype=float)
    weights = np.asarray(weights, dtype=float)

    def one(s):
        H = np.abs(X[s] @ U.T)
        return _reduce(H, weights, float(p), float(npow))

    return _batched(one, X.shape[0])


def ball_block_sums(X, U, weights, p, npow):
    """Euclidean balls B_2^m: h_i(u) = ||X_i^T u||.  X has shape (T, N, m, n)."""
    X = np.asarray(X, dtype=float)
    U = np.asarray(U, dtype=float)
    weights = np.asarray(weights, dtype=float)

    def one(s):
        P = np.einsum("tkmd,gd->tkmg", X[s], U)
        H = np.sqrt(np.einsum("tkmg,tkmg->tkg", P, P))
        return _reduce(H, weights, float(p), float(npow))

    return _batched(one, X.shape[0])


def ellipsoid_sums(X, U, weights, alpha, q, npow):
    """Averaged ellipsoids: rho^q = mean_i (<x_i,u>^2 + alpha^2 ||u||^2)^(-q/2).

    Equivalent to ``power_mean_sums`` with p = -q and
    h_i = sqrt(<x_i,u>^2 + alpha^2 ||u||^2).
    """
    X = np.asarray(X, dtype=float)
    U = np.asarray(U, dtype=float)
    weights = np.asarray(weights, dtype=float)
    a2 = float(alpha) ** 2 * np.einsum("gd,gd->g", U, U)

    def one(s):
        P = X[s] @ U.T
        H = np.sqrt(P * P + a2)
        return _reduce(H, weights, -float(q), float(npow))

    return _batched(one, X.shape[0])


def cm_alpha_block_sums(X, U, weights, alpha, p, npow):
    """Bodies C_m^alpha: h_i(u)^2 = <x_i0,u>^2 + alpha^2 max_j <x_ij,u>^2.

    X has shape (T, N, m+1, n); column 0 of each block is the segment
    direction, the remaining columns span the cross-polytope part.
    """
    X = np.asarray(X, dtype=float)
    U = np.asarray(U, dtype=float)
    weights = np.asarray(weights, dtype=float)

    def one(s):
        P = np.einsum("tkmd,gd->tkmg", X[s], U)
        H = np.sqrt(P[:, :, 0, :] ** 2 + float(alpha) ** 2 * np.max(P[:, :, 1:, :] ** 2, axis=2))
        return _reduce(H, weights, float(p), float(npow))

    return _batched(one, X.shape[0])

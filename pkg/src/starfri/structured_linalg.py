"""Hankel liftings, anti-diagonal averaging, rank truncation and rooting.

Small dense kernels shared by both recovery algorithms. Everything here is a
pure function on numpy arrays; matrices never exceed a few hundred rows so we
just call LAPACK through numpy and do not bother with anything iterative.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


@dataclass(frozen=True)
class LiftShape:
    """Bookkeeping for a lifting: aperture n, order alpha, slots t_s."""
    n: int
    alpha: int
    t_s: int = 1
    kind: str = "Single"  # Single | Stacked | Paired

    def __post_init__(self):
        if not (1 <= self.alpha < self.n):
            raise ValueError("need 1 <= alpha < n")
        if self.t_s < 1:
            raise ValueError("t_s >= 1")


def hankel_lift(v, alpha):
    """(n-alpha) x (alpha+1) Hankel matrix with entry (i, m) = v[i+m]."""
    v = np.asarray(v)
    n = v.shape[-1]
    if not (1 <= alpha < n):
        raise ValueError("alpha out of range")
    return sliding_window_view(v, alpha + 1, axis=-1).copy()


def stacked_hankel_lift(vs, alpha):
    """Vertically stack the per-slot Hankel lifts (slot order preserved)."""
    vs = np.asarray(vs)
    if vs.ndim != 2:
        vs = np.stack([np.asarray(v) for v in vs])
    blocks = hankel_lift(vs, alpha)          # (T_s, n-alpha, alpha+1)
    return blocks.reshape(-1, alpha + 1)


def paired_hankel_lift(v_r, v_t, alpha):
    """Horizontal concatenation [H_alpha(v_r), H_alpha(v_t)]."""
    v_r = np.asarray(v_r)
    v_t = np.asarray(v_t)
    if v_r.shape != v_t.shape:
        raise ValueError("paired vectors must have equal length")
    return np.hstack([hankel_lift(v_r, alpha), hankel_lift(v_t, alpha)])


def _averaging_matrix(rows, cols):
    # W[k, i*cols+j] = 1/count(k) for i+j = k; maps vec(m) to anti-diagonal means
    n = rows + cols - 1
    W = np.zeros((n, rows * cols))
    for i in range(rows):
        for j in range(cols):
            W[i + j, i * cols + j] = 1.0
    W /= W.sum(axis=1, keepdims=True)
    return W


_avg_cache = {}


def _avg(rows, cols):
    key = (rows, cols)
    if key not in _avg_cache:
        _avg_cache[key] = _averaging_matrix(rows, cols)
    return _avg_cache[key]


def inverse_hankel(m):
    """Anti-diagonal averaging: entry k of the output is the mean of m[i, j]
    over i + j = k. Exact inverse of hankel_lift on Hankel inputs."""
    m = np.asarray(m)
    rows, cols = m.shape[-2:]
    return m.reshape(*m.shape[:-2], rows * cols) @ _avg(rows, cols).T


def inverse_stacked_hankel(m, shape):
    """Split the stacked lift into its T_s row blocks and average each."""
    m = np.asarray(m)
    rows = shape.n - shape.alpha
    if m.shape[0] % rows:
        raise ValueError("row count not divisible by block height")
    t_s = m.shape[0] // rows
    return inverse_hankel(m.reshape(t_s, rows, -1))


def inverse_paired_hankel(m):
    """Average each half of a horizontally paired lift back to two vectors."""
    m = np.asarray(m)
    if m.shape[1] % 2:
        raise ValueError("odd column count")
    half = m.shape[1] // 2
    return inverse_hankel(m[:, :half]), inverse_hankel(m[:, half:])


def rank_truncate(m, k):
    """Best rank-k Frobenius approximation (keep the k largest singular values)."""
    if not (1 <= k <= min(m.shape)):
        raise ValueError("k out of range")
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    return (u[:, :k] * s[:k]) @ vh[:k]


def smallest_right_singular_vector(m):
    """Unit right singular vector of the smallest singular value.

    Phase-normalized so the first entry with magnitude above 1e-12 is real
    positive. An all-zero input returns (e_1, degenerate=True) so Monte Carlo
    loops survive pathological draws.
    """
    m = np.asarray(m)
    if m.shape[1] < 2:
        raise ValueError("need at least 2 columns")
    if not np.any(m):
        e = np.zeros(m.shape[1], complex)
        e[0] = 1.0
        return e, True
    if m.shape[0] >= m.shape[1]:
        _, _, vh = np.linalg.svd(m, full_matrices=False)
    else:
        _, _, vh = np.linalg.svd(m)
    v = vh[-1].conj()
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    if nz.size:
        v = v * (np.abs(v[nz[0]]) / v[nz[0]])
    return v, False


def polynomial_roots(coeffs):
    """Roots of sum_m c_m z^m (ascending coefficients), via the companion
    matrix of the monic-normalized polynomial."""
    c = np.asarray(coeffs, dtype=complex)
    if not np.any(c):
        raise ValueError("zero polynomial")
    tol = 1e-12 * np.abs(c).max()
    deg = np.flatnonzero(np.abs(c) > tol).max()
    if deg == 0:
        return np.zeros(0, complex)
    # np.roots builds the companion matrix and takes eigenvalues; it wants
    # descending coefficient order
    return np.roots(c[deg::-1])


def roots_to_angles(roots, k):
    """Keep the k roots closest to the unit circle and invert the exponent
    map: theta = -arcsin(arg(z)/pi), reported in degrees, ascending."""
    roots = np.asarray(roots)
    if roots.size < k:
        raise ValueError("fewer than k roots")
    keep = roots[np.argsort(np.abs(np.abs(roots) - 1.0))[:k]]
    return np.sort(-np.degrees(np.arcsin(np.clip(np.angle(keep) / np.pi, -1.0, 1.0))))

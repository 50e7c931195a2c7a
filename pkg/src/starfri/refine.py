"""Shared initialization and angle-refinement helpers.

Both recovery algorithms use the same three ingredients around the iterative
denoiser:

* a matched-atom greedy initializer on a coarse angle grid (with a few
  cyclic re-selection sweeps, which fixes the occasional greedy mistake),
* root selection by fitted gain energy when the annihilating filter has more
  roots than sources,
* a maximum-likelihood polish: variable-projection least squares over the
  angles (gains eliminated in closed form) interleaved with per-angle global
  rescans on a fine grid, so the final estimate sits in the ML basin instead
  of wherever the algebraic extraction left it.
"""

import numpy as np
from scipy.optimize import least_squares

from .star_ris_model import steering_vector


def _grid_steering(n, lo=-60.0, hi=60.0, step=0.5):
    grid = np.arange(lo, hi + 1e-9, step)
    sv = np.exp(-1j * np.pi * np.outer(np.arange(n), np.sin(np.radians(grid))))
    return grid, sv


def grid_init(psi, y, k_r, k_t, grid_step=0.5, cycles=3):
    """Greedy matched-atom initialization of (x_R, x_T) on a coarse grid.

    Atoms are the operator responses psi_half^T a(theta). After the greedy
    pass, each selected atom is cyclically dropped, the rest re-fit, and its
    subspace rescanned; this repairs greedy support errors at moderate SNR.
    Returns the two initial latent vectors and the selected angles.
    """
    n = psi.shape[0] // 2
    grid, sv = _grid_steering(n, step=grid_step)
    A_rs = psi[:n].T @ sv
    A_ts = psi[n:].T @ sv
    nr = np.maximum(np.linalg.norm(A_rs, axis=0), 1e-12)
    nt = np.maximum(np.linalg.norm(A_ts, axis=0), 1e-12)
    sel = []

    def cols_of(s):
        if not s:
            return np.zeros((len(y), 0), complex)
        return np.column_stack([(A_rs if side == 'r' else A_ts)[:, i] for side, i in s])

    res = y.copy()
    for _ in range(k_r + k_t):
        cr = np.abs(A_rs.conj().T @ res) / nr
        ct = np.abs(A_ts.conj().T @ res) / nt
        if sum(side == 'r' for side, _ in sel) >= k_r:
            cr[:] = -1
        if sum(side == 't' for side, _ in sel) >= k_t:
            ct[:] = -1
        sel.append(('r', int(np.argmax(cr))) if cr.max() >= ct.max() else ('t', int(np.argmax(ct))))
        A = cols_of(sel)
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        res = y - A @ coef
    for _ in range(cycles):
        changed = False
        for j in range(len(sel)):
            rest = sel[:j] + sel[j + 1:]
            A = cols_of(rest)
            coef, *_ = np.linalg.lstsq(A, y, rcond=None)
            r = y - A @ coef
            side = sel[j][0]
            c = np.abs((A_rs if side == 'r' else A_ts).conj().T @ r) / (nr if side == 'r' else nt)
            i = int(np.argmax(c))
            if i != sel[j][1]:
                sel[j] = (side, i)
                changed = True
        if not changed:
            break
    A = cols_of(sel)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    x_r = np.zeros(n, complex)
    x_t = np.zeros(n, complex)
    th_r, th_t = [], []
    for (side, i), c in zip(sel, coef):
        if side == 'r':
            x_r += c * sv[:, i]
            th_r.append(grid[i])
        else:
            x_t += c * sv[:, i]
            th_t.append(grid[i])
    return x_r, x_t, np.sort(th_r), np.sort(th_t)


def select_roots_by_energy(roots, k, sig_cols):
    """Keep the k candidate roots carrying the most fitted signal energy.

    The signal columns are jointly regressed on the Vandermonde of all
    candidates; each root is scored by |coefficient|^2 times its column
    energy. This both breaks unit-circle-distance ties and rejects the
    spurious null-space roots that appear when the filter order exceeds the
    number of sources.
    """
    roots = np.asarray(roots)
    sig_cols = np.atleast_2d(np.asarray(sig_cols).T).T   # (n, m)
    n = sig_cols.shape[0]
    V = np.vander(roots, n, increasing=True).T           # (n, n_roots)
    coef, *_ = np.linalg.lstsq(V, sig_cols, rcond=None)
    energy = (np.abs(coef) ** 2).sum(axis=1) * (np.abs(V) ** 2).sum(axis=0)
    return roots[np.argsort(-energy)[:k]]


def _atoms(psi, th_r, th_t):
    n = psi.shape[0] // 2
    t_s = psi.shape[1]
    cols = []
    for j, t in enumerate(list(th_r) + list(th_t)):
        half = psi[:n] if j < len(th_r) else psi[n:]
        cols.append(half.T @ steering_vector(t, n))
    if not cols:
        return np.zeros((t_s, 0), complex)
    return np.column_stack(cols)


def _atoms_and_derivs(psi, th):
    n = psi.shape[0] // 2
    m = np.arange(n)
    cols, dcols = [], []
    k_r = th.k_r
    for j, t in enumerate(th.values):
        rad = np.radians(t)
        a = np.exp(-1j * np.pi * m * np.sin(rad))
        da = (-1j * np.pi * m * np.cos(rad)) * a * (np.pi / 180.0)
        half = psi[:n] if j < k_r else psi[n:]
        cols.append(half.T @ a)
        dcols.append(half.T @ da)
    return np.column_stack(cols), np.column_stack(dcols)


class _Th:
    def __init__(self, values, k_r):
        self.values = values
        self.k_r = k_r


def varpro_refine(y, psi, th_r, th_t):
    """Local ML refinement of the angles with gains projected out.

    Levenberg-Marquardt on the real/imaginary parts of the projected residual
    y - A(theta) s_hat(theta); plain variable projection, converging to the
    ML stationary point of the basin it starts in. The Jacobian uses the
    Kaufman form -P_perp dA s_hat, which leaves the gradient of the projected
    functional exact because the dropped term lies in range(A).
    """
    k_r = len(th_r)
    th0 = np.concatenate([th_r, th_t]).astype(float)

    def solve(th):
        A, dA = _atoms_and_derivs(psi, _Th(th, k_r))
        s, *_ = np.linalg.lstsq(A, y, rcond=None)
        r = y - A @ s
        return A, dA, s, r

    def resid(th):
        _, _, _, r = solve(th)
        return np.concatenate([r.real, r.imag])

    def jac(th):
        A, dA, s, _ = solve(th)
        cols = dA * s[None, :]
        proj, *_ = np.linalg.lstsq(A, cols, rcond=None)
        J = -(cols - A @ proj)
        return np.concatenate([J.real, J.imag])

    sol = least_squares(resid, th0, jac=jac, method='lm',
                        xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=400)
    return sol.x[:k_r], sol.x[k_r:]


def coordinate_rescan(y, psi, th_r, th_t, grid_step=0.1, lo=-60.0, hi=60.0, cycles=2):
    """Per-angle global 1-D rescans to escape wrong local basins.

    For each angle in turn, the other atoms are projected out (QR) and the
    orthogonalized matched-filter score is maximized over a fine grid; the
    angle jumps to the global 1-D optimum if it differs.
    """
    n = psi.shape[0] // 2
    grid, sv = _grid_steering(n, lo, hi, grid_step)
    cand_r = psi[:n].T @ sv
    cand_t = psi[n:].T @ sv
    th = list(th_r) + list(th_t)
    k_r = len(th_r)
    K = len(th)
    for _ in range(cycles):
        changed = False
        for k in range(K):
            other_r = [th[j] for j in range(K) if j != k and j < k_r]
            other_t = [th[j] for j in range(K) if j != k and j >= k_r]
            A_o = _atoms(psi, other_r, other_t)
            Q, _ = np.linalg.qr(A_o)
            cand = cand_r if k < k_r else cand_t
            res_y = y - Q @ (Q.conj().T @ y)
            C = cand - Q @ (Q.conj().T @ cand)
            score = np.abs(C.conj().T @ res_y) ** 2 / np.maximum((np.abs(C) ** 2).sum(axis=0), 1e-12)
            i = int(np.argmax(score))
            if abs(grid[i] - th[k]) > grid_step / 2:
                th[k] = grid[i]
                changed = True
        if not changed:
            break
    return np.array(th[:k_r]), np.array(th[k_r:])


def polish_angles(y, psi, th_r, th_t):
    """Full polish: local ML, global per-angle rescan, and a second local ML
    pass only when the rescan actually moved an angle."""
    th_r, th_t = varpro_refine(y, psi, th_r, th_t)
    new_r, new_t = coordinate_rescan(y, psi, th_r, th_t)
    if np.array_equal(new_r, th_r) and np.array_equal(new_t, th_t):
        return th_r, th_t
    return varpro_refine(y, psi, new_r, new_t)

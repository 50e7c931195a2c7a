"""Ziv-Zakai lower bound on the full-space angle MSE.

The bound mixes an a-priori term (dominant at low SNR, set by the angular
search range zeta) with a Fisher-information term (dominant at high SNR)
through a smooth valley-filling weight. Reflection and transmission spaces
are bounded separately and aggregated with weights K_R, K_T. All angles are
radians inside this module; degrees only appear at the reporting boundary.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc, ndtr

from .star_ris_model import steering_matrix

ZETA_DEFAULT = 2 * np.pi / 3   # the [-60 deg, 60 deg] search range


@dataclass
class ZzbInputs:
    scene: object              # UserScene
    profile: object            # StarRisProfile
    channel: object            # Channel
    sigma_n2: float
    zeta: float = ZETA_DEFAULT

    @property
    def eta(self):
        # unit-modulus source gains make the per-user SNR 1/sigma_n2
        return np.inf if self.sigma_n2 == 0 else 1.0 / self.sigma_n2


def steering_derivative(theta_deg, n):
    """d/d theta (radians) of the steering vector, entry m equal to
    (-j pi m cos theta) e^{-j pi m sin theta}."""
    th = np.radians(theta_deg)
    m = np.arange(n)
    return (-1j * np.pi * m * np.cos(th)) * np.exp(-1j * np.pi * m * np.sin(th))


def _sensing_rows(inputs, subspace):
    from .star_ris_model import build_paired_operator
    psi = build_paired_operator(inputs.profile, inputs.channel)
    n = inputs.profile.n
    return (psi[:n] if subspace == 'RS' else psi[n:]).T      # (t_s, n)


def fisher_information(inputs, subspace):
    """F_i = (2 / (T_s sigma_n^2)) Re(Psi_i^H Psi_i) with Psi_i stacking, per
    slot, the sensing row applied to the gain-weighted steering derivatives.

    Returns (F, singular_flag). Angles enter in radians.
    """
    scene = inputs.scene
    if subspace == 'RS':
        thetas = scene.theta_rs
        gains = scene.gains[:scene.k_r]
    else:
        thetas = scene.theta_ts
        gains = scene.gains[scene.k_r:]
    if len(thetas) == 0:
        raise ValueError("empty subspace")
    n = inputs.profile.n
    rows = _sensing_rows(inputs, subspace)
    dA = np.column_stack([steering_derivative(t, n) for t in thetas])
    big_psi = rows @ (dA * gains[None, :])                   # (t_s, K_i)
    F = (2.0 / (inputs.profile.t_s * inputs.sigma_n2)) * np.real(big_psi.conj().T @ big_psi)
    singular = np.linalg.matrix_rank(F) < F.shape[0]
    return F, singular


def p_l(k, t_s, n, eta):
    """Probability-of-large-error factor of the a-priori term."""
    if eta == np.inf:
        return 0.0
    x = n * eta / (2.0 + n * eta)
    log_term = np.log(4.0 * (1.0 + n * eta) / (2.0 + n * eta) ** 2)
    q = 1.0 - ndtr(np.sqrt(2.0 * k * t_s) * x)
    return float(np.exp(k * t_s * (log_term + x ** 2)) * q)


def u_tilde(k, t_s, n, eta, fim=None, zeta=ZETA_DEFAULT, use_min_form=False):
    """Transition argument; the simplified closed form by default, or the
    min with the FIM-dependent term when use_min_form is set."""
    if eta == np.inf:
        u = float(k * t_s)
    else:
        u = float(k * t_s * (n * eta / (2.0 + n * eta)) ** 2)
    if use_min_form:
        if fim is None:
            raise ValueError("min form needs the FIM")
        ones = np.ones(fim.shape[0])
        u = min(u, float(k ** 2 * zeta ** 2 / (8.0 * ones @ np.linalg.solve(fim, ones))))
    return u


def valley_weight(u):
    """Regularized lower incomplete gamma of shape 3/2: 0 at u=0, monotone,
    tending to 1, so the bound slides from the a-priori to the CRB regime."""
    return float(gammainc(1.5, u))


def zzb_subspace(inputs, subspace, use_min_form=False):
    """Per-subspace MSE lower bound in radians^2."""
    scene = inputs.scene
    k_i = scene.k_r if subspace == 'RS' else scene.k_t
    if k_i == 0:
        raise ValueError("empty subspace")
    k = scene.k
    t_s = inputs.profile.t_s
    n = inputs.profile.n
    eta = inputs.eta
    F, singular = fisher_information(inputs, subspace)
    apb = 2.0 * p_l(k, t_s, n, eta) * k_i * inputs.zeta ** 2 / ((k_i + 1) ** 2 * (k_i + 2))
    u = u_tilde(k, t_s, n, eta, fim=F, zeta=inputs.zeta, use_min_form=use_min_form)
    if singular:
        tr_inv = float(np.trace(np.linalg.pinv(F)))
    else:
        tr_inv = float(np.trace(np.linalg.inv(F)))
    return apb + valley_weight(u) * tr_inv / k_i


def zzb_full(inputs, use_min_form=False):
    """Count-weighted aggregation of the two subspace bounds (radians^2)."""
    scene = inputs.scene
    if scene.k == 0:
        raise ValueError("no users")
    total = 0.0
    for sub, k_i in (('RS', scene.k_r), ('TS', scene.k_t)):
        if k_i:
            total += k_i * zzb_subspace(inputs, sub, use_min_form)
    return total / scene.k

"""STAR-RIS control sequences, steering vectors and measurement synthesis.

Each metasurface element splits the incident wave into a reflected part
(amplitude beta_r, phase phi_r) and a transmitted part whose amplitude follows
from energy conservation beta_t = sqrt(1 - beta_r^2) and whose phase is offset
by +-pi/2 (encoded as a sign on the imaginary unit). A single-RF-chain sensor
behind the surface collects one complex scalar per slot, so all spatial
information enters through the known per-slot control sequence.
"""

from dataclasses import dataclass, field

import numpy as np

UNIFORM = "UniformES"
NONUNIFORM = "NonuniformES"


@dataclass
class StarRisProfile:
    n: int
    t_s: int
    beta_r: np.ndarray      # (n, t_s), reflection amplitudes in (0, 1]
    phi_r: np.ndarray       # (n, t_s), reflection phases [0, 2pi)
    sign_j: np.ndarray      # (n, t_s), +-1 encoding the +-j phase offset
    scenario: str = UNIFORM

    def reflection(self):
        return self.beta_r * np.exp(1j * self.phi_r)

    def p_ratio(self):
        """Transmission/reflection amplitude ratio sqrt(1-b^2)/b per entry."""
        if np.any(self.beta_r <= 0):
            raise ValueError("beta_r must be positive")
        return np.sqrt(1.0 - self.beta_r ** 2) / self.beta_r

    def gain_sequence(self):
        """Per-slot scalar g(t) = sign(t) * j * mean_n p_n(t).

        Exact in the element-wise uniform regime (p_n identical across
        elements); an averaged surrogate otherwise.
        """
        return self.sign_j[0] * 1j * self.p_ratio().mean(axis=0)


@dataclass
class UserScene:
    theta_rs: list          # reflection-side angles, degrees
    theta_ts: list          # transmission-side angles, degrees
    gains: np.ndarray       # K complex slot-invariant gains, RS block first

    @property
    def k_r(self):
        return len(self.theta_rs)

    @property
    def k_t(self):
        return len(self.theta_ts)

    @property
    def k(self):
        return self.k_r + self.k_t


@dataclass
class Channel:
    h: np.ndarray           # length-n RIS->sensor channel, known


@dataclass
class MeasurementBatch:
    y: np.ndarray                 # (t_s,)
    sigma_n2: float
    operator_uniform: np.ndarray  # (t_s, n) rows, row t = h^T Phi_R(t)
    operator_paired: np.ndarray   # (2n, t_s) columns psi(t)
    g: np.ndarray                 # per-slot scalar gain sequence (see above)
    scenario: str
    seed: int = 0


def steering_vector(theta, n):
    """Half-wavelength ULA response, entry m = exp(-j pi m sin theta)."""
    return np.exp(-1j * np.pi * np.arange(n) * np.sin(np.radians(theta)))


def steering_matrix(thetas, n):
    if len(thetas) == 0:
        return np.zeros((n, 0), complex)
    return np.column_stack([steering_vector(t, n) for t in thetas])


def generate_profile(scenario, n, t_s, rng, randomize_sign=True, freeze_amplitudes=False):
    """Draw a control sequence for the requested energy-splitting scenario.

    Uniform: beta_r = sqrt(2)/2 everywhere. Nonuniform: beta_r^2 iid uniform
    on [0.2, 0.8] (redrawn per slot unless freeze_amplitudes). In both cases
    the +-j sign is shared by all elements within a slot; randomize_sign=False
    pins it to +1 for all slots (a surface whose element design fixes the
    phase offset), which is what the spectrum figures use.
    """
    if scenario == UNIFORM:
        beta = np.full((n, t_s), np.sqrt(2) / 2)
    elif scenario == NONUNIFORM:
        if freeze_amplitudes:
            beta = np.sqrt(np.repeat(rng.uniform(0.2, 0.8, (n, 1)), t_s, axis=1))
        else:
            beta = np.sqrt(rng.uniform(0.2, 0.8, (n, t_s)))
    else:
        raise ValueError(f"unknown scenario {scenario!r}")
    phi = rng.uniform(0.0, 2 * np.pi, (n, t_s))
    if randomize_sign:
        sign = rng.choice([-1.0, 1.0], t_s)
    else:
        sign = np.ones(t_s)
    return StarRisProfile(n, t_s, beta, phi, np.broadcast_to(sign, (n, t_s)).copy(), scenario)


def map_reflection_to_transmission(profile):
    """Per-element transmission coefficients sign*j*sqrt(1-b^2)*exp(j phi)."""
    return profile.sign_j * 1j * np.sqrt(1.0 - profile.beta_r ** 2) * np.exp(1j * profile.phi_r)


def build_uniform_operator(profile, channel):
    """Per-slot rows h^T Phi_R(t); the block-diagonal sensing operator of the
    uniform-regime latent model y(t) = row_t . r(t)."""
    if profile.scenario != UNIFORM:
        raise ValueError("uniform operator requires the UniformES scenario")
    return _reflection_rows(profile, channel)


def _reflection_rows(profile, channel):
    return (channel.h[:, None] * profile.reflection()).T  # (t_s, n)


def build_paired_operator(profile, channel):
    """Psi (2n x t_s): column t stacks Phi_R(t) h over G(t) Phi_R(t) h."""
    rows = _reflection_rows(profile, channel)              # (t_s, n)
    G = profile.sign_j * 1j * profile.p_ratio()            # (n, t_s)
    return np.vstack([rows.T, rows.T * G])


def latent_fri_vectors(scene, profile):
    """Static x = [x_R; x_T] (both regimes) and the per-slot combined vector
    r(t) = x_R + g(t) x_T, the latter only in the uniform regime."""
    n = profile.n
    x_r = steering_matrix(scene.theta_rs, n) @ scene.gains[:scene.k_r]
    x_t = steering_matrix(scene.theta_ts, n) @ scene.gains[scene.k_r:]
    x = np.concatenate([x_r, x_t])
    r = None
    if profile.scenario == UNIFORM:
        g = profile.gain_sequence()
        r = x_r[:, None] + g[None, :] * x_t[:, None]       # (n, t_s)
    return r, x


def synthesize_measurements(scene, profile, channel, snr_db, rng, seed=0):
    """One batch of T_s scalar observations plus the sensing operators.

    Noise is circular complex Gaussian with sigma_n^2 = 10^(-snr_db/10), so
    the per-user SNR eta = |s_k|^2 / sigma_n^2 equals the dB value for
    unit-modulus gains. snr_db = inf gives the noiseless batch.
    """
    if scene.k == 0:
        raise ValueError("empty scene")
    psi = build_paired_operator(profile, channel)
    _, x = latent_fri_vectors(scene, profile)
    y = psi.T @ x
    sigma_n2 = 0.0
    if np.isfinite(snr_db):
        sigma_n2 = 10.0 ** (-snr_db / 10.0)
        t_s = profile.t_s
        y = y + np.sqrt(sigma_n2 / 2) * (rng.standard_normal(t_s) + 1j * rng.standard_normal(t_s))
    n = profile.n
    return MeasurementBatch(
        y=y, sigma_n2=sigma_n2,
        operator_uniform=psi[:n].T.copy(),
        operator_paired=psi,
        g=profile.gain_sequence(),
        scenario=profile.scenario,
        seed=seed,
    )


def draw_scene(rng, k_r, k_t, lo=-60.0, hi=60.0, min_sep=2.0):
    """Random user angles, iid uniform per subspace with a minimum pairwise
    separation guard, plus unit-modulus gains with uniform phases."""
    def draw(k):
        while True:
            a = np.sort(rng.uniform(lo, hi, k))
            if k < 2 or np.diff(a).min() >= min_sep:
                return a
    tr = draw(k_r)
    tt = draw(k_t)
    gains = np.exp(2j * np.pi * rng.random(k_r + k_t))
    return UserScene(list(tr), list(tt), gains)


def draw_channel(rng, n):
    h = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
    return Channel(h)

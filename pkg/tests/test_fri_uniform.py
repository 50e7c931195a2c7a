"""Tests for the uniform-regime solver (stacked lifting PGD + AF extraction)."""

import numpy as np
import pytest

from starfri import star_ris_model as sm
from starfri import structured_linalg as sl
from starfri.fri_uniform import (PgdConfig, af_spectrum, estimate_angles_uniform,
                                 extract_af, initial_iterate, pgd_denoise,
                                 step_size_bounds, uniform_assumption_operator)


def _uniform_batch(theta_rs, theta_ts, snr_db=np.inf, seed=0, gains=None, n=16, t_s=32):
    rng = np.random.default_rng(seed)
    k = len(theta_rs) + len(theta_ts)
    if gains is None:
        gains = np.exp(2j * np.pi * rng.random(k))
    scene = sm.UserScene(list(theta_rs), list(theta_ts), np.asarray(gains))
    prof = sm.generate_profile(sm.UNIFORM, n, t_s, rng)
    ch = sm.draw_channel(rng, n)
    batch = sm.synthesize_measurements(scene, prof, ch, snr_db, rng)
    return scene, prof, batch


# ------------------------------------------------------------------ step size

def test_step_size_bounds_unit_rows():
    rows = np.eye(4)[:3]
    lo, hi = step_size_bounds(rows, 3)
    assert np.isclose(lo, 0.25) and np.isclose(hi, 0.75)


def test_step_size_bounds_scaling():
    rng = np.random.default_rng(0)
    rows = rng.standard_normal((5, 6)) + 1j * rng.standard_normal((5, 6))
    lo, hi = step_size_bounds(rows, 3)
    lo2, hi2 = step_size_bounds(2 * rows, 3)
    assert np.isclose(lo2, lo / 4) and np.isclose(hi2, hi / 4)
    # lambda_max agrees with a dense eigen-oracle on the block-diagonal operator
    full = np.zeros((5, 30), complex)
    for t in range(5):
        full[t, 6 * t:6 * (t + 1)] = rows[t]
    lam = np.linalg.eigvalsh(full.conj().T @ full).max()
    w = 1 / np.sqrt(4)
    assert np.isclose(lo, (1 - w) / (2 * lam), rtol=1e-10)
    with pytest.raises(ValueError):
        step_size_bounds(np.zeros((3, 4)), 3)


def test_feasibility_rejection():
    _, _, batch = _uniform_batch([10.0], [], snr_db=20.0, n=8)
    with pytest.raises(ValueError):
        pgd_denoise(batch, PgdConfig(alpha=2, k=7))


# -------------------------------------------------------------------- denoise

def test_zero_measurement_zero_fixed_point():
    _, _, batch = _uniform_batch([10.0], [-20.0], snr_db=15.0)
    batch.y = np.zeros_like(batch.y)
    b, it, hist, converged = pgd_denoise(batch, PgdConfig(k=2, init="Zero"))
    assert not np.any(b) and converged and it == 1


def test_noiseless_k1_denoise():
    # the midpoint step size converges to the exact latent vectors, though it
    # takes a few hundred iterations to hit the 1e-7 update tolerance
    scene, prof, batch = _uniform_batch([23.0], [], gains=[1.0 + 0j])
    r, _ = sm.latent_fri_vectors(scene, prof)
    b, it, _, converged = pgd_denoise(batch, PgdConfig(k=1, init="Backprojection", i_max=1000))
    assert converged
    assert np.linalg.norm(b - r) / np.linalg.norm(r) <= 1e-6


def test_noiseless_fixed_point_reached():
    # the full update (with rank truncation) reaches the eps=1e-7 fixed point
    # on random noiseless scenes, given a generous iteration budget
    for i in range(3):
        rng = np.random.default_rng([100, i])
        scene = sm.draw_scene(rng, 2, 2)
        prof = sm.generate_profile(sm.UNIFORM, 16, 32, rng)
        ch = sm.draw_channel(rng, 16)
        batch = sm.synthesize_measurements(scene, prof, ch, np.inf, rng)
        _, _, _, converged = pgd_denoise(batch, PgdConfig(k=4, init="Grid", i_max=5000), k_r=2, k_t=2)
        assert converged


def test_linear_update_contraction_factor():
    # gradient step followed by the lifting obeys the
    # sqrt(alpha+1) * ||I - 2 mu Phi^H Phi||_2 Lipschitz factor
    rng = np.random.default_rng(3)
    _, _, batch = _uniform_batch([10.0, -30.0], [5.0], snr_db=15.0, seed=3)
    rows = batch.operator_uniform
    t_s, n = rows.shape
    alpha = n // 2
    lo, hi = step_size_bounds(rows, alpha)
    mu = 0.5 * (lo + hi)
    gain = max(np.abs(np.linalg.eigvals(np.eye(n) - 2 * mu * np.outer(r.conj(), r))).max()
               for r in rows)
    factor = np.sqrt(alpha + 1) * gain

    def lifted_grad(b):
        res = batch.y - np.einsum('tn,nt->t', rows, b)
        db = b + 2 * mu * (rows.conj().T * res[None, :])
        return sl.stacked_hankel_lift(db.T, alpha)

    for _ in range(50):
        b1 = rng.standard_normal((n, t_s)) + 1j * rng.standard_normal((n, t_s))
        b2 = rng.standard_normal((n, t_s)) + 1j * rng.standard_normal((n, t_s))
        lhs = np.linalg.norm(lifted_grad(b1) - lifted_grad(b2))
        assert lhs <= factor * np.linalg.norm(b1 - b2) + 1e-9


# ------------------------------------------------------------------ extraction

def test_extract_af_noiseless_annihilation():
    scene, prof, batch = _uniform_batch([-41.0, 22.0], [], gains=[1.0, -0.5 + 1j])
    r, _ = sm.latent_fri_vectors(scene, prof)
    c, degenerate = extract_af(r, 8)
    H = sl.stacked_hankel_lift(r.T, 8)
    assert not degenerate
    assert np.linalg.norm(H @ c) <= 1e-9 * np.linalg.norm(H)


def test_extract_af_alpha_equals_k_matches_product():
    scene, prof, batch = _uniform_batch([-41.0, 22.0], [], gains=[1.0, -0.5 + 1j])
    r, _ = sm.latent_fri_vectors(scene, prof)
    c, _ = extract_af(r, 2)
    z = np.exp(-1j * np.pi * np.sin(np.radians([-41.0, 22.0])))
    want = np.poly(z)[::-1]
    want = want / np.linalg.norm(want)
    phase = np.vdot(want, c)
    assert np.linalg.norm(c - want * phase / abs(phase)) <= 1e-9


def test_extract_af_noise_perturbation():
    # alpha = K keeps the null space one-dimensional, so the filter is a
    # stable function of the data; 30 dB entry noise barely rotates it
    scene, prof, batch = _uniform_batch([-41.0, 22.0], [], gains=[1.0, -0.5 + 1j])
    r, _ = sm.latent_fri_vectors(scene, prof)
    rng = np.random.default_rng(5)
    sig = np.sqrt(np.mean(np.abs(r) ** 2)) * 10 ** (-30 / 20)
    noisy = r + sig * (rng.standard_normal(r.shape) + 1j * rng.standard_normal(r.shape)) / np.sqrt(2)
    c0, _ = extract_af(r, 2)
    c1, _ = extract_af(noisy, 2)
    principal_angle = np.arccos(min(1.0, abs(np.vdot(c0, c1))))
    assert principal_angle <= 1e-2


def test_null_space_dimension_and_root_containment():
    # noiseless rank-K stacked lift with alpha > K: null space has dimension
    # >= alpha+1-K and every null vector's polynomial contains the true roots
    scene, prof, batch = _uniform_batch([-41.0, 22.0], [], gains=[1.0, -0.5 + 1j])
    r, _ = sm.latent_fri_vectors(scene, prof)
    alpha, K = 6, 2
    H = sl.stacked_hankel_lift(r.T, alpha)
    s = np.linalg.svd(H, compute_uv=False)
    null_dim = np.sum(s <= 1e-10 * s[0])
    assert null_dim >= alpha + 1 - K
    _, _, vh = np.linalg.svd(H)
    basis = vh[-null_dim:].conj()
    z_true = np.exp(-1j * np.pi * np.sin(np.radians([-41.0, 22.0])))
    rng = np.random.default_rng(7)
    for _ in range(20):
        w = rng.standard_normal(null_dim) + 1j * rng.standard_normal(null_dim)
        c = basis.T @ w
        roots = sl.polynomial_roots(c)
        for z in z_true:
            assert np.min(np.abs(roots - z)) <= 1e-6


# ------------------------------------------------------------------- spectrum

def test_af_spectrum_flat_for_delta_filter():
    grid = np.linspace(-60, 60, 121)
    assert np.allclose(af_spectrum(np.array([1.0, 0, 0]), grid), 1.0)


def test_af_spectrum_nulls_at_sources():
    thetas = [-41.0, 22.0]
    z = np.exp(-1j * np.pi * np.sin(np.radians(thetas)))
    c = np.poly(z)[::-1]
    grid = np.array([-41.0, 0.0, 22.0])
    spec = af_spectrum(c, grid)
    raw = np.abs(c @ np.exp(-1j * np.pi * np.outer(np.arange(3), np.sin(np.radians(grid)))))
    assert raw[0] <= 1e-10 and raw[2] <= 1e-10 and spec[1] == 1.0


# ------------------------------------------------------------------ end to end

def test_noiseless_single_rs_user_exact():
    scene, prof, batch = _uniform_batch([23.4], [], gains=[1.0 + 0j])
    res = estimate_angles_uniform(batch, PgdConfig(k=1, init="Backprojection"), k_r=1, k_t=0)
    assert len(res.angles) == 1
    angle, label = res.angles[0]
    assert label == 'RS' and abs(angle - 23.4) <= 1e-6
    assert not res.mismatched


def test_noiseless_full_scene_exact():
    scene, prof, batch = _uniform_batch([-12.23, 39.19], [-47.34, 15.57], seed=9)
    res = estimate_angles_uniform(batch, PgdConfig(k=4, init="Grid"), k_r=2, k_t=2)
    rs, ts = res.by_subspace()
    assert np.max(np.abs(rs - [-12.23, 39.19])) <= 1e-6
    assert np.max(np.abs(ts - [-47.34, 15.57])) <= 1e-6


def test_scenario2_batch_flagged_mismatched():
    rng = np.random.default_rng(11)
    scene = sm.draw_scene(rng, 2, 2)
    prof = sm.generate_profile(sm.NONUNIFORM, 16, 32, rng)
    ch = sm.draw_channel(rng, 16)
    batch = sm.synthesize_measurements(scene, prof, ch, 15.0, rng)
    res = estimate_angles_uniform(batch, PgdConfig(k=4, init="Grid"), k_r=2, k_t=2)
    assert res.mismatched


def test_uniform_assumption_operator_matches_exact_in_scenario1():
    _, _, batch = _uniform_batch([10.0], [-20.0], snr_db=15.0, seed=13)
    assert np.allclose(uniform_assumption_operator(batch), batch.operator_paired)


def test_initial_iterate_variants():
    _, _, batch = _uniform_batch([10.0], [-20.0], snr_db=15.0, seed=13)
    lo, hi = step_size_bounds(batch.operator_uniform, 8)
    mu = 0.5 * (lo + hi)
    z = initial_iterate(batch, PgdConfig(k=2, init="Zero"), mu)
    assert not np.any(z)
    bp = initial_iterate(batch, PgdConfig(k=2, init="Backprojection"), mu)
    assert np.allclose(bp, 2 * mu * batch.operator_uniform.conj().T * batch.y[None, :])
    gr = initial_iterate(batch, PgdConfig(k=2, init="Grid"), mu, k_r=1, k_t=1)
    assert gr.shape == (16, 32)
    with pytest.raises(ValueError):
        initial_iterate(batch, PgdConfig(k=2, init="Bogus"), mu)

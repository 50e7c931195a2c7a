"""Tests for the grid initializer, root selection and ML polish."""

import numpy as np

from starfri import star_ris_model as sm
from starfri.refine import (coordinate_rescan, grid_init, polish_angles,
                            select_roots_by_energy, varpro_refine)


def _batch(theta_rs, theta_ts, snr_db=np.inf, seed=0, scenario=sm.NONUNIFORM):
    rng = np.random.default_rng(seed)
    k = len(theta_rs) + len(theta_ts)
    scene = sm.UserScene(list(theta_rs), list(theta_ts), np.exp(2j * np.pi * rng.random(k)))
    prof = sm.generate_profile(scenario, 16, 32, rng)
    ch = sm.draw_channel(rng, 16)
    return scene, sm.synthesize_measurements(scene, prof, ch, snr_db, rng)


def test_grid_init_lands_near_truth():
    scene, batch = _batch([-12.0, 39.0], [-47.0, 16.0])
    x_r, x_t, th_r, th_t = grid_init(batch.operator_paired, batch.y, 2, 2)
    assert np.max(np.abs(th_r - np.array([-12.0, 39.0]))) <= 0.5
    assert np.max(np.abs(th_t - np.array([-47.0, 16.0]))) <= 0.5
    assert x_r.shape == (16,) and x_t.shape == (16,)


def test_varpro_refines_to_truth():
    scene, batch = _batch([-20.5, 8.25], [33.75], seed=1)
    th_r, th_t = varpro_refine(batch.y, batch.operator_paired,
                               np.array([-20.0, 8.5]), np.array([33.5]))
    assert np.max(np.abs(th_r - [-20.5, 8.25])) <= 1e-6
    assert np.max(np.abs(th_t - [33.75])) <= 1e-6


def test_coordinate_rescan_escapes_wrong_basin():
    scene, batch = _batch([-20.5, 8.25], [33.75], seed=1)
    # one angle started 25 degrees off; the 1-D global rescan must recover it
    th_r, th_t = coordinate_rescan(batch.y, batch.operator_paired,
                                   np.array([-45.0, 8.3]), np.array([33.7]))
    assert np.max(np.abs(th_r - [-20.5, 8.25])) <= 0.2


def test_polish_pipeline_end_to_end():
    scene, batch = _batch([-20.5, 8.25], [33.75], seed=2)
    th_r, th_t = polish_angles(batch.y, batch.operator_paired,
                               np.array([-45.0, 8.0]), np.array([34.0]))
    assert np.max(np.abs(np.sort(th_r) - [-20.5, 8.25])) <= 1e-6
    assert np.max(np.abs(th_t - [33.75])) <= 1e-6


def test_select_roots_by_energy_rejects_spurious():
    thetas = [11.0, -37.0]
    z = np.exp(-1j * np.pi * np.sin(np.radians(thetas)))
    m = np.arange(16)
    sig = (z[None, :] ** m[:, None]) @ np.array([1.0, 0.8j])
    cands = np.concatenate([z, [0.97 * np.exp(0.4j), 1.02 * np.exp(-2.1j)]])
    kept = select_roots_by_energy(cands, 2, sig[:, None])
    assert np.allclose(np.sort_complex(kept), np.sort_complex(z), atol=1e-8)

"""Model-parameter and dynamics unit tests."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from epigame import params as mp


def test_contact_matrix_case_study_values():
    beta = mp.build_contact_matrix(0.17, 0.9, 3)
    # co-location mixing with f_diag = 0.9, f_off = 0.05:
    diag = 0.17 * (0.9 ** 2 + 2 * 0.05 ** 2)
    off = 0.17 * (2 * 0.9 * 0.05 + 0.05 ** 2)
    assert np.allclose(np.diag(beta), diag, rtol=1e-15)
    assert beta[0, 1] == pytest.approx(off, rel=1e-15)
    assert np.allclose(beta, beta.T)
    assert beta[0, 0] == pytest.approx(0.13855, abs=1e-12)
    assert beta[0, 1] == pytest.approx(0.015725, abs=1e-12)


def test_contact_matrix_single_region_and_validation():
    assert mp.build_contact_matrix(0.17, 1.0, 1) == np.array([[0.17]])
    with pytest.raises(ValueError):
        mp.build_contact_matrix(-0.1, 0.9, 3)
    with pytest.raises(ValueError):
        mp.build_contact_matrix(0.17, 0.0, 3)


def test_game_params_rejects_weak_diagonal():
    beta = np.full((2, 2), 0.1)
    with pytest.raises(ValueError, match="dominate"):
        mp.GameParams(num_regions=2, contact_matrix=beta, latency_rate=0.2,
                      base_recovery_rate=0.1, death_rate=0.0,
                      policy_effectiveness=0.9, noise_s=0.0, noise_e=0.0,
                      populations=1.0, productivity=1.0, death_weight=1.0,
                      value_of_life=1.0, hospitalization_rate=0.0,
                      inpatient_cost=0.0)


def test_game_params_arrays_read_only(case_game):
    with pytest.raises(ValueError):
        case_game.contact_matrix[0, 0] = 0.0
    with pytest.raises(ValueError):
        case_game.populations[0] = 0.0


def test_vaccination_rate_threshold():
    from dataclasses import replace
    game = replace(mp.ny_nj_pa_params(), vaccine_threshold=0.5,
                   vaccine_max_rate=0.02)
    assert mp.vaccination_rate(0.0, game) == 0.0
    assert mp.vaccination_rate(0.5, game) == 0.0
    assert mp.vaccination_rate(0.75, game) == pytest.approx(0.01, abs=1e-15)
    assert mp.vaccination_rate(1.0, game) == pytest.approx(0.02, abs=1e-15)
    with pytest.raises(ValueError):
        mp.vaccination_rate(1.5, game)


def test_vaccination_disabled_at_unit_threshold(case_game):
    assert case_game.vaccine_threshold == 1.0
    assert np.all(mp.vaccination_rate(np.linspace(0, 1, 11), case_game) == 0.0)


def test_recovery_rate_affine(case_game):
    from dataclasses import replace
    game = replace(case_game, recovery_boost=0.05)
    assert mp.recovery_rate(0.0, game) == pytest.approx(1 / 13)
    assert mp.recovery_rate(1.0, game) == pytest.approx(1 / 13 + 0.05)


def test_single_region_drift_values():
    """Uncontrolled single-region drift against hand arithmetic."""
    game = mp.GameParams(num_regions=1, contact_matrix=[[0.17]],
                         latency_rate=0.2, base_recovery_rate=1 / 13,
                         death_rate=0.0, policy_effectiveness=0.99,
                         noise_s=0.0, noise_e=0.0, populations=1.0,
                         productivity=1.0, death_weight=0.0, value_of_life=0.0,
                         hospitalization_rate=0.0, inpatient_cost=0.0)
    state = np.array([[0.99, 0.0, 0.01, 0.0]])
    out = mp.drift(0.0, state, np.zeros((1, 2)), game)
    force = 0.17 * 0.99 * 0.01
    assert out[0, 0] == pytest.approx(-force, abs=1e-15)       # -0.001683
    assert out[0, 1] == pytest.approx(force, abs=1e-15)
    assert out[0, 2] == pytest.approx(-0.01 / 13, abs=1e-15)   # -0.00076923
    assert out[0, 3] == pytest.approx(0.01 / 13, abs=1e-15)


def test_full_lockdown_suppresses_cross_infection(case_game):
    state = np.tile([0.9, 0.05, 0.05, 0.0], (3, 1))
    ctrl = np.zeros((3, 2))
    ctrl[:, 0] = 1.0  # full lockdown everywhere
    force = mp.infection_force(state, ctrl, case_game)
    # residual transmissibility is (1 - theta)^2 = 1e-4 of the uncontrolled force
    base = mp.infection_force(state, np.zeros((3, 2)), case_game)
    assert np.allclose(force, base * (1 - 0.99) ** 2, rtol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(0, 1), st.floats(0, 1))
def test_drift_rows_conserve_mass(seed, ell, h):
    rng = np.random.default_rng(seed)
    game = mp.ny_nj_pa_params()
    state = rng.dirichlet(np.ones(4), size=3)
    ctrl = np.column_stack([np.full(3, ell), np.full(3, h)])
    out = mp.drift(0.0, state, ctrl, game)
    assert np.all(np.abs(out.sum(axis=1)) <= 1e-15)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_diffusion_columns_conserve_mass(seed):
    rng = np.random.default_rng(seed)
    game = mp.ny_nj_pa_params()
    state = rng.dirichlet(np.ones(4), size=3)
    sig = mp.diffusion(state, game)
    assert sig.shape == (12, 6)
    assert np.all(np.abs(sig.sum(axis=0)) <= 1e-15)


def test_running_cost_components(case_game):
    """Single-term cost arithmetic: wage term and health-burden term."""
    state = np.tile([0.9, 0.05, 0.03, 0.02], (3, 1))
    # wage-only: I = 0 removes the burden term
    state0 = state.copy()
    state0[:, 2] = 0.0
    got = mp.running_cost(0, 0.0, state0, 0.5, 0.0, case_game)
    want = 19.54e6 * (0.9 + 0.05) * 0.5 * 172.6
    assert got == pytest.approx(want, rel=1e-12)
    # burden-only: ell = 0 removes the wage term
    got = mp.running_cost(1, 0.0, state, 0.0, 0.0, case_game)
    want = 8.91e6 * 100.0 * (0.0065 / 13 * 0.03 * 1.96e6
                             + 228.7e-5 * 0.03 * 73300.0 / 13)
    assert got == pytest.approx(want, rel=1e-12)
    # quadratic grant term enters undiscounted at t = 0 with population weight 0
    got_h = mp.running_cost(1, 0.0, state, 0.0, 0.25, case_game)
    assert got_h - got == pytest.approx(case_game.health_grant_coeff * 0.25 ** 2,
                                        rel=1e-12)


def test_running_cost_all_matches_scalar(case_game):
    rng = np.random.default_rng(3)
    state = rng.dirichlet(np.ones(4), size=3)
    ctrl = rng.uniform(0, 1, (3, 2))
    vec = mp.running_cost_all(5.0, state, ctrl, case_game)
    for n in range(3):
        assert vec[n] == pytest.approx(
            mp.running_cost(n, 5.0, state, ctrl[n, 0], ctrl[n, 1], case_game),
            rel=1e-12)


def test_running_cost_control_validation(case_game):
    state = np.tile([0.9, 0.05, 0.03, 0.02], (3, 1))
    with pytest.raises(ValueError):
        mp.running_cost(0, 0.0, state, 1.5, 0.0, case_game)
    with pytest.raises(ValueError):
        mp.running_cost(0, 0.0, state, 0.0, -0.1, case_game)


def test_state_x_round_trip():
    rng = np.random.default_rng(11)
    state = rng.dirichlet(np.ones(4), size=3)
    x = mp.state_to_x(state)
    assert x.shape == (9,)
    back = mp.x_to_state(x, 3)
    assert np.allclose(back, state, atol=1e-15)


def test_x_to_state_clips_negative_remainder():
    x = np.array([0.7, 0.3, 0.2])  # S + E + I > 1 for a single region
    state = mp.x_to_state(x, 1)
    assert state[0, 3] == 0.0


def test_preset_field_values(case_game):
    assert case_game.num_regions == 3
    assert case_game.latency_rate == pytest.approx(0.2)
    assert case_game.base_recovery_rate == pytest.approx(1 / 13)
    assert case_game.death_rate == pytest.approx(0.0065 / 13)
    assert case_game.policy_effectiveness == 0.99
    assert case_game.productivity == 172.6
    assert case_game.death_weight == 100.0
    assert case_game.value_of_life == 1.96e6
    assert case_game.hospitalization_rate == pytest.approx(228.7e-5)
    assert case_game.inpatient_cost == pytest.approx(73300 / 13)
    assert case_game.horizon == 180.0
    assert np.allclose(case_game.populations, [19.54e6, 8.91e6, 12.81e6])
    assert np.all(case_game.noise_s == 0.05)
    assert np.all(case_game.noise_e == 0.03)
    # health policy disabled in the study window
    assert case_game.vaccine_max_rate == 0.0
    assert case_game.recovery_boost == 0.0

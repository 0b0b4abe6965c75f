"""Hamiltonian and closed-form best-response tests."""

import numpy as np
import pytest
from dataclasses import replace

from epigame import hamiltonian as ham
from epigame import params as mp
from conftest import random_solver_state


def random_instance(rng, game):
    x = random_solver_state(rng, game.num_regions)
    t = rng.uniform(0.0, game.horizon)
    p = rng.normal(0.0, game.populations.max() * 10, 3 * game.num_regions)
    others = rng.uniform(0.0, 1.0, (game.num_regions, 2))
    n = int(rng.integers(0, game.num_regions))
    return n, t, x, others, p


def test_drift_x_matches_full_drift(case_game):
    rng = np.random.default_rng(0)
    x = random_solver_state(rng, 3)
    ctrl = rng.uniform(0, 1, (3, 2))
    full = mp.drift(0.0, mp.x_to_state(x, 3, removed=np.zeros(3)), ctrl, case_game)
    got = ham.drift_x(0.0, x, ctrl, case_game)
    assert np.allclose(got, np.concatenate([full[:, 0], full[:, 1], full[:, 2]]),
                       atol=0)
    assert ham.diffusion_x(x, case_game).shape == (9, 6)


def test_hamiltonian_value_definition(case_game):
    rng = np.random.default_rng(1)
    n, t, x, others, p = random_instance(rng, case_game)
    ctrl = others.copy()
    got = ham.hamiltonian_value(n, t, x, ctrl, p, case_game)
    state = mp.x_to_state(x, 3, removed=np.zeros(3))
    want = ham.drift_x(t, x, ctrl, case_game) @ p \
        + mp.running_cost(n, t, state, ctrl[n, 0], ctrl[n, 1], case_game)
    assert got == pytest.approx(want, rel=1e-15)


def test_hamiltonian_values_batch_matches_scalar(case_game):
    rng = np.random.default_rng(2)
    n, t, x, others, p = random_instance(rng, case_game)
    batch = rng.uniform(0, 1, (16, 3, 2))
    vals = ham.hamiltonian_values_batch(n, t, x, batch, p, case_game)
    for k in range(16):
        assert vals[k] == pytest.approx(
            ham.hamiltonian_value(n, t, x, batch[k], p, case_game), rel=1e-12)


def test_best_response_bounds_and_types(case_game):
    rng = np.random.default_rng(3)
    for _ in range(50):
        n, t, x, others, p = random_instance(rng, case_game)
        ell, h = ham.best_response(n, t, x, others, p, case_game)
        assert 0.0 <= ell <= 1.0 and 0.0 <= h <= 1.0
        assert isinstance(ell, float) and isinstance(h, float)


def test_best_response_zero_gradient_prefers_zero_control(case_game):
    """With p = 0 the Hamiltonian reduces to the running cost, which is
    minimized by doing nothing; ties break toward the smaller control."""
    rng = np.random.default_rng(4)
    x = random_solver_state(rng, 3)
    ell, h = ham.best_response(0, 0.0, x, np.zeros((3, 2)), np.zeros(9), case_game)
    assert (ell, h) == (0.0, 0.0)


def test_best_response_never_dominated_on_coarse_grid(case_game):
    rng = np.random.default_rng(5)
    for _ in range(25):
        n, t, x, others, p = random_instance(rng, case_game)
        ell, h = ham.best_response(n, t, x, others, p, case_game)
        ctrl = others.copy()
        ctrl[n] = (ell, h)
        h_star = ham.hamiltonian_value(n, t, x, ctrl, p, case_game)
        grid = np.linspace(0, 1, 21)
        for ge in grid:
            for gh in grid:
                ctrl[n] = (ge, gh)
                assert h_star <= ham.hamiltonian_value(n, t, x, ctrl, p, case_game) \
                    + 1e-9 * max(1.0, abs(h_star))


def test_best_response_health_effort_with_vaccine():
    """With a vaccine available and positive effort payoff, the health
    control moves off zero; the grid search agrees."""
    game = replace(mp.ny_nj_pa_params(), vaccine_threshold=0.3,
                   vaccine_max_rate=0.05, recovery_boost=0.05,
                   health_grant_coeff=1.0e5)
    rng = np.random.default_rng(6)
    moved = 0
    for _ in range(30):
        n, t, x, others, p = random_instance(rng, game)
        ell, h = ham.best_response(n, t, x, others, p, game)
        ge, gh = ham.best_response_grid(n, t, x, others, p, game, resolution=1e-3)
        assert abs(ell - ge) <= 2e-3 and abs(h - gh) <= 2e-3
        moved += h > 0
    assert moved > 0


def test_best_response_matches_fine_grid(case_game):
    rng = np.random.default_rng(7)
    for _ in range(50):
        n, t, x, others, p = random_instance(rng, case_game)
        ell, h = ham.best_response(n, t, x, others, p, case_game)
        ge, gh = ham.best_response_grid(n, t, x, others, p, case_game,
                                        resolution=1e-3)
        assert abs(ell - ge) <= 2e-3
        assert abs(h - gh) <= 2e-3


def test_grid_resolution_validation(case_game):
    rng = np.random.default_rng(8)
    n, t, x, others, p = random_instance(rng, case_game)
    with pytest.raises(ValueError):
        ham.best_response_grid(n, t, x, others, p, case_game, resolution=0.0)


def test_best_response_scale_invariance(case_game):
    """Jointly scaling the cost and the gradient leaves the argmin unchanged."""
    rng = np.random.default_rng(9)
    n, t, x, others, p = random_instance(rng, case_game)
    ell, h = ham.best_response(n, t, x, others, p, case_game)
    scale = 1e-9
    scaled = replace(case_game,
                     productivity=case_game.productivity * scale,
                     value_of_life=case_game.value_of_life * scale,
                     inpatient_cost=case_game.inpatient_cost * scale,
                     health_grant_coeff=case_game.health_grant_coeff * scale)
    ell2, h2 = ham.best_response(n, t, x, others, p * scale, scaled)
    assert ell2 == pytest.approx(ell, abs=1e-9)
    assert h2 == pytest.approx(h, abs=1e-9)

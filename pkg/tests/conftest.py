"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from epigame import params as mp


@pytest.fixture(scope="session")
def case_game() -> mp.GameParams:
    """The three-region NY/NJ/PA case-study parameters."""
    return mp.ny_nj_pa_params()


@pytest.fixture(scope="session")
def case_initial_state() -> np.ndarray:
    """Near-disease-free start: E = 2e-4, I = 1e-4 per region."""
    n = 3
    return np.column_stack([np.full(n, 1.0 - 3e-4), np.full(n, 2.0e-4),
                            np.full(n, 1.0e-4), np.zeros(n)])


def random_solver_state(rng: np.random.Generator, num_regions: int,
                        high: float = 0.4) -> np.ndarray:
    """Random reduced state [S.., E.., I..] with S + E + I <= 1 per region."""
    x = rng.uniform(0.0, high, 3 * num_regions)
    tot = x[:num_regions] + x[num_regions:2 * num_regions] + x[2 * num_regions:]
    scale = np.maximum(tot, 1.0)
    return x / np.tile(scale, 3)

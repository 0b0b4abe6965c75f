"""Classical background models: deterministic SEIR ODE and the stochastic
SIS continuous-time Markov chain.  Both double as test oracles for the
multi-region machinery."""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np


def seir_derivative(state, beta: float, gamma: float, lam: float) -> np.ndarray:
    """Right-hand side of the single-region SEIR ODE; components sum to 0."""
    if beta < 0 or gamma < 0 or lam < 0:
        raise ValueError("rates must be nonnegative")
    s, e, i, _ = state
    new_exposed = beta * s * i
    return np.array([
        -new_exposed,
        new_exposed - gamma * e,
        gamma * e - lam * i,
        lam * i,
    ])


def integrate_seir(state0, beta: float, gamma: float, lam: float,
                   horizon: float, step: float):
    """Fixed-step RK4 trajectory of the SEIR ODE.

    Returns (times, states) with states of shape (num_steps + 1, 4).
    """
    if step <= 0:
        raise ValueError("step must be positive")
    num_steps = int(round(horizon / step))
    if abs(num_steps * step - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError("horizon must be an integer multiple of step")
    y = np.asarray(state0, dtype=float)
    times = np.arange(num_steps + 1) * step
    out = np.empty((num_steps + 1, 4))
    out[0] = y
    for k in range(num_steps):
        k1 = seir_derivative(y, beta, gamma, lam)
        k2 = seir_derivative(y + 0.5 * step * k1, beta, gamma, lam)
        k3 = seir_derivative(y + 0.5 * step * k2, beta, gamma, lam)
        k4 = seir_derivative(y + step * k3, beta, gamma, lam)
        y = y + (step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise FloatingPointError(f"SEIR integration diverged at t={times[k + 1]:g}")
        out[k + 1] = y
    return times, out


@dataclass
class SisCounts:
    """State of the stochastic SIS chain: n infected out of N individuals."""

    infected: int
    population: int
    infection_rate: float
    recovery_rate: float

    def __post_init__(self):
        if not 0 <= self.infected <= self.population:
            raise ValueError("infected count must lie in [0, population]")
        if self.infection_rate < 0 or self.recovery_rate < 0:
            raise ValueError("rates must be nonnegative")


def sis_transition_probabilities(counts: SisCounts, dt: float):
    """One-step transition probabilities (p_up, p_down, p_stay) of the SIS
    chain over a time slice dt; they sum to 1 exactly."""
    n, big_n = counts.infected, counts.population
    p_up = counts.infection_rate / big_n * n * (big_n - n) * dt
    p_down = counts.recovery_rate * n * dt
    if p_up + p_down > 1.0:
        raise ValueError(f"dt={dt:g} too large: p_up + p_down = {p_up + p_down:g} > 1")
    return p_up, p_down, 1.0 - p_up - p_down


def sis_step(counts: SisCounts, dt: float, rng: np.random.Generator) -> SisCounts:
    """Sample one categorical transition of the SIS chain."""
    p_up, p_down, _ = sis_transition_probabilities(counts, dt)
    u = rng.random()
    if u < p_up:
        n = counts.infected + 1
    elif u < p_up + p_down:
        n = counts.infected - 1
    else:
        n = counts.infected
    return SisCounts(n, counts.population, counts.infection_rate, counts.recovery_rate)


def simulate_sis(counts0: SisCounts, dt: float, num_steps: int,
                 seed: int) -> np.ndarray:
    """Path of infected counts, length num_steps + 1, reproducible from seed."""
    rng = np.random.default_rng(seed)
    counts = counts0
    path = np.empty(num_steps + 1, dtype=int)
    path[0] = counts.infected
    for k in range(num_steps):
        counts = sis_step(counts, dt, rng)
        path[k + 1] = counts.infected
    return path

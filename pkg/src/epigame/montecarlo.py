"""Euler-Maruyama forward simulation of the controlled multi-region SDE and
Monte Carlo cost estimation over path ensembles."""

from __future__ import annotations

import csv
from dataclasses import dataclass
import numpy as np

from . import params as mp


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of [0, horizon] into num_steps Euler steps."""

    horizon: float
    num_steps: int

    def __post_init__(self):
        if self.num_steps < 1:
            raise ValueError("num_steps must be >= 1")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")

    @property
    def dt(self) -> float:
        return self.horizon / self.num_steps

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.num_steps + 1)


@dataclass
class PathBatch:
    """Monte Carlo ensemble of simulated trajectories.

    states: (num_paths, num_steps + 1, N, 4); controls: (num_paths,
    num_steps, N, 2); seeds: per-path RNG seeds; clamp_events: number of
    compartment values clipped back into [0, 1] during simulation.
    """

    grid: TimeGrid
    states: np.ndarray
    controls: np.ndarray
    seeds: np.ndarray
    clamp_events: int = 0

    @property
    def num_paths(self) -> int:
        return self.states.shape[0]

    @property
    def num_regions(self) -> int:
        return self.states.shape[2]


def euler_step(t: float, state: np.ndarray, controls: np.ndarray, dt: float,
               dw: np.ndarray, game: mp.GameParams):
    """One Euler-Maruyama step; returns (clamped next state, clamp count).

    ``dw`` holds the 2N Brownian increments (already scaled by sqrt(dt)).
    """
    b = mp.drift(t, state, controls, game)
    sig = mp.diffusion(state, game)
    raw = state + b * dt + (sig @ dw).reshape(4, -1).T
    if not np.all(np.isfinite(raw)):
        raise FloatingPointError(f"non-finite state after Euler step at t={t:g}")
    clamped = np.clip(raw, 0.0, 1.0)
    return clamped, int(np.count_nonzero(clamped != raw))


def euler_step_raw(t: float, state: np.ndarray, controls: np.ndarray,
                   dt: float, dw: np.ndarray, game: mp.GameParams) -> np.ndarray:
    """Euler step before sanitization; exposes the conservation invariant."""
    b = mp.drift(t, state, controls, game)
    sig = mp.diffusion(state, game)
    return state + b * dt + (sig @ dw).reshape(4, -1).T


def simulate_batch(x0: np.ndarray, policy, grid: TimeGrid, num_paths: int,
                   base_seed: int, game: mp.GameParams) -> PathBatch:
    """Simulate independent paths under a feedback policy.

    ``policy(t, state)`` must return an (N, 2) control array; outputs are
    clamped into the unit box before use.  Path i uses seed base_seed + i,
    so results are reproducible and independent of execution order.
    """
    n = game.num_regions
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (n, 4):
        raise ValueError(f"x0 must have shape ({n}, 4), got {x0.shape}")
    m = grid.num_steps
    dt = grid.dt
    sqrt_dt = np.sqrt(dt)
    times = grid.times()
    states = np.empty((num_paths, m + 1, n, 4))
    controls = np.empty((num_paths, m, n, 2))
    seeds = base_seed + np.arange(num_paths)
    clamp_events = 0
    for i in range(num_paths):
        rng = np.random.default_rng(int(seeds[i]))
        state = mp.sanitize_state(x0)
        states[i, 0] = state
        for k in range(m):
            ctrl = mp.clamp_controls(np.asarray(policy(times[k], state), dtype=float))
            controls[i, k] = ctrl
            dw = rng.standard_normal(2 * n) * sqrt_dt
            state, nclamp = euler_step(times[k], state, ctrl, dt, dw, game)
            clamp_events += nclamp
            states[i, k + 1] = state
    return PathBatch(grid=grid, states=states, controls=controls,
                     seeds=seeds, clamp_events=clamp_events)


def zero_policy(t, state):
    """No-intervention policy."""
    return np.zeros((state.shape[0], 2))


def constant_policy(ell: float, h: float = 0.0):
    def policy(t, state):
        out = np.empty((state.shape[0], 2))
        out[:, 0] = ell
        out[:, 1] = h
        return out
    return policy


def estimate_costs(batch: PathBatch, game: mp.GameParams):
    """Per-region Monte Carlo cost estimate (mean, standard error).

    The cost integral uses the left-endpoint rule, consistent with the Euler
    discretization.
    """
    if batch.num_paths == 0:
        raise ValueError("empty path batch")
    dt = batch.grid.dt
    times = batch.grid.times()
    totals = np.zeros((batch.num_paths, batch.num_regions))
    for i in range(batch.num_paths):
        for k in range(batch.grid.num_steps):
            totals[i] += mp.running_cost_all(times[k], batch.states[i, k],
                                             batch.controls[i, k], game) * dt
    mean = totals.mean(axis=0)
    if batch.num_paths > 1:
        se = totals.std(axis=0, ddof=1) / np.sqrt(batch.num_paths)
    else:
        se = np.zeros(batch.num_regions)
    return mean, se, totals


def write_paths_csv(batch: PathBatch, out_path) -> None:
    """Dump the full ensemble: one row per (path, step, region)."""
    times = batch.grid.times()
    m = batch.grid.num_steps
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "t", "region", "S", "E", "I", "R", "ell", "h"])
        for i in range(batch.num_paths):
            for k in range(m + 1):
                kc = min(k, m - 1)  # final row repeats the last control
                for r in range(batch.num_regions):
                    s4 = batch.states[i, k, r]
                    c2 = batch.controls[i, kc, r]
                    writer.writerow([i, f"{times[k]:.10g}", r,
                                     *(f"{v:.12g}" for v in s4),
                                     *(f"{v:.12g}" for v in c2)])


SUMMARY_COLUMNS = ["t", "region",
                   "mean_S", "lo_S", "hi_S",
                   "mean_E", "lo_E", "hi_E",
                   "mean_I", "lo_I", "hi_I",
                   "mean_ell", "lo_ell", "hi_ell"]


def summarize_batch(batch: PathBatch) -> list[list]:
    """Per-(t, region) ensemble mean and 95% normal-approximation band
    (mean +/- 1.96 sd across paths) for S, E, I and the lockdown control."""
    times = batch.grid.times()
    m = batch.grid.num_steps
    rows = []
    for k in range(m + 1):
        kc = min(k, m - 1)
        for r in range(batch.num_regions):
            row = [times[k], r]
            for series in (batch.states[:, k, r, 0], batch.states[:, k, r, 1],
                           batch.states[:, k, r, 2], batch.controls[:, kc, r, 0]):
                mean = float(series.mean())
                sd = float(series.std(ddof=1)) if series.size > 1 else 0.0
                row += [mean, mean - 1.96 * sd, mean + 1.96 * sd]
            rows.append(row)
    return rows


def write_summary_csv(batch: PathBatch, out_path) -> None:
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for row in summarize_batch(batch):
            writer.writerow([f"{row[0]:.10g}", row[1]]
                            + [f"{v:.12g}" for v in row[2:]])

"""Model parameters and controlled multi-region SEIR dynamics.

State layout conventions used throughout the package:

* compartment states are arrays of shape ``(N, 4)`` with columns
  ``(S, E, I, R)``, each entry a proportion of that region's population;
* the reduced solver state ``x`` is a flat vector of length ``3N`` ordered
  ``[S^1..S^N, E^1..E^N, I^1..I^N]`` (R is recoverable from conservation);
* control profiles are arrays of shape ``(N, 2)`` with columns
  ``(ell, h)``: lockdown fraction and health-policy effort, both in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import numpy as np


def _as_vector(value, n: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"{name} must be a scalar or length-{n} vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class GameParams:
    """Epidemic, economic and noise parameters of the N-region game.

    Rates are per day, money in currency units, compartments dimensionless.
    Instances are immutable; use :func:`dataclasses.replace` to derive
    variants.
    """

    num_regions: int
    contact_matrix: np.ndarray          # (N, N) infection contact rates
    latency_rate: float                 # E -> I rate (gamma)
    base_recovery_rate: float           # I -> R rate at h = 0 (lambda_0)
    death_rate: float                   # share of I dying per day (kappa)
    policy_effectiveness: float         # lockdown effectiveness (theta)
    noise_s: np.ndarray                 # (N,) S-compartment volatilities
    noise_e: np.ndarray                 # (N,) E-compartment volatilities
    populations: np.ndarray             # (N,) region populations, persons
    productivity: float                 # wage per person per day (w)
    death_weight: float                 # planner's weight on deaths (a)
    value_of_life: float                # economic cost per death (chi)
    hospitalization_rate: float         # share of I hospitalized (p)
    inpatient_cost: float               # cost per in-patient per day (c)
    health_grant_coeff: float = 1.0e6   # quadratic health-spend coefficient (eta)
    discount_rate: float = 0.0          # risk-free rate (r)
    horizon: float = 180.0              # decision horizon in days (T)
    vaccine_threshold: float = 1.0      # h below this gives v(h) = 0 (hbar)
    vaccine_max_rate: float = 0.0       # v(1), vaccination rate ceiling (vbar)
    recovery_boost: float = 0.0         # recovery-rate slope in h (lambda_1)

    def __post_init__(self):
        n = int(self.num_regions)
        if n < 1:
            raise ValueError("num_regions must be >= 1")
        object.__setattr__(self, "num_regions", n)
        beta = np.asarray(self.contact_matrix, dtype=float)
        if beta.shape != (n, n):
            raise ValueError(f"contact_matrix must be {n}x{n}, got {beta.shape}")
        if not np.all(np.isfinite(beta)) or np.any(beta < 0):
            raise ValueError("contact_matrix entries must be finite and nonnegative")
        for i in range(n):
            for k in range(n):
                if k != i and beta[i, i] <= beta[i, k]:
                    raise ValueError(
                        "within-region contact rate must dominate each "
                        f"cross-region rate (row {i}, col {k})"
                    )
        beta = beta.copy()
        beta.setflags(write=False)
        object.__setattr__(self, "contact_matrix", beta)

        for name in ("noise_s", "noise_e", "populations"):
            vec = _as_vector(getattr(self, name), n, name)
            vec.setflags(write=False)
            object.__setattr__(self, name, vec)
        if np.any(self.populations <= 0):
            raise ValueError("populations must be positive")
        if np.any(self.noise_s < 0) or np.any(self.noise_e < 0):
            raise ValueError("volatilities must be nonnegative")

        if not 0.0 <= self.policy_effectiveness <= 1.0:
            raise ValueError("policy_effectiveness must lie in [0, 1]")
        if not 0.0 <= self.vaccine_threshold <= 1.0:
            raise ValueError("vaccine_threshold must lie in [0, 1]")
        for name in ("latency_rate", "base_recovery_rate", "death_rate",
                     "productivity", "death_weight", "value_of_life",
                     "hospitalization_rate", "inpatient_cost",
                     "health_grant_coeff", "discount_rate",
                     "vaccine_max_rate", "recovery_boost"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and nonnegative")
            object.__setattr__(self, name, v)
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        object.__setattr__(self, "horizon", float(self.horizon))

    def with_noise(self, noise_s, noise_e) -> "GameParams":
        return replace(self, noise_s=noise_s, noise_e=noise_e)


def build_contact_matrix(beta_base: float, residency_fraction: float,
                         num_regions: int) -> np.ndarray:
    """Contact matrix from a co-location mixing model.

    A fraction ``residency_fraction`` of each region's population stays home;
    the rest visits the other regions uniformly.  beta^{nk} is the base
    contact rate weighted by the chance that residents of n and k share a
    location: beta_base * sum_m f_{nm} f_{km}.
    """
    if not np.isfinite(beta_base) or beta_base < 0:
        raise ValueError("beta_base must be finite and nonnegative")
    if not 0.0 < residency_fraction <= 1.0:
        raise ValueError("residency_fraction must lie in (0, 1]")
    n = int(num_regions)
    if n < 1:
        raise ValueError("num_regions must be >= 1")
    if n == 1:
        return np.array([[beta_base]])
    f = np.full((n, n), (1.0 - residency_fraction) / (n - 1))
    np.fill_diagonal(f, residency_fraction)
    return beta_base * (f @ f.T)


def vaccination_rate(h, params: GameParams):
    """Vaccination availability v(h): zero up to the development threshold,
    then affine up to ``vaccine_max_rate`` at h = 1."""
    h = np.asarray(h, dtype=float)
    if np.any(h < 0) or np.any(h > 1):
        raise ValueError("health effort h must lie in [0, 1]")
    hbar = params.vaccine_threshold
    if hbar >= 1.0:
        return np.zeros_like(h)[()]
    slope = params.vaccine_max_rate / (1.0 - hbar)
    return np.maximum(h - hbar, 0.0) * slope


def recovery_rate(h, params: GameParams):
    """Recovery rate lambda(h) = lambda_0 + lambda_1 * h."""
    h = np.asarray(h, dtype=float)
    if np.any(h < 0) or np.any(h > 1):
        raise ValueError("health effort h must lie in [0, 1]")
    return params.base_recovery_rate + params.recovery_boost * h


def sanitize_state(state: np.ndarray) -> np.ndarray:
    """Clamp all compartments into [0, 1]."""
    return np.clip(state, 0.0, 1.0)


def clamp_controls(controls: np.ndarray) -> np.ndarray:
    return np.clip(controls, 0.0, 1.0)


def infection_force(state: np.ndarray, controls: np.ndarray,
                    params: GameParams) -> np.ndarray:
    """Per-region new-exposure rate sum_k beta^{nk} S^n I^k
    (1 - theta ell^n)(1 - theta ell^k)."""
    s = state[:, 0]
    i = state[:, 2]
    u = 1.0 - params.policy_effectiveness * controls[:, 0]
    return s * u * (params.contact_matrix @ (i * u))


def drift(t: float, state: np.ndarray, controls: np.ndarray,
          params: GameParams) -> np.ndarray:
    """Controlled SEIR drift, shape (N, 4); rows sum to zero exactly."""
    n = params.num_regions
    if state.shape != (n, 4):
        raise ValueError(f"state must have shape ({n}, 4), got {state.shape}")
    if controls.shape != (n, 2):
        raise ValueError(f"controls must have shape ({n}, 2), got {controls.shape}")
    force = infection_force(state, controls, params)
    vacc = vaccination_rate(controls[:, 1], params) * state[:, 0]
    latent = params.latency_rate * state[:, 1]
    removal = recovery_rate(controls[:, 1], params) * state[:, 2]
    out = np.empty((n, 4))
    out[:, 0] = -force - vacc
    out[:, 1] = force - latent
    out[:, 2] = latent - removal
    out[:, 3] = removal + vacc
    return out


def diffusion(state: np.ndarray, params: GameParams) -> np.ndarray:
    """Diffusion matrix, shape (4N, 2N).

    Rows are ordered S^1..S^N, E^1..E^N, I^1..I^N, R^1..R^N; columns are the
    Brownian drivers W^{s_1}..W^{s_N}, W^{e_1}..W^{e_N}.  Every column sums
    to zero: the noise shuffles mass between compartments only.
    """
    n = params.num_regions
    if state.shape != (n, 4):
        raise ValueError(f"state must have shape ({n}, 4), got {state.shape}")
    sig_s = params.noise_s * state[:, 0]
    sig_e = params.noise_e * state[:, 1]
    out = np.zeros((4 * n, 2 * n))
    idx = np.arange(n)
    out[idx, idx] = -sig_s                 # S row, W^s column
    out[n + idx, idx] = sig_s              # E row, W^s column
    out[n + idx, n + idx] = -sig_e         # E row, W^e column
    out[2 * n + idx, n + idx] = sig_e      # I row, W^e column
    return out


def running_cost(n: int, t: float, state: np.ndarray, ell: float, h: float,
                 params: GameParams) -> float:
    """Region n's instantaneous cost rate (currency/day), discounted."""
    if not 0.0 <= ell <= 1.0 or not 0.0 <= h <= 1.0:
        raise ValueError("controls must lie in [0, 1]")
    s, e, i = state[n, 0], state[n, 1], state[n, 2]
    pop = params.populations[n]
    lockdown = (s + e + i) * ell * params.productivity
    health_burden = params.death_weight * (
        params.death_rate * i * params.value_of_life
        + params.hospitalization_rate * i * params.inpatient_cost)
    grant = params.health_grant_coeff * h * h
    return float(np.exp(-params.discount_rate * t) * (pop * (lockdown + health_burden) + grant))


def running_cost_all(t: float, state: np.ndarray, controls: np.ndarray,
                     params: GameParams) -> np.ndarray:
    """Vectorized :func:`running_cost` over regions; shape (N,)."""
    s = state[:, 0]
    e = state[:, 1]
    i = state[:, 2]
    ell = controls[:, 0]
    h = controls[:, 1]
    lockdown = (s + e + i) * ell * params.productivity
    health_burden = params.death_weight * (
        params.death_rate * i * params.value_of_life
        + params.hospitalization_rate * i * params.inpatient_cost)
    grant = params.health_grant_coeff * h * h
    return np.exp(-params.discount_rate * t) * (params.populations * (lockdown + health_burden) + grant)


def state_to_x(state: np.ndarray) -> np.ndarray:
    """(N, 4) compartment array -> flat 3N solver vector [S.., E.., I..]."""
    return np.concatenate([state[:, 0], state[:, 1], state[:, 2]])


def x_to_state(x: np.ndarray, num_regions: int,
               removed: np.ndarray | None = None) -> np.ndarray:
    """Flat 3N solver vector -> (N, 4) array; R defaults to the conserved
    remainder clipped at zero."""
    n = num_regions
    state = np.empty((n, 4))
    state[:, 0] = x[:n]
    state[:, 1] = x[n:2 * n]
    state[:, 2] = x[2 * n:3 * n]
    if removed is None:
        state[:, 3] = np.maximum(1.0 - state[:, :3].sum(axis=1), 0.0)
    else:
        state[:, 3] = removed
    return state


# Case-study preset: NY / NJ / PA, 180 days from 03/15/2020.  Health policy
# is disabled (no vaccine in the study window), so h-related rates are zero.
NY_NJ_PA_POPULATIONS = np.array([19.54e6, 8.91e6, 12.81e6])


def ny_nj_pa_params(theta: float = 0.99, a: float = 100.0,
                    noise_s: float = 0.05, noise_e: float = 0.03,
                    residency_fraction: float = 0.9) -> GameParams:
    """Parameters of the three-state COVID-19 case study."""
    return GameParams(
        num_regions=3,
        contact_matrix=build_contact_matrix(0.17, residency_fraction, 3),
        latency_rate=1.0 / 5.0,
        base_recovery_rate=1.0 / 13.0,
        death_rate=0.0065 / 13.0,
        policy_effectiveness=theta,
        noise_s=noise_s,
        noise_e=noise_e,
        populations=NY_NJ_PA_POPULATIONS,
        productivity=172.6,
        death_weight=a,
        value_of_life=1.96e6,
        hospitalization_rate=228.7e-5,
        inpatient_cost=73300.0 / 13.0,
        discount_rate=0.0,
        horizon=180.0,
    )

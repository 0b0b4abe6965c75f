"""Per-player Hamiltonian and pointwise best-response controls.

All functions act on the reduced 3N solver state ``x = [S.., E.., I..]``
(the R compartments decouple from both cost and the remaining dynamics,
so the value functions never see them).
"""

from __future__ import annotations

import numpy as np

from . import params as mp

TIE_TOL = 1e-12


def drift_x(t: float, x: np.ndarray, controls: np.ndarray,
            game: mp.GameParams) -> np.ndarray:
    """Drift of the 3N solver coordinates."""
    n = game.num_regions
    if x.shape != (3 * n,):
        raise ValueError(f"x must have length {3 * n}, got shape {x.shape}")
    state = mp.x_to_state(x, n, removed=np.zeros(n))
    full = mp.drift(t, state, controls, game)
    return np.concatenate([full[:, 0], full[:, 1], full[:, 2]])


def diffusion_x(x: np.ndarray, game: mp.GameParams) -> np.ndarray:
    """Diffusion of the 3N solver coordinates, shape (3N, 2N)."""
    n = game.num_regions
    state = mp.x_to_state(x, n, removed=np.zeros(n))
    return mp.diffusion(state, game)[:3 * n]


def hamiltonian_value(n: int, t: float, x: np.ndarray, all_controls: np.ndarray,
                      p: np.ndarray, game: mp.GameParams) -> float:
    """H^n = b(t, x, controls) . p + f^n(t, x, ell^n, h^n)."""
    b = drift_x(t, x, all_controls, game)
    state = mp.x_to_state(x, game.num_regions, removed=np.zeros(game.num_regions))
    f = mp.running_cost(n, t, state, all_controls[n, 0], all_controls[n, 1], game)
    return float(b @ p) + f


def _pick_min(candidates, values, prefer_small=True):
    """Argmin with deterministic tie-break toward the smaller control."""
    values = np.asarray(values, dtype=float)
    vmin = values.min()
    tol = TIE_TOL * max(1.0, abs(vmin))
    tied = [c for c, v in zip(candidates, values) if v <= vmin + tol]
    return min(tied) if prefer_small else max(tied)


def _lockdown_quadratic(n: int, t: float, x: np.ndarray,
                        others_controls: np.ndarray, p: np.ndarray,
                        game: mp.GameParams):
    """Coefficients (A, B) of H^n as A u^2 + B u + const in u = 1 - theta ell^n.

    Collects both the region-n infection rows and the k != n rows whose
    infection terms contain ell^n, plus the wage cost mapped through u.
    """
    nn = game.num_regions
    theta = game.policy_effectiveness
    beta = game.contact_matrix
    s = x[:nn]
    i = x[2 * nn:3 * nn]
    e = x[nn:2 * nn]
    dp = p[nn:2 * nn] - p[:nn]       # p_E - p_S per region
    u_other = 1.0 - theta * others_controls[:, 0]

    a_coef = beta[n, n] * s[n] * i[n] * dp[n]
    b_coef = 0.0
    for k in range(nn):
        if k == n:
            continue
        b_coef += beta[n, k] * s[n] * i[k] * u_other[k] * dp[n]
        b_coef += beta[k, n] * s[k] * i[n] * u_other[k] * dp[k]
    wage = np.exp(-game.discount_rate * t) * game.populations[n] \
        * (s[n] + e[n] + i[n]) * game.productivity
    if theta > 0:
        b_coef -= wage / theta       # cost  wage * ell = wage * (1 - u) / theta
    return a_coef, b_coef


def _health_objective(n: int, t: float, x: np.ndarray, game: mp.GameParams):
    """h-dependent part of H^n as a callable: quadratic grant cost plus the
    vaccination and recovery drift terms hitting p_S and p_I."""
    nn = game.num_regions
    s_n = x[n]
    i_n = x[2 * nn + n]

    def phi(h, p):
        grant = np.exp(-game.discount_rate * t) * game.health_grant_coeff * h * h
        vac = -mp.vaccination_rate(h, game) * s_n * p[n]
        rec = -mp.recovery_rate(h, game) * i_n * p[2 * nn + n]
        return grant + vac + rec

    return phi


def best_response(n: int, t: float, x: np.ndarray, others_controls: np.ndarray,
                  p: np.ndarray, game: mp.GameParams):
    """Closed-form minimizer of H^n over (ell, h) in [0, 1]^2.

    The lockdown part is quadratic in u = 1 - theta ell; the health part is
    piecewise quadratic (the vaccination rate kicks in above the threshold).
    Ties within 1e-12 break toward the smaller control.
    """
    theta = game.policy_effectiveness

    # lockdown: minimize A u^2 + B u over u in [1 - theta, 1]
    if theta <= 0:
        ell_star = 0.0
    else:
        a_coef, b_coef = _lockdown_quadratic(n, t, x, others_controls, p, game)
        u_lo, u_hi = 1.0 - theta, 1.0
        cands = [u_hi, u_lo]         # ordered so larger u (smaller ell) ties first
        if a_coef != 0.0:
            vertex = -b_coef / (2.0 * a_coef)
            if a_coef > 0 and u_lo < vertex < u_hi:
                cands.append(vertex)
        u_star = _pick_min(cands, [a_coef * u * u + b_coef * u for u in cands],
                           prefer_small=False)
        ell_star = min(max((1.0 - u_star) / theta, 0.0), 1.0)

    # health effort: piecewise quadratic on [0, hbar] and [hbar, 1]
    phi = _health_objective(n, t, x, game)
    disc = np.exp(-game.discount_rate * t)
    eta = game.health_grant_coeff * disc
    nn = game.num_regions
    hbar = game.vaccine_threshold
    cands = [0.0]
    if 0.0 < hbar < 1.0:
        cands.append(hbar)
    cands.append(1.0)
    if eta > 0:
        lin0 = -game.recovery_boost * x[2 * nn + n] * p[2 * nn + n]
        # segment below the threshold: eta h^2 + lin0 h
        v0 = -lin0 / (2.0 * eta)
        if 0.0 < v0 < min(hbar, 1.0):
            cands.append(v0)
        if hbar < 1.0:
            slope = game.vaccine_max_rate / (1.0 - hbar)
            lin1 = lin0 - slope * x[n] * p[n]
            v1 = -lin1 / (2.0 * eta)
            if hbar < v1 < 1.0:
                cands.append(v1)
    h_star = _pick_min(cands, [phi(h, p) for h in cands])
    return float(ell_star), float(h_star)


def hamiltonian_values_batch(n: int, t: float, x: np.ndarray,
                             controls_batch: np.ndarray, p: np.ndarray,
                             game: mp.GameParams) -> np.ndarray:
    """H^n over a batch of control profiles, shape (K, N, 2) -> (K,).

    A direct vectorized transcription of the drift and cost definitions,
    kept free of the quadratic-coefficient algebra so it can serve as an
    independent oracle for :func:`best_response`.
    """
    nn = game.num_regions
    s, e, i = x[:nn], x[nn:2 * nn], x[2 * nn:3 * nn]
    ell = controls_batch[..., 0]
    h = controls_batch[..., 1]
    u = 1.0 - game.policy_effectiveness * ell
    force = s * u * ((i * u) @ game.contact_matrix.T)
    vacc = mp.vaccination_rate(h, game) * s
    lam = mp.recovery_rate(h, game)
    ds = -force - vacc
    de = force - game.latency_rate * e
    di = game.latency_rate * e - lam * i
    b_dot_p = ds @ p[:nn] + de @ p[nn:2 * nn] + di @ p[2 * nn:3 * nn]
    disc = np.exp(-game.discount_rate * t)
    f = disc * (game.populations[n] * (
        (s[n] + e[n] + i[n]) * ell[..., n] * game.productivity
        + game.death_weight * (game.death_rate * i[n] * game.value_of_life
                               + game.hospitalization_rate * i[n] * game.inpatient_cost))
        + game.health_grant_coeff * h[..., n] ** 2)
    return b_dot_p + f


def best_response_grid(n: int, t: float, x: np.ndarray,
                       others_controls: np.ndarray, p: np.ndarray,
                       game: mp.GameParams, resolution: float):
    """Exhaustive search over the uniform grid on [0, 1]^2; test oracle for
    :func:`best_response` with the same tie-break.

    Coarse grids are enumerated pairwise.  Fine grids exploit that H^n is
    additively separable in (ell^n, h^n) -- verified at sampled pairs -- so
    the full grid minimum equals the outer sum of two 1-D sweeps.
    """
    if not 0.0 < resolution <= 0.5:
        raise ValueError("resolution must lie in (0, 0.5]")
    points = np.linspace(0.0, 1.0, int(round(1.0 / resolution)) + 1)
    k = points.size

    def batch_for(ells, hs):
        ctrl = np.broadcast_to(others_controls, (ells.size,) + others_controls.shape).copy()
        ctrl[:, n, 0] = ells
        ctrl[:, n, 1] = hs
        return hamiltonian_values_batch(n, t, x, ctrl, p, game)

    if k * k <= 10_000:
        ee, hh = np.meshgrid(points, points, indexing="ij")
        values = batch_for(ee.ravel(), hh.ravel()).reshape(k, k)
    else:
        h_ell = batch_for(points, np.zeros(k))
        h_h = batch_for(np.zeros(k), points)
        h_00 = batch_for(np.zeros(1), np.zeros(1))[0]
        values = h_ell[:, None] + h_h[None, :] - h_00
        rng = np.random.default_rng(0)
        for _ in range(3):  # spot-check separability against direct evaluation
            i0, j0 = rng.integers(0, k, 2)
            direct = batch_for(points[i0:i0 + 1], points[j0:j0 + 1])[0]
            if abs(direct - values[i0, j0]) > 1e-9 * max(1.0, abs(direct)):
                raise AssertionError("Hamiltonian not separable; grid shortcut invalid")
    vmin = values.min()
    tol = TIE_TOL * max(1.0, abs(vmin))
    i0, j0 = np.argwhere(values <= vmin + tol)[0]  # row-major: smallest controls
    return float(points[i0]), float(points[j0])

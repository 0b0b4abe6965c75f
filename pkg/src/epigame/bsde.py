"""Single-stage best-response solver.

Each fictitious-play stage solves, for one player, a semilinear PDE via its
BSDE representation: simulate the forward state with every player (the
optimizing one included) frozen at its previous-stage policy network, roll
the value process forward with the driver, and penalize the terminal
mismatch plus the policy-approximation error.

Costs are trained in scaled units (cost_scale, default the Monte Carlo
cost of the no-intervention baseline) so value targets are O(1); the split
into reference drift mu and driver g keeps the identity mu . grad V + g =
inf_alpha H by
construction, so the scaling cancels from the derived best response.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np
import torch

from . import params as mp
from . import hamiltonian as ham
from .nets import Mlp, batch_value_and_grad


def default_cost_scale(game: mp.GameParams) -> float:
    return float(game.populations.sum() * game.productivity * game.horizon)


# Value/policy networks see log-scaled E and I coordinates: epidemic states
# span several orders of magnitude (1e-4 at outbreak, 1e-1 at the peak) and
# the value function is steep precisely where prevalence is small, so O(1)
# network weights can only represent it in log coordinates.
LOG_FLOOR = 1e-6
LOG_DENOM = 7.0


def solver_features(t_frac, x: torch.Tensor) -> torch.Tensor:
    """Network input rows [t/T, S.., log-scaled E.., log-scaled I..].

    t_frac: scalar or (B,) tensor already divided by the horizon;
    x: (B, 3N) raw solver states."""
    batch = x.shape[0]
    t_col = torch.as_tensor(t_frac, dtype=x.dtype)
    if t_col.dim() == 0:
        t_col = t_col.expand(batch)
    n = x.shape[-1] // 3
    s = x[..., :n]
    ei = torch.log(x[..., n:] + LOG_FLOOR) / LOG_DENOM
    return torch.cat([t_col.unsqueeze(-1), s, ei], dim=-1)


def solver_features_np(t_frac: float, x: np.ndarray) -> np.ndarray:
    """Numpy counterpart of :func:`solver_features` for one state vector."""
    x = np.asarray(x, dtype=float)
    n = x.size // 3
    return np.concatenate([[t_frac], x[:n],
                           np.log(x[n:] + LOG_FLOOR) / LOG_DENOM])


def feature_gradient_to_state(x: torch.Tensor, grad_feat: torch.Tensor) -> torch.Tensor:
    """Chain rule from network-input gradients (without the time column)
    back to raw-state gradients: the E/I columns pick up 1/(denom (v + floor))."""
    n = x.shape[-1] // 3
    factor = torch.ones_like(x)
    factor[..., n:] = 1.0 / (LOG_DENOM * (x[..., n:] + LOG_FLOOR))
    return grad_feat * factor


class TorchGame:
    """Game parameters as float64 tensors, with batched dynamics."""

    def __init__(self, game: mp.GameParams, cost_scale: float | None = None):
        self.game = game
        self.n = game.num_regions
        self.scale = float(cost_scale) if cost_scale else default_cost_scale(game)
        t64 = lambda v: torch.as_tensor(np.array(v, dtype=float))
        self.beta = t64(game.contact_matrix)
        self.gamma = float(game.latency_rate)
        self.lam0 = float(game.base_recovery_rate)
        self.lam1 = float(game.recovery_boost)
        self.kappa = float(game.death_rate)
        self.theta = float(game.policy_effectiveness)
        self.sig_s = t64(game.noise_s)
        self.sig_e = t64(game.noise_e)
        self.pops = t64(game.populations)
        self.w = float(game.productivity)
        self.a = float(game.death_weight)
        self.chi = float(game.value_of_life)
        self.hosp = float(game.hospitalization_rate)
        self.cost_c = float(game.inpatient_cost)
        self.eta = float(game.health_grant_coeff)
        self.r = float(game.discount_rate)
        self.horizon = float(game.horizon)
        self.hbar = float(game.vaccine_threshold)
        self.vbar = float(game.vaccine_max_rate)
        self.v_slope = self.vbar / (1.0 - self.hbar) if self.hbar < 1.0 else 0.0

    def split(self, x: torch.Tensor):
        n = self.n
        return x[..., :n], x[..., n:2 * n], x[..., 2 * n:3 * n]

    def vaccination(self, h: torch.Tensor) -> torch.Tensor:
        return torch.clamp(h - self.hbar, min=0.0) * self.v_slope

    def drift(self, t: float, x: torch.Tensor, controls: torch.Tensor) -> torch.Tensor:
        """Reduced drift, x: (B, 3N), controls: (B, N, 2) -> (B, 3N)."""
        s, e, i = self.split(x)
        ell, h = controls[..., 0], controls[..., 1]
        u = 1.0 - self.theta * ell
        force = s * u * ((i * u) @ self.beta.T)
        vacc = self.vaccination(h) * s
        ds = -force - vacc
        de = force - self.gamma * e
        di = self.gamma * e - (self.lam0 + self.lam1 * h) * i
        return torch.cat([ds, de, di], dim=-1)

    def sigma_dw(self, x: torch.Tensor, dw: torch.Tensor) -> torch.Tensor:
        """Sigma(x) dW, dw: (B, 2N) already scaled by sqrt(dt)."""
        n = self.n
        s, e, _ = self.split(x)
        dws, dwe = dw[..., :n], dw[..., n:]
        ss = self.sig_s * s * dws
        ee = self.sig_e * e * dwe
        return torch.cat([-ss, ss - ee, ee], dim=-1)

    def sigma_t_p(self, x: torch.Tensor, p: torch.Tensor) -> torch.Tensor:
        """Z = Sigma(x)^T p, p: (B, 3N) -> (B, 2N)."""
        n = self.n
        s, e, _ = self.split(x)
        ps, pe, pi = p[..., :n], p[..., n:2 * n], p[..., 2 * n:]
        return torch.cat([self.sig_s * s * (pe - ps),
                          self.sig_e * e * (pi - pe)], dim=-1)

    def discount(self, t) -> torch.Tensor:
        return torch.exp(-self.r * torch.as_tensor(t, dtype=torch.float64))

    def running_cost(self, n: int, t, x: torch.Tensor,
                     ell: torch.Tensor, h: torch.Tensor) -> torch.Tensor:
        """Player n's cost rate in scaled units, (B,); t scalar or (B,)."""
        s, e, i = self.split(x)
        lockdown = (s[..., n] + e[..., n] + i[..., n]) * ell * self.w
        burden = self.a * (self.kappa * i[..., n] * self.chi
                           + self.hosp * i[..., n] * self.cost_c)
        return self.discount(t) * (self.pops[n] * (lockdown + burden)
                                   + self.eta * h * h) / self.scale

    def best_response(self, n: int, t: float, x: torch.Tensor,
                      opp_controls: torch.Tensor, p: torch.Tensor) -> torch.Tensor:
        """Batched closed-form argmin of the (scaled) Hamiltonian, (B, 2).

        Mirrors hamiltonian.best_response; candidate ordering resolves exact
        ties toward the smaller control.
        """
        nn = self.n
        s, e, i = self.split(x)
        dp = p[..., nn:2 * nn] - p[..., :nn]
        disc = self.discount(t)

        if self.theta > 0:
            u_opp = 1.0 - self.theta * opp_controls[..., 0]
            mask = torch.ones(nn, dtype=x.dtype)
            mask[n] = 0.0
            a_coef = self.beta[n, n] * s[..., n] * i[..., n] * dp[..., n]
            b_coef = s[..., n] * dp[..., n] * ((i * u_opp * mask) @ self.beta[n])
            b_coef = b_coef + i[..., n] * ((s * u_opp * dp * mask) @ self.beta[:, n])
            wage = disc * self.pops[n] * (s[..., n] + e[..., n] + i[..., n]) \
                * self.w / self.scale
            b_coef = b_coef - wage / self.theta
            u_lo = torch.full_like(a_coef, 1.0 - self.theta)
            u_hi = torch.ones_like(a_coef)
            vertex = torch.where(a_coef > 0,
                                 -b_coef / torch.clamp(2.0 * a_coef, min=1e-300),
                                 u_hi)
            vertex = torch.clamp(vertex, min=1.0 - self.theta, max=1.0)
            cands = torch.stack([u_hi, vertex, u_lo], dim=-1)
            q = a_coef.unsqueeze(-1) * cands ** 2 + b_coef.unsqueeze(-1) * cands
            idx = torch.argmin(q, dim=-1, keepdim=True)
            u_star = torch.gather(cands, -1, idx).squeeze(-1)
            ell = torch.clamp((1.0 - u_star) / self.theta, 0.0, 1.0)
        else:
            ell = torch.zeros_like(s[..., n])

        # health effort: piecewise quadratic with a kink at the vaccine threshold
        lin0 = -self.lam1 * i[..., n] * p[..., 2 * nn + n]
        eta = self.eta * disc / self.scale   # scalar or (B,), matching t
        eta_col = eta.unsqueeze(-1) if eta.dim() > 0 else eta
        cands = [torch.zeros_like(ell), torch.ones_like(ell)]
        if 0.0 < self.hbar < 1.0:
            cands.append(torch.full_like(ell, self.hbar))
        if self.eta > 0:
            v0 = torch.clamp(-lin0 / (2.0 * eta), 0.0, min(self.hbar, 1.0))
            cands.append(v0)
            if self.hbar < 1.0:
                lin1 = lin0 - self.v_slope * s[..., n] * p[..., n]
                v1 = torch.clamp(-lin1 / (2.0 * eta), self.hbar, 1.0)
                cands.append(v1)
        hc = torch.stack(cands, dim=-1)
        phi = eta_col * hc ** 2 + lin0.unsqueeze(-1) * hc \
            - self.vaccination(hc) * (s[..., n] * p[..., n]).unsqueeze(-1)
        idx = torch.argmin(phi, dim=-1, keepdim=True)
        h = torch.gather(hc, -1, idx).squeeze(-1)
        return torch.stack([ell, h], dim=-1)

    def mu_and_driver(self, n: int, t: float, x: torch.Tensor,
                      grad_v: torch.Tensor, opp_controls: torch.Tensor):
        """Reference drift mu^n, driver g^n and the derived best response.

        mu is the drift with player n at its reference control -- the row
        already present in ``opp_controls`` (the frozen previous-stage
        policy during training); g = f^n(alpha*) +
        (b(alpha*) - b(ref)) . grad V, so that mu . grad V + g =
        inf_alpha H^n identically for any reference.
        """
        ctrl_ref = opp_controls.clone()
        mu = self.drift(t, x, ctrl_ref)
        alpha = self.best_response(n, t, x, opp_controls, grad_v)
        ctrl_star = ctrl_ref.clone()
        ctrl_star[:, n, :] = alpha
        f = self.running_cost(n, t, x, alpha[:, 0], alpha[:, 1])
        g = f + ((self.drift(t, x, ctrl_star) - mu) * grad_v).sum(-1)
        return mu, g, alpha


def driver_terms(n: int, t: float, x: np.ndarray, grad_v: np.ndarray,
                 opp_controls: np.ndarray, game: mp.GameParams):
    """Unscaled scalar-state (mu, g) split, numpy route.

    Independent of the torch path: uses hamiltonian.best_response for the
    inner minimization.  Satisfies mu . grad_v + g = inf_alpha H^n.
    """
    ctrl_ref = np.array(opp_controls, dtype=float)
    ctrl_ref[n] = 0.0
    mu = ham.drift_x(t, x, ctrl_ref, game)
    ell, h = ham.best_response(n, t, x, opp_controls, grad_v, game)
    ctrl_star = ctrl_ref.copy()
    ctrl_star[n] = (ell, h)
    state = mp.x_to_state(x, game.num_regions, removed=np.zeros(game.num_regions))
    f = mp.running_cost(n, t, state, ell, h, game)
    g = f + (ham.drift_x(t, x, ctrl_star, game) - mu) @ grad_v
    return mu, g, (ell, h)


@dataclass
class StageProblem:
    """One player's best-response problem against frozen opponents."""

    player: int
    game: mp.GameParams
    grid_steps: int
    opponents: list                      # N entries of Mlp | None; own entry unused
    x0: np.ndarray                       # nominal 3N initial solver state
    batch_size: int = 64
    tau: float = 1.0
    jitter: float = 0.1                  # relative width of the x0 sampler
    cost_scale: float | None = None
    tg: TorchGame = field(init=False)

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")
        self.tg = TorchGame(self.game, self.cost_scale)
        self.x0 = np.asarray(self.x0, dtype=float)
        if self.x0.shape != (3 * self.game.num_regions,):
            raise ValueError("x0 must be a flat 3N solver state")

    @property
    def dt(self) -> float:
        return self.game.horizon / self.grid_steps


def sample_initial_states(problem: StageProblem, batch: int,
                          gen: torch.Generator) -> torch.Tensor:
    """Nominal start plus relative uniform jitter, renormalized so each
    region's S + E + I stays at most 1."""
    x0 = torch.as_tensor(problem.x0)
    noise = (torch.rand((batch, x0.numel()), generator=gen) * 2.0 - 1.0)
    x = torch.clamp(x0 * (1.0 + problem.jitter * noise), min=0.0, max=1.0)
    n = problem.game.num_regions
    tot = x[:, :n] + x[:, n:2 * n] + x[:, 2 * n:]
    scale = torch.clamp(tot, min=1.0)
    for b in range(3):
        x[:, b * n:(b + 1) * n] = x[:, b * n:(b + 1) * n] / scale
    return x


def opponent_controls(problem: StageProblem, inp: torch.Tensor) -> torch.Tensor:
    """Frozen previous-stage policies on standardized (t/T, x) rows; (K, N, 2).

    Every player's slot is filled from its frozen net (missing nets
    contribute zeros).  The player's own row is its previous-stage policy,
    which serves as the reference control of the mu/g split: forward paths
    then sample the state region the current joint policy actually visits,
    and the drift-correction term in the driver stays small once the policy
    nets track the closed-form best response.
    """
    rows = inp.shape[0]
    n = problem.game.num_regions
    out = torch.zeros((rows, n, 2))
    with torch.no_grad():
        for k, net in enumerate(problem.opponents):
            if net is None:
                continue
            out[:, k, :] = net(inp)
    return out


def simulate_forward(problem: StageProblem, x0: torch.Tensor,
                     dw: torch.Tensor) -> torch.Tensor:
    """Forward states X_{t_0}..X_{t_{M-1}} under the reference drift, (B, M, 3N).

    The path is parameter-free (every player, including player n, rides its
    frozen previous-stage policy), so it carries no gradient graph.
    """
    tg = problem.tg
    n = problem.player
    m = problem.grid_steps
    dt = problem.dt
    xs = []
    with torch.no_grad():
        x = x0.detach().clone()
        for k in range(m):
            xs.append(x)
            t = k * dt
            inp = solver_features(t / tg.horizon, x)
            opp = opponent_controls(problem, inp)
            mu = tg.drift(t, x, opp)
            x = torch.clamp(x + mu * dt + tg.sigma_dw(x, dw[:, k, :]), 0.0, 1.0)
            if not torch.all(torch.isfinite(x)):
                raise FloatingPointError(f"forward path diverged at t={t + dt:g}")
    return torch.stack(xs, dim=1)


def stage_loss(problem: StageProblem, v_net: Mlp, alpha_net: Mlp,
               x0: torch.Tensor, dw: torch.Tensor):
    """Enhanced-DFP stage loss on one sampled Brownian batch.

    x0: (B, 3N) initial states; dw: (B, M, 2N) Brownian increments already
    scaled by sqrt(dt).  The terminal value Y_T is the initial value minus
    the accumulated driver plus the accumulated martingale increments, so
    it is assembled from one batched network evaluation over all (path,
    step) points.  Returns (loss, stats) with the terminal-residual and
    control-mismatch components as floats.
    """
    tg = problem.tg
    n = problem.player
    m = problem.grid_steps
    dt = problem.dt
    batch = x0.shape[0]

    x_path = simulate_forward(problem, x0, dw)          # (B, M, 3N)
    t_grid = torch.arange(m, dtype=torch.float64) * dt
    t_flat = t_grid.expand(batch, m).reshape(-1)        # row-major (B*M,)
    flat_x = x_path.reshape(batch * m, -1)
    inp = solver_features(t_flat / tg.horizon, flat_x)

    _, grad = batch_value_and_grad(v_net, inp)
    grad_x = feature_gradient_to_state(flat_x, grad[:, 1:])  # drop the time coordinate
    opp = opponent_controls(problem, inp)
    # The derived best response is a target, not a trainable quantity: it is
    # computed from detached value gradients so the distillation term trains
    # only the policy net, and the envelope theorem keeps the value-net
    # gradient of the driver exact despite the detachment.
    with torch.no_grad():
        alpha_star = tg.best_response(n, t_flat, flat_x, opp, grad_x.detach())
    f = tg.running_cost(n, t_flat, flat_x, alpha_star[:, 0], alpha_star[:, 1])
    ctrl_star = opp.clone()
    ctrl_star[:, n, :] = alpha_star
    g = f + ((tg.drift(t_flat, flat_x, ctrl_star)
              - tg.drift(t_flat, flat_x, opp)) * grad_x).sum(-1)
    z = tg.sigma_t_p(flat_x, grad_x)

    y0 = v_net(solver_features(0.0, x0.detach())).squeeze(-1)
    y_terminal = y0 - g.reshape(batch, m).sum(1) * dt \
        + (z.reshape(batch, m, -1) * dw).sum(dim=(1, 2))
    terminal = (y_terminal ** 2).mean()

    if problem.tau > 0:
        alpha_hat = alpha_net(inp)
        mismatch = ((alpha_star - alpha_hat) ** 2).sum(-1).reshape(batch, m).sum(1).mean() * dt
    else:
        mismatch = torch.zeros(())
    loss = terminal + problem.tau * mismatch
    if not torch.isfinite(loss):
        raise FloatingPointError(
            f"non-finite stage loss for player {n} (terminal={float(terminal.detach())!r})")
    stats = {"terminal_sq": float(terminal.detach()),
             "control_mismatch": float(mismatch.detach()) if problem.tau > 0 else 0.0}
    return loss, stats


def train_best_response(problem: StageProblem, v_net: Mlp, alpha_net: Mlp,
                        num_iters: int = 200, learning_rate: float = 3e-4,
                        seed: int = 0, callback=None):
    """SGD loop over fresh Brownian/initial-state batches.

    Trains v_net and alpha_net in place; returns a diagnostics dict with
    per-iteration loss, terminal residual and control mismatch histories.
    Aborts if the loss stays above 1000x its initial value for 100
    consecutive iterations.
    """
    from .nets import make_optimizer

    gen = torch.Generator().manual_seed(int(seed))
    opt = make_optimizer([v_net, alpha_net], learning_rate)
    n2 = 2 * problem.game.num_regions
    sqrt_dt = float(np.sqrt(problem.dt))
    history = {"loss": [], "terminal_sq": [], "control_mismatch": []}
    initial_loss = None
    bad_streak = 0
    for it in range(num_iters):
        x0 = sample_initial_states(problem, problem.batch_size, gen)
        dw = torch.randn((problem.batch_size, problem.grid_steps, n2),
                         generator=gen) * sqrt_dt
        opt.zero_grad()
        loss, stats = stage_loss(problem, v_net, alpha_net, x0, dw)
        loss.backward()
        opt.step()
        val = float(loss.detach())
        if initial_loss is None:
            initial_loss = max(val, 1e-30)
        bad_streak = bad_streak + 1 if val > 1e3 * initial_loss else 0
        if bad_streak >= 100:
            raise FloatingPointError(
                f"stage training diverged for player {problem.player} "
                f"(loss {val:g} vs initial {initial_loss:g})")
        history["loss"].append(val)
        history["terminal_sq"].append(stats["terminal_sq"])
        history["control_mismatch"].append(stats["control_mismatch"])
        if callback is not None:
            callback(it, val, stats)
    return history

"""Command-line entry point.

Subcommands: solve, simulate, evaluate, ode-demo, sis-demo,
export-figure-data.  Every output directory receives a manifest embedding
the effective config, its hash and the master seed, so runs are
reproducible bit for bit.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import classic
from . import config as cf
from . import dfp
from . import montecarlo as mc
from . import params as mp
from .bsde import StageProblem, solver_features_np, train_best_response
from .config import ConfigError
from .nets import CheckpointError


def _write_manifest(out_dir: Path, cfg: dict, seed: int, extra: dict | None = None):
    manifest = {
        "epigame_version": __version__,
        "config": cfg,
        "config_hash": cf.config_hash(cfg),
        "seed": seed,
    }
    manifest.update(extra or {})
    with open(out_dir / "run_manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=float)
    return manifest


def _stamp(cfg: dict, seed: int) -> str:
    return f"# epigame v1 config_hash={cf.config_hash(cfg)} seed={seed}"


def _prepend_stamp(path: Path, stamp: str):
    body = path.read_text()
    path.write_text(stamp + "\n" + body)


def _load_run(args):
    overrides = {}
    if args.seed is not None:
        overrides.setdefault("solver", {})["seed"] = args.seed
    if getattr(args, "stages", None) is not None:
        overrides.setdefault("solver", {})["stages"] = args.stages
    if getattr(args, "paths", None) is not None:
        overrides.setdefault("solver", {})["paths"] = args.paths
    cfg = cf.load_config(args.config, args.preset, overrides)
    game = cf.game_params_from_config(cfg)
    x0 = cf.initial_state_from_config(cfg, game)
    sol = cf.solver_settings(cfg)
    return cfg, game, x0, sol


def cmd_solve(args) -> int:
    cfg, game, x0, sol = _load_run(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metric_rows = []

    def progress(result):
        metric_rows.append((result.stage, result.metric, result.wall_clock,
                            result.final_losses))
        print(f"stage {result.stage}: metric={result.metric:.6g} "
              f"wall={result.wall_clock:.1f}s", flush=True)

    results = dfp.run_enhanced_dfp(
        game, x0, grid_steps=sol["grid_steps"], stages=sol["stages"],
        iters_per_stage=sol["iters_per_stage"], batch_size=sol["batch_size"],
        tau=sol["tau"], learning_rate=sol["learning_rate"],
        hidden=sol["hidden"], seed=sol["seed"], tolerance=sol["tolerance"],
        jitter=sol["jitter"], checkpoint_dir=str(out), progress=progress)
    final = results[-1]
    dfp.save_checkpoint(final, out / "final.npz")
    with open(out / "metric_history.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stage", "metric", "wall_clock_s", "final_losses"])
        for stage, metric, wall, losses in metric_rows:
            writer.writerow([stage, f"{metric:.12g}", f"{wall:.3f}",
                             ";".join(f"{v:.6g}" for v in losses)])
    _prepend_stamp(out / "metric_history.csv", _stamp(cfg, sol["seed"]))
    _write_manifest(out, cfg, sol["seed"],
                    {"stages_run": len(results), "final_metric": final.metric})
    return 0


def _policy_from_source(source: str, game: mp.GameParams, sol: dict):
    if source == "none":
        return mc.zero_policy, None
    if source.startswith("constant:"):
        parts = source.split(":", 1)[1].split(",")
        ell = float(parts[0])
        h = float(parts[1]) if len(parts) > 1 else 0.0
        return mc.constant_policy(ell, h), None
    if source.startswith("checkpoint:"):
        result = dfp.load_checkpoint(source.split(":", 1)[1])
        if len(result.alpha_nets) != game.num_regions:
            raise ConfigError(
                f"checkpoint has {len(result.alpha_nets)} players, "
                f"config has {game.num_regions} regions")
        expected = 3 * game.num_regions + 1
        if result.alpha_nets[0].layer_dims[0] != expected:
            raise ConfigError(
                f"checkpoint input dimension {result.alpha_nets[0].layer_dims[0]} "
                f"does not match config ({expected})")
        return dfp.policy_from_alpha_nets(result.alpha_nets, game), result
    raise ConfigError(f"unknown policy source {source!r}; "
                      "use none, constant:ELL[,H] or checkpoint:PATH")


def cmd_simulate(args) -> int:
    cfg, game, x0, sol = _load_run(args)
    policy, _ = _policy_from_source(args.policy, game, sol)
    grid = mc.TimeGrid(game.horizon, sol["grid_steps"])
    batch = mc.simulate_batch(x0, policy, grid, sol["paths"], sol["seed"], game)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stamp = _stamp(cfg, sol["seed"])
    mc.write_paths_csv(batch, out / "paths.csv")
    _prepend_stamp(out / "paths.csv", stamp)
    mc.write_summary_csv(batch, out / "summary.csv")
    _prepend_stamp(out / "summary.csv", stamp)
    _write_manifest(out, cfg, sol["seed"],
                    {"policy": args.policy, "paths": batch.num_paths,
                     "clamp_events": batch.clamp_events})
    print(f"wrote {out / 'paths.csv'} and {out / 'summary.csv'}")
    return 0


def cmd_export_figure_data(args) -> int:
    cfg, game, x0, sol = _load_run(args)
    policy, _ = _policy_from_source(args.policy, game, sol)
    grid = mc.TimeGrid(game.horizon, sol["grid_steps"])
    batch = mc.simulate_batch(x0, policy, grid, sol["paths"], sol["seed"], game)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    mc.write_summary_csv(batch, out)
    _prepend_stamp(out, _stamp(cfg, sol["seed"]))
    print(f"wrote {out}")
    return 0


def _deviation_policy(spec: str, base_policy, player: int, game, equilibrium,
                      x0, sol):
    """Feedback policy equal to the equilibrium except for one player."""
    if spec.startswith("constant:"):
        parts = spec.split(":", 1)[1].split(",")
        ell = float(parts[0])
        h = float(parts[1]) if len(parts) > 1 else 0.0

        def policy(t, state):
            out = base_policy(t, state)
            out[player] = (ell, h)
            return out
        return policy
    if spec.startswith("scale:"):
        factor = float(spec.split(":", 1)[1])

        def policy(t, state):
            out = base_policy(t, state)
            out[player] = np.clip(out[player] * factor, 0.0, 1.0)
            return out
        return policy
    if spec.startswith("retrain"):
        iters = int(spec.split(":", 1)[1]) if ":" in spec else sol["iters_per_stage"]
        problem = StageProblem(player=player, game=game,
                               grid_steps=sol["grid_steps"],
                               opponents=equilibrium.alpha_nets,
                               x0=mp.state_to_x(x0), batch_size=sol["batch_size"],
                               tau=sol["tau"], jitter=sol["jitter"],
                               cost_scale=equilibrium.cost_scale or None)
        import copy as _copy
        v_net = _copy.deepcopy(equilibrium.v_nets[player])
        alpha_net = _copy.deepcopy(equilibrium.alpha_nets[player])
        for p in list(v_net.parameters()) + list(alpha_net.parameters()):
            p.requires_grad_(True)
        train_best_response(problem, v_net, alpha_net, num_iters=iters,
                            learning_rate=sol["learning_rate"],
                            seed=sol["seed"] + 91)
        import torch

        def policy(t, state):
            out = base_policy(t, state)
            inp = torch.as_tensor(solver_features_np(t / game.horizon,
                                                     mp.state_to_x(state)))
            with torch.no_grad():
                out[player] = alpha_net(inp).numpy()
            return out
        return policy
    raise ConfigError(f"unknown deviation spec {spec!r}; "
                      "use constant:ELL[,H], scale:F or retrain[:ITERS]")


def evaluate_deviation(game, x0, sol, equilibrium, player: int, spec: str):
    """Paired Monte Carlo comparison of equilibrium vs unilateral deviation.

    Both ensembles share Brownian paths (same seeds), so the Nash residual
    J(eq) - J(dev) is estimated from per-path differences.
    """
    grid = mc.TimeGrid(game.horizon, sol["grid_steps"])
    eq_policy = dfp.policy_from_alpha_nets(equilibrium.alpha_nets, game)
    dev_policy = _deviation_policy(spec, eq_policy, player, game, equilibrium,
                                   x0, sol)
    batch_eq = mc.simulate_batch(x0, eq_policy, grid, sol["paths"], sol["seed"], game)
    batch_dev = mc.simulate_batch(x0, dev_policy, grid, sol["paths"], sol["seed"], game)
    mean_eq, se_eq, tot_eq = mc.estimate_costs(batch_eq, game)
    mean_dev, se_dev, tot_dev = mc.estimate_costs(batch_dev, game)
    diff = tot_eq[:, player] - tot_dev[:, player]
    residual = float(diff.mean())
    residual_se = float(diff.std(ddof=1) / np.sqrt(diff.size)) if diff.size > 1 else 0.0
    return {
        "player": player,
        "deviation": spec,
        "cost_equilibrium": mean_eq.tolist(),
        "se_equilibrium": se_eq.tolist(),
        "cost_deviation": mean_dev.tolist(),
        "se_deviation": se_dev.tolist(),
        "nash_residual": residual,
        "nash_residual_se": residual_se,
    }


def cmd_evaluate(args) -> int:
    cfg, game, x0, sol = _load_run(args)
    equilibrium = dfp.load_checkpoint(args.checkpoint)
    if len(equilibrium.alpha_nets) != game.num_regions:
        raise ConfigError("checkpoint/config player-count mismatch")
    players = [args.player] if args.player is not None else list(range(game.num_regions))
    report = {"config_hash": cf.config_hash(cfg), "seed": sol["seed"],
              "checkpoint": str(args.checkpoint), "results": []}
    for player in players:
        report["results"].append(
            evaluate_deviation(game, x0, sol, equilibrium, player, args.deviation))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        json.dump(report, fh, indent=2)
    print(json.dumps(report["results"], indent=2))
    return 0


def cmd_ode_demo(args) -> int:
    times, states = classic.integrate_seir(
        [1.0 - args.e0 - args.i0, args.e0, args.i0, 0.0],
        beta=args.beta, gamma=args.gamma, lam=args.lam,
        horizon=args.horizon, step=args.step)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "S", "E", "I", "R"])
        for t, row in zip(times, states):
            writer.writerow([f"{t:.10g}"] + [f"{v:.12g}" for v in row])
    print(f"wrote {out}")
    return 0


def cmd_sis_demo(args) -> int:
    counts = classic.SisCounts(args.infected, args.population, args.beta, args.lam)
    path = classic.simulate_sis(counts, args.dt, args.steps, args.seed or 0)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "n"])
        for k, n in enumerate(path):
            writer.writerow([f"{k * args.dt:.10g}", n])
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epigame",
        description="Nash-equilibrium epidemic policies for multi-region "
                    "stochastic SEIR games")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, stages=False, paths=False):
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--preset", choices=sorted(cf.PRESETS),
                       help="named parameter preset")
        p.add_argument("--seed", type=int, help="master seed override")
        if stages:
            p.add_argument("--stages", type=int, help="fictitious-play stages")
        if paths:
            p.add_argument("--paths", type=int, help="Monte Carlo path count")

    p = sub.add_parser("solve", help="run enhanced deep fictitious play")
    common(p, stages=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="simulate paths under a policy")
    common(p, paths=True)
    p.add_argument("--policy", default="none",
                   help="none | constant:ELL[,H] | checkpoint:PATH")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="Nash-residual cost report")
    common(p, paths=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--player", type=int, help="deviating player (default: all, one at a time)")
    p.add_argument("--deviation", default="retrain",
                   help="constant:ELL[,H] | scale:F | retrain[:ITERS]")
    p.add_argument("--out", required=True, help="report JSON path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ode-demo", help="deterministic SEIR trajectory CSV")
    p.add_argument("--beta", type=float, default=0.17)
    p.add_argument("--gamma", type=float, default=0.2)
    p.add_argument("--lam", type=float, default=1.0 / 13.0)
    p.add_argument("--e0", type=float, default=0.0)
    p.add_argument("--i0", type=float, default=1e-4)
    p.add_argument("--horizon", type=float, default=180.0)
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ode_demo)

    p = sub.add_parser("sis-demo", help="stochastic SIS chain path CSV")
    p.add_argument("--population", type=int, default=100)
    p.add_argument("--infected", type=int, default=5)
    p.add_argument("--beta", type=float, default=0.17)
    p.add_argument("--lam", type=float, default=1.0 / 13.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--steps", type=int, default=10000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sis_demo)

    p = sub.add_parser("export-figure-data",
                       help="summary CSV for the figure renderer")
    common(p, paths=True)
    p.add_argument("--policy", default="none")
    p.add_argument("--out", required=True, help="summary CSV path")
    p.set_defaults(func=cmd_export_figure_data)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

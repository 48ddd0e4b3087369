"""Command-line entry point: train, eval, sweep, demo, inspect.

Exit codes: 0 success, 1 runtime failure (diverged training, verification
mismatch, I/O trouble mid-run), 2 usage or configuration errors. Every run
that writes artifacts first writes a JSON manifest (<out>.manifest.json) with
the resolved config, seed, and artifact paths so it can be reproduced; CSV
outputs are byte-identical across reruns except for wall-clock runtime
columns.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from datetime import datetime, timezone

import numpy as np

from . import __version__, evaluation, mlp, seeding
from .config import AppConfig, ConfigError, config_as_dict, load_config
from .evaluation import (SWEEP_CSV_HEADER, SWEEP_EXPERIMENTS, GridScenario,
                         LeaderScenario, scenario_initial_state, summarize_episode)
from .imitation import train as train_model

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return value


def write_manifest(out_path, command, app: AppConfig, artifacts, extra=None):
    manifest = {
        "tool": "swarmnn",
        "tool_version": __version__,
        "command": command,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "seed": app.train.rng_seed,
        "config": config_as_dict(app),
        "artifacts": artifacts,
    }
    if extra:
        manifest.update(extra)
    path = f"{out_path}.manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, default=str)
        fh.write("\n")
    return path


def cmd_train(args):
    app = load_config(args.config, args.seed)
    report_path = args.report or f"{args.out}.train_report.csv"
    write_manifest(args.out, "train", app,
                   {"model": args.out, "report": report_path})
    params, report = train_model(app.train)
    mlp.save_model(params, args.out)
    report.write_csv(report_path)
    print(f"trained {app.train.n_train_trajectories} trajectories; "
          f"final mean loss {report.final_loss:.6g}; model -> {args.out}")
    return EXIT_OK


def _parse_controllers(raw):
    names = [c.strip() for c in raw.split(",") if c.strip()]
    for name in names:
        if name not in evaluation.CONTROLLERS:
            raise ConfigError(
                f"--controllers: unknown controller {name!r}; "
                f"valid: {', '.join(evaluation.CONTROLLERS)}"
            )
    if not names:
        raise ConfigError("--controllers: empty list")
    return names


def _load_models(paths):
    models = {}
    for path in paths or []:
        params = mlp.load_model(path)
        models[params.arch.history_depth] = params
    return models


def _scenario_states(app: AppConfig, scenario_name, sim, n_episodes, seed):
    if scenario_name == "baseline":
        return sim, None
    if scenario_name == "leaders":
        scenario = LeaderScenario(app.scenario.n_leaders,
                                  app.scenario.leader_velocity)
    elif scenario_name == "grid":
        scenario = GridScenario(app.scenario.grid_agents, app.scenario.grid_spacing,
                                app.scenario.grid_speed_scale)
        sim = replace(sim, n_agents=app.scenario.grid_agents)
    else:
        raise ConfigError(f"unknown scenario {scenario_name!r}")
    states = [
        scenario_initial_state(scenario, sim, seeding.rng_for(seed, seeding.SCENARIO, j))
        for j in range(n_episodes)
    ]
    return sim, states


def _eval_one(task):
    """One (controller, episode) evaluation; top level so worker processes can run it."""
    (sim, controller, episode, traj_len, model, scheme, verify, seed, initial) = task
    if initial is None:
        from .dynamics import init_flock_disc

        initial = init_flock_disc(sim, seeding.rng_for(seed, seeding.EVAL_EPISODE, episode))
    log = evaluation.run_episode(initial, controller, sim, traj_len, model=model,
                                 shift_scheme=scheme, verify_distributed=verify)
    return summarize_episode(log)


def cmd_eval(args):
    app = load_config(args.config, args.seed)
    train_cfg = app.train
    controllers = _parse_controllers(args.controllers)
    model = mlp.load_model(args.model) if args.model else None
    if "gnn" in controllers:
        if model is None:
            raise ConfigError("--controllers gnn requires --model")
        mlp.require_architecture(model, train_cfg.history_depth, 6)
    write_manifest(args.out, "eval", app, {"csv": args.out, "model": args.model},
                   {"controllers": controllers, "scenario": args.scenario})

    seed = train_cfg.rng_seed
    n_episodes = train_cfg.n_test_trajectories
    sim, states = _scenario_states(app, args.scenario, train_cfg.sim, n_episodes, seed)

    tasks = []
    for controller in controllers:
        for j in range(n_episodes):
            tasks.append((
                sim, controller, j, train_cfg.traj_len,
                model if controller == "gnn" else None,
                train_cfg.shift_scheme, args.verify_distributed, seed,
                states[j] if states is not None else None,
            ))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_eval_one, tasks))
    else:
        results = [_eval_one(task) for task in tasks]

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["controller", "K", "episode", "cost", "disconnect_rate",
                         "mean_min_dist", "dispersal_growth"])
        for task, (cost, disconnect, mean_min, growth) in zip(tasks, results):
            controller = task[1]
            depth = model.arch.history_depth if controller == "gnn" else ""
            writer.writerow([controller, depth, task[2], _fmt(cost),
                             _fmt(disconnect), _fmt(mean_min), _fmt(growth)])
    print(f"evaluated {controllers} over {n_episodes} episodes -> {args.out}")
    return EXIT_OK


def cmd_sweep(args):
    app = load_config(args.config, args.seed)
    if args.experiment not in SWEEP_EXPERIMENTS:
        raise ConfigError(
            f"--experiment: unknown experiment {args.experiment!r}; "
            f"valid: {', '.join(SWEEP_EXPERIMENTS)}"
        )
    controllers = _parse_controllers(args.controllers)
    models = _load_models(args.model)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("--values: empty list")
    write_manifest(args.out, "sweep", app, {"csv": args.out},
                   {"experiment": args.experiment, "values": values,
                    "controllers": controllers})
    rows = evaluation.sweep(app.train, args.experiment, values, controllers,
                            args.n_seeds, models=models)
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_CSV_HEADER)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
    print(f"sweep {args.experiment} over {values} -> {args.out} ({len(rows)} rows)")
    return EXIT_OK


def cmd_demo(args):
    app = load_config(args.config, args.seed)
    train_cfg = app.train
    model = mlp.load_model(args.model) if args.model else None
    controller = args.controller
    if controller == "gnn":
        if model is None:
            raise ConfigError("--controller gnn requires --model")
        mlp.require_architecture(model, train_cfg.history_depth, 6)
    write_manifest(args.out, "demo", app, {"csv": args.out},
                   {"controller": controller, "scenario": args.scenario})
    seed = train_cfg.rng_seed
    sim, states = _scenario_states(app, args.scenario, train_cfg.sim, 1, seed)
    if states is None:
        from .dynamics import init_flock_disc

        initial = init_flock_disc(sim, seeding.rng_for(seed, seeding.EVAL_EPISODE, 0))
    else:
        initial = states[0]
    log = evaluation.run_episode(initial, controller, sim, train_cfg.traj_len,
                                 model=model, shift_scheme=train_cfg.shift_scheme,
                                 verify_distributed=args.verify_distributed)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "agent", "x", "y", "vx", "vy", "is_leader"])
        for t, state in enumerate(log.states):
            for i in range(state.n_agents):
                writer.writerow([
                    t, i,
                    _fmt(float(state.positions[i, 0])), _fmt(float(state.positions[i, 1])),
                    _fmt(float(state.velocities[i, 0])), _fmt(float(state.velocities[i, 1])),
                    int(state.leader_mask[i]),
                ])
    cost = evaluation.velocity_variance_cost(log)
    print(f"demo episode ({controller}, {args.scenario}): cost {cost:.6g} -> {args.out}")
    return EXIT_OK


def cmd_inspect(args):
    header = mlp.read_model_header(args.model)
    print(f"model file:     {args.model}")
    print(f"format version: {header['format_version']}")
    print(f"history depth:  K={header['history_depth']}")
    print(f"feature dim:    p={header['feature_dim']}")
    print(f"output dim:     q={header['output_dim']}")
    print(f"hidden sizes:   {list(header['hidden_sizes'])}")
    print(f"layer dims:     {[tuple(d) for d in header['layer_dims']]}")
    print(f"parameters:     {header['n_parameters']}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="swarmnn",
        description="Train and evaluate decentralized flocking controllers "
                    "driven by delayed multi-hop aggregation.",
    )
    parser.add_argument("--version", action="version", version=f"swarmnn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", required=True, help="INI config file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config's root seed")
        if needs_out:
            p.add_argument("--out", required=True, help="output path")

    p = sub.add_parser("train", help="run DAgger imitation training")
    common(p)
    p.add_argument("--report", default=None,
                   help="per-round CSV report path (default: <out>.train_report.csv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="compare controllers over test episodes")
    common(p)
    p.add_argument("--model", default=None, help="trained model file (for gnn)")
    p.add_argument("--controllers", default="global,local",
                   help="comma list from: global,local,gnn")
    p.add_argument("--scenario", default="baseline",
                   choices=("baseline", "leaders", "grid"))
    p.add_argument("--verify-distributed", action="store_true",
                   help="assert per-agent message passing matches centralized")
    p.add_argument("--jobs", type=int, default=1, help="parallel episode workers")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="parameter sweeps over scenario grids")
    common(p)
    p.add_argument("--experiment", required=True,
                   help=f"one of: {', '.join(SWEEP_EXPERIMENTS)}")
    p.add_argument("--values", required=True, help="comma list of grid values")
    p.add_argument("--controllers", default="global,local")
    p.add_argument("--model", action="append", default=None,
                   help="trained model file; repeat for several K")
    p.add_argument("--n-seeds", type=int, default=3)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("demo", help="roll one episode and dump per-agent tracks")
    common(p)
    p.add_argument("--model", default=None)
    p.add_argument("--controller", default="global", choices=evaluation.CONTROLLERS)
    p.add_argument("--scenario", default="baseline",
                   choices=("baseline", "leaders", "grid"))
    p.add_argument("--verify-distributed", action="store_true")
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("inspect", help="print a model file's architecture header")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, mlp.ArchitectureMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except mlp.ModelFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # runtime failures: divergence, verification, I/O mid-run
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

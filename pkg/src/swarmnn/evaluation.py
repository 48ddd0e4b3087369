"""Metrics, closed-loop episode rollouts, parameter sweeps, and transfer scenarios.

The headline metric is the velocity-variance cost: the per-agent sum over a
trajectory of squared deviations from the instantaneous flock-mean velocity,
zero exactly at velocity consensus. Episodes log the state the controller
acted on at every step (so a trajectory of length T contributes T terms),
plus per-step graph summaries used for the disconnection/dispersal analyses.
"""

from __future__ import annotations

import time
from collections import namedtuple
from dataclasses import dataclass, replace

import numpy as np

from . import mlp, seeding
from .aggregation import DistributedPipeline, extract_all, init_aggregation, update_aggregation
from .controllers import PotentialParams, compute_features, global_controller, local_controller
from .core import FlockState, build_comm_graph, build_shift_operator
from .dynamics import (SimConfig, assign_leaders, grid_speed_scale, init_flock_disc,
                       init_flock_grid, saturate, step)

CONTROLLERS = ("global", "local", "gnn")


class VerificationError(AssertionError):
    """Distributed inference disagreed with the centralized pipeline."""


@dataclass
class TrajectoryLog:
    states: list
    actions: list
    edge_counts: np.ndarray
    min_degrees: np.ndarray
    min_pair_dists: np.ndarray
    mean_min_dists: np.ndarray

    def __len__(self):
        return len(self.states)

    def velocity_array(self):
        return np.stack([s.velocities for s in self.states])


def velocity_variance_cost(log: TrajectoryLog) -> float:
    """Trajectory cost: (1/N) * sum over steps and agents of ||v_j - mean v||^2."""
    if len(log) == 0:
        raise ValueError("empty trajectory log")
    velocities = log.velocity_array()  # (T, N, 2)
    deviations = velocities - velocities.mean(axis=1, keepdims=True)
    return float((deviations**2).sum()) / velocities.shape[1]


def analytic_drift_cost(state: FlockState, traj_len: int) -> float:
    """Cost of coasting traj_len steps with frozen velocities (no control)."""
    deviations = state.velocities - state.velocities.mean(axis=0)
    return traj_len * float((deviations**2).sum()) / state.n_agents


MinNeighborDistance = namedtuple("MinNeighborDistance", "per_agent mean population_min")


def min_neighbor_distance(state: FlockState) -> MinNeighborDistance:
    """Each agent's distance to its closest teammate, with mean and min over agents."""
    from . import _backend

    per_agent = _backend.impl.min_neighbor_dists(state.positions)
    return MinNeighborDistance(per_agent, float(per_agent.mean()), float(per_agent.min()))


def run_episode(initial: FlockState, controller: str, cfg: SimConfig, traj_len: int,
                model: mlp.MlpParams | None = None,
                shift_scheme: str = "mean_neighbor",
                verify_distributed: bool = False) -> TrajectoryLog:
    """Closed-loop rollout of one controller from a given start.

    controller is "global", "local", or "gnn" (which requires a model whose
    architecture matches the configured feature dim). With verify_distributed
    the gnn episode also runs the per-agent message-passing pipeline and
    raises VerificationError if it strays from the centralized aggregation by
    more than 1e-12 at any step.
    """
    if controller not in CONTROLLERS:
        raise ValueError(f"unknown controller {controller!r}; expected {CONTROLLERS}")
    cfg.validate()
    params = PotentialParams(cfg.potential_radius, cfg.epsilon_dist)
    agg = pipeline = None
    if controller == "gnn":
        if model is None:
            raise ValueError("gnn controller requires a model")
        mlp.require_architecture(model, model.arch.history_depth, 6)
        depth = model.arch.history_depth
        agg = init_aggregation(initial.n_agents, 6, depth)
        if verify_distributed:
            pipeline = DistributedPipeline(initial.n_agents, 6, depth)

    state = initial
    states, actions = [], []
    edge_counts = np.empty(traj_len, dtype=np.int64)
    min_degrees = np.empty(traj_len, dtype=np.int64)
    min_pair_dists = np.empty(traj_len)
    mean_min_dists = np.empty(traj_len)

    for t in range(traj_len):
        graph = build_comm_graph(state, cfg.comm_radius)
        if controller == "global":
            u = global_controller(state, params)
        elif controller == "local":
            u = local_controller(state, graph, params)
        else:
            features = compute_features(state, graph, cfg.epsilon_dist, cfg.feature_clip)
            shift = build_shift_operator(graph, shift_scheme)
            agg = update_aggregation(agg, shift, features)
            sequences = extract_all(agg)
            if pipeline is not None:
                distributed = pipeline.round(shift, features)
                gap = float(np.abs(distributed - sequences).max())
                if gap > 1e-12:
                    raise VerificationError(
                        f"distributed aggregation off by {gap:.3e} at step {t}"
                    )
            u = mlp.forward_batch(model, sequences.reshape(state.n_agents, -1))
        u = saturate(u, cfg.accel_limit)

        dists = min_neighbor_distance(state)
        states.append(state)
        actions.append(u)
        edge_counts[t] = graph.n_edges
        min_degrees[t] = int(graph.degrees.min())
        min_pair_dists[t] = dists.population_min
        mean_min_dists[t] = dists.mean

        state = step(state, u, cfg.sample_time, cfg.accel_limit)

    return TrajectoryLog(states, actions, edge_counts, min_degrees,
                         min_pair_dists, mean_min_dists)


@dataclass
class EvalReport:
    controller: str
    history_depth: int | None
    costs: list
    disconnect_rates: list
    mean_min_dists: list
    dispersal_growths: list
    runtime_s: float

    @property
    def mean_cost(self):
        return float(np.mean(self.costs))

    @property
    def std_cost(self):
        return float(np.std(self.costs))

    @property
    def disconnect_rate(self):
        return float(np.mean(self.disconnect_rates))

    @property
    def mean_min_dist(self):
        return float(np.mean(self.mean_min_dists))

    @property
    def mean_dispersal_growth(self):
        return float(np.mean(self.dispersal_growths))


def summarize_episode(log: TrajectoryLog):
    """(cost, disconnect_rate, mean_min_dist, dispersal_growth) for report rows."""
    cost = velocity_variance_cost(log)
    disconnect = float((log.min_degrees == 0).mean())
    mean_min = float(log.mean_min_dists.mean())
    growth = float(log.mean_min_dists[-1] - log.mean_min_dists[0])
    return cost, disconnect, mean_min, growth


def _collect_report(controller, history_depth, logs, runtime):
    rows = [summarize_episode(log) for log in logs]
    return EvalReport(
        controller, history_depth,
        [r[0] for r in rows], [r[1] for r in rows],
        [r[2] for r in rows], [r[3] for r in rows],
        runtime,
    )


def evaluate_controller(cfg: SimConfig, controller: str, n_episodes: int,
                        traj_len: int, seed: int,
                        model: mlp.MlpParams | None = None,
                        shift_scheme: str = "mean_neighbor",
                        verify_distributed: bool = False,
                        initial_states: list | None = None) -> EvalReport:
    """Run n_episodes fresh-start episodes; episode j reuses stream (seed, j).

    Different controllers evaluated with the same seed see bit-identical
    initial states, so their costs are directly comparable. Pass
    initial_states to pin the starts explicitly (transfer scenarios do).
    """
    start = time.perf_counter()
    logs = []
    for j in range(n_episodes):
        if initial_states is not None:
            initial = initial_states[j]
        else:
            initial = init_flock_disc(cfg, seeding.rng_for(seed, seeding.EVAL_EPISODE, j))
        logs.append(run_episode(initial, controller, cfg, traj_len, model=model,
                                shift_scheme=shift_scheme,
                                verify_distributed=verify_distributed))
    depth = model.arch.history_depth if (controller == "gnn" and model) else None
    return _collect_report(controller, depth, logs, time.perf_counter() - start)


SWEEP_EXPERIMENTS = ("v_init", "radius", "n_agents", "architecture")
SWEEP_CSV_HEADER = ["experiment", "param_value", "controller", "K", "seed",
                    "cost", "disconnect_rate", "mean_min_dist", "runtime_s"]


def _sweep_sim(cfg: SimConfig, experiment: str, value):
    if experiment == "v_init":
        return replace(cfg, v_init=float(value))
    if experiment == "radius":
        # R = rho throughout, matching how the controllers are defined
        return replace(cfg, comm_radius=float(value), potential_radius=float(value))
    if experiment == "n_agents":
        return replace(cfg, n_agents=int(value))
    if experiment == "architecture":
        return cfg
    raise ValueError(f"unknown experiment {experiment!r}; expected {SWEEP_EXPERIMENTS}")


def sweep(train_config, experiment: str, values, controllers, n_seeds: int,
          models: dict | None = None, traj_len: int | None = None):
    """Grid evaluation: one fresh episode per (grid point, controller, seed).

    models maps history depth K -> trained parameters; the "gnn" controller
    token expands to one run per supplied K. The architecture experiment
    instead trains a fresh model per grid value (hidden layer width) and
    evaluates it. Yields rows matching SWEEP_CSV_HEADER.
    """
    from .imitation import train as train_model  # local import to avoid a cycle

    models = models or {}
    traj_len = traj_len if traj_len is not None else train_config.traj_len
    if experiment not in SWEEP_EXPERIMENTS:
        raise ValueError(f"unknown experiment {experiment!r}; expected {SWEEP_EXPERIMENTS}")
    rows = []
    for point, value in enumerate(values):
        sim = _sweep_sim(train_config.sim, experiment, value)
        point_models = dict(models)
        if experiment == "architecture":
            width = int(value)
            trained, _report = train_model(
                replace(train_config, hidden_sizes=(width, width))
            )
            point_models = {train_config.history_depth: trained}
        for controller in controllers:
            if controller == "gnn":
                if not point_models:
                    raise ValueError(
                        "gnn controller requested but no trained model supplied"
                    )
                runs = [("gnn", k, point_models[k]) for k in sorted(point_models)]
            else:
                runs = [(controller, None, None)]
            for name, depth, model in runs:
                for s in range(n_seeds):
                    start = time.perf_counter()
                    initial = init_flock_disc(
                        sim, seeding.rng_for(train_config.rng_seed,
                                             seeding.SWEEP_EPISODE, point, s)
                    )
                    log = run_episode(initial, name, sim, traj_len, model=model,
                                      shift_scheme=train_config.shift_scheme)
                    cost, disconnect, mean_min, _growth = summarize_episode(log)
                    rows.append({
                        "experiment": experiment,
                        "param_value": value,
                        "controller": name if depth is None else f"{name}_k{depth}",
                        "K": "" if depth is None else depth,
                        "seed": s,
                        "cost": cost,
                        "disconnect_rate": disconnect,
                        "mean_min_dist": mean_min,
                        "runtime_s": time.perf_counter() - start,
                    })
    return rows


@dataclass(frozen=True)
class LeaderScenario:
    """Two-leader transfer: a disc start with leader velocities pinned."""

    n_leaders: int = 2
    leader_velocity: tuple = (1.0, 0.5)


@dataclass(frozen=True)
class GridScenario:
    """Lattice start with radially-inward velocities proportional to center distance."""

    n_agents: int = 16
    spacing: float = 1.0
    speed_scale: float | None = None  # None: corner agent starts at cfg.v_init


def scenario_initial_state(scenario, cfg: SimConfig, rng) -> FlockState:
    if isinstance(scenario, LeaderScenario):
        state = init_flock_disc(cfg, rng)
        return assign_leaders(state, scenario.n_leaders,
                              np.asarray(scenario.leader_velocity), rng)
    if isinstance(scenario, GridScenario):
        scale = scenario.speed_scale
        if scale is None:
            scale = grid_speed_scale(scenario.n_agents, scenario.spacing, cfg.v_init)
        return init_flock_grid(scenario.n_agents, scenario.spacing, scale)
    raise TypeError(f"unknown scenario {type(scenario).__name__}")


def transfer_eval(model: mlp.MlpParams | None, scenario, cfg: SimConfig,
                  n_episodes: int, traj_len: int, seed: int,
                  controller: str = "gnn",
                  shift_scheme: str = "mean_neighbor") -> EvalReport:
    """Evaluate a frozen controller on a scenario it was never trained on."""
    sim = cfg
    if isinstance(scenario, GridScenario):
        sim = replace(cfg, n_agents=scenario.n_agents)
    initials = [
        scenario_initial_state(scenario, sim, seeding.rng_for(seed, seeding.SCENARIO, j))
        for j in range(n_episodes)
    ]
    return evaluate_controller(sim, controller, n_episodes, traj_len, seed,
                               model=model, shift_scheme=shift_scheme,
                               initial_states=initials)

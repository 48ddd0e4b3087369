"""Expert-labeled data collection under the DAgger mixture and the training loop.

Every collected sample is (flattened aggregation sequence, saturated expert
action) for every agent at every step, no matter which policy actually drove
the flock that step. The executed policy is the expert with probability beta,
else the current learner, drawn once per timestep for the whole flock; beta
decays geometrically after each trajectory down to a floor. Rounds never
discard data: training always optimizes over the full aggregate dataset.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import mlp, seeding
from .aggregation import extract_all, init_aggregation, update_aggregation
from .controllers import PotentialParams, compute_features, global_controller
from .core import build_comm_graph, build_shift_operator
from .dynamics import SimConfig, init_flock_disc, saturate, step


@dataclass(frozen=True)
class DaggerSchedule:
    """Probability of executing the expert, its decay factor, and its floor."""

    beta: float = 1.0
    decay: float = 0.993
    floor: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.floor <= self.beta <= 1.0:
            raise ValueError(
                f"need 0 <= floor <= beta <= 1, got floor={self.floor}, beta={self.beta}"
            )
        if not 0.0 < self.decay <= 1.0:
            raise ValueError(f"decay must be in (0, 1], got {self.decay}")


def advance_schedule(schedule: DaggerSchedule) -> DaggerSchedule:
    """Geometric decay clipped at the floor, applied after each trajectory."""
    return DaggerSchedule(
        max(schedule.floor, schedule.beta * schedule.decay),
        schedule.decay,
        schedule.floor,
    )


@dataclass
class DatasetShard:
    """Samples from one trajectory: inputs (M, K*p), expert labels (M, 2)."""

    inputs: np.ndarray
    labels: np.ndarray
    trajectory_ids: np.ndarray
    steps: np.ndarray
    agent_ids: np.ndarray
    states: list = field(default_factory=list)  # per-step FlockState when kept

    def __len__(self):
        return self.inputs.shape[0]


class ImitationDataset:
    """Append-only aggregate of shards across DAgger rounds."""

    def __init__(self):
        self._shards = []
        self._cache = None

    def append(self, shard: DatasetShard):
        self._shards.append(shard)
        self._cache = None

    def __len__(self):
        return sum(len(s) for s in self._shards)

    @property
    def n_shards(self):
        return len(self._shards)

    @property
    def shards(self):
        return tuple(self._shards)

    def arrays(self):
        """Concatenated (inputs, labels); cached until the next append."""
        if self._cache is None:
            if not self._shards:
                raise ValueError("dataset is empty")
            self._cache = (
                np.concatenate([s.inputs for s in self._shards]),
                np.concatenate([s.labels for s in self._shards]),
            )
        return self._cache

    def dump_csv(self, path):
        """Debug dump: trajectory id, step, agent id, inputs, label per line."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for shard in self._shards:
                for row in range(len(shard)):
                    writer.writerow(
                        [int(shard.trajectory_ids[row]), int(shard.steps[row]),
                         int(shard.agent_ids[row])]
                        + [repr(float(v)) for v in shard.inputs[row]]
                        + [repr(float(v)) for v in shard.labels[row]]
                    )


@dataclass
class TrajectoryStats:
    trajectory_id: int
    beta: float
    n_samples: int
    expert_steps: int
    learner_steps: int


def collect_trajectory(cfg: SimConfig, schedule: DaggerSchedule, traj_len: int,
                       history_depth: int, rng: np.random.Generator,
                       learner: mlp.MlpParams | None = None,
                       shift_scheme: str = "mean_neighbor",
                       trajectory_id: int = 0,
                       keep_states: bool = False):
    """Roll one trajectory under the beta-mixture and label every step with the expert.

    Per step: disc graph -> features -> aggregation update -> record
    (z_i, saturated expert action) for every agent -> execute expert or
    learner (one Bernoulli draw flock-wide) -> integrate. The learner reads
    the same aggregation sequences that get recorded. Aggregation buffers
    start at zero. Raises on non-finite states with the failing step in the
    message.
    """
    cfg.validate()
    params = PotentialParams(cfg.potential_radius, cfg.epsilon_dist)
    state = init_flock_disc(cfg, rng)
    agg = init_aggregation(cfg.n_agents, 6, history_depth)
    if learner is not None:
        mlp.require_architecture(learner, history_depth, 6)

    n, width = cfg.n_agents, history_depth * 6
    inputs = np.empty((traj_len * n, width))
    labels = np.empty((traj_len * n, 2))
    steps = np.empty(traj_len * n, dtype=np.int64)
    agent_ids = np.tile(np.arange(n, dtype=np.int64), traj_len)
    states = []
    expert_steps = learner_steps = 0

    for t in range(traj_len):
        if not np.isfinite(state.positions).all() or not np.isfinite(state.velocities).all():
            raise RuntimeError(
                f"trajectory {trajectory_id} diverged to non-finite state at step {t}"
            )
        graph = build_comm_graph(state, cfg.comm_radius)
        features = compute_features(state, graph, cfg.epsilon_dist, cfg.feature_clip)
        shift = build_shift_operator(graph, shift_scheme)
        agg = update_aggregation(agg, shift, features)
        sequences = extract_all(agg)

        expert = saturate(global_controller(state, params), cfg.accel_limit)
        block = slice(t * n, (t + 1) * n)
        inputs[block] = sequences.reshape(n, width)
        labels[block] = expert
        steps[block] = t
        if keep_states:
            states.append(state)

        use_expert = learner is None or rng.random() < schedule.beta
        if use_expert:
            executed = expert
            expert_steps += 1
        else:
            executed = saturate(
                mlp.forward_batch(learner, sequences.reshape(n, width)),
                cfg.accel_limit,
            )
            learner_steps += 1
        try:
            state = step(state, executed, cfg.sample_time, cfg.accel_limit)
        except ValueError as exc:
            raise RuntimeError(
                f"trajectory {trajectory_id} aborted at step {t}: {exc}"
            ) from exc

    shard = DatasetShard(
        inputs, labels,
        np.full(traj_len * n, trajectory_id, dtype=np.int64),
        steps, agent_ids, states,
    )
    stats = TrajectoryStats(trajectory_id, schedule.beta, len(shard),
                            expert_steps, learner_steps)
    return shard, stats


@dataclass(frozen=True)
class TrainConfig:
    sim: SimConfig = SimConfig()
    n_train_trajectories: int = 100
    traj_len: int = 200
    n_test_trajectories: int = 20
    batch_size: int = 256
    epochs_per_round: int = 1
    history_depth: int = 3  # K
    hidden_sizes: tuple = (32, 32)
    learning_rate: float = 5e-5
    shift_scheme: str = "mean_neighbor"
    dagger: DaggerSchedule = DaggerSchedule()
    rng_seed: int = 0

    def validate(self):
        self.sim.validate()
        for name in ("n_train_trajectories", "traj_len", "n_test_trajectories",
                     "batch_size", "epochs_per_round", "history_depth"):
            value = getattr(self, name)
            if name == "n_train_trajectories":
                if value < 0:
                    raise ValueError(f"{name} must be >= 0, got {value}")
            elif value < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        return self

    @property
    def arch(self):
        return mlp.MlpArchitecture(self.history_depth, 6, tuple(self.hidden_sizes), 2)


@dataclass
class RoundRecord:
    round: int
    beta: float
    dataset_size: int
    mean_loss: float
    adam_steps: int


@dataclass
class TrainingReport:
    rounds: list

    @property
    def betas(self):
        return [r.beta for r in self.rounds]

    @property
    def final_loss(self):
        return self.rounds[-1].mean_loss if self.rounds else float("nan")

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["round", "beta", "dataset_size", "mean_loss", "adam_steps"])
            for r in self.rounds:
                writer.writerow([r.round, repr(r.beta), r.dataset_size,
                                 repr(r.mean_loss), r.adam_steps])


def train(config: TrainConfig, dataset_out: ImitationDataset | None = None):
    """Full DAgger loop: collect, aggregate, fit; returns (params, report).

    Each round appends one trajectory's shard to the growing dataset, decays
    beta, then runs epochs_per_round shuffled passes of minibatch Adam over
    everything collected so far. Deterministic given config.rng_seed.
    """
    config.validate()
    params = mlp.init_params(config.arch, seeding.rng_for(config.rng_seed, seeding.PARAMS_INIT))
    adam = mlp.FlatAdam(params, lr=config.learning_rate)
    dataset = dataset_out if dataset_out is not None else ImitationDataset()
    schedule = config.dagger
    rounds = []

    for r in range(config.n_train_trajectories):
        shard, _stats = collect_trajectory(
            config.sim, schedule, config.traj_len, config.history_depth,
            seeding.rng_for(config.rng_seed, seeding.TRAIN_TRAJECTORY, r),
            learner=adam.view_params(), shift_scheme=config.shift_scheme,
            trajectory_id=r,
        )
        dataset.append(shard)
        beta_used = schedule.beta
        schedule = advance_schedule(schedule)

        inputs, labels = dataset.arrays()
        losses = []
        live = adam.view_params()
        for epoch in range(config.epochs_per_round):
            order = seeding.rng_for(config.rng_seed, seeding.SHUFFLE, r, epoch).permutation(len(dataset))
            for start in range(0, len(order), config.batch_size):
                batch = order[start : start + config.batch_size]
                loss, grads = mlp.loss_and_gradient(live, inputs[batch], labels[batch])
                if not np.isfinite(loss):
                    raise RuntimeError(
                        f"training diverged: loss={loss} at round {r}"
                    )
                adam.step(grads)
                losses.append(loss)
        rounds.append(RoundRecord(r, beta_used, len(dataset),
                                  float(np.mean(losses)), len(losses)))

    return adam.params(), TrainingReport(rounds)

"""Flat key = value configuration files (INI sections per module).

Every knob is validated with a named-field message so a bad config fails
before any computation starts. One root seed ([sim] rng_seed, overridable
from the command line) feeds every random stream in a run.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace

from .dynamics import SimConfig
from .imitation import DaggerSchedule, TrainConfig


class ConfigError(ValueError):
    """Configuration file problem, reported with section.key context."""


@dataclass(frozen=True)
class ScenarioConfig:
    n_leaders: int = 2
    leader_velocity: tuple = (1.0, 0.5)
    grid_agents: int = 16
    grid_spacing: float = 1.0
    grid_speed_scale: float | None = None


@dataclass(frozen=True)
class AppConfig:
    train: TrainConfig
    scenario: ScenarioConfig

    @property
    def sim(self):
        return self.train.sim


_SIM_FIELDS = {
    "n_agents": int,
    "comm_radius": float,
    "potential_radius": float,
    "sample_time": float,
    "v_init": float,
    "accel_limit": float,
    "min_spawn_separation": float,
    "min_spawn_neighbors": int,
    "spawn_mode": str,
    "rng_seed": int,
    "max_spawn_attempts": int,
    "epsilon_dist": float,
    "feature_clip": float,
}

_TRAIN_FIELDS = {
    "n_train_trajectories": int,
    "traj_len": int,
    "n_test_trajectories": int,
    "batch_size": int,
    "epochs_per_round": int,
    "history_depth": int,
    "hidden_sizes": "int_tuple",
    "learning_rate": float,
    "shift_scheme": str,
}

_DAGGER_FIELDS = {"beta0": float, "decay": float, "floor": float}

_SCENARIO_FIELDS = {
    "n_leaders": int,
    "leader_velocity": "float_pair",
    "grid_agents": int,
    "grid_spacing": float,
    "grid_speed_scale": float,
}


def _convert(section, key, raw, kind):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw.strip()
        if kind == "int_tuple":
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if kind == "float_pair":
            parts = [float(v) for v in raw.split(",")]
            if len(parts) != 2:
                raise ValueError("expected two comma-separated numbers")
            return tuple(parts)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} ({exc})") from None
    raise AssertionError(kind)


def _read_section(parser, section, fields):
    values = {}
    if not parser.has_section(section):
        return values
    for key in parser.options(section):
        if key not in fields:
            raise ConfigError(
                f"[{section}] {key}: unknown option; valid keys: {sorted(fields)}"
            )
        values[key] = _convert(section, key, parser.get(section, key), fields[key])
    return values


def load_config(path, seed_override: int | None = None) -> AppConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found or unreadable: {path}")
    known = {"sim", "train", "dagger", "scenario"}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"unknown section [{section}]; valid: {sorted(known)}")

    sim_kwargs = _read_section(parser, "sim", _SIM_FIELDS)
    train_kwargs = _read_section(parser, "train", _TRAIN_FIELDS)
    dagger_kwargs = _read_section(parser, "dagger", _DAGGER_FIELDS)
    scenario_kwargs = _read_section(parser, "scenario", _SCENARIO_FIELDS)

    try:
        sim = SimConfig(**sim_kwargs)
        if seed_override is not None:
            sim = replace(sim, rng_seed=int(seed_override))
        sim.validate()
    except ValueError as exc:
        raise ConfigError(f"[sim] {exc}") from None
    try:
        beta0 = dagger_kwargs.pop("beta0", 1.0)
        dagger = DaggerSchedule(beta=beta0, **dagger_kwargs)
    except ValueError as exc:
        raise ConfigError(f"[dagger] {exc}") from None
    try:
        train = TrainConfig(sim=sim, dagger=dagger, rng_seed=sim.rng_seed, **train_kwargs)
        train.validate()
    except ValueError as exc:
        raise ConfigError(f"[train] {exc}") from None
    try:
        scenario = ScenarioConfig(**scenario_kwargs)
        if scenario.n_leaders < 0:
            raise ValueError(f"n_leaders must be >= 0, got {scenario.n_leaders}")
        if scenario.grid_agents < 2:
            raise ValueError(f"grid_agents must be >= 2, got {scenario.grid_agents}")
        if scenario.grid_spacing <= 0:
            raise ValueError(f"grid_spacing must be > 0, got {scenario.grid_spacing}")
    except ValueError as exc:
        raise ConfigError(f"[scenario] {exc}") from None

    return AppConfig(train=train, scenario=scenario)


def config_as_dict(app: AppConfig) -> dict:
    """Resolved snapshot for the run manifest."""
    train = app.train
    return {
        "sim": {k: getattr(train.sim, k) for k in _SIM_FIELDS},
        "train": {
            **{k: getattr(train, k) for k in _TRAIN_FIELDS},
            "rng_seed": train.rng_seed,
        },
        "dagger": {
            "beta0": train.dagger.beta,
            "decay": train.dagger.decay,
            "floor": train.dagger.floor,
        },
        "scenario": {k: getattr(app.scenario, k) for k in _SCENARIO_FIELDS},
    }

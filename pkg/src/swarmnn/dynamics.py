"""Point-mass double-integrator dynamics and scenario initialization.

The integrator is the exact zero-order-hold solution of r'' = u over one
sample period (not explicit Euler), so positions pick up the u*Ts^2/2 term.
Leaders are agents whose velocity is pinned for the whole episode: their
acceleration is ignored and they drift at constant velocity, but they remain
ordinary nodes of the communication graph.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import FlockState, build_comm_graph


class SpawnError(RuntimeError):
    """Raised when configuration resampling exhausts its attempt budget."""


@dataclass(frozen=True)
class SimConfig:
    """Simulation and spawn parameters for the baseline disc scenario.

    Note on min_spawn_neighbors: at the standard density (disc of radius
    sqrt(N)) the expected number of neighbors within comm_radius=1 is ~1, so
    whole-configuration resampling cannot reach a floor of 2 there; the
    default is therefore 0 and the knob is meant for configurations where
    the floor is geometrically reachable.
    """

    n_agents: int = 50
    comm_radius: float = 1.0
    potential_radius: float = 1.0
    sample_time: float = 0.01
    v_init: float = 3.0
    accel_limit: float = 100.0
    min_spawn_separation: float = 0.1
    min_spawn_neighbors: int = 0
    spawn_mode: str = "reject"  # "reject": whole-config resampling; "repair": per-agent
    rng_seed: int = 0
    max_spawn_attempts: int = 1000
    epsilon_dist: float = 1e-3
    feature_clip: float = 0.0  # 0 disables clipping of feature magnitudes

    def validate(self):
        if self.n_agents < 2:
            raise ValueError(f"n_agents must be >= 2, got {self.n_agents}")
        if self.comm_radius <= 0:
            raise ValueError(f"comm_radius must be > 0, got {self.comm_radius}")
        # rho >= 1 (not the stricter > 1): the baseline scenario uses
        # R = rho = 1.0 and the cutoff constant is still well defined there.
        if self.potential_radius < 1:
            raise ValueError(
                f"potential_radius must be >= 1, got {self.potential_radius}"
            )
        if self.sample_time <= 0:
            raise ValueError(f"sample_time must be > 0, got {self.sample_time}")
        if self.v_init < 0:
            raise ValueError(f"v_init must be >= 0, got {self.v_init}")
        if self.accel_limit <= 0:
            raise ValueError(f"accel_limit must be > 0, got {self.accel_limit}")
        if self.min_spawn_separation < 0:
            raise ValueError(
                f"min_spawn_separation must be >= 0, got {self.min_spawn_separation}"
            )
        if self.min_spawn_neighbors < 0:
            raise ValueError(
                f"min_spawn_neighbors must be >= 0, got {self.min_spawn_neighbors}"
            )
        if self.spawn_mode not in ("reject", "repair"):
            raise ValueError(
                f"spawn_mode must be 'reject' or 'repair', got {self.spawn_mode!r}"
            )
        if self.max_spawn_attempts < 1:
            raise ValueError(
                f"max_spawn_attempts must be >= 1, got {self.max_spawn_attempts}"
            )
        if self.epsilon_dist <= 0:
            raise ValueError(f"epsilon_dist must be > 0, got {self.epsilon_dist}")
        if self.feature_clip < 0:
            raise ValueError(f"feature_clip must be >= 0, got {self.feature_clip}")
        return self


def saturate(actions: np.ndarray, limit: float) -> np.ndarray:
    """Clamp each acceleration component to [-limit, +limit]."""
    if limit <= 0:
        raise ValueError(f"limit must be positive, got {limit}")
    return np.clip(actions, -limit, limit)


def step(state: FlockState, actions: np.ndarray, sample_time: float,
         accel_limit: float | None = None) -> FlockState:
    """Advance one sample period under held accelerations.

    Exact double-integrator update: v' = v + u*Ts, r' = r + v*Ts + u*Ts^2/2.
    Leaders keep their velocity and drift r' = r + v*Ts. When accel_limit is
    given the actions are saturated defensively before integration.
    """
    actions = np.asarray(actions, dtype=np.float64)
    if actions.shape != state.positions.shape:
        raise ValueError(
            f"actions must be {state.positions.shape}, got {actions.shape}"
        )
    if not np.isfinite(actions).all():
        raise ValueError("actions must be finite")
    if sample_time <= 0:
        raise ValueError(f"sample_time must be > 0, got {sample_time}")
    if accel_limit is not None:
        actions = saturate(actions, accel_limit)
    u = np.where(state.leader_mask[:, None], 0.0, actions)
    velocities = state.velocities + u * sample_time
    positions = state.positions + state.velocities * sample_time + 0.5 * u * sample_time**2
    return FlockState(positions, velocities, state.leader_mask, state.step_index + 1)


def init_flock_disc(cfg: SimConfig, rng: np.random.Generator) -> FlockState:
    """Sample the baseline start: positions uniform on the disc of radius sqrt(N).

    Velocities are per-agent uniform on [-v_init, v_init]^2 plus one flock-wide
    bias drawn from the same box. Acceptance requires that no pair is closer
    than min_spawn_separation and every agent has at least min_spawn_neighbors
    neighbors at comm_radius. spawn_mode "reject" resamples the whole
    configuration from scratch until it passes; "repair" resamples only the
    offending agents each iteration, which also reaches neighbor floors that
    whole-configuration rejection cannot (at the standard density the expected
    degree is comm_radius^2, so a floor of 2 is hopeless for rejection but
    quick for repair). Either mode gives up with a SpawnError after
    max_spawn_attempts rounds.
    """
    cfg.validate()
    n = cfg.n_agents
    disc_radius = np.sqrt(n)

    def sample_disc(count):
        radii = disc_radius * np.sqrt(rng.random(count))
        angles = rng.random(count) * (2.0 * np.pi)
        return np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])

    positions = None
    for attempt in range(cfg.max_spawn_attempts):
        if positions is None or cfg.spawn_mode == "reject":
            positions = sample_disc(n)
        d2 = _pairwise_sq_dists(positions)
        degrees = (d2 < cfg.comm_radius**2).sum(axis=1)
        min_dist = float(np.sqrt(d2.min()))
        if min_dist >= cfg.min_spawn_separation and degrees.min() >= cfg.min_spawn_neighbors:
            velocities = rng.uniform(-cfg.v_init, cfg.v_init, size=(n, 2))
            bias = rng.uniform(-cfg.v_init, cfg.v_init, size=2)
            return FlockState(positions, velocities + bias, np.zeros(n, dtype=bool))
        if cfg.spawn_mode == "repair":
            bad = degrees < cfg.min_spawn_neighbors
            close_i, close_j = np.nonzero(
                np.triu(d2 < cfg.min_spawn_separation**2, k=1)
            )
            bad[close_j] = True  # one agent per too-close pair moves
            if not bad.any():  # pragma: no cover - acceptance already checked
                bad[:] = True
            positions = positions.copy()
            positions[bad] = sample_disc(int(bad.sum()))
    raise SpawnError(
        f"no valid spawn after {cfg.max_spawn_attempts} {cfg.spawn_mode} attempts "
        f"(N={n}, R={cfg.comm_radius}, min_sep={cfg.min_spawn_separation}, "
        f"min_neighbors={cfg.min_spawn_neighbors}); with 'reject' a neighbor "
        f"floor above the expected degree R^2 is likely unreachable"
    )


def _pairwise_sq_dists(positions):
    diff = positions[:, None, :] - positions[None, :, :]
    d2 = diff[..., 0] ** 2 + diff[..., 1] ** 2
    np.fill_diagonal(d2, np.inf)
    return d2


def init_flock_grid(n_agents: int, spacing: float, speed_scale: float,
                    rng: np.random.Generator | None = None) -> FlockState:
    """Lattice start with velocities radially inward, proportional to center distance.

    Agents fill a ceil(sqrt(N))-wide grid row-major; agent i gets velocity
    -speed_scale * (r_i - centroid). Deterministic; rng accepted for interface
    symmetry with the other initializers.
    """
    if n_agents < 2:
        raise ValueError(f"n_agents must be >= 2, got {n_agents}")
    if spacing <= 0:
        raise ValueError(f"spacing must be > 0, got {spacing}")
    side = int(np.ceil(np.sqrt(n_agents)))
    cells = np.arange(n_agents)
    positions = np.column_stack([(cells % side) * spacing, (cells // side) * spacing])
    positions = positions.astype(np.float64)
    centroid = positions.mean(axis=0)
    velocities = -speed_scale * (positions - centroid)
    return FlockState(positions, velocities, np.zeros(n_agents, dtype=bool))


def grid_speed_scale(n_agents: int, spacing: float, v_init: float) -> float:
    """speed_scale that makes the fastest (corner) agent start at speed v_init."""
    side = int(np.ceil(np.sqrt(n_agents)))
    corner = init_flock_grid(n_agents, spacing, 1.0)
    dists = np.linalg.norm(corner.positions - corner.positions.mean(axis=0), axis=1)
    return v_init / dists.max() if dists.max() > 0 else 0.0


def assign_leaders(state: FlockState, n_leaders: int, leader_velocity,
                   rng: np.random.Generator) -> FlockState:
    """Flag n_leaders distinct agents, chosen uniformly, and pin their velocity."""
    if not 0 <= n_leaders <= state.n_agents:
        raise ValueError(
            f"n_leaders must be in [0, {state.n_agents}], got {n_leaders}"
        )
    if n_leaders == 0:
        return state
    chosen = rng.choice(state.n_agents, size=n_leaders, replace=False)
    mask = state.leader_mask.copy()
    mask[chosen] = True
    velocities = state.velocities.copy()
    velocities[chosen] = np.asarray(leader_velocity, dtype=np.float64)
    return FlockState(state.positions, velocities, mask, state.step_index)


STOCHASTIC_TS_MEAN = 0.12
STOCHASTIC_TS_VARIANCE = 3e-4
STOCHASTIC_TS_FLOOR = 1e-3


def sample_stochastic_ts(rng: np.random.Generator) -> float:
    """Random sample period ~ N(0.12, 3e-4) s, floored at 1 ms."""
    ts = rng.normal(STOCHASTIC_TS_MEAN, np.sqrt(STOCHASTIC_TS_VARIANCE))
    return max(float(ts), STOCHASTIC_TS_FLOOR)


def scaled_policy(policy, scale: float):
    """Wrap a FlockState -> actions policy as u = l * policy(state / l).

    Both positions and velocities are divided by the scale before the inner
    policy runs, and its output is multiplied back up. Linear policies are
    unchanged; the wrapper is how a policy tuned at unit scale drives a
    faster/larger plant.
    """
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")

    def scaled(state: FlockState) -> np.ndarray:
        shrunk = replace(
            state,
            positions=state.positions / scale,
            velocities=state.velocities / scale,
        )
        return scale * np.asarray(policy(shrunk), dtype=np.float64)

    return scaled

"""swarmnn: decentralized flocking controllers learned by imitation.

Simulates planar point-mass swarms over radius-limited, time-varying
communication graphs, diffuses per-agent features through delayed multi-hop
aggregation, and trains a shared per-node network to imitate a centralized
flocking expert (DAgger). Hot simulation kernels run from a compiled
extension when available, with a numpy fallback selected at import
(see swarmnn._backend).
"""

__version__ = "0.1.0"

from ._backend import active_backend, available_backends  # noqa: F401
from .core import (CommGraph, FlockState, ShiftOperator, apply_shift,  # noqa: F401
                   build_comm_graph, build_shift_operator, khop_neighborhood)
from .dynamics import SimConfig, init_flock_disc, init_flock_grid, saturate, step  # noqa: F401

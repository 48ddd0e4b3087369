"""Deterministic stream splitting from one root seed.

Every random draw in the package comes from a numpy Generator built as
SeedSequence(root_seed, spawn_key=(purpose, *indices)), so serial and
parallel runs agree and any single trajectory/episode can be reproduced in
isolation. Purposes:

    0  network parameter init
    1  training trajectory r      (spawn_key (1, r): spawn init + mixture draws)
    2  minibatch shuffle          (spawn_key (2, round, epoch))
    3  evaluation episode j       (spawn_key (3, j): fresh initial state)
    4  sweep episode              (spawn_key (4, grid_point, seed_index))
    5  scenario extras            (leader choice etc., per episode)
"""

import numpy as np

PARAMS_INIT = 0
TRAIN_TRAJECTORY = 1
SHUFFLE = 2
EVAL_EPISODE = 3
SWEEP_EPISODE = 4
SCENARIO = 5


def rng_for(root_seed: int, purpose: int, *indices) -> np.random.Generator:
    key = (int(purpose),) + tuple(int(i) for i in indices)
    return np.random.default_rng(np.random.SeedSequence(int(root_seed), spawn_key=key))

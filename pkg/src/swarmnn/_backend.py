"""Kernel backend selection: compiled extension if importable, numpy fallback otherwise.

Set SWARMNN_BACKEND=python or SWARMNN_BACKEND=compiled to force a choice at
import time; tests and benchmarks switch at runtime via use_backend().
"""

import os
from contextlib import contextmanager

from . import _kernels_py

_BACKENDS = {"python": _kernels_py}
try:
    from . import _kernels as _kernels_c

    _BACKENDS["compiled"] = _kernels_c
except ImportError:
    _kernels_c = None

_env = os.environ.get("SWARMNN_BACKEND", "").strip().lower()
if _env:
    if _env not in _BACKENDS:
        raise ImportError(
            f"SWARMNN_BACKEND={_env!r} requested but only {sorted(_BACKENDS)} available"
        )
    _active = _env
else:
    _active = "compiled" if "compiled" in _BACKENDS else "python"

impl = _BACKENDS[_active]


def active_backend():
    return _active


def available_backends():
    return sorted(_BACKENDS)


def set_backend(name):
    global impl, _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; available: {sorted(_BACKENDS)}")
    _active = name
    impl = _BACKENDS[name]


@contextmanager
def use_backend(name):
    previous = _active
    set_backend(name)
    try:
        yield impl
    finally:
        set_backend(previous)

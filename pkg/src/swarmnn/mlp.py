"""Per-node learnable map from aggregation sequences to actions.

A small fully-connected network (tanh hidden layers, linear output) shared by
every agent: input is the flattened (K, p) aggregation sequence, output the
2-dim acceleration. Gradients are exact reverse-mode, the optimizer is Adam
with bias correction, and everything is float64 numpy so training is
bit-reproducible given a seed.

Model file format ("SWNN"): magic, format version u32, K u32, p u32, q u32,
layer count u32, then per-layer (in u32, out u32), then for each layer the
weight matrix (out x in, row-major) followed by the bias vector, all
little-endian float64.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MODEL_MAGIC = b"SWNN"
MODEL_FORMAT_VERSION = 1


class ModelFormatError(RuntimeError):
    """Model file is not readable: bad magic, version, or truncation."""


class ArchitectureMismatchError(RuntimeError):
    """Loaded parameters do not match the configured architecture."""


@dataclass(frozen=True)
class MlpArchitecture:
    history_depth: int  # K
    feature_dim: int = 6  # p
    hidden_sizes: tuple = (32, 32)
    output_dim: int = 2  # q

    def __post_init__(self):
        if self.history_depth < 1 or self.feature_dim < 1 or self.output_dim < 1:
            raise ValueError("history_depth, feature_dim, output_dim must be >= 1")
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError(f"hidden sizes must be >= 1, got {self.hidden_sizes}")
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))

    @property
    def input_dim(self):
        return self.history_depth * self.feature_dim

    @property
    def layer_dims(self):
        """(in, out) pairs for every layer, input to output."""
        sizes = (self.input_dim, *self.hidden_sizes, self.output_dim)
        return tuple(zip(sizes[:-1], sizes[1:]))

    @property
    def n_parameters(self):
        return sum(fin * fout + fout for fin, fout in self.layer_dims)


@dataclass
class MlpParams:
    arch: MlpArchitecture
    weights: list  # per layer, (out, in)
    biases: list  # per layer, (out,)

    def __post_init__(self):
        dims = self.arch.layer_dims
        if len(self.weights) != len(dims) or len(self.biases) != len(dims):
            raise ValueError(
                f"expected {len(dims)} layers, got {len(self.weights)} weight "
                f"and {len(self.biases)} bias arrays"
            )
        for layer, ((fin, fout), w, b) in enumerate(zip(dims, self.weights, self.biases)):
            if w.shape != (fout, fin) or b.shape != (fout,):
                raise ValueError(
                    f"layer {layer}: weight {w.shape} / bias {b.shape} do not "
                    f"match dims in={fin}, out={fout}"
                )

    def copy(self):
        return MlpParams(self.arch, [w.copy() for w in self.weights],
                         [b.copy() for b in self.biases])


def init_params(arch: MlpArchitecture, rng: np.random.Generator) -> MlpParams:
    """Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases."""
    weights, biases = [], []
    for fin, fout in arch.layer_dims:
        bound = np.sqrt(6.0 / (fin + fout))
        weights.append(rng.uniform(-bound, bound, size=(fout, fin)))
        biases.append(np.zeros(fout))
    return MlpParams(arch, weights, biases)


def zero_params(arch: MlpArchitecture) -> MlpParams:
    """All-zero network (outputs identically zero); handy as an untrained baseline."""
    return MlpParams(
        arch,
        [np.zeros((fout, fin)) for fin, fout in arch.layer_dims],
        [np.zeros(fout) for _, fout in arch.layer_dims],
    )


def forward(params: MlpParams, z) -> np.ndarray:
    """Action for one aggregation sequence ((K, p) or flat (K*p,))."""
    x = np.asarray(z, dtype=np.float64).reshape(-1)
    return forward_batch(params, x[None, :])[0]


def forward_batch(params: MlpParams, inputs: np.ndarray) -> np.ndarray:
    """Actions for a (B, K*p) batch of flattened sequences."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.arch.input_dim:
        raise ValueError(
            f"inputs must be (B, {params.arch.input_dim}), got {x.shape}"
        )
    last = len(params.weights) - 1
    for layer, (w, b) in enumerate(zip(params.weights, params.biases)):
        x = x @ w.T + b
        if layer != last:
            x = np.tanh(x)
    return x


def loss_and_gradient(params: MlpParams, inputs: np.ndarray, targets: np.ndarray):
    """Mean-over-batch, sum-over-components squared error and its exact gradients.

    Returns (loss, (weight_grads, bias_grads)) with gradient lists shaped like
    the parameter lists.
    """
    x = np.asarray(inputs, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if x.shape[0] != t.shape[0]:
        raise ValueError(f"batch sizes differ: {x.shape[0]} vs {t.shape[0]}")
    batch = x.shape[0]
    last = len(params.weights) - 1

    activations = [x]
    for layer, (w, b) in enumerate(zip(params.weights, params.biases)):
        x = x @ w.T
        x += b
        if layer != last:
            np.tanh(x, out=x)
        activations.append(x)

    residual = activations[-1] - t
    flat = residual.ravel()
    loss = float(np.dot(flat, flat)) / batch

    weight_grads = [None] * len(params.weights)
    bias_grads = [None] * len(params.biases)
    delta = residual
    delta *= 2.0 / batch
    for layer in range(last, -1, -1):
        weight_grads[layer] = delta.T @ activations[layer]
        bias_grads[layer] = delta.sum(axis=0)
        if layer > 0:
            # tanh' from the stored activation; the buffer is free to clobber
            hidden = activations[layer]
            np.multiply(hidden, hidden, out=hidden)
            np.subtract(1.0, hidden, out=hidden)
            delta = delta @ params.weights[layer]
            delta *= hidden
    return loss, (weight_grads, bias_grads)


@dataclass
class AdamState:
    lr: float = 5e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m_weights: list = None
    m_biases: list = None
    v_weights: list = None
    v_biases: list = None

    @classmethod
    def for_params(cls, params: MlpParams, lr: float = 5e-5,
                   beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        return cls(
            lr=lr, beta1=beta1, beta2=beta2, eps=eps, t=0,
            m_weights=[np.zeros_like(w) for w in params.weights],
            m_biases=[np.zeros_like(b) for b in params.biases],
            v_weights=[np.zeros_like(w) for w in params.weights],
            v_biases=[np.zeros_like(b) for b in params.biases],
        )


def adam_step(params: MlpParams, grads, state: AdamState):
    """One Adam update with bias correction; returns (new_params, new_state)."""
    weight_grads, bias_grads = grads
    t = state.t + 1
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t

    def update(theta, g, m, v):
        m_new = state.beta1 * m + (1.0 - state.beta1) * g
        v_new = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        theta_new = theta - state.lr * (m_new / bc1) / (np.sqrt(v_new / bc2) + state.eps)
        return theta_new, m_new, v_new

    new_w, new_b = [], []
    new_mw, new_mb, new_vw, new_vb = [], [], [], []
    for w, g, m, v in zip(params.weights, weight_grads, state.m_weights, state.v_weights):
        w2, m2, v2 = update(w, g, m, v)
        new_w.append(w2); new_mw.append(m2); new_vw.append(v2)
    for b, g, m, v in zip(params.biases, bias_grads, state.m_biases, state.v_biases):
        b2, m2, v2 = update(b, g, m, v)
        new_b.append(b2); new_mb.append(m2); new_vb.append(v2)

    return (
        MlpParams(params.arch, new_w, new_b),
        AdamState(state.lr, state.beta1, state.beta2, state.eps, t,
                  new_mw, new_mb, new_vw, new_vb),
    )


class FlatAdam:
    """Adam over one flattened parameter vector; arithmetic matches adam_step.

    Keeping every parameter in a single contiguous buffer turns the update
    into a handful of vector ops, which matters in training loops that take
    hundreds of thousands of small steps. Elementwise updates are identical
    to chaining adam_step, so trained results agree bitwise.
    """

    def __init__(self, params: MlpParams, lr: float = 5e-5, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.arch = params.arch
        self._slices = []
        cursor = 0
        for w in params.weights:
            self._slices.append((slice(cursor, cursor + w.size), w.shape))
            cursor += w.size
        for b in params.biases:
            self._slices.append((slice(cursor, cursor + b.size), b.shape))
            cursor += b.size
        self.theta = np.concatenate(
            [w.ravel() for w in params.weights] + [b.ravel() for b in params.biases]
        )
        self.m = np.zeros_like(self.theta)
        self.v = np.zeros_like(self.theta)
        self._g = np.empty_like(self.theta)

    def step(self, grads):
        weight_grads, bias_grads = grads
        for (sl, shape), g in zip(self._slices, weight_grads + bias_grads):
            self._g[sl] = g.ravel()
        g = self._g
        self.t += 1
        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * g
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * (g * g)
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        self.theta -= self.lr * (self.m / bc1) / (np.sqrt(self.v / bc2) + self.eps)

    def params(self) -> MlpParams:
        n_layers = len(self.arch.layer_dims)
        arrays = [self.theta[sl].reshape(shape).copy() for sl, shape in self._slices]
        return MlpParams(self.arch, arrays[:n_layers], arrays[n_layers:])

    def view_params(self) -> MlpParams:
        """Zero-copy parameter views for forward passes inside the train loop."""
        n_layers = len(self.arch.layer_dims)
        arrays = [self.theta[sl].reshape(shape) for sl, shape in self._slices]
        return MlpParams(self.arch, arrays[:n_layers], arrays[n_layers:])


_HEADER = struct.Struct("<4sIIIII")


def save_model(params: MlpParams, path):
    arch = params.arch
    blob = [_HEADER.pack(MODEL_MAGIC, MODEL_FORMAT_VERSION, arch.history_depth,
                         arch.feature_dim, arch.output_dim, len(params.weights))]
    for fin, fout in arch.layer_dims:
        blob.append(struct.pack("<II", fin, fout))
    for w, b in zip(params.weights, params.biases):
        blob.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        blob.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(blob))


def read_model_header(path):
    """Architecture metadata from the header alone (weights are not read)."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise ModelFormatError(f"{path}: file shorter than the header")
        magic, version, k, p, q, n_layers = _HEADER.unpack(head)
        if magic != MODEL_MAGIC:
            raise ModelFormatError(f"{path}: bad magic {magic!r}, not a model file")
        if version != MODEL_FORMAT_VERSION:
            raise ModelFormatError(
                f"{path}: format version {version} unsupported "
                f"(expected {MODEL_FORMAT_VERSION})"
            )
        dims = []
        for _ in range(n_layers):
            raw = fh.read(8)
            if len(raw) < 8:
                raise ModelFormatError(f"{path}: truncated layer table")
            dims.append(struct.unpack("<II", raw))
    if not dims or dims[0][0] != k * p or dims[-1][1] != q:
        raise ModelFormatError(f"{path}: layer table inconsistent with K*p/q header")
    hidden = tuple(fout for _, fout in dims[:-1])
    arch = MlpArchitecture(k, p, hidden, q)
    return {"format_version": version, "history_depth": k, "feature_dim": p,
            "output_dim": q, "hidden_sizes": hidden, "layer_dims": tuple(dims),
            "n_parameters": arch.n_parameters, "arch": arch}


def load_model(path) -> MlpParams:
    header = read_model_header(path)
    arch = header["arch"]
    offset = _HEADER.size + 8 * len(header["layer_dims"])
    with open(path, "rb") as fh:
        fh.seek(offset)
        payload = fh.read()
    expected = 8 * arch.n_parameters
    if len(payload) != expected:
        raise ModelFormatError(
            f"{path}: parameter payload is {len(payload)} bytes, expected {expected}"
        )
    flat = np.frombuffer(payload, dtype="<f8")
    weights, biases, cursor = [], [], 0
    for fin, fout in arch.layer_dims:
        weights.append(flat[cursor : cursor + fin * fout].reshape(fout, fin).copy())
        cursor += fin * fout
        biases.append(flat[cursor : cursor + fout].copy())
        cursor += fout
    params = MlpParams(arch, weights, biases)
    if not all(np.isfinite(w).all() for w in weights) or \
       not all(np.isfinite(b).all() for b in biases):
        raise ModelFormatError(f"{path}: non-finite parameters")
    return params


def require_architecture(params: MlpParams, history_depth: int, feature_dim: int):
    """Fail loudly when a model is driven with the wrong K or p."""
    arch = params.arch
    if arch.history_depth != history_depth or arch.feature_dim != feature_dim:
        raise ArchitectureMismatchError(
            f"model expects K={arch.history_depth}, p={arch.feature_dim}; "
            f"run is configured for K={history_depth}, p={feature_dim}"
        )

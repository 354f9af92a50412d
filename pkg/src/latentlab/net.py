"""Small fully-connected networks with explicit parameters, manual backprop, and Adam.

Hidden layers are ReLU, the output layer is linear. Parameters and gradients
are plain float64 arrays so every update is inspectable and every gradient can
be checked against finite differences.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .numerics import RngState, gaussian


class Mlp:
    """Feed-forward ReLU network.

    Weights are (fan_in, fan_out) matrices applied as ``x @ W + b``. The
    ReLU subgradient at 0 is 0.
    """

    def __init__(self, layer_dims: list[int] | tuple[int, ...], rng: RngState | None = None):
        if len(layer_dims) < 2 or any(d < 1 for d in layer_dims):
            raise DimensionError(f"Mlp: need at least two positive layer dims, got {layer_dims}")
        self.layer_dims = list(int(d) for d in layer_dims)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for din, dout in zip(self.layer_dims[:-1], self.layer_dims[1:]):
            if rng is None:
                w = np.zeros((din, dout))
            else:
                # He initialization, appropriate for the ReLU hidden stack
                w = gaussian(rng, din, dout) * np.sqrt(2.0 / din)
            self.weights.append(w)
            self.biases.append(np.zeros(dout))

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1]

    def params(self) -> list[np.ndarray]:
        """Flat parameter list [W0, b0, W1, b1, ...]; arrays are live references."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def zero_final_layer(self):
        self.weights[-1][:] = 0.0
        self.biases[-1][:] = 0.0

    def clone(self) -> "Mlp":
        other = Mlp(self.layer_dims)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            other.weights[i] = w.copy()
            other.biases[i] = b.copy()
        return other

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Forward pass on a batch (rows = samples).

        Returns (output, cache); the cache holds the per-layer inputs needed
        by :meth:`backward`.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.in_dim:
            raise DimensionError(f"Mlp.forward: input dim {x.shape[1]} != {self.in_dim}")
        cache = [x]
        a = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = a @ w + b
            if i < last:
                a = np.maximum(a, 0.0)
            cache.append(a)
        return a, cache

    def backward(
        self, cache: list[np.ndarray], upstream: np.ndarray
    ) -> tuple[list[np.ndarray], np.ndarray]:
        """Backpropagate a loss gradient given at the network output.

        Returns (param_grads, input_grad) with param_grads ordered like
        :meth:`params`. The cache must come from a matching forward call.
        """
        if len(cache) != len(self.weights) + 1 or cache[0].shape[1] != self.in_dim:
            raise DimensionError("Mlp.backward: cache does not match this network")
        upstream = np.atleast_2d(np.asarray(upstream, dtype=float))
        if upstream.shape != (cache[0].shape[0], self.out_dim):
            raise DimensionError(
                f"Mlp.backward: upstream shape {upstream.shape} != ({cache[0].shape[0]}, {self.out_dim})"
            )
        grads: list[np.ndarray] = [np.empty(0)] * (2 * len(self.weights))
        g = upstream
        for i in range(len(self.weights) - 1, -1, -1):
            a_in = cache[i]
            grads[2 * i] = a_in.T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            if i > 0:
                g = (g @ self.weights[i].T) * (cache[i] > 0.0)
        input_grad = g @ self.weights[0].T
        return grads, input_grad

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]


@dataclass
class AdamState:
    """Adam moments plus hyperparameters; moments mirror the parameter list."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int
    lr: float
    beta1: float
    beta2: float
    eps: float


def adam_init(
    params: list[np.ndarray],
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    return AdamState(
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
        step=0,
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
    )


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState):
    """One bias-corrected Adam update; parameters and state mutate in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise DimensionError("adam_step: params/grads/state length mismatch")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise DimensionError(f"adam_step: param {p.shape} vs grad {g.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


class FourierTimeEmbed:
    """Gaussian Fourier features of a scalar time in [0, 1].

    Frequencies are drawn once at construction and never updated; the
    embedding is [cos(2 pi f_i t) ..., sin(2 pi f_i t) ...].
    """

    def __init__(self, n_frequencies: int = 16, scale: float = 1.0, rng: RngState | None = None):
        if rng is None:
            rng = RngState(0, 0)
        self.scale = float(scale)
        self.frequencies = scale * gaussian(rng, n_frequencies, 1)[:, 0]

    @property
    def dim(self) -> int:
        return 2 * self.frequencies.shape[0]

    def __call__(self, t: float | np.ndarray) -> np.ndarray:
        """Embed a scalar t -> (dim,) or a vector of times -> (len(t), dim)."""
        t_arr = np.asarray(t, dtype=float)
        phase = 2.0 * np.pi * np.multiply.outer(t_arr, self.frequencies)
        return np.concatenate([np.cos(phase), np.sin(phase)], axis=-1)


def time_embed(embed: FourierTimeEmbed, t: float | np.ndarray) -> np.ndarray:
    return embed(t)


# Checkpoint format (documented here and in the README):
#   magic        4 bytes  b"MLP1"
#   n_dims       uint32 little-endian
#   dims         n_dims x uint32 little-endian
#   per layer, in order: W (row-major, dims[i] x dims[i+1]) then b (dims[i+1],),
#   all float64 little-endian.
_MAGIC = b"MLP1"


def save_mlp(net: Mlp, path):
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", len(net.layer_dims)))
        f.write(struct.pack(f"<{len(net.layer_dims)}I", *net.layer_dims))
        for w, b in zip(net.weights, net.biases):
            f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_mlp(path) -> Mlp:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not an MLP checkpoint (bad magic {magic!r})")
        (n_dims,) = struct.unpack("<I", f.read(4))
        dims = list(struct.unpack(f"<{n_dims}I", f.read(4 * n_dims)))
        net = Mlp(dims)
        for i, (din, dout) in enumerate(zip(dims[:-1], dims[1:])):
            w = np.frombuffer(f.read(8 * din * dout), dtype="<f8").reshape(din, dout)
            b = np.frombuffer(f.read(8 * dout), dtype="<f8")
            net.weights[i] = w.astype(float)
            net.biases[i] = b.astype(float)
        extra = f.read(1)
        if extra:
            raise ValueError(f"{path}: trailing bytes after checkpoint payload")
    return net

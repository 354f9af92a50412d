"""Central-finite-difference oracles for every hand-written gradient in the package."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .flow import FlowPath, ShiftSchedule, TrainBatch, fm_loss, interpolate, shift_time
from .lvrae import LossWeights, _rec_loss_grad
from .manifold import make_toy_decoder, toy_decode, toy_jacobian
from .net import FourierTimeEmbed, Mlp
from .numerics import LayerNormParams, RngState, gaussian, layer_norm, layer_norm_backward, uniform


def relative_error(a: float, b: float) -> float:
    """|a - b| normalized by max(1, |a|, |b|), the usual finite-difference guard."""
    return abs(a - b) / max(1.0, abs(a), abs(b))


def central_difference(f: Callable[[], float], param: np.ndarray, index: tuple, h: float) -> float:
    """d f / d param[index] by central differences; restores the parameter."""
    orig = param[index]
    param[index] = orig + h
    fp = f()
    param[index] = orig - h
    fm = f()
    param[index] = orig
    return (fp - fm) / (2.0 * h)


def _sample_coords(rng: RngState, params: list[np.ndarray], n_coords: int) -> list[tuple[int, tuple]]:
    sizes = np.array([p.size for p in params])
    total = int(sizes.sum())
    picks = rng.generator.integers(0, total, size=n_coords)
    out = []
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    for pick in picks:
        pi = int(np.searchsorted(offsets, pick, side="right") - 1)
        flat = int(pick - offsets[pi])
        out.append((pi, np.unravel_index(flat, params[pi].shape)))
    return out


def check_param_gradient(
    loss_and_grads: Callable[[], tuple[float, list[np.ndarray]]],
    params: list[np.ndarray],
    rng: RngState,
    n_coords: int = 100,
    h: float = 1e-5,
) -> float:
    """Max relative error between analytic parameter gradients and central differences."""
    _, grads = loss_and_grads()
    worst = 0.0
    for pi, idx in _sample_coords(rng, params, n_coords):
        fd = central_difference(lambda: loss_and_grads()[0], params[pi], idx, h)
        worst = max(worst, relative_error(fd, float(grads[pi][idx])))
    return worst


def _margin_ok(net: Mlp, x: np.ndarray, margin: float) -> bool:
    """True when no hidden pre-activation sits within `margin` of the ReLU kink."""
    a = x
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        pre = a @ w + b
        if i < len(net.weights) - 1:
            if np.min(np.abs(pre)) < margin:
                return False
            a = np.maximum(pre, 0.0)
    return True


def _kink_free_net(dims: list[int], rng: RngState, batch: int, margin: float = 3e-4):
    """A random net and input whose finite-difference neighborhood avoids ReLU kinks."""
    for attempt in range(200):
        net = Mlp(dims, rng.split(attempt))
        x = gaussian(rng.split(1000 + attempt), batch, dims[0])
        if _margin_ok(net, x, margin):
            return net, x
    raise RuntimeError(f"no kink-free configuration found for dims {dims}")


def check_mlp_backward(dims: list[int], rng: RngState, n_coords: int = 100, h: float = 1e-5) -> float:
    """FD check of Mlp.backward on the scalar loss <G, forward(x)> with fixed random G."""
    net, x = _kink_free_net(dims, rng, batch=2)
    g = gaussian(rng.split(1), 2, dims[-1])

    def loss_and_grads():
        out, cache = net.forward(x)
        grads, _ = net.backward(cache, g)
        return float(np.sum(g * out)), grads

    return check_param_gradient(loss_and_grads, net.params(), rng.split(2), n_coords, h)


def check_mlp_input_grad(dims: list[int], rng: RngState, n_coords: int = 50, h: float = 1e-5) -> float:
    """FD check of the input gradient returned by Mlp.backward."""
    net, x = _kink_free_net(dims, rng, batch=2)
    g = gaussian(rng.split(1), 2, dims[-1])
    worst = 0.0
    _, cache = net.forward(x)
    _, input_grad = net.backward(cache, g)
    for _, idx in _sample_coords(rng.split(2), [x], n_coords):
        fd = central_difference(lambda: float(np.sum(g * net(x))), x, idx, h)
        worst = max(worst, relative_error(fd, float(input_grad[idx])))
    return worst


def check_layer_norm_backward(dim: int, rng: RngState, h: float = 1e-5) -> float:
    """FD check of layer_norm_backward over input, gain, and bias coordinates."""
    v = gaussian(rng, 1, dim)[0]
    gain = 1.0 + 0.3 * gaussian(rng, 1, dim)[0]
    bias = 0.2 * gaussian(rng, 1, dim)[0]
    p = LayerNormParams(gain, bias)
    g = gaussian(rng, 1, dim)[0]

    def loss():
        return float(np.sum(g * layer_norm(v, p)))

    grad_v, grad_gain, grad_bias = layer_norm_backward(v, p, g)
    worst = 0.0
    for arr, grad in ((v, grad_v), (p.gain, grad_gain), (p.bias, grad_bias)):
        for i in range(dim):
            fd = central_difference(loss, arr, (i,), h)
            worst = max(worst, relative_error(fd, float(grad[i])))
    return worst


def check_fm_loss_grad(
    dim: int, rng: RngState, n_coords: int = 100, h: float = 1e-5, shift_a: float = 1.0
) -> float:
    """FD check of the flow-matching loss gradients through the velocity model."""
    embed = FourierTimeEmbed(4, 1.0, rng.split(0))
    dims = [dim + embed.dim, 16, 16, dim]
    batch_n = 4
    shift = ShiftSchedule(shift_a)
    for attempt in range(200):
        net = Mlp(dims, rng.split(1 + attempt))
        x0 = gaussian(rng.split(1000 + attempt), batch_n, dim)
        eps = gaussian(rng.split(2000 + attempt), batch_n, dim)
        t = uniform(rng.split(3000 + attempt), batch_n)
        batch = TrainBatch(x0, eps, t)
        x_t, _ = interpolate(FlowPath(), x0, eps, t)
        inp = np.hstack([x_t, embed(np.asarray(shift_time(shift, t)))])
        if _margin_ok(net, inp, 3e-4):
            break
    else:
        raise RuntimeError("no kink-free fm_loss configuration found")

    def loss_and_grads():
        return fm_loss(net, embed, batch, shift)

    return check_param_gradient(loss_and_grads, net.params(), rng.split(2), n_coords, h)


def check_rec_loss_grad(n: int, rng: RngState, n_coords: int = 60, h: float = 1e-6) -> float:
    """FD check of the reconstruction-loss gradient w.r.t. the reconstruction."""
    w = LossWeights()
    x = gaussian(rng.split(0), 3, n)
    xbar = x + 0.5 * gaussian(rng.split(1), 3, n)

    def loss_and_grads():
        loss, grad = _rec_loss_grad(x, xbar, w)
        return loss, [grad]

    return check_param_gradient(loss_and_grads, [xbar], rng.split(2), n_coords, h)


def check_toy_jacobian(n_configs: int, rng: RngState, h: float = 1e-6) -> float:
    """Worst Frobenius-relative FD error of the closed-form toy-decoder Jacobian."""
    worst = 0.0
    for i in range(n_configs):
        sub = rng.split(i)
        dim = int(uniform(sub.split(0), 1, 3, 33)[0])
        alpha = float(uniform(sub.split(1), 1, 0.0, 3.0)[0])
        beta = float(uniform(sub.split(2), 1, 0.5, 2.0)[0])
        dec = make_toy_decoder(sub.split(3), dim, alpha, beta)
        z = gaussian(sub.split(4), 1, dim)[0]
        jac = toy_jacobian(dec, z)
        fd = np.empty_like(jac)
        for j in range(dim):
            zp = z.copy()
            zm = z.copy()
            zp[j] += h
            zm[j] -= h
            fd[:, j] = (toy_decode(dec, zp) - toy_decode(dec, zm)) / (2.0 * h)
        denom = np.linalg.norm(jac)
        worst = max(worst, float(np.linalg.norm(fd - jac) / denom))
    return worst


@dataclass(frozen=True)
class OracleResult:
    name: str
    max_rel_err: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tolerance


def run_all(seed: int) -> list[OracleResult]:
    """Every finite-difference oracle at its acceptance tolerance."""
    rng = RngState(seed, 900)
    shapes = [
        [160, 512, 512, 512, 512, 128],  # toy velocity model
        [96, 256, 256, 32],  # residual encoder
        [32, 256, 256, 256, 64],  # reconstruction decoder
        [64, 256, 256, 1],  # discriminator
        [8, 16, 16, 4],  # small generic net
    ]
    results = [
        OracleResult(f"mlp_backward_{'x'.join(map(str, dims))}", check_mlp_backward(dims, rng.split(i)), 1e-5)
        for i, dims in enumerate(shapes)
    ]
    results.append(OracleResult("mlp_input_grad", check_mlp_input_grad([8, 16, 16, 4], rng.split(10)), 1e-5))
    results.append(OracleResult("layer_norm_backward", check_layer_norm_backward(8, rng.split(11)), 1e-5))
    results.append(OracleResult("fm_loss_grad", check_fm_loss_grad(4, rng.split(12)), 1e-5))
    results.append(OracleResult("rec_loss_grad", check_rec_loss_grad(16, rng.split(13)), 1e-4))
    results.append(OracleResult("toy_jacobian", check_toy_jacobian(50, rng.split(14)), 1e-6))
    return results

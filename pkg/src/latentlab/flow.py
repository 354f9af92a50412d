"""Flow-matching training and probability-flow ODE sampling with time shifting.

The interpolant is the linear path x_t = (1-t) x0 + t eps between data (t=0)
and standard normal noise (t=1); its derivative eps - x0 is the regression
target for the velocity model. Sampling integrates dX = v(X, t') dt from t=1
down to t=0 on a uniform t grid, feeding the model the shifted time t'.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionError, NumericalError
from .net import AdamState, FourierTimeEmbed, Mlp, adam_init, adam_step
from .numerics import RngState, gaussian, uniform


@dataclass(frozen=True)
class FlowPath:
    """Linear interpolation schedule: alpha_t = 1 - t, beta_t = t."""

    def coefficients(self, t: np.ndarray | float) -> tuple[np.ndarray | float, np.ndarray | float]:
        t = np.asarray(t, dtype=float)
        return 1.0 - t, t


@dataclass(frozen=True)
class ShiftSchedule:
    """Time reparameterization t' = a t / (1 + (a - 1) t) with a >= 1."""

    a: float = 1.0

    def __post_init__(self):
        if not self.a >= 1.0:
            raise DimensionError(f"ShiftSchedule: shift coefficient must be >= 1, got {self.a}")


def shift_time(schedule: ShiftSchedule, t: float | np.ndarray) -> float | np.ndarray:
    t_arr = np.asarray(t, dtype=float)
    out = schedule.a * t_arr / (1.0 + (schedule.a - 1.0) * t_arr)
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


def shift_coefficient(c: int, h: int, w: int) -> float:
    """Shift coefficient sqrt(c*h*w / 4096) for a latent of shape (c, h, w)."""
    if c < 1 or h < 1 or w < 1:
        raise DimensionError(f"shift_coefficient: dims must be >= 1, got ({c}, {h}, {w})")
    return math.sqrt(c * h * w / 4096.0)


@dataclass
class TrainBatch:
    """One flow-matching minibatch: data rows, matched noise rows, and times."""

    x0: np.ndarray
    eps: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        self.x0 = np.atleast_2d(np.asarray(self.x0, dtype=float))
        self.eps = np.atleast_2d(np.asarray(self.eps, dtype=float))
        self.t = np.asarray(self.t, dtype=float).reshape(-1)
        if not (self.x0.shape == self.eps.shape and self.x0.shape[0] == self.t.shape[0]):
            raise DimensionError(
                f"TrainBatch: row mismatch x0 {self.x0.shape}, eps {self.eps.shape}, t {self.t.shape}"
            )


def interpolate(
    path: FlowPath, x0: np.ndarray, eps: np.ndarray, t: float | np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Return (x_t, x_dot) for the linear path; t may be a scalar or per-row vector."""
    x0 = np.asarray(x0, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if x0.shape != eps.shape:
        raise DimensionError(f"interpolate: x0 {x0.shape} != eps {eps.shape}")
    t_arr = np.asarray(t, dtype=float)
    if t_arr.ndim == 1 and x0.ndim == 2:
        if t_arr.shape[0] != x0.shape[0]:
            raise DimensionError(f"interpolate: {t_arr.shape[0]} times for {x0.shape[0]} rows")
        t_arr = t_arr[:, None]
    alpha, beta = 1.0 - t_arr, t_arr
    x_t = alpha * x0 + beta * eps
    x_dot = eps - x0
    return x_t, x_dot


def _model_velocity(
    model: Mlp, embed: FourierTimeEmbed, x: np.ndarray, t_shifted: np.ndarray
) -> tuple[np.ndarray, list[np.ndarray]]:
    inp = np.hstack([x, embed(t_shifted)])
    return model.forward(inp)


def fm_loss(
    model: Mlp,
    embed: FourierTimeEmbed,
    batch: TrainBatch,
    shift: ShiftSchedule = ShiftSchedule(),
) -> tuple[float, list[np.ndarray]]:
    """Mean squared velocity-matching error over the batch, with parameter gradients.

    The loss is mean_b || v(x_t, t') - (eps - x0) ||^2 where t' is the shifted
    time label fed to the model.
    """
    path = FlowPath()
    x_t, x_dot = interpolate(path, batch.x0, batch.eps, batch.t)
    t_shifted = np.asarray(shift_time(shift, batch.t))
    out, cache = _model_velocity(model, embed, x_t, t_shifted)
    if out.shape != x_dot.shape:
        raise DimensionError(f"fm_loss: model output {out.shape} != target {x_dot.shape}")
    diff = out - x_dot
    n = diff.shape[0]
    loss = float(np.sum(diff * diff) / n)
    upstream = (2.0 / n) * diff
    grads, _ = model.backward(cache, upstream)
    return loss, grads


VelocityFn = Callable[[np.ndarray, float], np.ndarray]


def euler_sample(
    model: Mlp | VelocityFn,
    embed: FourierTimeEmbed | None,
    n_samples: int,
    dim: int,
    steps: int,
    shift: ShiftSchedule,
    rng: RngState,
) -> np.ndarray:
    """Integrate the probability-flow ODE from noise (t=1) to data (t=0).

    Uses ``steps`` Euler steps on a uniform t grid with dt = -1/steps; the
    model receives the shifted time. When ``embed`` is None, ``model`` is
    treated as a plain callable (x, t_shifted) -> velocity, which is how the
    closed-form oracle velocities are injected in tests.
    """
    if steps < 1:
        raise DimensionError(f"euler_sample: steps must be >= 1, got {steps}")
    x = gaussian(rng, n_samples, dim)
    dt = 1.0 / steps
    for k in range(steps):
        t = 1.0 - k * dt
        ts = shift_time(shift, t)
        if embed is None:
            v = np.asarray(model(x, ts), dtype=float)
        else:
            t_vec = np.full(n_samples, ts)
            v, _ = _model_velocity(model, embed, x, t_vec)
        x = x - dt * v
    return x


@dataclass
class FlowTrainConfig:
    """Knobs for train_flow; the model itself is constructed by the caller."""

    steps: int = 2000
    batch_size: int = 64
    lr: float = 1e-3
    cosine_decay: bool = True
    shift: ShiftSchedule = field(default_factory=ShiftSchedule)


DataSampler = Callable[[int, RngState], np.ndarray]


def train_flow(
    model: Mlp,
    embed: FourierTimeEmbed,
    data_sampler: DataSampler,
    config: FlowTrainConfig,
    rng: RngState,
) -> np.ndarray:
    """Train the velocity model by flow matching; returns the per-step loss trace.

    Times are drawn uniformly on [0, 1] and passed through the shift schedule
    inside the loss. The learning rate follows a cosine decay to zero unless
    disabled, which shrinks the optimizer's noise floor at convergence.
    Aborts with a diagnostic on a non-finite loss.
    """
    dim = model.out_dim
    state: AdamState = adam_init(model.params(), lr=config.lr)
    trace = np.empty(config.steps)
    for step in range(config.steps):
        x0 = np.asarray(data_sampler(config.batch_size, rng), dtype=float)
        eps = gaussian(rng, config.batch_size, dim)
        t = uniform(rng, config.batch_size)
        batch = TrainBatch(x0, eps, t)
        loss, grads = fm_loss(model, embed, batch, config.shift)
        if not np.isfinite(loss):
            raise NumericalError(f"train_flow: non-finite loss {loss} at step {step}")
        if config.cosine_decay:
            state.lr = config.lr * 0.5 * (1.0 + np.cos(np.pi * step / config.steps))
        adam_step(model.params(), grads, state)
        trace[step] = loss
    return trace

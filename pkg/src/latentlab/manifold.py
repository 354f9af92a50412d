"""Toy study of decoder sensitivity to off-manifold latent directions.

2-D samples are embedded into a D-dimensional latent space by an orthonormal
frame P, a flow model is trained on the embedded distribution, and generated
latents are mapped back to 2-D by an analytic decoder

    decode(z) = P^T z + alpha * sin(beta U^T z)^T W

whose response along the off-manifold directions U is controlled by the gain
alpha (beta fixed to 1 by default). Its Jacobian

    J(z) = P^T + alpha beta W^T Diag(cos(beta U^T z)) U^T

is available in closed form for finite-difference verification.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NumericalError
from .flow import FlowTrainConfig, ShiftSchedule, euler_sample, train_flow
from .metrics import energy_distance
from .net import FourierTimeEmbed, Mlp
from .numerics import RngState, gaussian, integers, orthonormal_frame, uniform

log = logging.getLogger(__name__)

DIST_KINDS = ("two_moons", "gaussian_ring", "checkerboard")


@dataclass(frozen=True)
class ToyDistribution:
    """A named 2-D distribution preset with its shape parameters."""

    kind: str = "gaussian_ring"
    # two_moons
    moon_noise: float = 0.05
    # gaussian_ring
    modes: int = 8
    radius: float = 1.0
    mode_sigma: float = 0.1
    # checkerboard
    cells: int = 4
    half_width: float = 2.0

    def __post_init__(self):
        if self.kind not in DIST_KINDS:
            raise DimensionError(f"ToyDistribution: unknown kind {self.kind!r}, expected one of {DIST_KINDS}")


def sample_2d(dist: ToyDistribution, n: int, rng: RngState) -> np.ndarray:
    """n i.i.d. draws from the named distribution, shape (n, 2)."""
    if n < 1:
        raise DimensionError(f"sample_2d: n must be >= 1, got {n}")
    if dist.kind == "two_moons":
        t = uniform(rng, n, 0.0, np.pi)
        upper = integers(rng, n, 2) == 0
        x = np.where(upper, np.cos(t), 1.0 - np.cos(t))
        y = np.where(upper, np.sin(t), 0.5 - np.sin(t))
        pts = np.column_stack([x, y])
        pts += dist.moon_noise * gaussian(rng, n, 2)
        return pts
    if dist.kind == "gaussian_ring":
        m = integers(rng, n, dist.modes)
        ang = 2.0 * np.pi * m / dist.modes
        centers = dist.radius * np.column_stack([np.cos(ang), np.sin(ang)])
        return centers + dist.mode_sigma * gaussian(rng, n, 2)
    # checkerboard: uniform over the dark cells of a cells x cells grid
    side = 2.0 * dist.half_width / dist.cells
    dark = [(i, j) for i in range(dist.cells) for j in range(dist.cells) if (i + j) % 2 == 0]
    pick = integers(rng, n, len(dark))
    offs = uniform(rng, 2 * n).reshape(n, 2)
    cells_arr = np.array(dark, dtype=float)[pick]
    return -dist.half_width + side * (cells_arr + offs)


@dataclass(frozen=True)
class Embedding:
    """Orthonormal embedding of the 2-D plane into R^D via columns of P."""

    p: np.ndarray

    def __post_init__(self):
        if self.p.ndim != 2 or self.p.shape[1] != 2:
            raise DimensionError(f"Embedding: P must be D x 2, got {self.p.shape}")

    @property
    def dim(self) -> int:
        return self.p.shape[0]


def embed(e: Embedding, xhat: np.ndarray) -> np.ndarray:
    """Rowwise z = P xhat; preserves Euclidean norms."""
    xhat = np.asarray(xhat, dtype=float)
    if xhat.shape[-1] != 2:
        raise DimensionError(f"embed: points must be 2-D, got trailing dim {xhat.shape[-1]}")
    return xhat @ e.p.T


@dataclass(frozen=True)
class ToyDecoder:
    """Analytic decoder responding both on- and off-manifold (see module docstring)."""

    p: np.ndarray
    u: np.ndarray
    w: np.ndarray
    alpha: float
    beta: float = 1.0

    @property
    def dim(self) -> int:
        return self.p.shape[0]


def make_toy_decoder(rng: RngState, dim: int, alpha: float, beta: float = 1.0) -> ToyDecoder:
    """Fresh decoder with frame (P, U) and W entries ~ N(0, 1/(dim-2))."""
    p, u = orthonormal_frame(rng, dim, 2)
    w = gaussian(rng, dim - 2, 2) / np.sqrt(dim - 2) if dim > 2 else np.zeros((0, 2))
    return ToyDecoder(p=p, u=u, w=w, alpha=alpha, beta=beta)


def toy_decode(d: ToyDecoder, z: np.ndarray) -> np.ndarray:
    """Map latent vector(s) back to 2-D; exact inverse of embed on the manifold."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != d.dim:
        raise DimensionError(f"toy_decode: latent dim {z.shape[-1]} != {d.dim}")
    on = z @ d.p
    if d.u.shape[1] == 0:
        return on
    return on + d.alpha * np.sin(d.beta * (z @ d.u)) @ d.w


def toy_jacobian(d: ToyDecoder, z: np.ndarray) -> np.ndarray:
    """Closed-form 2 x D Jacobian of toy_decode at a single latent z."""
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.shape[0] != d.dim:
        raise DimensionError(f"toy_jacobian: latent dim {z.shape[0]} != {d.dim}")
    jac = d.p.T.copy()
    if d.u.shape[1] == 0:
        return jac
    c = np.cos(d.beta * (d.u.T @ z))
    return jac + d.alpha * d.beta * (d.w.T * c) @ d.u.T


def off_manifold_gain(d: ToyDecoder, z: np.ndarray) -> tuple[float, float]:
    """Frobenius gains (||J P||_F, ||J U||_F) of the Jacobian at z."""
    jac = toy_jacobian(d, z)
    on = float(np.linalg.norm(jac @ d.p))
    off = float(np.linalg.norm(jac @ d.u)) if d.u.shape[1] else 0.0
    return on, off


@dataclass
class ToySweepConfig:
    """Grid and training settings for the dimension/gain sweep."""

    dims: tuple[int, ...] = (2, 4, 16, 64, 128)
    alphas: tuple[float, ...] = (0.0, 0.5, 1.0, 2.0)
    beta: float = 1.0
    dist: ToyDistribution = field(default_factory=ToyDistribution)
    hidden_dims: tuple[int, ...] = (512, 512, 512, 512)
    embed_frequencies: int = 16
    train_steps: int = 300
    batch_size: int = 64
    lr: float = 1e-3
    sample_steps: int = 100
    n_generated: int = 2000
    n_reference: int = 2000
    shift_a: float = 1.0


@dataclass(frozen=True)
class SweepCell:
    """One row of the sweep table plus the decoded samples behind it."""

    dim: int
    alpha: float
    seed: int
    energy_distance: float
    train_loss_final: float
    n_samples: int
    decoded: np.ndarray
    reference: np.ndarray


def _run_dim(config: ToySweepConfig, seed: int, dim_index: int) -> list[SweepCell]:
    """All alpha cells at one latent dimension, sharing data, frame, and model."""
    dim = config.dims[dim_index]
    if dim < 2:
        raise DimensionError(f"toy sweep: latent dim must be >= 2, got {dim}")
    cell_rng = RngState(seed, 0).split(dim_index)
    frame_rng = cell_rng.split(0)
    data_rng = cell_rng.split(1)
    init_rng = cell_rng.split(2)
    train_rng = cell_rng.split(3)
    sample_rng = cell_rng.split(4)
    ref_rng = cell_rng.split(5)

    p, u = orthonormal_frame(frame_rng, dim, 2)
    w = gaussian(frame_rng, dim - 2, 2) / np.sqrt(dim - 2) if dim > 2 else np.zeros((0, 2))
    embedding = Embedding(p)

    time_embed = FourierTimeEmbed(config.embed_frequencies, 1.0, init_rng.split(0))
    model = Mlp([dim + time_embed.dim, *config.hidden_dims, dim], init_rng.split(1))
    shift = ShiftSchedule(config.shift_a)
    train_cfg = FlowTrainConfig(
        steps=config.train_steps, batch_size=config.batch_size, lr=config.lr, shift=shift
    )

    def sampler(n, rng):
        return embed(embedding, sample_2d(config.dist, n, rng))

    failed = False
    try:
        trace = train_flow(model, time_embed, sampler, train_cfg, train_rng)
        final_loss = float(trace[-1])
        z0 = euler_sample(
            model, time_embed, config.n_generated, dim, config.sample_steps, shift, sample_rng
        )
    except NumericalError as exc:
        log.warning("toy sweep cell D=%d diverged: %s", dim, exc)
        failed = True
        final_loss = float("nan")
        z0 = np.zeros((0, dim))
    reference = sample_2d(config.dist, config.n_reference, ref_rng)

    cells = []
    for alpha in config.alphas:
        decoder = ToyDecoder(p=p, u=u, w=w, alpha=float(alpha), beta=config.beta)
        if failed:
            decoded = np.zeros((0, 2))
            distance = float("nan")
        else:
            decoded = toy_decode(decoder, z0)
            distance = energy_distance(decoded, reference)
        cells.append(
            SweepCell(
                dim=dim,
                alpha=float(alpha),
                seed=seed,
                energy_distance=distance,
                train_loss_final=final_loss,
                n_samples=decoded.shape[0],
                decoded=decoded,
                reference=reference,
            )
        )
    return cells


def run_toy_sweep(config: ToySweepConfig, seed: int, threads: int = 1) -> list[SweepCell]:
    """Run the full (dimension x alpha) sweep; rows sorted by (dim, alpha).

    Randomness for each dimension derives from (seed, dim index) only, so the
    alpha columns at fixed D share their data, frame, and trained model and
    differ purely in the decoder gain; a diverged cell is recorded with NaN
    distance and the sweep continues.
    """
    indices = range(len(config.dims))
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            groups = list(pool.map(lambda i: _run_dim(config, seed, i), indices))
    else:
        groups = [_run_dim(config, seed, i) for i in indices]
    cells = [cell for group in groups for cell in group]
    cells.sort(key=lambda c: (c.dim, c.alpha))
    return cells

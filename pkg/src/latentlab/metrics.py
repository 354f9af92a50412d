"""Two-sample distance, kernel alignment, and decoder-sensitivity readouts."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DegenerateInputError, DimensionError
from .numerics import RngState, gaussian


def energy_distance(a: np.ndarray, b: np.ndarray) -> float:
    """V-statistic energy distance 2 E||a-b|| - E||a-a'|| - E||b-b'||.

    All pairs (including self pairs) enter the within-set means, so identical
    sample sets give exactly 0. Non-negative for any inputs.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise DimensionError(f"energy_distance: feature dims differ ({a.shape[1]} vs {b.shape[1]})")
    cross = cdist(a, b).mean()
    within_a = cdist(a, a).mean()
    within_b = cdist(b, b).mean()
    return float(2.0 * cross - within_a - within_b)


def _double_center(k: np.ndarray) -> np.ndarray:
    row = k.mean(axis=1, keepdims=True)
    col = k.mean(axis=0, keepdims=True)
    return k - row - col + k.mean()


def _knn_mask(k: np.ndarray, n_neighbors: int) -> np.ndarray:
    """mask[i, j] = True iff j is among the n_neighbors largest entries of row i (j != i)."""
    sim = k.copy()
    np.fill_diagonal(sim, -np.inf)
    order = np.argsort(-sim, axis=1, kind="stable")[:, :n_neighbors]
    mask = np.zeros(k.shape, dtype=bool)
    rows = np.repeat(np.arange(k.shape[0]), n_neighbors)
    mask[rows, order.ravel()] = True
    return mask


def cknna(x: np.ndarray, y: np.ndarray, k: int = 10) -> float:
    """Centered-kernel alignment restricted to mutual k-nearest-neighbor pairs.

    Features are column-centered, linear kernels are doubly centered, and the
    CKA sum runs only over pairs (i, j) where j is a top-k neighbor of i under
    both kernels. Returns a value in [0, 1] with cknna(x, x, k) = 1; invariant
    to orthogonal transforms and positive isotropic scaling of either set.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if x.shape[0] != y.shape[0]:
        raise DimensionError(f"cknna: row counts differ ({x.shape[0]} vs {y.shape[0]})")
    if x.shape[0] <= k + 1:
        raise DimensionError(f"cknna: need more than k+1 = {k + 1} rows, got {x.shape[0]}")
    xc = x - x.mean(axis=0)
    yc = y - y.mean(axis=0)
    kx = xc @ xc.T
    ky = yc @ yc.T
    mask = _knn_mask(kx, k) & _knn_mask(ky, k)
    kxc = _double_center(kx)
    kyc = _double_center(ky)
    num = float(np.sum(mask * kxc * kyc))
    den = math.sqrt(float(np.sum(mask * kxc * kxc)) * float(np.sum(mask * kyc * kyc)))
    if not den > 0:
        raise DegenerateInputError("cknna: degenerate inputs (masked kernel has no variation)")
    return num / den


def psnr_analog(x: np.ndarray, xbar: np.ndarray, peak: float) -> float:
    """10 log10(peak^2 / MSE) in dB; +inf when the reconstruction is exact."""
    x = np.asarray(x, dtype=float)
    xbar = np.asarray(xbar, dtype=float)
    if x.shape != xbar.shape:
        raise DimensionError(f"psnr_analog: shapes differ ({x.shape} vs {xbar.shape})")
    if not peak > 0:
        raise DimensionError(f"psnr_analog: peak must be positive, got {peak}")
    mse = float(np.mean((x - xbar) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def amplification(
    decode_fn: Callable[[np.ndarray], np.ndarray],
    z_set: np.ndarray,
    delta: float,
    trials: int,
    rng: RngState,
) -> float:
    """Mean finite-difference response ||f(z + delta e) - f(z)|| / delta.

    Averages over every row of z_set and ``trials`` fresh Gaussian directions
    per row; the empirical proxy for the decoder's local Jacobian gain.
    """
    if not delta > 0:
        raise DimensionError(f"amplification: delta must be positive, got {delta}")
    z_set = np.atleast_2d(np.asarray(z_set, dtype=float))
    base = np.asarray(decode_fn(z_set), dtype=float)
    total = 0.0
    for _ in range(trials):
        e = gaussian(rng, z_set.shape[0], z_set.shape[1])
        out = np.asarray(decode_fn(z_set + delta * e), dtype=float)
        total += float(np.linalg.norm(out - base, axis=1).mean())
    return total / (trials * delta)

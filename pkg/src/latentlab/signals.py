"""Synthetic 1-D signal data split into a smooth low-frequency base and high-frequency detail.

Signals of length n are expressed in an orthonormal real Fourier basis. The
base component is a one-parameter family (a circle traced by the angle theta)
living in the band k <= k_low; the detail component is isotropic Gaussian
noise over the remaining high-band coefficients. A frozen linear map over the
low band plays the role of a pretrained semantic feature extractor: it sees
the base exactly and the detail not at all.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionError
from .numerics import LayerNormParams, RngState, gaussian, uniform


@lru_cache(maxsize=None)
def fourier_basis(n: int) -> np.ndarray:
    """Orthonormal real Fourier basis of R^n, columns ordered by frequency.

    Column order: DC, then (cos, sin) pairs for k = 1 .. ceil(n/2)-1, then the
    Nyquist column when n is even. Satisfies B^T B = I.
    """
    s = 2.0 * np.pi * np.arange(n) / n
    cols = [np.full(n, 1.0 / np.sqrt(n))]
    for k in range(1, (n + 1) // 2):
        cols.append(np.sqrt(2.0 / n) * np.cos(k * s))
        cols.append(np.sqrt(2.0 / n) * np.sin(k * s))
    if n % 2 == 0:
        cols.append(np.cos((n // 2) * s) / np.sqrt(n))
    return np.column_stack(cols)


@lru_cache(maxsize=None)
def basis_frequencies(n: int) -> np.ndarray:
    """Frequency index k of each fourier_basis column."""
    ks = [0]
    for k in range(1, (n + 1) // 2):
        ks.extend([k, k])
    if n % 2 == 0:
        ks.append(n // 2)
    return np.array(ks)


def band_split(n: int, k_low: int) -> tuple[np.ndarray, np.ndarray]:
    """Column masks (low, high) splitting the basis at frequency k_low (DC counts as low)."""
    ks = basis_frequencies(n)
    low = ks <= k_low
    return low, ~low


def low_basis(n: int, k_low: int) -> np.ndarray:
    low, _ = band_split(n, k_low)
    return fourier_basis(n)[:, low]


def high_basis(n: int, k_low: int) -> np.ndarray:
    _, high = band_split(n, k_low)
    return fourier_basis(n)[:, high]


def detail_basis(n: int, k_low: int, k_detail: int) -> np.ndarray:
    """Basis columns of the populated detail band k_low < k <= k_detail."""
    ks = basis_frequencies(n)
    return fourier_basis(n)[:, (ks > k_low) & (ks <= k_detail)]


@lru_cache(maxsize=None)
def band_matrix(n: int) -> np.ndarray:
    """One-hot (n, n_bands) map from basis column to its frequency band."""
    ks = basis_frequencies(n)
    n_bands = int(ks.max()) + 1
    m = np.zeros((n, n_bands))
    m[np.arange(n), ks] = 1.0
    return m


def band_energies(x: np.ndarray) -> np.ndarray:
    """Per-frequency energy profile of signals (last axis), one entry per k."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    coeff = x @ fourier_basis(n)
    return (coeff**2) @ band_matrix(n)


@dataclass(frozen=True)
class SignalSpec:
    """Generator parameters for the synthetic signal family.

    Detail occupies the band k_low < k <= k_detail, keeping the intrinsic
    dimension (1 angle + detail coefficients) well below typical latent sizes.
    """

    n: int = 64
    k_low: int = 4
    k_detail: int = 10
    sigma_v: float = 0.3
    base_amplitudes: tuple[float, ...] = (1.0, 0.7, 0.45, 0.25)

    def __post_init__(self):
        if not 1 <= self.k_low < self.n / 2:
            raise DimensionError(f"SignalSpec: need 1 <= k_low < n/2, got k_low={self.k_low}, n={self.n}")
        if not self.k_low < self.k_detail <= self.n // 2:
            raise DimensionError(
                f"SignalSpec: need k_low < k_detail <= n/2, got k_detail={self.k_detail}"
            )
        if self.sigma_v < 0:
            raise DimensionError(f"SignalSpec: sigma_v must be >= 0, got {self.sigma_v}")
        if len(self.base_amplitudes) != self.k_low:
            raise DimensionError(
                f"SignalSpec: need {self.k_low} base amplitudes, got {len(self.base_amplitudes)}"
            )

    @property
    def n_detail(self) -> int:
        ks = basis_frequencies(self.n)
        return int(np.sum((ks > self.k_low) & (ks <= self.k_detail)))

    def base(self, theta: float | np.ndarray) -> np.ndarray:
        """Base-manifold point(s) for angle(s) theta: sum_k a_k cos(k (s + theta))."""
        theta = np.asarray(theta, dtype=float)
        scalar = theta.ndim == 0
        s = 2.0 * np.pi * np.arange(self.n) / self.n
        grid = np.add.outer(np.atleast_1d(theta), s)
        out = np.zeros(grid.shape)
        for k, a in enumerate(self.base_amplitudes, start=1):
            out += a * np.cos(k * grid)
        return out[0] if scalar else out


@dataclass(frozen=True)
class Sample:
    """One observation: signal, its semantic angle, and its detail coefficients."""

    x: np.ndarray
    theta: float
    v: np.ndarray


def gen_batch(spec: SignalSpec, n_samples: int, rng: RngState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized sampling; returns (X: n_samples x n, thetas, V: n_samples x n_detail)."""
    thetas = uniform(rng, n_samples, 0.0, 2.0 * np.pi)
    v = (
        spec.sigma_v * gaussian(rng, n_samples, spec.n_detail)
        if spec.n_detail and spec.sigma_v > 0
        else np.zeros((n_samples, spec.n_detail))
    )
    x = spec.base(thetas) + v @ detail_basis(spec.n, spec.k_low, spec.k_detail).T
    return x, thetas, v


def gen_sample(spec: SignalSpec, rng: RngState) -> Sample:
    x, thetas, v = gen_batch(spec, 1, rng)
    return Sample(x=x[0], theta=float(thetas[0]), v=v[0])


@dataclass(frozen=True)
class BaseMap:
    """Frozen semantic feature map: a random linear readout of the low band.

    ``features(X) = mix @ (basis_low^T X)`` depends only on the low-band
    content of X, so any pure high-band perturbation is invisible to it.
    ``ln`` stores the map's final LayerNorm parameters; features are returned
    pre-norm.
    """

    basis_low: np.ndarray
    mix: np.ndarray
    ln: LayerNormParams

    @property
    def n(self) -> int:
        return self.basis_low.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.mix.shape[0]

    def lowpass(self, x: np.ndarray) -> np.ndarray:
        """Projection of signals onto the low band."""
        return (np.asarray(x, dtype=float) @ self.basis_low) @ self.basis_low.T


def make_base_map(spec: SignalSpec, feature_dim: int = 32, rng: RngState | None = None) -> BaseMap:
    if rng is None:
        rng = RngState(0, 0)
    bl = low_basis(spec.n, spec.k_low)
    n_low = bl.shape[1]
    mix = gaussian(rng, feature_dim, n_low) / np.sqrt(n_low)
    gain = np.exp(0.25 * gaussian(rng, feature_dim, 1)[:, 0])
    bias = 0.25 * gaussian(rng, feature_dim, 1)[:, 0]
    return BaseMap(basis_low=bl, mix=mix, ln=LayerNormParams(gain, bias))


def base_features(phi: BaseMap, x: np.ndarray) -> np.ndarray:
    """Pre-norm semantic features u = mix (basis_low^T X); rows map to rows."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != phi.n:
        raise DimensionError(f"base_features: signal length {x.shape[-1]} != {phi.n}")
    return (x @ phi.basis_low) @ phi.mix.T

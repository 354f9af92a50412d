"""Held-out evaluation of trained models: reconstruction quality, robustness, alignment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lvrae import LvraeModel, encode_residual, make_latent, reconstruct
from .metrics import cknna, psnr_analog
from .numerics import RngState, gaussian
from .signals import BaseMap, SignalSpec, base_features, gen_batch, high_basis


@dataclass(frozen=True)
class EvalSet:
    """A fixed held-out batch with its semantic features and latents."""

    x: np.ndarray
    u: np.ndarray
    z: np.ndarray
    spec: SignalSpec

    @property
    def peak(self) -> float:
        return float(self.x.max() - self.x.min())


def make_eval_set(m: LvraeModel, phi: BaseMap, spec: SignalSpec, n: int, rng: RngState) -> EvalSet:
    x, _, _ = gen_batch(spec, n, rng)
    u = base_features(phi, x)
    z = make_latent(m, encode_residual(m, x, u), u)
    return EvalSet(x=x, u=u, z=z, spec=spec)


def mse(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.mean((np.asarray(a) - np.asarray(b)) ** 2))


def noisy_reconstruction_mse(m: LvraeModel, es: EvalSet, sigma: float, eps: np.ndarray) -> float:
    """MSE of reconstructions from z + sigma * eps; eps is shared across compared decoders."""
    return mse(es.x, reconstruct(m, es.z + sigma * eps))


def noise_eval_rows(m: LvraeModel, es: EvalSet, levels, rng: RngState, k: int = 10):
    """Rows (noise_level, mse, psnr_analog, cknna) over a grid of latent noise levels.

    cknna measures how aligned the noisy latents stay with the semantic
    features.
    """
    rows = []
    for i, sigma in enumerate(levels):
        eps = gaussian(rng.split(i), es.z.shape[0], es.z.shape[1])
        znoisy = es.z + float(sigma) * eps
        err = mse(es.x, reconstruct(m, znoisy))
        rows.append((float(sigma), err, psnr_analog(es.x, reconstruct(m, znoisy), es.peak), cknna(znoisy, es.u, k)))
    return rows


def high_band_energy(x: np.ndarray, spec: SignalSpec) -> float:
    """Mean per-sample energy in the full high band (k > k_low)."""
    hb = high_basis(spec.n, spec.k_low)
    coeff = np.atleast_2d(np.asarray(x, dtype=float)) @ hb
    return float(np.mean(np.sum(coeff**2, axis=1)))


@dataclass(frozen=True)
class AblationReport:
    """Reconstruction from the full latent versus the residual-free latent."""

    mse_z: float
    mse_u_only: float
    hb_energy_true: float
    hb_energy_z: float
    hb_energy_u_only: float


def encoder_ablation(m: LvraeModel, phi: BaseMap, es: EvalSet) -> AblationReport:
    xbar_z = reconstruct(m, es.z)
    z_u_only = make_latent(m, np.zeros_like(es.u), es.u)
    xbar_u = reconstruct(m, z_u_only)
    return AblationReport(
        mse_z=mse(es.x, xbar_z),
        mse_u_only=mse(es.x, xbar_u),
        hb_energy_true=high_band_energy(es.x, es.spec),
        hb_energy_z=high_band_energy(xbar_z, es.spec),
        hb_energy_u_only=high_band_energy(xbar_u, es.spec),
    )

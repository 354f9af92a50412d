"""Residual-latent autoencoder over a frozen semantic base map.

The frozen map supplies pre-norm semantic features u that see only the smooth
base of each signal. A shallow encoder reads [X || u] and emits a residual r
holding the detail u misses; the latent is z = LayerNorm(r + u), with the
encoder's final layer zero-initialized and the LayerNorm initialized from the
base map's own norm so that z starts exactly at the normalized semantic
feature. Stage 1 trains encoder, latent norm, and decoder on reconstruction
plus a latent-alignment penalty; stage 2 freezes everything but the decoder
and fine-tunes it on noise-perturbed latents with an adaptively weighted
adversarial term, trading a little clean fidelity for robustness to the
latent perturbations that generated samples carry.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, NumericalError
from .flow import FlowTrainConfig, ShiftSchedule, euler_sample, shift_coefficient, train_flow
from .metrics import energy_distance
from .net import FourierTimeEmbed, Mlp, adam_init, adam_step, load_mlp, save_mlp
from .numerics import (
    LayerNormParams,
    RngState,
    ensure_finite,
    gaussian,
    layer_norm,
    layer_norm_backward,
    uniform,
)
from .signals import (
    BaseMap,
    SignalSpec,
    band_energies,
    band_matrix,
    base_features,
    fourier_basis,
    gen_batch,
)

log = logging.getLogger(__name__)


@dataclass
class LossWeights:
    """Loss coefficients: reconstruction terms, alignment, GAN, and noise levels."""

    alpha_rec: float = 1.0
    beta_perc: float = 1.0
    eta: float = 5.0
    kappa: float = 0.75
    tau: float = 0.2
    sigma_bar: float = 0.08

    def __post_init__(self):
        vals = (self.alpha_rec, self.beta_perc, self.eta, self.kappa, self.tau, self.sigma_bar)
        if any(v < 0 for v in vals):
            raise DimensionError(f"LossWeights: all weights must be non-negative, got {vals}")
        if self.tau > 1:
            raise DimensionError(f"LossWeights: tau must be <= 1, got {self.tau}")


class LvraeModel:
    """Residual encoder + trainable latent LayerNorm + reconstruction decoder."""

    def __init__(
        self,
        signal_len: int,
        feature_dim: int,
        base_ln: LayerNormParams,
        enc_hidden: tuple[int, ...] = (256, 256),
        dec_hidden: tuple[int, ...] = (256, 256, 256),
        rng: RngState | None = None,
    ):
        if rng is None:
            rng = RngState(0, 0)
        if base_ln.dim != feature_dim:
            raise DimensionError(
                f"LvraeModel: base LayerNorm dim {base_ln.dim} != feature dim {feature_dim}"
            )
        self.signal_len = signal_len
        self.feature_dim = feature_dim
        self.encoder = Mlp([signal_len + feature_dim, *enc_hidden, feature_dim], rng.split(0))
        self.encoder.zero_final_layer()
        self.latent_ln = base_ln.copy()
        self.decoder = Mlp([feature_dim, *dec_hidden, signal_len], rng.split(1))

    def clone(self) -> "LvraeModel":
        other = object.__new__(LvraeModel)
        other.signal_len = self.signal_len
        other.feature_dim = self.feature_dim
        other.encoder = self.encoder.clone()
        other.latent_ln = self.latent_ln.copy()
        other.decoder = self.decoder.clone()
        return other


def make_lvrae_model(
    phi: BaseMap,
    enc_hidden: tuple[int, ...] = (256, 256),
    dec_hidden: tuple[int, ...] = (256, 256, 256),
    rng: RngState | None = None,
) -> LvraeModel:
    return LvraeModel(phi.n, phi.feature_dim, phi.ln, enc_hidden, dec_hidden, rng)


@dataclass
class Discriminator:
    """Signal-level critic used by the stage-2 adversarial term."""

    net: Mlp


def make_discriminator(
    signal_len: int, hidden: tuple[int, ...] = (256, 256), rng: RngState | None = None
) -> Discriminator:
    return Discriminator(net=Mlp([signal_len, *hidden, 1], rng or RngState(0, 0)))


def encode_residual(m: LvraeModel, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Residual r = encoder([X || u]); exactly zero at a freshly built model."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape[-1] != m.signal_len or u.shape[-1] != m.feature_dim:
        raise DimensionError(
            f"encode_residual: got X dim {x.shape[-1]}, u dim {u.shape[-1]}, "
            f"expected {m.signal_len} and {m.feature_dim}"
        )
    single = x.ndim == 1
    out = m.encoder(np.hstack([np.atleast_2d(x), np.atleast_2d(u)]))
    return out[0] if single else out


def make_latent(m: LvraeModel, r: np.ndarray, u: np.ndarray) -> np.ndarray:
    """z = LayerNorm(r + u) with the model's trainable latent norm."""
    r = np.asarray(r, dtype=float)
    u = np.asarray(u, dtype=float)
    if r.shape != u.shape:
        raise DimensionError(f"make_latent: r {r.shape} != u {u.shape}")
    return layer_norm(r + u, m.latent_ln)


def encode(m: LvraeModel, phi: BaseMap, x: np.ndarray) -> np.ndarray:
    """Full encoding path X -> z."""
    u = base_features(phi, x)
    return make_latent(m, encode_residual(m, x, u), u)


def reconstruct(m: LvraeModel, z: np.ndarray) -> np.ndarray:
    """Decode latent(s) back to signal space."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != m.feature_dim:
        raise DimensionError(f"reconstruct: latent dim {z.shape[-1]} != {m.feature_dim}")
    single = z.ndim == 1
    out = m.decoder(np.atleast_2d(z))
    return out[0] if single else out


def spectral_perc(x: np.ndarray, xbar: np.ndarray) -> float:
    """Mean absolute difference of per-frequency band-energy profiles."""
    x = np.asarray(x, dtype=float)
    xbar = np.asarray(xbar, dtype=float)
    if x.shape != xbar.shape:
        raise DimensionError(f"spectral_perc: shapes differ ({x.shape} vs {xbar.shape})")
    return float(np.mean(np.abs(band_energies(x) - band_energies(xbar))))


def rec_loss(x: np.ndarray, xbar: np.ndarray, w: LossWeights) -> float:
    """alpha * mean-absolute error + beta * band-energy profile difference."""
    x = np.asarray(x, dtype=float)
    xbar = np.asarray(xbar, dtype=float)
    if x.shape != xbar.shape:
        raise DimensionError(f"rec_loss: shapes differ ({x.shape} vs {xbar.shape})")
    return float(w.alpha_rec * np.mean(np.abs(x - xbar)) + w.beta_perc * spectral_perc(x, xbar))


def _rec_loss_grad(x: np.ndarray, xbar: np.ndarray, w: LossWeights) -> tuple[float, np.ndarray]:
    """Batched rec_loss with its gradient w.r.t. xbar (signs taken as subgradients)."""
    n = x.shape[-1]
    rows = x.reshape(-1, n).shape[0]
    diff = xbar - x
    l1 = np.mean(np.abs(diff))
    grad = w.alpha_rec * np.sign(diff) / diff.size

    basis = fourier_basis(n)
    bands = band_matrix(n)
    cx = x @ basis
    cb = xbar @ basis
    ex = (cx**2) @ bands
    eb = (cb**2) @ bands
    perc = np.mean(np.abs(eb - ex))
    # d/dxbar of sum_k |E_k(xbar) - E_k(x)| = 2 sign_k (xbar . B_c) B_c over columns c in band k
    sgn = np.sign(eb - ex)
    grad += w.beta_perc * (2.0 / (rows * bands.shape[1])) * ((cb * (sgn @ bands.T)) @ basis.T)
    loss = float(w.alpha_rec * l1 + w.beta_perc * perc)
    return loss, grad


def align_loss(z: np.ndarray, u: np.ndarray) -> float:
    """Squared Euclidean distance between the latent and the semantic feature."""
    z = np.asarray(z, dtype=float)
    u = np.asarray(u, dtype=float)
    if z.shape != u.shape:
        raise DimensionError(f"align_loss: shapes differ ({z.shape} vs {u.shape})")
    return float(np.sum((z - u) ** 2))


@dataclass
class Stage1Config:
    steps: int = 20000
    batch_size: int = 128
    lr: float = 1e-3


@dataclass
class Stage1Trace:
    rec: np.ndarray
    align: np.ndarray


def stage1_train(
    m: LvraeModel,
    phi: BaseMap,
    spec: SignalSpec,
    w: LossWeights,
    config: Stage1Config,
    rng: RngState,
) -> Stage1Trace:
    """Jointly train encoder, latent norm, and decoder on rec + eta * align.

    Records both loss components per step; aborts on a non-finite loss.
    """
    params = m.encoder.params() + m.decoder.params() + [m.latent_ln.gain, m.latent_ln.bias]
    state = adam_init(params, lr=config.lr)
    rec_trace = np.empty(config.steps)
    align_trace = np.empty(config.steps)
    for step in range(config.steps):
        x, _, _ = gen_batch(spec, config.batch_size, rng)
        u = base_features(phi, x)
        r, cache_e = m.encoder.forward(np.hstack([x, u]))
        pre = r + u
        z = layer_norm(pre, m.latent_ln)
        xbar, cache_d = m.decoder.forward(z)

        loss_rec, grad_xbar = _rec_loss_grad(x, xbar, w)
        diff_z = z - u
        loss_align = float(np.sum(diff_z * diff_z) / config.batch_size)
        if not (np.isfinite(loss_rec) and np.isfinite(loss_align)):
            raise NumericalError(f"stage1_train: non-finite loss at step {step}")

        dec_grads, grad_z = m.decoder.backward(cache_d, grad_xbar)
        grad_z = grad_z + w.eta * (2.0 / config.batch_size) * diff_z
        grad_pre, grad_gain, grad_bias = layer_norm_backward(pre, m.latent_ln, grad_z)
        enc_grads, _ = m.encoder.backward(cache_e, grad_pre)

        adam_step(params, enc_grads + dec_grads + [grad_gain, grad_bias], state)
        rec_trace[step] = loss_rec
        align_trace[step] = loss_align
    return Stage1Trace(rec=rec_trace, align=align_trace)


def perturb_latent(z: np.ndarray, sigma_max: float, rng: RngState) -> np.ndarray:
    """z + sigma * eps with sigma ~ U(0, sigma_max) (drawn per row) and eps ~ N(0, I)."""
    if sigma_max < 0:
        raise DimensionError(f"perturb_latent: sigma_max must be >= 0, got {sigma_max}")
    z = np.asarray(z, dtype=float)
    if sigma_max == 0:
        return z.copy()
    single = z.ndim == 1
    zb = np.atleast_2d(z)
    sigma = uniform(rng, zb.shape[0], 0.0, sigma_max)
    out = zb + sigma[:, None] * gaussian(rng, zb.shape[0], zb.shape[1])
    return out[0] if single else out


def adaptive_gan_weight(grad_rec_final: np.ndarray, grad_gan_final: np.ndarray) -> float:
    """||grad_rec|| / (||grad_gan|| + 1e-8) over the decoder's final-layer gradients."""
    grad_rec_final = np.asarray(grad_rec_final, dtype=float)
    grad_gan_final = np.asarray(grad_gan_final, dtype=float)
    if grad_rec_final.shape != grad_gan_final.shape:
        raise DimensionError(
            f"adaptive_gan_weight: shapes differ ({grad_rec_final.shape} vs {grad_gan_final.shape})"
        )
    return float(np.linalg.norm(grad_rec_final) / (np.linalg.norm(grad_gan_final) + 1e-8))


def _final_layer_grad(grads: list[np.ndarray]) -> np.ndarray:
    """Flattened gradient of the last linear layer (weight and bias)."""
    return np.concatenate([grads[-2].ravel(), grads[-1].ravel()])


def _softplus(t: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, t)


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass
class Stage2Config:
    steps: int = 6000
    batch_size: int = 128
    lr: float = 2e-4
    warmup_frac: float = 0.1
    fixed_sigma: float | None = None
    disc_hidden: tuple[int, ...] = (256, 256)


@dataclass
class Stage2Trace:
    rec: np.ndarray
    gan: np.ndarray
    disc: np.ndarray
    gan_weight: np.ndarray


def stage2_finetune(
    m: LvraeModel,
    phi: BaseMap,
    disc: Discriminator,
    spec: SignalSpec,
    w: LossWeights,
    config: Stage2Config,
    rng: RngState,
) -> Stage2Trace:
    """Fine-tune the decoder on noise-perturbed latents; encoder and latent norm stay frozen.

    The first warmup_frac of the steps use the reconstruction loss alone;
    afterwards the non-saturating GAN loss joins with the adaptive weight, and
    the discriminator updates alternately (1:1, same learning rate). A
    near-zero discriminator loss sustained for 100 steps is logged as a
    collapse warning.
    """
    dec_params = m.decoder.params()
    dec_state = adam_init(dec_params, lr=config.lr)
    disc_params = disc.net.params()
    disc_state = adam_init(disc_params, lr=config.lr)
    warmup_steps = int(round(config.warmup_frac * config.steps))
    trace = Stage2Trace(
        rec=np.empty(config.steps),
        gan=np.full(config.steps, np.nan),
        disc=np.full(config.steps, np.nan),
        gan_weight=np.full(config.steps, np.nan),
    )
    collapse_run = 0
    collapse_logged = False
    batch = config.batch_size
    for step in range(config.steps):
        x, _, _ = gen_batch(spec, batch, rng)
        u = base_features(phi, x)
        z = make_latent(m, encode_residual(m, x, u), u)
        if config.fixed_sigma is None:
            ztilde = perturb_latent(z, w.tau, rng)
        else:
            ztilde = z + config.fixed_sigma * gaussian(rng, batch, z.shape[1])

        xbar, cache_d = m.decoder.forward(ztilde)
        loss_rec, grad_xbar = _rec_loss_grad(x, xbar, w)
        if not np.isfinite(loss_rec):
            raise NumericalError(f"stage2_finetune: non-finite reconstruction loss at step {step}")
        rec_grads, _ = m.decoder.backward(cache_d, grad_xbar)
        total_grads = rec_grads

        if step >= warmup_steps and w.kappa > 0:
            fake_logit, cache_fake = disc.net.forward(xbar)
            loss_gan = float(np.mean(_softplus(-fake_logit)))
            up_fake = -_sigmoid(-fake_logit) / batch
            _, grad_xbar_gan = disc.net.backward(cache_fake, up_fake)
            gan_grads, _ = m.decoder.backward(cache_d, grad_xbar_gan)
            w_gan = adaptive_gan_weight(_final_layer_grad(rec_grads), _final_layer_grad(gan_grads))
            scale = w.kappa * w_gan
            total_grads = [g + scale * gg for g, gg in zip(rec_grads, gan_grads)]
            trace.gan[step] = loss_gan
            trace.gan_weight[step] = w_gan

        adam_step(dec_params, total_grads, dec_state)

        if step >= warmup_steps and w.kappa > 0:
            real_logit, cache_real = disc.net.forward(x)
            fake_logit, cache_fake = disc.net.forward(xbar)
            loss_disc = float(np.mean(_softplus(-real_logit)) + np.mean(_softplus(fake_logit)))
            if not np.isfinite(loss_disc):
                raise NumericalError(f"stage2_finetune: non-finite discriminator loss at step {step}")
            g_real, _ = disc.net.backward(cache_real, -_sigmoid(-real_logit) / batch)
            g_fake, _ = disc.net.backward(cache_fake, _sigmoid(fake_logit) / batch)
            adam_step(disc_params, [a + b for a, b in zip(g_real, g_fake)], disc_state)
            trace.disc[step] = loss_disc
            if loss_disc < 1e-6:
                collapse_run += 1
                if collapse_run >= 100 and not collapse_logged:
                    log.warning("stage2_finetune: discriminator collapse at step %d", step)
                    collapse_logged = True
            else:
                collapse_run = 0

        trace.rec[step] = loss_rec
    return trace


def decode_generated(m: LvraeModel, z0: np.ndarray, sigma_bar: float, rng: RngState) -> np.ndarray:
    """Decode generated latents after fixed-magnitude noise injection."""
    if sigma_bar < 0:
        raise DimensionError(f"decode_generated: sigma_bar must be >= 0, got {sigma_bar}")
    z0 = np.asarray(z0, dtype=float)
    if sigma_bar == 0:
        return reconstruct(m, z0)
    single = z0.ndim == 1
    zb = np.atleast_2d(z0)
    noisy = zb + sigma_bar * gaussian(rng, zb.shape[0], zb.shape[1])
    out = reconstruct(m, noisy)
    return out[0] if single else out


@dataclass
class GenPipelineConfig:
    """Flow training and evaluation settings for latent-space generation."""

    flow_steps: int = 1500
    flow_batch: int = 128
    flow_lr: float = 1e-3
    hidden_dims: tuple[int, ...] = (256, 256, 256)
    embed_frequencies: int = 16
    sample_steps: int = 100
    n_generated: int = 1000
    n_reference: int = 1000
    sigma_bars: tuple[float, ...] = (0.0, 0.02, 0.04, 0.06, 0.08, 0.1, 0.12)


@dataclass
class GenPipelineResult:
    sigma_bars: np.ndarray
    distances: np.ndarray
    flow_trace: np.ndarray
    latents: np.ndarray


def lvrae_generation_pipeline(
    m: LvraeModel,
    phi: BaseMap,
    spec: SignalSpec,
    config: GenPipelineConfig,
    rng: RngState,
) -> GenPipelineResult:
    """Train a latent flow model, sample it, and score decoded signals per noise level.

    The shift coefficient follows the latent size (clamped below at 1); the
    readout is the energy distance between decoded generations and fresh real
    signals for each inference noise level.
    """
    dim = m.feature_dim
    shift = ShiftSchedule(max(1.0, shift_coefficient(dim, 1, 1)))
    embed = FourierTimeEmbed(config.embed_frequencies, 1.0, rng.split(0))
    model = Mlp([dim + embed.dim, *config.hidden_dims, dim], rng.split(1))

    def latent_sampler(n: int, sampler_rng: RngState) -> np.ndarray:
        x, _, _ = gen_batch(spec, n, sampler_rng)
        return encode(m, phi, x)

    train_cfg = FlowTrainConfig(
        steps=config.flow_steps, batch_size=config.flow_batch, lr=config.flow_lr, shift=shift
    )
    flow_trace = train_flow(model, embed, latent_sampler, train_cfg, rng.split(2))
    z0 = euler_sample(model, embed, config.n_generated, dim, config.sample_steps, shift, rng.split(3))
    ensure_finite(z0, "lvrae_generation_pipeline: generated latents")
    x_ref, _, _ = gen_batch(spec, config.n_reference, rng.split(4))

    distances = np.empty(len(config.sigma_bars))
    for i, sigma_bar in enumerate(config.sigma_bars):
        decoded = decode_generated(m, z0, float(sigma_bar), rng.split(5 + i))
        distances[i] = energy_distance(decoded, x_ref)
    return GenPipelineResult(
        sigma_bars=np.asarray(config.sigma_bars, dtype=float),
        distances=distances,
        flow_trace=flow_trace,
        latents=z0,
    )


def _ln_to_dict(p: LayerNormParams) -> dict:
    return {"gain": p.gain.tolist(), "bias": p.bias.tolist(), "eps": p.eps}


def _ln_from_dict(d: dict) -> LayerNormParams:
    return LayerNormParams(np.array(d["gain"]), np.array(d["bias"]), float(d["eps"]))


def save_lvrae_checkpoint(out_dir, m: LvraeModel, phi: BaseMap, disc: Discriminator | None = None):
    """Write the model bundle: encoder/decoder (.mlp binary), norms and base map (JSON)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_mlp(m.encoder, out / "encoder.mlp")
    save_mlp(m.decoder, out / "decoder.mlp")
    (out / "latent_ln.json").write_text(json.dumps(_ln_to_dict(m.latent_ln)) + "\n")
    base = {
        "basis_low": phi.basis_low.tolist(),
        "mix": phi.mix.tolist(),
        "ln": _ln_to_dict(phi.ln),
    }
    (out / "basemap.json").write_text(json.dumps(base) + "\n")
    if disc is not None:
        save_mlp(disc.net, out / "discriminator.mlp")


def load_lvrae_checkpoint(in_dir) -> tuple[LvraeModel, BaseMap, Discriminator | None]:
    src = Path(in_dir)
    base = json.loads((src / "basemap.json").read_text())
    phi = BaseMap(
        basis_low=np.array(base["basis_low"]),
        mix=np.array(base["mix"]),
        ln=_ln_from_dict(base["ln"]),
    )
    m = object.__new__(LvraeModel)
    m.encoder = load_mlp(src / "encoder.mlp")
    m.decoder = load_mlp(src / "decoder.mlp")
    m.latent_ln = _ln_from_dict(json.loads((src / "latent_ln.json").read_text()))
    m.signal_len = m.decoder.out_dim
    m.feature_dim = m.decoder.in_dim
    disc_path = src / "discriminator.mlp"
    disc = Discriminator(net=load_mlp(disc_path)) if disc_path.exists() else None
    return m, phi, disc

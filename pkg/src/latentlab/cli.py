"""Command-line entry points for the experiment suite.

Every run writes a config.json snapshot plus CSV results (and optional SVG
plots) into the output directory; repeating an invocation with the same
config reproduces the outputs byte for byte.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import evaluate, gradcheck, lvrae, manifold, metrics
from .config import ExperimentConfig, load_config, save_config
from .errors import ConfigError, DimensionError, NumericalError
from .numerics import RngState
from .output import read_point_csv, write_csv
from .signals import SignalSpec, make_base_map
from .svgplot import emit_scatter_svg

# Stream ids for the top-level experiment stages, so runs are reproducible
# piecewise: (seed, stage stream) -> RngState.
STREAM_BASEMAP = 1
STREAM_MODEL_INIT = 2
STREAM_STAGE1 = 3
STREAM_STAGE2 = 4
STREAM_STAGE2_FIXED = 5
STREAM_DISC_INIT = 6
STREAM_EVAL = 7
STREAM_PIPELINE = 8


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latentlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sweep cells")

    for name, doc in [
        ("toy-sweep", "latent-dimension x off-manifold-gain sweep"),
        ("lvrae-train", "stage-1 training of the residual-latent autoencoder"),
        ("lvrae-noiseft", "stage-2 noise fine-tuning plus the robustness ablation table"),
        ("lvrae-gen", "latent flow training and the inference-noise sweep"),
        ("grad-check", "run every finite-difference oracle"),
    ]:
        common(sub.add_parser(name, help=doc))

    pm = sub.add_parser("metrics", help="standalone metric evaluation on CSV dumps")
    common(pm)
    pm.add_argument("--metric", choices=("energy-distance", "cknna", "psnr"), required=True)
    pm.add_argument("--a", type=Path, required=True, help="first CSV of row vectors")
    pm.add_argument("--b", type=Path, required=True, help="second CSV of row vectors")
    pm.add_argument("--k", type=int, default=10, help="neighbors for cknna")
    pm.add_argument("--peak", type=float, default=1.0, help="peak value for psnr")
    return parser


def _prepare(args) -> tuple[ExperimentConfig, Path]:
    config = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        config.seed = args.seed
    out = args.out if args.out is not None else Path("runs") / args.command
    out.mkdir(parents=True, exist_ok=True)
    save_config(config, out / "config.json")
    return config, out


def _signal_spec(config: ExperimentConfig) -> SignalSpec:
    s = config.lvrae.signal
    return SignalSpec(
        n=s.n,
        k_low=s.k_low,
        k_detail=s.k_detail,
        sigma_v=s.sigma_v,
        base_amplitudes=s.base_amplitudes,
    )


def _loss_weights(config: ExperimentConfig) -> lvrae.LossWeights:
    w = config.lvrae.weights
    return lvrae.LossWeights(
        alpha_rec=w.alpha_rec,
        beta_perc=w.beta_perc,
        eta=w.eta,
        kappa=w.kappa,
        tau=w.tau,
        sigma_bar=w.sigma_bar,
    )


def cmd_toy_sweep(config: ExperimentConfig, out: Path, threads: int) -> int:
    block = config.toy_sweep
    sweep_cfg = manifold.ToySweepConfig(
        dims=block.dims,
        alphas=block.alphas,
        beta=block.beta,
        dist=manifold.ToyDistribution(
            kind=block.dist.kind,
            moon_noise=block.dist.moon_noise,
            modes=block.dist.modes,
            radius=block.dist.radius,
            mode_sigma=block.dist.mode_sigma,
            cells=block.dist.cells,
            half_width=block.dist.half_width,
        ),
        hidden_dims=block.hidden_dims,
        embed_frequencies=block.embed_frequencies,
        train_steps=block.train_steps,
        batch_size=block.batch_size,
        lr=block.lr,
        sample_steps=block.sample_steps,
        n_generated=block.n_generated,
        n_reference=block.n_reference,
        shift_a=block.shift_a,
    )
    cells = manifold.run_toy_sweep(sweep_cfg, config.seed, threads=threads)
    write_csv(
        out / "sweep.csv",
        "toy_sweep",
        [(c.dim, c.alpha, c.seed, c.energy_distance, c.train_loss_final, c.n_samples) for c in cells],
    )
    for c in cells:
        tag = f"D{c.dim}_alpha{c.alpha:g}"
        if block.dump_cells:
            write_csv(out / f"decoded_{tag}.csv", "samples_2d", [tuple(p) for p in c.decoded])
        if block.emit_svg:
            emit_scatter_svg(c.reference, c.decoded, out / f"cell_{tag}.svg")
    return 0


def _train_stage1(config: ExperimentConfig):
    spec = _signal_spec(config)
    phi = make_base_map(spec, config.lvrae.feature_dim, RngState(config.seed, STREAM_BASEMAP))
    model = lvrae.make_lvrae_model(
        phi, config.lvrae.enc_hidden, config.lvrae.dec_hidden, RngState(config.seed, STREAM_MODEL_INIT)
    )
    weights = _loss_weights(config)
    s1 = lvrae.Stage1Config(
        steps=config.lvrae.steps, batch_size=config.lvrae.batch_size, lr=config.lvrae.lr
    )
    trace = lvrae.stage1_train(model, phi, spec, weights, s1, RngState(config.seed, STREAM_STAGE1))
    return spec, phi, model, weights, trace


def cmd_lvrae_train(config: ExperimentConfig, out: Path) -> int:
    spec, phi, model, weights, trace = _train_stage1(config)
    write_csv(
        out / "stage1_trace.csv",
        "stage1_trace",
        [(i, trace.rec[i], trace.align[i]) for i in range(trace.rec.shape[0])],
    )
    lvrae.save_lvrae_checkpoint(out / "checkpoint", model, phi)
    es = evaluate.make_eval_set(model, phi, spec, config.lvrae.n_eval, RngState(config.seed, STREAM_EVAL))
    rows = evaluate.noise_eval_rows(
        model, es, config.noise_ft.eval_noise_levels, RngState(config.seed, STREAM_EVAL).split(1)
    )
    write_csv(out / "noise_eval_stage1.csv", "noise_eval", rows)
    return 0


def cmd_lvrae_noiseft(config: ExperimentConfig, out: Path) -> int:
    spec, phi, model, weights, _ = _train_stage1(config)
    nft = config.noise_ft
    s2 = lvrae.Stage2Config(
        steps=nft.steps,
        batch_size=nft.batch_size,
        lr=nft.lr,
        warmup_frac=nft.warmup_frac,
        disc_hidden=nft.disc_hidden,
    )
    ft_random = model.clone()
    disc_r = lvrae.make_discriminator(spec.n, nft.disc_hidden, RngState(config.seed, STREAM_DISC_INIT))
    lvrae.stage2_finetune(ft_random, phi, disc_r, spec, weights, s2, RngState(config.seed, STREAM_STAGE2))

    s2_fixed = lvrae.Stage2Config(
        steps=nft.steps,
        batch_size=nft.batch_size,
        lr=nft.lr,
        warmup_frac=nft.warmup_frac,
        fixed_sigma=nft.fixed_sigma_ablation,
        disc_hidden=nft.disc_hidden,
    )
    ft_fixed = model.clone()
    disc_f = lvrae.make_discriminator(spec.n, nft.disc_hidden, RngState(config.seed, STREAM_DISC_INIT).split(1))
    lvrae.stage2_finetune(ft_fixed, phi, disc_f, spec, weights, s2_fixed, RngState(config.seed, STREAM_STAGE2_FIXED))

    eval_rng = RngState(config.seed, STREAM_EVAL)
    es = evaluate.make_eval_set(model, phi, spec, nft.n_eval, eval_rng)
    for name, m in (("stage1", model), ("ft_random", ft_random), ("ft_fixed", ft_fixed)):
        rows = evaluate.noise_eval_rows(m, es, nft.eval_noise_levels, eval_rng.split(1))
        write_csv(out / f"noise_eval_{name}.csv", "noise_eval", rows)
    lvrae.save_lvrae_checkpoint(out / "checkpoint_ft", ft_random, phi, disc_r)
    return 0


def cmd_lvrae_gen(config: ExperimentConfig, out: Path) -> int:
    spec, phi, model, weights, _ = _train_stage1(config)
    nft = config.noise_ft
    s2 = lvrae.Stage2Config(
        steps=nft.steps,
        batch_size=nft.batch_size,
        lr=nft.lr,
        warmup_frac=nft.warmup_frac,
        disc_hidden=nft.disc_hidden,
    )
    disc = lvrae.make_discriminator(spec.n, nft.disc_hidden, RngState(config.seed, STREAM_DISC_INIT))
    lvrae.stage2_finetune(model, phi, disc, spec, weights, s2, RngState(config.seed, STREAM_STAGE2))

    gen = config.generation
    pipe_cfg = lvrae.GenPipelineConfig(
        flow_steps=gen.flow_steps,
        flow_batch=gen.flow_batch,
        flow_lr=gen.flow_lr,
        hidden_dims=gen.hidden_dims,
        embed_frequencies=gen.embed_frequencies,
        sample_steps=gen.sample_steps,
        n_generated=gen.n_generated,
        n_reference=gen.n_reference,
        sigma_bars=gen.sigma_bars,
    )
    result = lvrae.lvrae_generation_pipeline(
        model, phi, spec, pipe_cfg, RngState(config.seed, STREAM_PIPELINE)
    )
    write_csv(
        out / "sigma_sweep.csv",
        "sigma_sweep",
        list(zip(result.sigma_bars.tolist(), result.distances.tolist())),
    )
    write_csv(
        out / "flow_trace.csv",
        "loss_trace",
        [(i, float(v)) for i, v in enumerate(result.flow_trace)],
    )
    return 0


def cmd_grad_check(config: ExperimentConfig, out: Path) -> int:
    results = gradcheck.run_all(config.seed)
    write_csv(
        out / "oracle_checks.csv",
        "oracle_checks",
        [(r.name, r.max_rel_err, r.tolerance, r.passed) for r in results],
    )
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name}: max rel err {r.max_rel_err:.3g} (tol {r.tolerance:g})")
    return 0 if all(r.passed for r in results) else 2


def cmd_metrics(args, config: ExperimentConfig, out: Path) -> int:
    a = np.array(read_point_csv(args.a))
    b = np.array(read_point_csv(args.b))
    if args.metric == "energy-distance":
        value = metrics.energy_distance(a, b)
    elif args.metric == "cknna":
        value = metrics.cknna(a, b, args.k)
    else:
        value = metrics.psnr_analog(a, b, args.peak)
    print(f"{args.metric}: {value:.6g}")
    write_csv(out / "metric_value.csv", "metric_value", [(args.metric, value)])
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        config, out = _prepare(args)
        if args.command == "toy-sweep":
            return cmd_toy_sweep(config, out, args.threads)
        if args.command == "lvrae-train":
            return cmd_lvrae_train(config, out)
        if args.command == "lvrae-noiseft":
            return cmd_lvrae_noiseft(config, out)
        if args.command == "lvrae-gen":
            return cmd_lvrae_gen(config, out)
        if args.command == "grad-check":
            return cmd_grad_check(config, out)
        if args.command == "metrics":
            return cmd_metrics(args, config, out)
        parser.error(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, DimensionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

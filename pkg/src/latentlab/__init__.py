"""latentlab: a desk-scale laboratory for residual-latent autoencoders and latent flow models.

Seven building blocks: deterministic numerics, hand-backpropagated MLPs,
flow-matching training and ODE sampling with time shifting, the analytic
off-manifold toy decoder and its dimension/gain sweep, the two-stage
residual-latent autoencoder with noise augmentation, quantitative metrics,
and a reproducible CLI runner.
"""

from .errors import ConfigError, DegenerateInputError, DimensionError, NumericalError
from .flow import (
    FlowPath,
    FlowTrainConfig,
    ShiftSchedule,
    TrainBatch,
    euler_sample,
    fm_loss,
    interpolate,
    shift_coefficient,
    shift_time,
    train_flow,
)
from .lvrae import (
    Discriminator,
    GenPipelineConfig,
    LossWeights,
    LvraeModel,
    Stage1Config,
    Stage2Config,
    adaptive_gan_weight,
    align_loss,
    decode_generated,
    encode,
    encode_residual,
    lvrae_generation_pipeline,
    make_discriminator,
    make_latent,
    make_lvrae_model,
    perturb_latent,
    rec_loss,
    reconstruct,
    spectral_perc,
    stage1_train,
    stage2_finetune,
)
from .manifold import (
    Embedding,
    ToyDecoder,
    ToyDistribution,
    ToySweepConfig,
    embed,
    make_toy_decoder,
    off_manifold_gain,
    run_toy_sweep,
    sample_2d,
    toy_decode,
    toy_jacobian,
)
from .metrics import amplification, cknna, energy_distance, psnr_analog
from .net import (
    AdamState,
    FourierTimeEmbed,
    Mlp,
    adam_init,
    adam_step,
    load_mlp,
    save_mlp,
    time_embed,
)
from .numerics import (
    LayerNormParams,
    RngState,
    gaussian,
    layer_norm,
    layer_norm_backward,
    orthonormal_frame,
)
from .signals import BaseMap, SignalSpec, base_features, gen_batch, gen_sample, make_base_map

__version__ = "0.1.0"

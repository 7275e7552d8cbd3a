"""Multi-view latent-variable models, their objectives and training loops."""

from .contrastive import (
    ContrastiveModel,
    build_contrastive,
    contrastive_loss,
    encode_contrastive,
    pair_loss,
    sample_negatives,
)
from .gan import GanConfig, build_gan, disc_prob, discriminator_loss, generator_loss, loss_from_probs
from .priors import PriorError, PriorSpec, central_columns, prior_for, warm_start_from_prior
from .training import (
    HISTORY_COLUMNS,
    EpochRecord,
    History,
    TrainConfig,
    TrainingError,
    TrainResult,
    evaluate,
    kl_to_standard,
    train,
)
from .vcca import (
    ElboResult,
    MultiViewModel,
    build_model,
    draw_eps,
    elbo,
    elbo_vcca,
    elbo_vccap,
    encode_features,
    posterior,
)

__all__ = [
    "HISTORY_COLUMNS",
    "ContrastiveModel",
    "ElboResult",
    "EpochRecord",
    "GanConfig",
    "History",
    "MultiViewModel",
    "PriorError",
    "PriorSpec",
    "TrainConfig",
    "TrainResult",
    "TrainingError",
    "build_contrastive",
    "build_gan",
    "build_model",
    "central_columns",
    "contrastive_loss",
    "disc_prob",
    "discriminator_loss",
    "draw_eps",
    "elbo",
    "elbo_vcca",
    "elbo_vccap",
    "encode_contrastive",
    "encode_features",
    "evaluate",
    "generator_loss",
    "kl_to_standard",
    "loss_from_probs",
    "pair_loss",
    "posterior",
    "prior_for",
    "sample_negatives",
    "train",
    "warm_start_from_prior",
]

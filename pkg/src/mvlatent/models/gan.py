"""Adversarial extension: per-view discriminators on reconstructions."""

from dataclasses import dataclass

import numpy as np

from ..nn import MlpSpec, ParamSet, forward_mlp, init_mlp
from ..nn import tensor as T
from ..nn.tensor import Tensor
from ..rng import stream
from .vcca import elbo

LOG_FLOOR = 1e-12


@dataclass
class GanConfig:
    """Discriminators D1 (view x) and D2 (view y) plus the alternation schedule.

    Each discriminator is a single-logit MLP followed by a sigmoid. The
    discriminators step once every ``disc_update_period`` generator steps on
    ``disc_minibatch`` samples.
    """

    disc_x: MlpSpec
    disc_y: MlpSpec
    params: ParamSet
    lambda1: float = 5.0
    lambda2: float = 5.0
    disc_minibatch: int = 1800
    disc_update_period: int = 9

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("GAN trade-off weights must be nonnegative")
        if self.disc_minibatch < 1 or self.disc_update_period < 1:
            raise ValueError("discriminator minibatch and update period must be positive")
        for s in (self.disc_x, self.disc_y):
            if s.out_width != 1 or s.output_heads != "single":
                raise ValueError("a discriminator must end in a single logit")

    def with_params(self, params):
        return GanConfig(self.disc_x, self.disc_y, params, self.lambda1, self.lambda2,
                         self.disc_minibatch, self.disc_update_period)


def build_gan(x_dim, y_dim, hidden=(2048, 1500, 1500), activation="relu", dropout_rate=0.2,
              lambda1=5.0, lambda2=5.0, disc_minibatch=1800, disc_update_period=9, seed=0):
    disc_x = MlpSpec((x_dim, *hidden, 1), activation, dropout_rate)
    disc_y = MlpSpec((y_dim, *hidden, 1), activation, dropout_rate)
    params = init_mlp(disc_x, stream(seed, "init/disc_x"), "disc_x").merged(
        init_mlp(disc_y, stream(seed, "init/disc_y"), "disc_y")
    )
    return GanConfig(disc_x, disc_y, params, lambda1, lambda2, disc_minibatch, disc_update_period)


def disc_prob(spec, params, x, prefix, masks=None):
    """D(x) in (0, 1) as an ``(N,)`` tensor."""
    logit = forward_mlp(spec, params, x, masks, prefix=prefix)
    return T.sigmoid(T.reshape(logit, (-1,)))


def loss_from_probs(p_real, p_fake):
    """Batch mean of -[log D(real) + log(1 - D(fake))], logs floored at 1e-12."""
    p_real, p_fake = T.as_tensor(p_real), T.as_tensor(p_fake)
    return -(T.log_clamped(p_real, LOG_FLOOR) + T.log_clamped(1.0 - p_fake, LOG_FLOOR)).mean()


def discriminator_loss(spec, params, x_real, x_recon, prefix, masks=None):
    """Discriminator loss; reconstructions enter as constants.

    ``masks`` is ``None`` or a ``(real_masks, recon_masks)`` pair.
    """
    x_recon = x_recon.data if isinstance(x_recon, Tensor) else x_recon
    m_real, m_fake = (None, None) if masks is None else masks
    p_real = disc_prob(spec, params, x_real, prefix, m_real)
    p_fake = disc_prob(spec, params, np.asarray(x_recon, dtype=np.float64), prefix, m_fake)
    return loss_from_probs(p_real, p_fake)


def generator_loss(model, gan, x, y, eps, betas=(1.0, 1.0, 1.0), prior=None, masks=None, params=None,
                   disc_params=None):
    """-(ELBO + lambda1 log D1(x') + lambda2 log D2(y')) with frozen discriminators.

    ``x'`` and ``y'`` are the decoder means of the first noise draw. Terms
    with a zero weight are skipped, so lambda1 = lambda2 = 0 reproduces the
    plain negative ELBO exactly. Returns ``(loss, elbo_result, stats)``.
    """
    res = elbo(model, x, y, eps, betas, prior, masks, params)
    dp = gan.params if disc_params is None else disc_params
    loss = -res.objective
    stats = {}
    for lam, spec, recon, prefix in (
        (gan.lambda1, gan.disc_x, res.recon_x, "disc_x"),
        (gan.lambda2, gan.disc_y, res.recon_y, "disc_y"),
    ):
        p_fake = disc_prob(spec, dp, recon, prefix)
        stats[f"d_fake_{prefix[-1]}"] = float(p_fake.data.mean())
        if lam:
            loss = loss - T.log_clamped(p_fake, LOG_FLOOR).mean() * lam
    return loss, res, stats

"""Minibatch Adam training for the multi-view models.

Randomness comes from named sub-streams of ``TrainConfig.seed``: ``shuffle``
(minibatch order), ``dropout``, ``eps`` (reparameterization noise),
``negatives`` (contrastive pairs) and ``disc`` (discriminator batches and
their own noise). Discriminator updates never touch the generator streams,
so switching the adversarial terms off reproduces plain training exactly.
"""

import csv
import io
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ..nn import AdamState, adam_step, gradients, make_dropout_masks
from ..rng import stream
from .contrastive import ContrastiveModel, pair_loss, sample_negatives
from .gan import discriminator_loss, generator_loss
from .priors import PriorSpec, prior_for
from .vcca import DiagGaussian, _net, draw_eps, elbo

log = logging.getLogger(__name__)

HISTORY_COLUMNS = (
    "epoch", "objective", "kl_z", "kl_hx", "kl_hy", "rec_x", "rec_y", "disc_x_loss", "disc_y_loss",
)


class TrainingError(RuntimeError):
    """Training produced a non-finite objective."""


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    minibatch: int = 200
    epochs: int = 10
    mc_samples: int = 1
    beta: float = 1.0
    beta_hx: float = None
    beta_hy: float = None
    dropout_rate: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.minibatch < 1:
            raise ValueError("minibatch must be at least 1")
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be at least 1")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        for b in (self.beta, self.beta_hx, self.beta_hy):
            if b is not None and b < 0:
                raise ValueError("KL weights must be nonnegative")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    @property
    def betas(self):
        b = self.beta
        return (b, b if self.beta_hx is None else self.beta_hx, b if self.beta_hy is None else self.beta_hy)

    def to_dict(self):
        return asdict(self)


@dataclass
class EpochRecord:
    epoch: int
    objective: float
    kl_z: float = 0.0
    kl_hx: float = 0.0
    kl_hy: float = 0.0
    rec_x: float = 0.0
    rec_y: float = 0.0
    disc_x_loss: float = float("nan")
    disc_y_loss: float = float("nan")
    d_fake_x: float = float("nan")
    d_fake_y: float = float("nan")


class History(list):
    """Per-epoch :class:`EpochRecord` entries."""

    def column(self, name):
        return np.array([getattr(r, name) for r in self])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for r in self:
            w.writerow([r.epoch] + [repr(float(getattr(r, c))) for c in HISTORY_COLUMNS[1:]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rows = list(csv.reader(io.StringIO(text)))
        out = cls()
        for row in rows[1:]:
            vals = dict(zip(rows[0], row))
            out.append(EpochRecord(int(vals["epoch"]), *[float(vals[c]) for c in HISTORY_COLUMNS[1:]]))
        return out


@dataclass
class TrainResult:
    model: object
    history: History
    gan: object = None
    adam: AdamState = None
    extra: dict = field(default_factory=dict)


def _batches(n, size, rng):
    order = rng.permutation(n)
    return [order[i:i + size] for i in range(0, n, size)]


def _masks(model, rng, rows):
    out = {}
    for name in model.networks:
        spec = model.specs[name]
        if spec.dropout_rate > 0 and spec.hidden_widths:
            out[name] = make_dropout_masks(spec.dropout_rate, spec.hidden_widths, rng, rows)
    return out


def _check_finite(loss, terms, epoch, step):
    if np.isfinite(loss):
        return
    bad = [k for k, v in terms.items() if not np.isfinite(v)] or ["objective"]
    raise TrainingError(f"non-finite {', '.join(bad)} at epoch {epoch}, step {step}")


def _prior_rows(prior, idx):
    if prior is None:
        return None
    return DiagGaussian(prior.mean.data[idx], prior.log_var.data[idx])


def train(model, X, Y, config, prior=None, gan=None, callback=None):
    """Maximize the (beta-weighted) bound on paired rows ``X``, ``Y``.

    ``prior`` is a :class:`PriorSpec` (default N(0, I)); ``gan`` a
    :class:`~mvlatent.models.gan.GanConfig` enabling the alternating
    adversarial schedule. Returns a :class:`TrainResult`; the history holds
    epoch means of the objective actually optimized and its terms.
    """
    if isinstance(model, ContrastiveModel):
        if gan is not None or (prior is not None and prior.kind != "standard"):
            raise ValueError("the contrastive baseline takes neither priors nor discriminators")
        return train_contrastive(model, X, Y, config, callback)
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if X.shape[0] != Y.shape[0]:
        raise ValueError("views must have the same number of rows")
    n = X.shape[0]
    prior = prior or PriorSpec.standard()
    if prior.kind == "learned":
        prior.check_window(X.shape[1] // prior.frame_dim)
    prior_table = prior_for(X, prior)

    rng = {k: stream(config.seed, k) for k in ("shuffle", "dropout", "eps", "disc")}
    params = model.params
    adam = AdamState.init(params, config.learning_rate)
    d_params = d_adam = None
    if gan is not None:
        d_params = gan.params
        d_adam = AdamState.init(d_params, config.learning_rate)
    history = History()
    betas = config.betas
    step = 0
    for epoch in range(1, config.epochs + 1):
        sums, count = {}, 0
        d_sums, d_count = {}, 0
        for idx in _batches(n, config.minibatch, rng["shuffle"]):
            rows = len(idx)
            xb, yb = X[idx], Y[idx]
            masks = _masks(model, rng["dropout"], rows)
            eps = draw_eps(model, rng["eps"], rows, config.mc_samples)
            leaves = params.to_leaves()
            pb = _prior_rows(prior_table, idx)
            if gan is None:
                res = elbo(model, xb, yb, eps, betas, pb, masks, leaves)
                loss, stats = -res.objective, {}
            else:
                loss, res, stats = generator_loss(model, gan, xb, yb, eps, betas, pb, masks, leaves, d_params)
            step += 1
            _check_finite(loss.item(), res.terms, epoch, step)
            grads = gradients(loss, leaves)
            params, adam = adam_step(params, grads, adam)
            batch_stats = dict(res.terms, objective=-loss.item(), **stats)
            for k, v in batch_stats.items():
                sums[k] = sums.get(k, 0.0) + v * rows
            count += rows

            if gan is not None and step % gan.disc_update_period == 0:
                d_params, d_adam, d_stats = _disc_step(model.with_params(params), gan, d_params, d_adam,
                                                       X, Y, prior_table, rng["disc"], config)
                for k, v in d_stats.items():
                    d_sums[k] = d_sums.get(k, 0.0) + v
                d_count += 1

        rec = EpochRecord(epoch, **{k: v / count for k, v in sums.items() if k in EpochRecord.__dataclass_fields__})
        if d_count:
            rec.disc_x_loss = d_sums["disc_x_loss"] / d_count
            rec.disc_y_loss = d_sums["disc_y_loss"] / d_count
        history.append(rec)
        log.debug("epoch %d objective %.6g", epoch, rec.objective)
        if callback is not None:
            callback(epoch, model.with_params(params), rec)

    out_gan = None if gan is None else gan.with_params(d_params)
    return TrainResult(model.with_params(params), history, out_gan, adam)


def _disc_step(model, gan, d_params, d_adam, X, Y, prior_table, rng, config):
    n = X.shape[0]
    size = min(gan.disc_minibatch, n)
    idx = np.sort(rng.choice(n, size=size, replace=False))
    xb, yb = X[idx], Y[idx]
    eps = draw_eps(model, rng, size, 1)
    res = elbo(model, xb, yb, eps, config.betas, _prior_rows(prior_table, idx))
    leaves = d_params.to_leaves()
    losses, total = {}, None
    for spec, real, recon, prefix in (
        (gan.disc_x, xb, res.recon_x, "disc_x"),
        (gan.disc_y, yb, res.recon_y, "disc_y"),
    ):
        masks = None
        if spec.dropout_rate > 0 and spec.hidden_widths:
            masks = (
                make_dropout_masks(spec.dropout_rate, spec.hidden_widths, rng, size),
                make_dropout_masks(spec.dropout_rate, spec.hidden_widths, rng, size),
            )
        loss = discriminator_loss(spec, leaves, real, recon, prefix, masks)
        losses[f"{prefix}_loss"] = loss.item()
        total = loss if total is None else total + loss
    if not np.isfinite(total.item()):
        raise TrainingError(f"non-finite discriminator loss {losses}")
    grads = gradients(total, leaves)
    d_params, d_adam = adam_step(d_params, grads, d_adam)
    return d_params, d_adam, losses


def train_contrastive(model, X, Y, config, callback=None):
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    n = X.shape[0]
    rng = {k: stream(config.seed, k) for k in ("shuffle", "dropout", "negatives")}
    params = model.params
    adam = AdamState.init(params, config.learning_rate)
    history = History()
    step = 0
    for epoch in range(1, config.epochs + 1):
        total, count = 0.0, 0
        for idx in _batches(n, config.minibatch, rng["shuffle"]):
            if len(idx) < 2:
                continue
            masks = _masks(model, rng["dropout"], len(idx))
            neg = sample_negatives(len(idx), rng["negatives"])
            leaves = params.to_leaves()
            loss = pair_loss(model, X[idx], Y[idx], neg, masks, leaves)
            step += 1
            _check_finite(loss.item(), {"contrastive": loss.item()}, epoch, step)
            params, adam = adam_step(params, gradients(loss, leaves), adam)
            total += loss.item() * len(idx)
            count += len(idx)
        rec = EpochRecord(epoch, objective=-total / max(count, 1))
        history.append(rec)
        if callback is not None:
            callback(epoch, model.with_params(params), rec)
    return TrainResult(model.with_params(params), history, None, adam)


def evaluate(model, X, Y, prior=None, betas=(1.0, 1.0, 1.0), seed=0, mc_samples=1, batch=2000):
    """Dropout-free bound terms averaged over all rows, with seeded noise."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    prior = prior or PriorSpec.standard()
    table = prior_for(X, prior)
    rng = stream(seed, "eval")
    sums, n = {}, X.shape[0]
    for start in range(0, n, batch):
        idx = np.arange(start, min(start + batch, n))
        eps = draw_eps(model, rng, len(idx), mc_samples)
        res = elbo(model, X[idx], Y[idx], eps, betas, _prior_rows(table, idx))
        for k, v in dict(res.terms, objective=res.objective.item()).items():
            sums[k] = sums.get(k, 0.0) + v * len(idx)
    return {k: v / n for k, v in sums.items()}


def kl_to_standard(model, X, batch=4096):
    """Mean KL(q(z|x) || N(0, I)) over rows, no dropout."""
    from ..gaussians import kl_rows
    from ..nn.tensor import Tensor

    total = 0.0
    for start in range(0, X.shape[0], batch):
        m, lv = _net(model, model.params, "enc_z", Tensor(X[start:start + batch]), None)
        total += kl_rows(DiagGaussian(m, lv), DiagGaussian.standard(model.z_dim)).data.sum()
    return total / X.shape[0]

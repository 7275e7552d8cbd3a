"""Finite-difference checks of the training objectives on tiny randomized models."""

import numpy as np

from .models import (
    build_contrastive,
    build_gan,
    build_model,
    discriminator_loss,
    draw_eps,
    elbo,
    generator_loss,
    pair_loss,
    sample_negatives,
)
from .nn import grad_check, make_dropout_masks
from .rng import stream

METHODS = ("vcca", "vccap", "vccap-gan", "contrastive")


def _jitter(params, rng):
    # zero initial biases put ReLU inputs exactly on the kink for rows with dead units
    return params.replaced({n: a + 0.1 * rng.standard_normal(a.shape) for n, a in params.items()})


def _masks(specs, names, rng, n):
    return {name: make_dropout_masks(specs[name].dropout_rate, specs[name].hidden_widths, rng, n) for name in names}


def gradcheck_objectives(method, dims=(6, 4, 3, 2, 2), seed=0, n=7, hidden=(5,)):
    """``[(objective name, max relative error)]`` for ``method``.

    ``dims`` is ``x, y, z[, hx, hy]``; private widths are ignored for vcca
    and default to 2 for vccap. Noise draws and dropout masks are fixed
    before differencing, so each objective is a deterministic function of
    the parameters.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    dims = list(dims)
    if len(dims) < 3 or any(d < 1 for d in dims[:3]):
        raise ValueError("dims must give positive x, y and z widths")
    dx, dy, dz = dims[:3]
    hx, hy = (dims[3:5] + [2, 2])[:2] if len(dims) > 3 else (2, 2)
    if method == "vcca":
        hx = hy = 0
    rng = stream(seed, "gradcheck")
    x = rng.standard_normal((n, dx))
    y = rng.standard_normal((n, dy))

    if method == "contrastive":
        model = build_contrastive(dx, dy, dz, hidden, seed=seed)
        model = model.with_params(_jitter(model.params, rng))
        neg = sample_negatives(n, rng)
        masks = _masks(model.specs, model.networks, rng, n)
        return [("contrastive loss", grad_check(lambda p: pair_loss(model, x, y, neg, masks, p), model.params))]

    model = build_model(dx, dy, dz, hx, hy, hidden, hidden, seed=seed)
    model = model.with_params(_jitter(model.params, rng))
    eps = draw_eps(model, rng, n, 2)
    masks = _masks(model.specs, model.networks, rng, n)
    if method != "vccap-gan":
        return [("negative bound", grad_check(lambda p: -elbo(model, x, y, eps, masks=masks, params=p).objective,
                                              model.params))]

    gan = build_gan(dx, dy, hidden, seed=seed)
    gan = gan.with_params(_jitter(gan.params, rng))
    gen = grad_check(lambda p: generator_loss(model, gan, x, y, eps, masks=masks, params=p)[0], model.params)
    res = elbo(model, x, y, eps, masks=masks)
    recon = {"disc_x": (gan.disc_x, x, res.recon_x.data), "disc_y": (gan.disc_y, y, res.recon_y.data)}
    dmasks = {name: tuple(make_dropout_masks(spec.dropout_rate, spec.hidden_widths, rng, n) for _ in range(2))
              for name, (spec, _, _) in recon.items()}

    def disc_total(p):
        (sx, rx, fx), (sy, ry, fy) = recon["disc_x"], recon["disc_y"]
        return (discriminator_loss(sx, p, rx, fx, "disc_x", dmasks["disc_x"])
                + discriminator_loss(sy, p, ry, fy, "disc_y", dmasks["disc_y"]))

    disc = grad_check(disc_total, gan.params)
    return [("generator loss", gen), ("discriminator loss", disc)]

"""Contrastive two-view baseline with a margin hinge on Euclidean distances."""

from dataclasses import dataclass

import numpy as np

from ..nn import MlpSpec, ParamSet, forward_mlp, init_mlp
from ..nn import tensor as T
from ..nn.tensor import DimensionError, Tensor
from ..rng import stream


@dataclass
class ContrastiveModel:
    x_dim: int
    y_dim: int
    feature_dim: int
    specs: dict
    params: ParamSet
    margin: float = 1.0
    meta: dict = None

    def __post_init__(self):
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.specs["proj_x"].out_width != self.specs["proj_y"].out_width:
            raise DimensionError("projection output widths must be equal")
        if self.meta is None:
            self.meta = {}

    kind = "contrastive"

    @property
    def networks(self):
        return ["proj_x", "proj_y"]

    def with_params(self, params):
        return ContrastiveModel(self.x_dim, self.y_dim, self.feature_dim, self.specs, params,
                                self.margin, dict(self.meta))


def build_contrastive(x_dim, y_dim, feature_dim=50, hidden=(1500, 1500, 1500), activation="relu",
                      dropout_rate=0.2, margin=1.0, seed=0):
    specs = {
        "proj_x": MlpSpec((x_dim, *hidden, feature_dim), activation, dropout_rate),
        "proj_y": MlpSpec((y_dim, *hidden, feature_dim), activation, dropout_rate),
    }
    params = init_mlp(specs["proj_x"], stream(seed, "init/proj_x"), "proj_x").merged(
        init_mlp(specs["proj_y"], stream(seed, "init/proj_y"), "proj_y")
    )
    return ContrastiveModel(x_dim, y_dim, feature_dim, specs, params, margin)


def contrastive_loss(fx, fy_pos, fy_neg, margin):
    """Batch mean of max(0, margin + |fx - fy+| - |fx - fy-|)."""
    fx, fy_pos, fy_neg = (T.as_tensor(t) for t in (fx, fy_pos, fy_neg))
    fx, fy_pos, fy_neg = (t if t.ndim == 2 else Tensor(t.data[None]) for t in (fx, fy_pos, fy_neg))
    if not fx.shape == fy_pos.shape == fy_neg.shape:
        raise DimensionError("contrastive features must share a shape")
    gap = T.row_norm(fx - fy_pos) - T.row_norm(fx - fy_neg) + margin
    return T.relu(T.reshape(gap, (-1, 1))).mean()


def sample_negatives(n, rng):
    """For each row i an index j != i drawn uniformly from the other rows."""
    if n < 2:
        raise ValueError("negative sampling needs at least two rows")
    return (np.arange(n) + rng.integers(1, n, size=n)) % n


def pair_loss(model, x, y, neg_idx, masks=None, params=None):
    params = model.params if params is None else params
    mx = None if masks is None else masks.get("proj_x")
    my = None if masks is None else masks.get("proj_y")
    fx = forward_mlp(model.specs["proj_x"], params, x, mx, prefix="proj_x")
    fy = forward_mlp(model.specs["proj_y"], params, y, my, prefix="proj_y")
    return contrastive_loss(fx, fy, T.take_rows(fy, neg_idx), model.margin)


def encode_contrastive(model, x, batch=4096):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.x_dim:
        raise DimensionError(f"input width {x.shape[1]} does not match projection input {model.x_dim}")
    out = np.empty((x.shape[0], model.feature_dim))
    for start in range(0, x.shape[0], batch):
        out[start:start + batch] = forward_mlp(model.specs["proj_x"], model.params,
                                               Tensor(x[start:start + batch]), prefix="proj_x").data
    return out

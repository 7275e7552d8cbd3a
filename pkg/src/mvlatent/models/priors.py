"""Priors on the shared latent: N(0, I) or a frozen narrower-window posterior."""

from dataclasses import dataclass

import numpy as np

from ..gaussians import DiagGaussian
from ..nn.tensor import Tensor
from .vcca import MultiViewModel, _net


class PriorError(ValueError):
    pass


@dataclass
class PriorSpec:
    """``kind`` is ``"standard"`` or ``"learned"``.

    A learned prior carries the frozen model trained at window ``window``
    (its ``W_prior``) and the per-frame width ``frame_dim`` of view x. The
    prior for a sample is that model's q(z|x) evaluated on the central
    ``window`` frames of the sample's (wider) window.
    """

    kind: str = "standard"
    model: MultiViewModel = None
    window: int = None
    frame_dim: int = None
    source: str = None

    def __post_init__(self):
        if self.kind not in ("standard", "learned"):
            raise PriorError(f"unknown prior kind {self.kind!r}")
        if self.kind == "learned":
            if self.model is None or self.window is None or self.frame_dim is None:
                raise PriorError("a learned prior needs a frozen model, its window and the frame width")
            if self.model.x_dim != self.window * self.frame_dim:
                raise PriorError(
                    f"frozen encoder input {self.model.x_dim} != W_prior {self.window} x frame width {self.frame_dim}"
                )

    @classmethod
    def standard(cls):
        return cls("standard")

    def check_window(self, W):
        if self.kind == "learned" and not self.window < W:
            raise PriorError(f"learned prior window {self.window} must be smaller than the model window {W}")


def central_columns(W, W_prior, frame_dim):
    """Column slice selecting the central ``W_prior`` frames of a ``W``-frame window."""
    if W_prior > W:
        raise PriorError(f"window {W} is narrower than the prior window {W_prior}")
    if (W - W_prior) % 2:
        raise PriorError("window sizes must have equal parity to share a centre frame")
    start = (W - W_prior) // 2 * frame_dim
    return slice(start, start + W_prior * frame_dim)


def prior_for(x, spec, batch=4096):
    """Per-row prior on z for windowed samples ``x``; never carries gradients."""
    x = np.atleast_2d(np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64))
    if spec.kind == "standard":
        return None
    if x.shape[1] % spec.frame_dim:
        raise PriorError(f"input width {x.shape[1]} is not a multiple of the frame width {spec.frame_dim}")
    W = x.shape[1] // spec.frame_dim
    sub = x[:, central_columns(W, spec.window, spec.frame_dim)]
    frozen = spec.model
    means, logvars = [], []
    for start in range(0, sub.shape[0], batch):
        m, lv = _net(frozen, frozen.params, "enc_z", Tensor(sub[start:start + batch]), None)
        means.append(m.data)
        logvars.append(lv.data)
    return DiagGaussian(np.concatenate(means), np.concatenate(logvars))


def _input_weight_names(name, spec):
    if spec.hidden_widths:
        return {f"{name}.l0.W"}
    return {f"{name}.{head}.W" for head in spec.head_names()}


def _output_names(name, spec):
    return {f"{name}.{head}.{p}" for head in spec.head_names() for p in ("W", "b")}


def warm_start_from_prior(model, spec):
    """Copy the frozen narrow-window model into a wider-window model.

    Encoder input rows for the central frames take the frozen weights and
    the outer frames start at zero, so the new q(z|x) initially equals the
    prior exactly. Decoder output columns for the outer frames copy the
    nearest frame inside the narrow window. Hidden widths and latent
    dimensions must match.
    """
    src = spec.model
    d, Wp = spec.frame_dim, spec.window
    W = model.x_dim // d
    y_frame = src.y_dim // Wp
    if model.y_dim != y_frame * W:
        raise PriorError("view-y widths are inconsistent with the two window sizes")
    if (model.z_dim, model.hx_dim, model.hy_dim) != (src.z_dim, src.hx_dim, src.hy_dim):
        raise PriorError("latent dimensions differ from the prior model")
    for name in model.networks:
        a, b = model.specs[name], src.specs.get(name)
        if b is None or a.hidden_widths != b.hidden_widths or a.output_heads != b.output_heads:
            raise PriorError(f"network {name!r} differs in architecture from the prior model")

    rows = central_columns(W, Wp, 1)
    nearest = np.clip(np.arange(W) - rows.start, 0, Wp - 1)
    updates = {}
    for name in model.networks:
        net = model.specs[name]
        in_frame = y_frame if name == "enc_hy" else d
        out_frame = {"dec_x": d, "dec_y": y_frame}.get(name)
        inputs = _input_weight_names(name, net) if name.startswith("enc") else set()
        outputs = _output_names(name, net) if out_frame else set()
        for pname, shape in net.param_shapes(name):
            value = src.params[pname]
            if pname in inputs:
                grown = np.zeros((W * in_frame,) + value.shape[1:])
                grown[rows.start * in_frame:rows.stop * in_frame] = value
                value = grown
            if pname in outputs:
                cols = (nearest[:, None] * out_frame + np.arange(out_frame)[None, :]).ravel()
                value = value[..., cols]
            if value.shape != tuple(shape):
                raise PriorError(f"cannot map {pname} from {value.shape} to {tuple(shape)}")
            updates[pname] = np.array(value, copy=True)
    return model.with_params(model.params.replaced(updates))

"""Dense feed-forward networks: specs, parameter sets, init and forward."""

from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from .tensor import DimensionError, Tensor, affine, dropout, relu_dropout

ACTIVATIONS = ("relu", "linear")
HEADS = ("single", "mean_and_logvar")


@dataclass(frozen=True)
class MlpSpec:
    """Architecture of a dense network.

    ``layer_widths`` lists the input width, every hidden width, and the output
    width, so ``(10, 64, 3)`` is one hidden layer. With the
    ``mean_and_logvar`` head the final layer is two parallel affine maps, each
    of the last width.
    """

    layer_widths: tuple
    activation: str = "relu"
    dropout_rate: float = 0.0
    output_heads: str = "single"

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 2:
            raise ValueError("an MLP needs at least an input and an output width")
        if any(w < 0 for w in widths) or any(w == 0 for w in widths[1:-1]) or widths[0] == 0:
            raise ValueError(f"layer widths must be positive, got {widths}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.output_heads not in HEADS:
            raise ValueError(f"output_heads must be one of {HEADS}")

    @property
    def in_width(self):
        return self.layer_widths[0]

    @property
    def out_width(self):
        return self.layer_widths[-1]

    @property
    def hidden_widths(self):
        return self.layer_widths[1:-1]

    def head_names(self):
        return ("out",) if self.output_heads == "single" else ("mean", "logvar")

    def param_shapes(self, prefix):
        shapes = []
        widths = self.layer_widths
        for i in range(len(widths) - 2):
            shapes.append((f"{prefix}.l{i}.W", (widths[i], widths[i + 1])))
            shapes.append((f"{prefix}.l{i}.b", (widths[i + 1],)))
        for head in self.head_names():
            shapes.append((f"{prefix}.{head}.W", (widths[-2], widths[-1])))
            shapes.append((f"{prefix}.{head}.b", (widths[-1],)))
        return shapes

    def to_dict(self):
        return {
            "layer_widths": list(self.layer_widths),
            "activation": self.activation,
            "dropout_rate": self.dropout_rate,
            "output_heads": self.output_heads,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["layer_widths"]), d["activation"], d["dropout_rate"], d["output_heads"])


class ParamSet(Mapping):
    """Ordered, name-addressed collection of float64 arrays.

    Enumeration order is insertion order and is what checkpoints persist.
    Treat the arrays as read-only snapshots; updates build a new ParamSet.
    """

    def __init__(self, items=()):
        if isinstance(items, Mapping):
            items = items.items()
        self._d = {}
        for name, value in items:
            if name in self._d:
                raise ValueError(f"duplicate parameter name {name!r}")
            self._d[name] = np.asarray(value, dtype=np.float64)

    def __getitem__(self, name):
        try:
            return self._d[name]
        except KeyError:
            raise KeyError(f"unknown parameter {name!r}") from None

    def __iter__(self):
        return iter(self._d)

    def __len__(self):
        return len(self._d)

    def __repr__(self):
        return f"ParamSet({len(self)} tensors, {self.count()} values)"

    def count(self):
        return int(sum(a.size for a in self._d.values()))

    def shapes(self):
        return [(n, a.shape) for n, a in self._d.items()]

    def copy(self):
        return ParamSet((n, a.copy()) for n, a in self._d.items())

    def zeros_like(self):
        return ParamSet((n, np.zeros_like(a)) for n, a in self._d.items())

    def merged(self, other):
        return ParamSet(list(self.items()) + list(other.items()))

    def subset(self, prefix):
        return ParamSet((n, a) for n, a in self._d.items() if n.startswith(prefix + "."))

    def replaced(self, updates):
        """Copy with some entries swapped; unknown names are rejected."""
        for name in updates:
            if name not in self._d:
                raise KeyError(f"unknown parameter {name!r}")
        return ParamSet((n, updates.get(n, a)) for n, a in self._d.items())

    def to_leaves(self):
        return {n: Tensor(a, requires_grad=True, name=n) for n, a in self._d.items()}

    def flat(self):
        if not self._d:
            return np.zeros(0)
        return np.concatenate([a.ravel() for a in self._d.values()])

    @classmethod
    def from_flat(cls, shapes, flat):
        out, pos = [], 0
        for name, shape in shapes:
            n = int(np.prod(shape, dtype=np.int64))
            out.append((name, np.asarray(flat[pos:pos + n], dtype=np.float64).reshape(shape)))
            pos += n
        if pos != len(flat):
            raise ValueError(f"flat buffer has {len(flat)} values, shapes need {pos}")
        return cls(out)

    def bitwise_equal(self, other):
        if list(self) != list(other):
            return False
        return all(
            self[n].shape == other[n].shape and self[n].tobytes() == other[n].tobytes() for n in self
        )


def init_mlp(spec, rng, prefix):
    """Glorot-uniform weights and zero biases."""
    items = []
    for name, shape in spec.param_shapes(prefix):
        if name.endswith(".W"):
            limit = np.sqrt(6.0 / (shape[0] + shape[1])) if sum(shape) > 0 else 0.0
            items.append((name, rng.uniform(-limit, limit, size=shape)))
        else:
            items.append((name, np.zeros(shape)))
    return ParamSet(items)


def make_dropout_masks(rate, widths, rng, rows=1):
    """Bernoulli(1 - rate) keep-masks, one ``rows x width`` array per width."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must lie in [0, 1)")
    if rate == 0.0:
        return [np.ones((rows, w)) for w in widths]
    return [(rng.random((rows, w)) >= rate).astype(np.float64) for w in widths]


def _param(params, name):
    v = params[name]
    return v if isinstance(v, Tensor) else Tensor(v)


def forward_mlp(spec, params, x, masks=None, prefix="net"):
    """Run the network on a batch ``x`` (rows are samples).

    ``masks`` holds one keep-mask per hidden layer (inverted dropout with
    scale ``1 / (1 - rate)``); ``None`` disables dropout. Returns a Tensor,
    or a ``(mean, logvar)`` pair for the two-head variant.
    """
    h = x if isinstance(x, Tensor) else Tensor(np.atleast_2d(x))
    if h.ndim != 2 or h.shape[1] != spec.in_width:
        raise DimensionError(f"input width {h.shape[-1]} does not match network input {spec.in_width}")
    n_hidden = len(spec.hidden_widths)
    if masks is not None and len(masks) != n_hidden:
        raise DimensionError(f"expected {n_hidden} dropout masks, got {len(masks)}")
    scale = 1.0 / (1.0 - spec.dropout_rate)
    for i in range(n_hidden):
        pre = affine(h, _param(params, f"{prefix}.l{i}.W"), _param(params, f"{prefix}.l{i}.b"))
        mask = None if masks is None else masks[i]
        if spec.activation == "relu":
            h = relu_dropout(pre, mask, scale)
        else:
            h = pre if mask is None else dropout(pre, mask, scale)
    heads = [
        affine(h, _param(params, f"{prefix}.{name}.W"), _param(params, f"{prefix}.{name}.b"))
        for name in spec.head_names()
    ]
    return heads[0] if len(heads) == 1 else tuple(heads)

from dataclasses import dataclass

import numpy as np

from .. import kernels
from .mlp import ParamSet
from .tensor import DimensionError


@dataclass
class AdamState:
    step_count: int
    first_moment: ParamSet
    second_moment: ParamSet
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def init(cls, params, learning_rate=1e-4, beta1=0.9, beta2=0.999, epsilon=1e-8):
        return cls(0, params.zeros_like(), params.zeros_like(), learning_rate, beta1, beta2, epsilon)


def adam_step(params, grads, state):
    """One bias-corrected Adam update that *descends* ``grads``.

    Returns ``(new_params, new_state)``; the inputs are left untouched.
    """
    step = state.step_count + 1
    new_p, new_m, new_v = [], [], []
    for name, p in params.items():
        g = grads[name]
        m, v = state.first_moment[name], state.second_moment[name]
        if g.shape != p.shape or m.shape != p.shape:
            raise DimensionError(f"shape mismatch for {name!r}: param {p.shape}, grad {g.shape}")
        if p.size == 0:
            pn, mn, vn = p.copy(), m.copy(), v.copy()
        else:
            pn, mn, vn = kernels.adam_update(
                np.ascontiguousarray(p).ravel(),
                np.ascontiguousarray(g).ravel(),
                m.ravel(),
                v.ravel(),
                state.learning_rate,
                state.beta1,
                state.beta2,
                state.epsilon,
                step,
            )
        new_p.append((name, pn.reshape(p.shape)))
        new_m.append((name, mn.reshape(p.shape)))
        new_v.append((name, vn.reshape(p.shape)))
    new_state = AdamState(
        step,
        ParamSet(new_m),
        ParamSet(new_v),
        state.learning_rate,
        state.beta1,
        state.beta2,
        state.epsilon,
    )
    return ParamSet(new_p), new_state

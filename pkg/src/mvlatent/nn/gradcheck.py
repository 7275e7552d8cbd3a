import numpy as np

from .tensor import NumericError, Tensor, gradients


def _value(fn, params):
    leaves = {n: Tensor(a) for n, a in params.items()}
    v = float(np.asarray(fn(leaves).data))
    if not np.isfinite(v):
        raise NumericError("objective evaluated to a non-finite value during gradient check")
    return v


def grad_check(fn, params, perturbation=1e-5, max_coords=None, seed=0):
    """Largest relative error between reverse-mode and central-difference gradients.

    ``fn`` maps a dict of name -> Tensor to a scalar Tensor and must be
    deterministic (fix any noise or dropout draws outside of it). With
    ``max_coords`` set, a seeded random subset of coordinates is checked.
    Relative error is ``|a - n| / max(1, |a|, |n|)``.
    """
    if perturbation <= 0:
        raise ValueError("perturbation must be positive")
    leaves = params.to_leaves()
    loss = fn(leaves)
    if not np.isfinite(loss.data).all():
        raise NumericError("objective evaluated to a non-finite value during gradient check")
    analytic = gradients(loss, leaves)

    coords = [(n, i) for n, a in params.items() for i in range(a.size)]
    if max_coords is not None and len(coords) > max_coords:
        rng = np.random.default_rng(seed)
        pick = np.sort(rng.choice(len(coords), size=max_coords, replace=False))
        coords = [coords[k] for k in pick]

    worst = 0.0
    work = {n: a.copy() for n, a in params.items()}
    for name, i in coords:
        flat = work[name].reshape(-1)
        orig = flat[i]
        flat[i] = orig + perturbation
        f_plus = _value(fn, work)
        flat[i] = orig - perturbation
        f_minus = _value(fn, work)
        flat[i] = orig
        numeric = (f_plus - f_minus) / (2.0 * perturbation)
        a = analytic[name].reshape(-1)[i]
        err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
        worst = max(worst, err)
    return worst

"""Backend selection for the fused numeric kernels.

The compiled extension ``mvlatent._kernels`` is used when it imports;
otherwise the numpy versions in ``mvlatent._kernels_py`` are used. Setting
``MVLATENT_PURE=1`` forces the numpy path. Both expose identical functions:

adam_update, diag_kl_rows, diag_kl_grads, iso_logpdf_rows,
iso_logpdf_grad_mean, relu_dropout, relu_dropout_grad, window_frames
"""

import os

from . import _kernels_py

KERNEL_NAMES = (
    "adam_update",
    "diag_kl_rows",
    "diag_kl_grads",
    "iso_logpdf_rows",
    "iso_logpdf_grad_mean",
    "relu_dropout",
    "relu_dropout_grad",
    "window_frames",
)


def _load_compiled():
    if os.environ.get("MVLATENT_PURE", "") not in ("", "0"):
        return None
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels


_compiled = _load_compiled()
BACKEND = "cython" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _kernels_py


def available_backends():
    """Return a dict of backend name -> module for every importable backend."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        out["cython"] = _kernels
    return out


adam_update = _impl.adam_update
diag_kl_rows = _impl.diag_kl_rows
diag_kl_grads = _impl.diag_kl_grads
iso_logpdf_rows = _impl.iso_logpdf_rows
iso_logpdf_grad_mean = _impl.iso_logpdf_grad_mean
relu_dropout = _impl.relu_dropout
relu_dropout_grad = _impl.relu_dropout_grad
window_frames = _impl.window_frames

"""VCCA and VCCA-private: shared latent z plus optional private latents h_x, h_y.

A single :class:`MultiViewModel` covers both variants; VCCA is the special
case with zero private dimensions and then runs exactly the same code path,
so the two agree bit for bit.
"""

from dataclasses import dataclass, field

import numpy as np

from ..gaussians import DiagGaussian, kl_rows, log_pdf_isotropic_rows, reparameterize
from ..nn import MlpSpec, ParamSet, forward_mlp, init_mlp
from ..nn import tensor as T
from ..nn.tensor import DimensionError, Tensor
from ..rng import stream

NETWORKS = ("enc_z", "dec_x", "dec_y", "enc_hx", "enc_hy")


@dataclass
class MultiViewModel:
    """Encoders q(z|x), q(h_x|x), q(h_y|y) and decoders p(x|z,h_x), p(y|z,h_y).

    ``x_dim``/``y_dim`` are the (windowed) input widths. Decoders consume the
    concatenation ``[z, h]`` in that order and have fixed isotropic output
    standard deviations ``sigma_x`` and ``sigma_y``.
    """

    x_dim: int
    y_dim: int
    z_dim: int
    hx_dim: int
    hy_dim: int
    specs: dict
    params: ParamSet
    sigma_x: float = 1.0
    sigma_y: float = 0.1
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sigma_x <= 0 or self.sigma_y <= 0:
            raise ValueError("observation standard deviations must be positive")
        if self.specs["dec_x"].in_width != self.z_dim + self.hx_dim:
            raise DimensionError("decoder_x input width must equal z_dim + hx_dim")
        if self.specs["dec_y"].in_width != self.z_dim + self.hy_dim:
            raise DimensionError("decoder_y input width must equal z_dim + hy_dim")

    @property
    def kind(self):
        return "vccap" if (self.hx_dim or self.hy_dim) else "vcca"

    @property
    def networks(self):
        return [n for n in NETWORKS if n in self.specs]

    def with_params(self, params):
        return MultiViewModel(
            self.x_dim, self.y_dim, self.z_dim, self.hx_dim, self.hy_dim,
            self.specs, params, self.sigma_x, self.sigma_y, dict(self.meta),
        )


def build_model(
    x_dim,
    y_dim,
    z_dim=70,
    hx_dim=0,
    hy_dim=0,
    hidden=(1500, 1500, 1500),
    private_hidden=(1024, 1024, 1024),
    decoder_hidden=None,
    activation="relu",
    dropout_rate=0.2,
    sigma_x=1.0,
    sigma_y=0.1,
    seed=0,
):
    """Build and initialize a VCCA (no private dims) or VCCAP model.

    Every network draws its initial weights from its own named stream, so
    adding private encoders leaves the shared networks' initialization
    unchanged.
    """
    hidden = tuple(hidden)
    private_hidden = tuple(private_hidden)
    decoder_hidden = hidden if decoder_hidden is None else tuple(decoder_hidden)
    gauss = "mean_and_logvar"
    specs = {
        "enc_z": MlpSpec((x_dim, *hidden, z_dim), activation, dropout_rate, gauss),
        "dec_x": MlpSpec((z_dim + hx_dim, *decoder_hidden, x_dim), activation, dropout_rate),
        "dec_y": MlpSpec((z_dim + hy_dim, *decoder_hidden, y_dim), activation, dropout_rate),
    }
    if hx_dim:
        specs["enc_hx"] = MlpSpec((x_dim, *private_hidden, hx_dim), activation, dropout_rate, gauss)
    if hy_dim:
        specs["enc_hy"] = MlpSpec((y_dim, *private_hidden, hy_dim), activation, dropout_rate, gauss)
    params = ParamSet()
    for name in NETWORKS:
        if name in specs:
            params = params.merged(init_mlp(specs[name], stream(seed, f"init/{name}"), name))
    return MultiViewModel(x_dim, y_dim, z_dim, hx_dim, hy_dim, specs, params, sigma_x, sigma_y)


def _net(model, params, name, inp, masks):
    m = None if masks is None else masks.get(name)
    return forward_mlp(model.specs[name], params, inp, m, prefix=name)


def posterior(model, params, name, inp, masks=None):
    mean, log_var = _net(model, params, name, inp, masks)
    return DiagGaussian(mean, log_var)


@dataclass
class ElboResult:
    """Batch-mean objective plus per-term batch means and first-draw reconstructions."""

    objective: Tensor
    rows: Tensor
    terms: dict
    recon_x: Tensor
    recon_y: Tensor


def _draws(eps, n, d):
    if d == 0:
        return None
    eps = np.asarray(eps, dtype=np.float64)
    if eps.ndim == 2:
        eps = eps[None]
    if eps.ndim != 3 or eps.shape[1:] != (n, d):
        raise DimensionError(f"noise draws must have shape (S, {n}, {d}), got {eps.shape}")
    return eps


def elbo(model, x, y, eps, betas=(1.0, 1.0, 1.0), prior=None, masks=None, params=None):
    """Monte Carlo evidence lower bound averaged over the rows of ``x``/``y``.

    ``eps`` maps ``"z"``, ``"hx"``, ``"hy"`` to standard-normal draws of
    shape ``(S, N, dim)`` (or ``(N, dim)`` for one draw). ``prior`` is the
    per-row prior on z; ``None`` means N(0, I). ``params`` overrides the
    model's parameters, e.g. with recorded leaves during training.
    """
    params = model.params if params is None else params
    x = x if isinstance(x, Tensor) else Tensor(np.atleast_2d(x))
    y = y if isinstance(y, Tensor) else Tensor(np.atleast_2d(y))
    n = x.shape[0]
    if x.shape[1] != model.x_dim or y.shape[1] != model.y_dim or y.shape[0] != n:
        raise DimensionError(
            f"inputs {x.shape} / {y.shape} do not match model widths {model.x_dim} / {model.y_dim}"
        )
    beta_z, beta_hx, beta_hy = betas
    eps_z = _draws(eps["z"], n, model.z_dim)
    eps_hx = _draws(eps.get("hx"), n, model.hx_dim)
    eps_hy = _draws(eps.get("hy"), n, model.hy_dim)
    n_draws = eps_z.shape[0]

    q_z = posterior(model, params, "enc_z", x, masks)
    p_z = DiagGaussian.standard(model.z_dim) if prior is None else prior
    kl_z = kl_rows(q_z, p_z)
    row_obj = kl_z * (-beta_z)
    terms = {"kl_z": kl_z}
    q_hx = q_hy = None
    if model.hx_dim:
        q_hx = posterior(model, params, "enc_hx", x, masks)
        terms["kl_hx"] = kl_rows(q_hx, DiagGaussian.standard(model.hx_dim))
        row_obj = row_obj - terms["kl_hx"] * beta_hx
    if model.hy_dim:
        q_hy = posterior(model, params, "enc_hy", y, masks)
        terms["kl_hy"] = kl_rows(q_hy, DiagGaussian.standard(model.hy_dim))
        row_obj = row_obj - terms["kl_hy"] * beta_hy

    rec_x = rec_y = None
    recon_x = recon_y = None
    for s in range(n_draws):
        z = reparameterize(q_z, eps_z[s])
        in_x = z if q_hx is None else T.concat([z, reparameterize(q_hx, eps_hx[s])])
        in_y = z if q_hy is None else T.concat([z, reparameterize(q_hy, eps_hy[s])])
        mx = _net(model, params, "dec_x", in_x, masks)
        my = _net(model, params, "dec_y", in_y, masks)
        lx = log_pdf_isotropic_rows(x, mx, model.sigma_x)
        ly = log_pdf_isotropic_rows(y, my, model.sigma_y)
        if s == 0:
            rec_x, rec_y, recon_x, recon_y = lx, ly, mx, my
        else:
            rec_x, rec_y = rec_x + lx, rec_y + ly
    if n_draws > 1:
        rec_x = rec_x * (1.0 / n_draws)
        rec_y = rec_y * (1.0 / n_draws)
    terms["rec_x"], terms["rec_y"] = rec_x, rec_y
    row_obj = row_obj + rec_x + rec_y
    return ElboResult(
        objective=row_obj.mean(),
        rows=row_obj,
        terms={k: float(v.data.mean()) for k, v in terms.items()},
        recon_x=recon_x,
        recon_y=recon_y,
    )


def elbo_vcca(model, x, y, eps_z, beta=1.0, prior=None, masks=None, params=None):
    """Shared-latent bound: -beta KL(q(z|x) || p(z)) + E[log p(x|z) + log p(y|z)]."""
    if model.hx_dim or model.hy_dim:
        raise ValueError("elbo_vcca needs a model without private latents")
    return elbo(model, x, y, {"z": eps_z}, (beta, beta, beta), prior, masks, params)


def elbo_vccap(model, x, y, eps_z, eps_hx=None, eps_hy=None, beta_z=1.0, beta_hx=None, beta_hy=None,
               prior=None, masks=None, params=None):
    """Private-latent bound; the private betas default to ``beta_z``."""
    beta_hx = beta_z if beta_hx is None else beta_hx
    beta_hy = beta_z if beta_hy is None else beta_hy
    eps = {"z": eps_z, "hx": eps_hx, "hy": eps_hy}
    return elbo(model, x, y, eps, (beta_z, beta_hx, beta_hy), prior, masks, params)


def encode_features(model, x, batch=4096):
    """Posterior mean of q(z|x): deterministic, no dropout, no sampling."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.x_dim:
        raise DimensionError(f"input width {x.shape[1]} does not match encoder input {model.x_dim}")
    out = np.empty((x.shape[0], model.z_dim))
    for start in range(0, x.shape[0], batch):
        mean, _ = _net(model, model.params, "enc_z", Tensor(x[start:start + batch]), None)
        out[start:start + batch] = mean.data
    return out


def draw_eps(model, rng, n, n_draws=1):
    """Standard-normal draws for one step, in a fixed z, h_x, h_y order."""
    eps = {"z": rng.standard_normal((n_draws, n, model.z_dim))}
    if model.hx_dim:
        eps["hx"] = rng.standard_normal((n_draws, n, model.hx_dim))
    if model.hy_dim:
        eps["hy"] = rng.standard_normal((n_draws, n, model.hy_dim))
    return eps

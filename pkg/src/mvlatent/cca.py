"""Linear CCA, the closed-form probabilistic CCA solution and subspace angles."""

from dataclasses import dataclass

import numpy as np


class SingularCovarianceError(np.linalg.LinAlgError):
    """A view covariance is singular and no regularization was requested."""


@dataclass(frozen=True)
class CcaResult:
    """Projections with ``proj_x.T @ Cxx @ proj_x = I`` (regularized Cxx)."""

    proj_x: np.ndarray
    proj_y: np.ndarray
    correlations: np.ndarray
    regularization: float
    mean_x: np.ndarray
    mean_y: np.ndarray

    def transform_x(self, X):
        return (np.asarray(X, dtype=np.float64) - self.mean_x) @ self.proj_x

    def transform_y(self, Y):
        return (np.asarray(Y, dtype=np.float64) - self.mean_y) @ self.proj_y


def _covariances(X, Y, reg):
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise ValueError(f"views must be sample matrices with equal row counts, got {X.shape} and {Y.shape}")
    if reg < 0:
        raise ValueError("regularization must be nonnegative")
    n = X.shape[0]
    mx, my = X.mean(axis=0), Y.mean(axis=0)
    Xc, Yc = X - mx, Y - my
    Cxx = Xc.T @ Xc / (n - 1) + reg * np.eye(X.shape[1])
    Cyy = Yc.T @ Yc / (n - 1) + reg * np.eye(Y.shape[1])
    Cxy = Xc.T @ Yc / (n - 1)
    return Cxx, Cyy, Cxy, mx, my


def _inv_sqrt(C, reg, view):
    vals, vecs = np.linalg.eigh(C)
    tol = max(C.shape) * np.finfo(float).eps * max(vals.max(), 0.0)
    if vals.min() <= tol:
        if reg == 0:
            raise SingularCovarianceError(
                f"covariance of view {view} is singular (smallest eigenvalue {vals.min():.3g}); use reg > 0"
            )
        raise SingularCovarianceError(f"covariance of view {view} is not positive definite; increase reg")
    return (vecs / np.sqrt(vals)) @ vecs.T


def _check_k(k, n, dx, dy):
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > min(dx, dy):
        raise ValueError(f"k={k} exceeds the smaller view dimension {min(dx, dy)}")
    if n <= k:
        raise ValueError(f"need more samples than k ({n} <= {k})")


def _solve(X, Y, k, reg):
    Cxx, Cyy, Cxy, mx, my = _covariances(X, Y, reg)
    _check_k(k, np.shape(X)[0], Cxx.shape[0], Cyy.shape[0])
    Kx = _inv_sqrt(Cxx, reg, "x")
    Ky = _inv_sqrt(Cyy, reg, "y")
    U, s, Vt = np.linalg.svd(Kx @ Cxy @ Ky)
    A = Kx @ U[:, :k]
    B = Ky @ Vt[:k].T
    # the largest-magnitude entry of each x column is made positive; y follows so correlations stay positive
    idx = np.argmax(np.abs(A), axis=0)
    signs = np.sign(A[idx, np.arange(k)])
    signs[signs == 0] = 1.0
    A, B = A * signs, B * signs
    return CcaResult(A, B, np.clip(s[:k], 0.0, 1.0), float(reg), mx, my), Cxx, Cyy


def linear_cca(X, Y, k, reg=1e-4):
    """Regularized CCA by whitening and an SVD of the whitened cross-covariance.

    Parameters
    ----------
    X, Y : (N, d_x), (N, d_y) arrays
        Paired samples, one per row.
    k : int
        Number of canonical pairs.
    reg : float
        Added to both view covariances as ``reg * I``.

    Returns
    -------
    CcaResult
        Correlations come in non-increasing order.
    """
    return _solve(X, Y, k, reg)[0]


@dataclass(frozen=True)
class PccaResult:
    """Maximum-likelihood latent linear-Gaussian two-view model.

    ``x = W_x z + mean_x + noise(Psi_x)`` and likewise for y, with z ~ N(0, I_k).
    The posterior mean is ``E[z|x] = (x - mean_x) @ map_x``.
    """

    W_x: np.ndarray
    W_y: np.ndarray
    Psi_x: np.ndarray
    Psi_y: np.ndarray
    mean_x: np.ndarray
    mean_y: np.ndarray
    map_x: np.ndarray
    map_y: np.ndarray
    correlations: np.ndarray

    def posterior_mean_x(self, X):
        return (np.asarray(X, dtype=np.float64) - self.mean_x) @ self.map_x

    def posterior_mean_y(self, Y):
        return (np.asarray(Y, dtype=np.float64) - self.mean_y) @ self.map_y


def pcca_ml(X, Y, k, reg=1e-4):
    """Closed-form ML probabilistic CCA with the symmetric choice M_x = M_y = P^(1/2).

    Loadings are ``W_x = Cxx U_k M`` where ``U_k`` holds the canonical
    directions; noise covariances are ``Cxx - W_x W_x^T``. The posterior maps
    ``Cxx^{-1} W_x`` are computed from the fitted model, not from the
    canonical directions directly.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    cca, Cxx, Cyy = _solve(X, Y, k, reg)
    M = np.diag(np.sqrt(cca.correlations))
    W_x = Cxx @ cca.proj_x @ M
    W_y = Cyy @ cca.proj_y @ M
    Psi_x = Cxx - W_x @ W_x.T
    Psi_y = Cyy - W_y @ W_y.T
    map_x = np.linalg.solve(Cxx, W_x)
    map_y = np.linalg.solve(Cyy, W_y)
    return PccaResult(W_x, W_y, Psi_x, Psi_y, cca.mean_x, cca.mean_y, map_x, map_y, cca.correlations)


def _orth(U, name):
    U = np.asarray(U, dtype=np.float64)
    if U.ndim == 1:
        U = U[:, None]
    Q, R = np.linalg.qr(U)
    d = np.abs(np.diag(R))
    if d.size == 0 or d.min() <= max(U.shape) * np.finfo(float).eps * d.max():
        raise np.linalg.LinAlgError(f"{name} is not of full column rank")
    return Q


def principal_angles(U, V):
    """Principal angles (radians, ascending) between the column spans of U and V.

    Cosines come from the singular values of ``Qu^T Qv`` and sines from the
    residual ``Qv - Qu Qu^T Qv``; each angle uses whichever is better
    conditioned, so tiny angles are resolved well below 1e-8.
    """
    Qu, Qv = _orth(U, "U"), _orth(V, "V")
    if Qu.shape[0] != Qv.shape[0]:
        raise ValueError(f"row counts differ: {Qu.shape[0]} vs {Qv.shape[0]}")
    if Qu.shape[1] < Qv.shape[1]:
        Qu, Qv = Qv, Qu
    M = Qu.T @ Qv
    cos = np.clip(np.linalg.svd(M, compute_uv=False), 0.0, 1.0)  # descending
    sin = np.clip(np.linalg.svd(Qv - Qu @ M, compute_uv=False)[::-1], 0.0, 1.0)  # ascending
    angles = np.where(cos * cos < 0.5, np.arccos(cos), np.arcsin(sin))
    return np.sort(angles)

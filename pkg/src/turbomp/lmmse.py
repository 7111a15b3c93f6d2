"""Per-antenna linear MMSE updates and Gaussian message algebra.

The partial orthogonality of the pilots makes the observation covariance
diagonal, so the posterior update needs only elementwise reciprocals plus
two fast operator applications per branch.  Means may be a single column
(one antenna) or a (n, M) matrix with one variance per antenna; all
functions broadcast over the antenna axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericsError, ParameterError
from .pilots import PilotCodebook

V_FLOOR = 1e-12
V_MAX = 1e6


@dataclass(frozen=True)
class GaussianMessage:
    """Isotropic complex-Gaussian message: mean vector plus scalar variance.

    mean has shape (n,) with float variance, or (n, M) with an (M,) variance
    vector for antenna-batched use.  Variances are floored at V_FLOOR.
    """

    mean: np.ndarray
    variance: float | np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.complex128)
        var = np.asarray(self.variance, dtype=float)
        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(var)):
            raise NumericsError("non-finite Gaussian message")
        if np.any(var < 0):
            raise ParameterError("message variance must be nonnegative")
        var = np.maximum(var, V_FLOOR)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", var if var.ndim else float(var))


@dataclass(frozen=True)
class SigmaDiag:
    """Diagonal of the per-antenna observation covariance (length T*N)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if np.any(values <= 0) or not np.all(np.isfinite(values)):
            raise ParameterError("covariance diagonal must be positive and finite")
        object.__setattr__(self, "values", values)


def sigma_diag(v_h, v_c, sigma_w2: float, codebook: PilotCodebook) -> SigmaDiag:
    """Observation covariance diagonal K*P*v_h + K*P*v_c*D^2 + sigma_w2."""
    if sigma_w2 <= 0:
        raise ParameterError(f"noise variance must be positive, got {sigma_w2}")
    v_h = np.asarray(v_h, dtype=float)
    v_c = np.asarray(v_c, dtype=float)
    if np.any(v_h < 0) or np.any(v_c < 0):
        raise ParameterError("prior variances must be nonnegative")
    kp = codebook.K * codebook.power
    d2 = codebook.D_diag**2
    if v_h.ndim == 0:
        values = kp * v_h + kp * v_c * d2 + sigma_w2
    else:
        values = kp * v_h[None, :] + kp * np.outer(d2, v_c) + sigma_w2
    return SigmaDiag(values=values)


def _residual(y, msg_h, msg_c, codebook):
    y = np.asarray(y, dtype=np.complex128)
    resid = y - codebook.apply_A(msg_h.mean) - codebook.apply_B(msg_c.mean)
    if not np.all(np.isfinite(resid)):
        raise NumericsError("non-finite residual in linear estimator")
    return resid


def lmmse_posterior_h(
    y: np.ndarray,
    msg_h: GaussianMessage,
    msg_c: GaussianMessage,
    sigma: SigmaDiag,
    codebook: PilotCodebook,
) -> GaussianMessage:
    """Posterior belief of the sub-block means given the observation.

    The mean equals the exact joint LMMSE solution restricted to the mean
    coefficients; the scalar variance is the posterior covariance trace
    averaged over all Q*K components,

        v_post = v_h - (P * v_h^2 / Q) * sum_i 1 / Sigma_ii.
    """
    resid = _residual(y, msg_h, msg_c, codebook)
    v_h = msg_h.variance
    mean = msg_h.mean + v_h * codebook.apply_A_adjoint(resid / sigma.values)
    correction = (codebook.power * v_h**2 / codebook.Q) * np.sum(1.0 / sigma.values, axis=0)
    return GaussianMessage(mean=mean, variance=np.maximum(v_h - correction, 0.0))


def lmmse_posterior_c(
    y: np.ndarray,
    msg_h: GaussianMessage,
    msg_c: GaussianMessage,
    sigma: SigmaDiag,
    codebook: PilotCodebook,
) -> GaussianMessage:
    """Posterior belief of the sub-block slopes; D^2 weights the variance sum."""
    resid = _residual(y, msg_h, msg_c, codebook)
    v_c = msg_c.variance
    mean = msg_c.mean + v_c * codebook.apply_B_adjoint(resid / sigma.values)
    d2 = codebook.D_diag**2
    weights = d2 if sigma.values.ndim == 1 else d2[:, None]
    correction = (codebook.power * v_c**2 / codebook.Q) * np.sum(weights / sigma.values, axis=0)
    return GaussianMessage(mean=mean, variance=np.maximum(v_c - correction, 0.0))


def extrinsic(post: GaussianMessage, pri: GaussianMessage, v_max: float = V_MAX) -> GaussianMessage:
    """Divide the posterior by the incoming prior message.

    v_ext = (1/v_post - 1/v_pri)^-1 and the mean is the matching precision
    difference.  Where the posterior failed to sharpen (v_post >= v_pri) the
    quotient carries no information: the variance is clamped to v_max and the
    posterior mean is passed through unchanged.
    """
    v_post = np.asarray(post.variance, dtype=float)
    v_pri = np.asarray(pri.variance, dtype=float)
    inv_diff = 1.0 / v_post - 1.0 / v_pri
    informative = inv_diff > 1.0 / v_max
    v_ext = np.where(informative, 1.0 / np.maximum(inv_diff, 1.0 / v_max), v_max)
    mean_ext = v_ext * (post.mean / v_post - pri.mean / v_pri)
    if np.ndim(informative) == 0:
        if not informative:
            mean_ext = post.mean.copy()
        v_ext = float(v_ext)
    elif not informative.all():
        mean_ext[..., ~informative] = post.mean[..., ~informative]
    return GaussianMessage(mean=mean_ext, variance=v_ext)


def combine(a: GaussianMessage, b: GaussianMessage) -> GaussianMessage:
    """Precision-weighted fusion of two Gaussian messages."""
    prec = 1.0 / np.asarray(a.variance, dtype=float) + 1.0 / np.asarray(b.variance, dtype=float)
    v = 1.0 / prec
    mean = v * (a.mean / a.variance + b.mean / b.variance)
    return GaussianMessage(mean=mean, variance=v if np.ndim(v) else float(v))

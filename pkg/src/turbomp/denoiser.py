"""Spike-and-slab MMSE denoising of per-device coefficient blocks.

Each device's Q x M block is either all zero (inactive) or i.i.d. complex
Gaussian with variance theta (active).  Given a Gaussian observation of the
block with one noise variance per antenna, the posterior activity weight,
block mean, and elementwise variances are all closed form.  The Gaussian
likelihood ratio is evaluated strictly in the log domain; at realistic
operating points the linear-domain ratio overflows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .logodds import sigmoid


@dataclass(frozen=True)
class DeviceBlockPrior:
    """Input message for one device block: Q x M mean, per-antenna variance."""

    pri_mean: np.ndarray
    per_antenna_var: np.ndarray
    theta: float
    lambda_pri: float

    def __post_init__(self):
        mean = np.asarray(self.pri_mean, dtype=np.complex128)
        var = np.asarray(self.per_antenna_var, dtype=float)
        if mean.ndim != 2 or var.shape != (mean.shape[1],):
            raise ParameterError("pri_mean must be (Q, M) with per_antenna_var of length M")
        if np.any(var <= 0) or self.theta <= 0:
            raise ParameterError("variances must be positive")
        if not 0.0 <= self.lambda_pri <= 1.0:
            raise ParameterError(f"lambda_pri must be in [0, 1], got {self.lambda_pri}")
        object.__setattr__(self, "pri_mean", mean)
        object.__setattr__(self, "per_antenna_var", var)


@dataclass(frozen=True)
class DenoiseResult:
    """Posterior for one device block plus its activity evidence."""

    post_mean: np.ndarray
    post_var_elem: np.ndarray
    lambda_post: float
    pi: float


@dataclass(frozen=True)
class DenoiseBatch:
    """Vectorized posteriors for all K devices at once."""

    post_mean: np.ndarray  # (K, Q, M)
    post_var_elem: np.ndarray  # (K, Q, M)
    lambda_post: np.ndarray  # (K,)
    pi: np.ndarray  # (K,)

    def column_variance(self) -> np.ndarray:
        """Per-antenna average of the elementwise posterior variances."""
        return self.post_var_elem.mean(axis=(0, 1))


def bg_denoise_batch(
    pri_mean: np.ndarray,
    per_antenna_var: np.ndarray,
    theta: float,
    lambda_pri: np.ndarray,
) -> DenoiseBatch:
    """Denoise all devices: pri_mean (K, Q, M), noise variance per antenna.

    lambda_pri may be scalar or per device.  Exact zeros and ones in
    lambda_pri short-circuit to certainly-inactive / certainly-active
    posteriors without evaluating the prior odds.
    """
    pri = np.asarray(pri_mean, dtype=np.complex128)
    if pri.ndim != 3:
        raise ParameterError(f"pri_mean must be (K, Q, M), got shape {pri.shape}")
    K, Q, M = pri.shape
    v = np.asarray(per_antenna_var, dtype=float)
    if v.shape != (M,) or np.any(v <= 0):
        raise ParameterError("per_antenna_var must be positive with length M")
    if theta <= 0:
        raise ParameterError(f"theta must be positive, got {theta}")
    lam = np.broadcast_to(np.asarray(lambda_pri, dtype=float), (K,))
    if np.any(lam < 0) or np.any(lam > 1):
        raise ParameterError("lambda_pri must lie in [0, 1]")

    gain = theta / (theta + v)  # (M,)
    phi = gain * v  # (M,)
    mu = pri * gain  # (K, Q, M)

    # log CN(0; pri, V) - log CN(0; pri, V + theta I), accumulated per device
    abs2 = pri.real**2 + pri.imag**2
    quad = np.einsum("kqm,m->k", abs2, theta / (v * (v + theta)))
    log_ratio = Q * np.sum(np.log1p(theta / v)) - quad

    interior = (lam > 0) & (lam < 1)
    lambda_post = lam.astype(float).copy()  # endpoints carry through exactly
    if np.any(interior):
        prior_odds = np.log(lam[interior]) - np.log1p(-lam[interior])
        lambda_post[interior] = sigmoid(prior_odds - log_ratio[interior])
    pi = sigmoid(-log_ratio)

    lp = lambda_post[:, None, None]
    post_mean = lp * mu
    abs2_mu = mu.real**2 + mu.imag**2
    post_var = lp * ((1.0 - lp) * abs2_mu + phi)
    np.maximum(post_var, 0.0, out=post_var)
    return DenoiseBatch(
        post_mean=post_mean, post_var_elem=post_var, lambda_post=lambda_post, pi=pi
    )


def bg_denoise(prior: DeviceBlockPrior) -> DenoiseResult:
    """Denoise a single device block."""
    batch = bg_denoise_batch(
        prior.pri_mean[None],
        prior.per_antenna_var,
        prior.theta,
        np.asarray([prior.lambda_pri]),
    )
    return DenoiseResult(
        post_mean=batch.post_mean[0],
        post_var_elem=batch.post_var_elem[0],
        lambda_post=float(batch.lambda_post[0]),
        pi=float(batch.pi[0]),
    )


def column_variance(results) -> np.ndarray:
    """Average the elementwise posterior variances of per-device results.

    Accepts an iterable of DenoiseResult (or a DenoiseBatch) and returns the
    length-M per-antenna mean over all devices and sub-blocks.
    """
    if isinstance(results, DenoiseBatch):
        return results.column_variance()
    stacked = np.stack([r.post_var_elem for r in results])
    if stacked.size == 0:
        raise ParameterError("need at least one device result")
    return stacked.mean(axis=(0, 1))

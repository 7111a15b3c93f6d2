"""Expectation-maximization updates of the prior parameters.

The four learnable parameters are the active-block coefficient variances
(means and slopes), the effective noise variance, and the activity rate.
The posterior expectations entering the updates are the message products of
the running iteration, not exact posteriors.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ParameterError
from .pilots import PilotCodebook

VAR_FLOOR = 1e-12
VAR_CEIL = 1e6
LAMBDA_FLOOR = 1e-6
DEFAULT_SLOW_PERIOD = 3


@dataclass(frozen=True)
class PriorParams:
    """Learnable prior parameters: coefficient variances, noise variance, activity rate."""

    theta_H: float
    theta_C: float
    sigma_w2: float
    lam: float

    def __post_init__(self):
        for name in ("theta_H", "theta_C", "sigma_w2"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ParameterError(f"{name} must be positive and finite, got {value}")
        if not 0.0 < self.lam < 1.0:
            raise ParameterError(f"lam must be in (0, 1), got {self.lam}")


def em_initial_params(Y: np.ndarray, codebook: PilotCodebook) -> PriorParams:
    """Blind starting point: unit mean variance, small slope variance,
    10% activity, and noise variance set to the average observation power."""
    Y = np.asarray(Y)
    M = Y.shape[1] if Y.ndim == 2 else 1
    power = float(np.sum(np.abs(Y) ** 2)) / (M * codebook.rows)
    return PriorParams(theta_H=1.0, theta_C=1e-3, sigma_w2=max(power, VAR_FLOOR), lam=0.1)


def _weighted_block_variance(post_mean, post_var_elem, lambda_post, previous):
    lam = np.asarray(lambda_post, dtype=float)
    weight = lam.sum()
    if weight <= VAR_FLOOR:
        return previous
    K, Q, M = post_mean.shape
    energy = np.sum(np.abs(post_mean) ** 2, axis=(1, 2)) + np.sum(post_var_elem, axis=(1, 2))
    value = float(np.dot(lam, energy) / (Q * M * weight))
    return float(np.clip(value, VAR_FLOOR, VAR_CEIL))


def em_theta_H(H_post, post_var_elem, lambda_d_post, previous: float) -> float:
    """Activity-weighted second moment of the mean blocks, per coefficient.

    Falls back to the previous value when the posterior activity mass is zero.
    """
    return _weighted_block_variance(np.asarray(H_post), np.asarray(post_var_elem), lambda_d_post, previous)


def em_theta_C(C_post, post_var_elem, lambda_d_post, previous: float) -> float:
    return _weighted_block_variance(np.asarray(C_post), np.asarray(post_var_elem), lambda_d_post, previous)


def em_sigma_w(
    Y: np.ndarray,
    H_post: np.ndarray,
    C_post: np.ndarray,
    codebook: PilotCodebook,
    v_h_post=None,
    v_c_post=None,
    include_correction: bool = False,
) -> float:
    """Residual power of the reconstructed observation, per entry.

    The optional correction adds the posterior-variance trace term; it is off
    by default because it can grow without bound across iterations.
    """
    Y = np.asarray(Y)
    resid = Y - codebook.apply_A(H_post) - codebook.apply_B(C_post)
    M = Y.shape[1] if Y.ndim == 2 else 1
    value = float(np.sum(np.abs(resid) ** 2)) / (M * codebook.rows)
    if include_correction:
        if v_h_post is None or v_c_post is None:
            raise ParameterError("correction needs the per-antenna posterior variances")
        d2_mean = float(np.mean(codebook.D_diag**2))
        value += (codebook.K / M) * float(
            np.sum(np.asarray(v_h_post)) + d2_mean * np.sum(np.asarray(v_c_post))
        )
    return float(np.clip(value, VAR_FLOOR, VAR_CEIL))


def em_lambda(lambda_d_post) -> float:
    """Mean posterior activity, kept away from the exact endpoints."""
    lam = np.asarray(lambda_d_post, dtype=float)
    if lam.size < 1:
        raise ParameterError("need at least one device posterior")
    return float(np.clip(lam.mean(), LAMBDA_FLOOR, 1.0 - LAMBDA_FLOOR))


def em_schedule(state, opts) -> PriorParams:
    """One scheduled parameter refresh from the engine state.

    The noise variance is refreshed every iteration; the coefficient
    variances and the activity rate only every opts.em_slow_period
    iterations (and not before opts.em_slow_start), since they lean on the
    approximate posterior activity and destabilize the messages when
    refreshed too eagerly.  opts.em_damping < 1 blends each refresh with
    the previous value.
    """
    priors = state.priors
    d = getattr(opts, "em_damping", 1.0)
    blend = lambda new, old: d * new + (1.0 - d) * old

    sigma_w2 = em_sigma_w(
        state.Y,
        state.H_post.reshape(-1, state.H_post.shape[2]),
        state.C_post.reshape(-1, state.C_post.shape[2]),
        state.codebook,
        v_h_post=state.v_h_B_post,
        v_c_post=state.v_c_C_post,
        include_correction=opts.em_sigma_correction,
    )
    new = replace(priors, sigma_w2=blend(sigma_w2, priors.sigma_w2))
    slow_start = getattr(opts, "em_slow_start", 1)
    if state.iteration >= slow_start and state.iteration % max(opts.em_slow_period, 1) == 0:
        new = replace(
            new,
            theta_H=blend(
                em_theta_H(state.H_post, state.H_post_var, state.lambda_D_post, priors.theta_H),
                priors.theta_H,
            ),
            theta_C=blend(
                em_theta_C(state.C_post, state.C_post_var, state.lambda_D_post, priors.theta_C),
                priors.theta_C,
            ),
            lam=blend(em_lambda(state.lambda_D_post), priors.lam),
        )
    return new

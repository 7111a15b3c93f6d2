"""Iteration schedule and message bookkeeping of the turbo estimator.

One engine iteration runs the linear estimator and the mean-block denoiser
(possibly several times), then the linear estimator and the slope-block
denoiser once, then fuses activity evidence and optionally refreshes the
prior parameters.  Messages are matrices with one column per antenna plus a
per-antenna scalar variance; all per-device and per-antenna work inside a
module is vectorized.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import metrics as _metrics
from .activity import ActivityBeliefs, activity_posterior, cross_prior, detect
from .denoiser import bg_denoise_batch
from .em import PriorParams, em_schedule
from .errors import DimensionError, NumericsError, ParameterError
from .lmmse import (
    GaussianMessage,
    extrinsic,
    lmmse_posterior_c,
    lmmse_posterior_h,
    sigma_diag,
)
from .pilots import PilotCodebook


@dataclass
class TurboOptions:
    """Knobs of the iteration schedule and numerical guards."""

    max_iters: int = 50
    rel_change_tol: float = 1e-6
    inner_h_updates: int = 2
    em_enabled: bool = False
    em_start_iter: int = 1
    em_slow_period: int = 3
    em_slow_start: int = 1
    em_damping: float = 1.0
    em_sigma_correction: bool = False
    threshold: float = 0.5
    damping: float = 1.0
    v_max: float = 1e6

    def __post_init__(self):
        if self.max_iters < 1:
            raise ParameterError("max_iters must be >= 1")
        if self.rel_change_tol <= 0:
            raise ParameterError("rel_change_tol must be positive")
        if self.inner_h_updates < 1:
            raise ParameterError("inner_h_updates must be >= 1")
        if not 0.0 < self.threshold < 1.0:
            raise ParameterError("threshold must be in (0, 1)")
        if not 0.0 < self.damping <= 1.0:
            raise ParameterError("damping must be in (0, 1]")
        if not 0.0 < self.em_damping <= 1.0:
            raise ParameterError("em_damping must be in (0, 1]")
        if self.em_slow_start < 1 or self.em_slow_period < 1:
            raise ParameterError("em_slow_start and em_slow_period must be >= 1")


_DIAG_FIELDS = ["iter", "v_h", "v_c", "sigma_w2", "lam", "rel_change", "nmse_db", "clamp_events"]


@dataclass
class TurboDiagnostics:
    """Per-iteration traces: variances, learned parameters, clamp events."""

    rows: list = field(default_factory=list)
    module_trace: list = field(default_factory=list)
    clamp_events: int = 0

    def write_csv(self, target) -> None:
        """Write one CSV row per iteration to a path or text file object."""
        close = False
        if isinstance(target, (str, bytes)) or hasattr(target, "__fspath__"):
            target = open(target, "w", newline="")
            close = True
        try:
            writer = csv.DictWriter(target, fieldnames=_DIAG_FIELDS)
            writer.writeheader()
            for row in self.rows:
                writer.writerow({k: row.get(k) for k in _DIAG_FIELDS})
        finally:
            if close:
                target.close()

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


@dataclass
class TurboState:
    """All mutable quantities carried across iterations."""

    Y: np.ndarray
    codebook: PilotCodebook
    priors: PriorParams
    M: int
    h_pri: np.ndarray  # (QK, M) mean-coefficient message into the linear module
    v_h: np.ndarray  # (M,)
    c_pri: np.ndarray
    v_c: np.ndarray
    pi_B: np.ndarray  # (K,)
    pi_C: np.ndarray
    lambda_B_pri: np.ndarray
    lambda_C_pri: np.ndarray
    lambda_D_post: np.ndarray
    H_post: np.ndarray  # (K, Q, M)
    H_post_var: np.ndarray
    C_post: np.ndarray
    C_post_var: np.ndarray
    v_h_B_post: np.ndarray  # (M,)
    v_c_C_post: np.ndarray
    iteration: int = 0
    diagnostics: TurboDiagnostics = field(default_factory=TurboDiagnostics)


@dataclass
class TurboResult:
    """Final estimates, activity posteriors, decisions, and traces."""

    H: np.ndarray  # (QK, M)
    C: np.ndarray
    lambda_D_post: np.ndarray
    activity: np.ndarray
    beliefs: ActivityBeliefs
    priors: PriorParams
    iterations: int
    converged: bool
    diagnostics: TurboDiagnostics
    H_post_var: np.ndarray | None = None  # (K, Q, M) elementwise posterior variances
    C_post_var: np.ndarray | None = None
    v_h_B_post: np.ndarray | None = None  # (M,) per-antenna averages
    v_c_C_post: np.ndarray | None = None


def init_state(codebook: PilotCodebook, priors: PriorParams, M: int, Y=None) -> TurboState:
    """Uninformed starting state: zero means, prior-matched variances,
    and neutral activity evidence so the first cross-message equals the prior."""
    if M < 1:
        raise ParameterError("M must be >= 1")
    K, Q = codebook.K, codebook.Q
    n = codebook.cols
    zeros = lambda *shape: np.zeros(shape, dtype=np.complex128)
    return TurboState(
        Y=Y if Y is not None else np.zeros((codebook.rows, M), dtype=np.complex128),
        codebook=codebook,
        priors=priors,
        M=M,
        h_pri=zeros(n, M),
        v_h=np.full(M, priors.lam * priors.theta_H),
        c_pri=zeros(n, M),
        v_c=np.full(M, priors.lam * priors.theta_C),
        pi_B=np.full(K, 0.5),
        pi_C=np.full(K, 0.5),
        lambda_B_pri=np.full(K, priors.lam),
        lambda_C_pri=np.full(K, priors.lam),
        lambda_D_post=np.full(K, priors.lam),
        H_post=zeros(K, Q, M),
        H_post_var=np.zeros((K, Q, M)),
        C_post=zeros(K, Q, M),
        C_post_var=np.zeros((K, Q, M)),
        v_h_B_post=np.zeros(M),
        v_c_C_post=np.zeros(M),
    )


def _damp(new, old, factor):
    if factor >= 1.0:
        return new
    return factor * new + (1.0 - factor) * old


def _count_uninformative(v_post, v_pri) -> int:
    return int(np.count_nonzero(np.asarray(v_post) >= np.asarray(v_pri)))


def _h_branch(state: TurboState, opts: TurboOptions) -> None:
    cb = state.codebook
    K, Q = cb.K, cb.Q
    diag = state.diagnostics

    # linear estimation of the mean coefficients
    sigma = sigma_diag(state.v_h, state.v_c, state.priors.sigma_w2, cb)
    msg_h = GaussianMessage(state.h_pri, state.v_h)
    msg_c = GaussianMessage(state.c_pri, state.v_c)
    post = lmmse_posterior_h(state.Y, msg_h, msg_c, sigma, cb)
    diag.clamp_events += _count_uninformative(post.variance, msg_h.variance)
    ext = extrinsic(post, msg_h, v_max=opts.v_max)
    diag.module_trace.append("A_h")

    # denoise the per-device mean blocks
    state.lambda_B_pri = cross_prior(state.pi_C, state.priors.lam)
    pri_blocks = ext.mean.reshape(K, Q, state.M)
    den = bg_denoise_batch(pri_blocks, np.atleast_1d(ext.variance), state.priors.theta_H,
                           state.lambda_B_pri)
    state.H_post = den.post_mean
    state.H_post_var = den.post_var_elem
    state.pi_B = den.pi
    state.v_h_B_post = den.column_variance()

    b_post = GaussianMessage(den.post_mean.reshape(cb.cols, state.M), state.v_h_B_post)
    b_pri = GaussianMessage(ext.mean, ext.variance)
    diag.clamp_events += _count_uninformative(b_post.variance, b_pri.variance)
    b_ext = extrinsic(b_post, b_pri, v_max=opts.v_max)
    state.h_pri = _damp(b_ext.mean, state.h_pri, opts.damping)
    state.v_h = _damp(np.atleast_1d(b_ext.variance), state.v_h, opts.damping)
    diag.module_trace.append("B")


def _c_branch(state: TurboState, opts: TurboOptions) -> None:
    cb = state.codebook
    K, Q = cb.K, cb.Q
    diag = state.diagnostics

    sigma = sigma_diag(state.v_h, state.v_c, state.priors.sigma_w2, cb)
    msg_h = GaussianMessage(state.h_pri, state.v_h)
    msg_c = GaussianMessage(state.c_pri, state.v_c)
    post = lmmse_posterior_c(state.Y, msg_h, msg_c, sigma, cb)
    diag.clamp_events += _count_uninformative(post.variance, msg_c.variance)
    ext = extrinsic(post, msg_c, v_max=opts.v_max)
    diag.module_trace.append("A_c")

    state.lambda_C_pri = cross_prior(state.pi_B, state.priors.lam)
    pri_blocks = ext.mean.reshape(K, Q, state.M)
    den = bg_denoise_batch(pri_blocks, np.atleast_1d(ext.variance), state.priors.theta_C,
                           state.lambda_C_pri)
    state.C_post = den.post_mean
    state.C_post_var = den.post_var_elem
    state.pi_C = den.pi
    state.v_c_C_post = den.column_variance()

    c_post = GaussianMessage(den.post_mean.reshape(cb.cols, state.M), state.v_c_C_post)
    c_pri = GaussianMessage(ext.mean, ext.variance)
    diag.clamp_events += _count_uninformative(c_post.variance, c_pri.variance)
    c_ext = extrinsic(c_post, c_pri, v_max=opts.v_max)
    state.c_pri = _damp(c_ext.mean, state.c_pri, opts.damping)
    state.v_c = _damp(np.atleast_1d(c_ext.variance), state.v_c, opts.damping)
    diag.module_trace.append("C")


def _check_finite(state: TurboState) -> None:
    for name in ("h_pri", "c_pri", "v_h", "v_c"):
        arr = np.asarray(getattr(state, name))
        if not np.all(np.isfinite(arr)):
            raise NumericsError(f"non-finite message in {name}", diagnostics=state.diagnostics)


def run_turbo_mp(
    Y: np.ndarray,
    codebook: PilotCodebook,
    priors: PriorParams,
    opts: TurboOptions | None = None,
    truth=None,
) -> TurboResult:
    """Run the full estimator on an observation matrix.

    Y has shape (T*N, M).  `truth` may be a (ChannelRealization, BlockwiseBasis)
    pair; when given, a reconstruction-error trace is added to the diagnostics.
    Inputs plus options determine the output exactly (no internal randomness).
    """
    opts = opts or TurboOptions()
    Y = np.asarray(Y, dtype=np.complex128)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.ndim != 2 or Y.shape[0] != codebook.rows:
        raise DimensionError(f"Y must be ({codebook.rows}, M), got {Y.shape}")
    state = init_state(codebook, priors, Y.shape[1], Y=Y)
    diag = state.diagnostics
    converged = False

    for iteration in range(1, opts.max_iters + 1):
        state.iteration = iteration
        prev = np.concatenate([state.h_pri.ravel(), state.c_pri.ravel()])
        try:
            for _ in range(opts.inner_h_updates):
                _h_branch(state, opts)
            _c_branch(state, opts)
        except NumericsError as err:
            err.diagnostics = diag
            raise
        _check_finite(state)

        state.lambda_D_post = activity_posterior(state.pi_B, state.pi_C, state.priors.lam)
        if opts.em_enabled and iteration >= opts.em_start_iter:
            state.priors = em_schedule(state, opts)
            diag.module_trace.append("EM")

        cur = np.concatenate([state.h_pri.ravel(), state.c_pri.ravel()])
        denom = float(np.linalg.norm(prev))
        rel_change = float(np.linalg.norm(cur - prev)) / denom if denom > 0 else np.inf

        nmse_db = None
        if truth is not None:
            realization, basis = truth
            if realization.activity.any():
                value = _metrics.nmse(
                    realization.G,
                    state.H_post.reshape(codebook.cols, state.M),
                    state.C_post.reshape(codebook.cols, state.M),
                    basis,
                    realization.activity,
                )
                nmse_db = 10.0 * np.log10(max(value, 1e-300))
        diag.rows.append(
            {
                "iter": iteration,
                "v_h": float(np.mean(state.v_h)),
                "v_c": float(np.mean(state.v_c)),
                "sigma_w2": state.priors.sigma_w2,
                "lam": state.priors.lam,
                "rel_change": rel_change,
                "nmse_db": nmse_db,
                "clamp_events": diag.clamp_events,
            }
        )
        if rel_change < opts.rel_change_tol:
            converged = True
            break

    lambda_post = activity_posterior(state.pi_B, state.pi_C, state.priors.lam)
    state.lambda_D_post = lambda_post
    beliefs = ActivityBeliefs(
        pi_B=state.pi_B,
        pi_C=state.pi_C,
        lambda_B_pri=state.lambda_B_pri,
        lambda_C_pri=state.lambda_C_pri,
        lambda_D_post=lambda_post,
    )
    return TurboResult(
        H=state.H_post.reshape(codebook.cols, state.M),
        C=state.C_post.reshape(codebook.cols, state.M),
        lambda_D_post=lambda_post,
        activity=detect(lambda_post, opts.threshold),
        beliefs=beliefs,
        priors=state.priors,
        iterations=state.iteration,
        converged=converged,
        diagnostics=diag,
        H_post_var=state.H_post_var,
        C_post_var=state.C_post_var,
        v_h_B_post=state.v_h_B_post,
        v_c_C_post=state.v_c_C_post,
    )

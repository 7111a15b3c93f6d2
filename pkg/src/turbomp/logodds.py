"""Numerically safe probability/log-odds conversions shared by the modules."""

from __future__ import annotations

import numpy as np

LOG_ODDS_CLAMP = 40.0


def sigmoid(x):
    """Stable logistic function, exact at +/-inf."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ex = np.exp(arr[~pos])
    out[~pos] = ex / (1.0 + ex)
    if np.ndim(x) == 0:
        return float(out[0])
    return out.reshape(np.shape(x))


def logit(p, clamp: float = LOG_ODDS_CLAMP):
    """log(p / (1-p)) with the result clipped to [-clamp, clamp].

    The clip resolves the 0/0 forms that exact-zero or exact-one
    probabilities would otherwise produce downstream.
    """
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.clip(np.log(p) - np.log1p(-p), -clamp, clamp)
    return out if out.ndim else float(out)

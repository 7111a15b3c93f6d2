"""Independent reference computations used by the tests.

Everything here deliberately avoids the library's fast paths: dense matrix
algebra, brute-force quadrature, and closed-form statistics derived straight
from the model definitions.
"""

import numpy as np


def dense_joint_lmmse(y, A, B, h_pri, c_pri, v_h, v_c, sigma_w2):
    """Exact joint LMMSE over the stacked (means, slopes) unknowns.

    Returns (h_post, c_post, v_h_avg, v_c_avg) where the variances are the
    posterior covariance diagonals averaged over each half.
    """
    n = A.shape[1]
    Ms = np.hstack([A, B])
    Vp = np.concatenate([np.full(n, v_h), np.full(n, v_c)])
    Sigma = (Ms * Vp) @ Ms.conj().T + sigma_w2 * np.eye(A.shape[0])
    x_pri = np.concatenate([h_pri, c_pri])
    gain = (Vp[:, None] * Ms.conj().T) @ np.linalg.inv(Sigma)
    x_post = x_pri + gain @ (y - Ms @ x_pri)
    X = np.linalg.solve(Sigma, Ms)
    reduction = Vp**2 * np.einsum("ij,ij->j", Ms.conj(), X).real
    post_diag = Vp - reduction
    return x_post[:n], x_post[n:], post_diag[:n].mean(), post_diag[n:].mean()


def bg_scalar_reference(r, v, theta, lam, n_grid=20001):
    """Brute-force posterior of a scalar spike-and-slab variable.

    The unknown is zero w.p. (1-lam) and CN(0, theta) w.p. lam; r is its
    observation under CN noise with variance v.  The Gaussian branch is
    integrated numerically per real axis (the complex density factorizes);
    only the spike branch uses the closed-form density value.
    Returns (lambda_post, posterior mean, elementwise posterior variance).
    """

    from scipy.integrate import simpson

    def axis_moments(obs):
        L = abs(obs) + 10.0 * np.sqrt((v + theta) / 2.0) + 1.0
        u = np.linspace(-L, L, n_grid)
        dens = (
            np.exp(-(u**2) / theta) / np.sqrt(np.pi * theta)
            * np.exp(-((obs - u) ** 2) / v) / np.sqrt(np.pi * v)
        )
        z = simpson(dens, x=u)
        m1 = simpson(u * dens, x=u)
        m2 = simpson(u**2 * dens, x=u)
        return z, m1, m2

    zr, m1r, m2r = axis_moments(r.real)
    zi, m1i, m2i = axis_moments(r.imag)
    z_gauss = zr * zi
    z_spike = np.exp(-abs(r) ** 2 / v) / (np.pi * v)

    w1 = lam * z_gauss
    w0 = (1.0 - lam) * z_spike
    lambda_post = w1 / (w0 + w1)
    mean_gauss = m1r / zr + 1j * (m1i / zi)
    second_gauss = m2r / zr + m2i / zi
    mean = lambda_post * mean_gauss
    var = lambda_post * second_gauss - abs(mean) ** 2
    return lambda_post, mean, var


def genie_support_lmmse(Y, codebook, activity, theta_H, theta_C, sigma2):
    """Joint LMMSE given the true active set (dense; small configs only).

    Returns full-size (QK, M) estimates with zeros outside the support.
    """
    Q = codebook.Q
    active = np.flatnonzero(activity)
    cols = (active[:, None] * Q + np.arange(Q)).ravel()
    A = codebook.dense_A()
    B = codebook.dense_B()
    Ms = np.hstack([A[:, cols], B[:, cols]])
    Vp = np.concatenate([np.full(cols.size, theta_H), np.full(cols.size, theta_C)])
    Sigma = (Ms * Vp) @ Ms.conj().T + sigma2 * np.eye(codebook.rows)
    xhat = Vp[:, None] * (Ms.conj().T @ np.linalg.solve(Sigma, Y))
    M = Y.shape[1]
    H = np.zeros((codebook.cols, M), dtype=np.complex128)
    C = np.zeros((codebook.cols, M), dtype=np.complex128)
    H[cols] = xhat[: cols.size]
    C[cols] = xhat[cols.size :]
    return H, C


def expected_mismatch_ratio(profile, N, Q, delta_f):
    """Closed-form E||Delta||^2 / E||G||^2 of the block-wise linear fit.

    Uses the frequency correlation R(dn) = sum_l rho_l exp(-2j pi df tau_l dn)
    of the tapped-delay-line model and the per-block projection residual.
    """
    b = N // Q
    lags = np.arange(b)[:, None] - np.arange(b)[None, :]
    R = np.sum(
        profile.powers[:, None, None]
        * np.exp(-2j * np.pi * delta_f * profile.delays[:, None, None] * lags[None]),
        axis=0,
    )
    d = np.arange(1, b + 1) - b / 2.0
    X = np.column_stack([np.ones(b), d])
    P = np.eye(b) - X @ np.linalg.inv(X.T @ X) @ X.T
    resid_energy = float(np.trace(P @ R).real)
    return Q * resid_energy / N

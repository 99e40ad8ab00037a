"""Reference numpy implementations of the inner loops."""

from __future__ import annotations

import numpy as np

SMALL = 1e-5


def _one_minus_exp(x):
    # 1 - exp(-x), accurate for small |x| and valid for complex x
    x = np.asarray(x)
    small = np.abs(x) < SMALL
    series = x * (1.0 - x / 2.0 + x * x / 6.0)
    return np.where(small, series, 1.0 - np.exp(-np.where(small, 0.0, x)))


def kernel_accumulate(d, r, w, Z):
    """``out_i = sum_q w_q d_i exp(-r_q d_i) Z[i, q]``."""
    E = np.exp(-np.outer(d, r)) * d[:, None]
    return (E * Z) @ w


def affine_accumulate(d, r, w, dth, jl, lam, P):
    """Kernel sum with ``Z`` rebuilt from node data by linear interpolation.

    ``Z[i, q] = sum_m dth[m, q] ((1 - lam_q) P[m, i, jl_q] + lam_q P[m, i, jl_q + 1])``.
    """
    Z = np.zeros((d.shape[0], r.shape[0]), dtype=np.result_type(d, P))
    for m in range(P.shape[0]):
        Zm = P[m][:, jl] * (1.0 - lam) + P[m][:, jl + 1] * lam
        Z += Zm * dth[m]
    return kernel_accumulate(d, r, w, Z)


def duhamel_accumulate(d, tk, tn, C):
    """``out_i = sum_j int_{tn[j]}^{tn[j+1]} exp(-(tk - s) d_i) ds * C[i, j]``."""
    a = tk - tn[1:]
    dt = tn[1:] - tn[:-1]
    x = np.outer(d, dt)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.exp(-np.outer(d, a)) * _one_minus_exp(x) / d[:, None]
    zero = d == 0
    if np.any(zero):
        phi[zero] = dt
    return np.sum(phi * C, axis=1)


def _phi_pair(x):
    # (phi1 - psi, psi) with phi1 = int_0^1 e^{-x(1-u)} du, psi = int_0^1 e^{-x(1-u)} u du
    x = np.asarray(x)
    small = np.abs(x) < 1e-2
    xs = np.where(small, 1.0, x)
    phi1 = np.where(small, 1 - x / 2 + x**2 / 6 - x**3 / 24 + x**4 / 120, -np.expm1(-xs) / xs)
    psi = np.where(small, 0.5 - x / 6 + x**2 / 24 - x**3 / 120 + x**4 / 720, (xs + np.expm1(-xs)) / xs**2)
    return phi1 - psi, psi


def linear_duhamel_accumulate(d, tk, tn, F):
    """``out_i = int_{tn[0]}^{tn[-1]} exp(-(tk - s) d_i) f_i(s) ds`` for ``f_i`` piecewise linear through ``F[i]``."""
    dt = tn[1:] - tn[:-1]
    w0, w1 = _phi_pair(np.outer(d, dt))
    decay = np.exp(-np.outer(d, tk - tn[1:])) * dt[None, :]
    return np.sum(decay * (w0 * F[:, :-1] + w1 * F[:, 1:]), axis=1)


def assemble_1d(x, xi, wq, coef, kind):
    """Dense P1 matrix on the 1D mesh ``x``.

    ``coef[e, g]`` is the coefficient at quadrature point ``g`` of element ``e``.
    ``kind``: 0 stiffness ``int c u' v'``, 1 mass ``int c u v``,
    2 drift ``int c u' v`` (row = test function).
    """
    n = x.shape[0]
    out = np.zeros((n, n))
    h = x[1:] - x[:-1]
    phi = np.stack([1.0 - xi, xi])  # (2, G)
    dphi = np.array([-1.0, 1.0])
    cw = coef * wq[None, :]  # (E, G)
    if kind == 0:
        s = cw.sum(axis=1) / h
        loc = s[:, None, None] * np.outer(dphi, dphi)[None]
    elif kind == 1:
        pp = phi[:, None, :] * phi[None, :, :]  # symmetric in (a, b) bit for bit
        loc = np.einsum("eg,abg->eab", cw, pp) * h[:, None, None]
    else:
        loc = np.einsum("eg,ag->ea", cw, phi)[:, :, None] * dphi[None, None, :]
    for a in range(2):
        for b in range(2):
            np.add.at(out, (np.arange(n - 1) + a, np.arange(n - 1) + b), loc[:, a, b])
    return out

"""Numba-compiled inner loops; same signatures as :mod:`maxreg.kernels._numpy`."""

from __future__ import annotations

import numpy as np
from numba import njit

SMALL = 1e-5


@njit(cache=True)
def _one_minus_exp(x):
    if abs(x) < SMALL:
        return x * (1.0 - x / 2.0 + x * x / 6.0)
    return 1.0 - np.exp(-x)


@njit(cache=True)
def kernel_accumulate(d, r, w, Z):
    n = d.shape[0]
    out = np.zeros(n, dtype=Z.dtype)
    for i in range(n):
        di = d[i]
        acc = out[i]
        for q in range(r.shape[0]):
            acc += w[q] * di * np.exp(-r[q] * di) * Z[i, q]
        out[i] = acc
    return out


@njit(cache=True)
def affine_accumulate(d, r, w, dth, jl, lam, P):
    n = d.shape[0]
    M = P.shape[0]
    out = np.zeros(n, dtype=P.dtype)
    for i in range(n):
        di = d[i]
        acc = out[i]
        for q in range(r.shape[0]):
            j = jl[q]
            lq = lam[q]
            z = P[0, i, 0] * 0.0
            for m in range(M):
                z += dth[m, q] * ((1.0 - lq) * P[m, i, j] + lq * P[m, i, j + 1])
            acc += w[q] * di * np.exp(-r[q] * di) * z
        out[i] = acc
    return out


@njit(cache=True)
def duhamel_accumulate(d, tk, tn, C):
    n = d.shape[0]
    out = np.zeros(n, dtype=C.dtype)
    for i in range(n):
        di = d[i]
        acc = out[i]
        for j in range(tn.shape[0] - 1):
            dt = tn[j + 1] - tn[j]
            if di == 0:
                phi = dt + 0.0 * di
            else:
                phi = np.exp(-di * (tk - tn[j + 1])) * _one_minus_exp(di * dt) / di
            acc += phi * C[i, j]
        out[i] = acc
    return out


@njit(cache=True)
def _phi_pair(x):
    if abs(x) < 1e-2:
        phi1 = 1.0 - x / 2.0 + x * x / 6.0 - x**3 / 24.0 + x**4 / 120.0
        psi = 0.5 - x / 6.0 + x * x / 24.0 - x**3 / 120.0 + x**4 / 720.0
    else:
        em = np.exp(-x) - 1.0
        phi1 = -em / x
        psi = (x + em) / (x * x)
    return phi1 - psi, psi


@njit(cache=True)
def linear_duhamel_accumulate(d, tk, tn, F):
    n = d.shape[0]
    out = np.zeros(n, dtype=F.dtype)
    for i in range(n):
        di = d[i]
        acc = out[i]
        for j in range(tn.shape[0] - 1):
            dt = tn[j + 1] - tn[j]
            w0, w1 = _phi_pair(di * dt)
            acc += np.exp(-di * (tk - tn[j + 1])) * dt * (w0 * F[i, j] + w1 * F[i, j + 1])
        out[i] = acc
    return out


@njit(cache=True)
def assemble_1d(x, xi, wq, coef, kind):
    n = x.shape[0]
    out = np.zeros((n, n))
    dphi = np.array([-1.0, 1.0])
    for e in range(n - 1):
        h = x[e + 1] - x[e]
        for g in range(xi.shape[0]):
            cw = coef[e, g] * wq[g]
            phi0 = 1.0 - xi[g]
            phi1 = xi[g]
            phi = (phi0, phi1)
            for a in range(2):
                for b in range(2):
                    if kind == 0:
                        val = cw * dphi[a] * dphi[b] / h
                    elif kind == 1:
                        val = cw * (phi[a] * phi[b]) * h
                    else:
                        val = cw * phi[a] * dphi[b]
                    out[e + a, e + b] += val
    return out

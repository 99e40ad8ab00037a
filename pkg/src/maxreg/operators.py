"""The operators A(t), their semigroups, resolvents and fractional powers.

In finite dimensions the operator A(t) on H and its extension to V' are the
same matrix ``G_H^{-1} A_form(t)``; everything here works with that matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from maxreg.forms import Bounds, FormFamily, certify_bounds

SECTOR_MARGIN = 0.1
EIGVEC_COND_MAX = 1e10


class SectorError(ValueError):
    """A spectral parameter lies inside the certified sector."""


@dataclass(frozen=True)
class EigenData:
    """Diagonalization ``A_form V = G_H V diag(d)`` with ``W^* G_H V = I``.

    Then ``G_H^{-1} A_form = V diag(d) W^* G_H``; for symmetric forms ``W = V``
    and everything is real.
    """

    d: np.ndarray
    V: np.ndarray
    W: np.ndarray
    G_H: np.ndarray

    @classmethod
    def from_form(cls, A_form: np.ndarray, G_H: np.ndarray, symmetric: bool | None = None):
        if symmetric is None:
            symmetric = np.array_equal(A_form, A_form.T)
        if symmetric:
            d, V = sla.eigh(A_form, G_H)
            return cls(d, V, V, G_H)
        d, vl, vr = sla.eig(A_form, G_H, left=True, right=True)
        if np.linalg.cond(vr) > EIGVEC_COND_MAX:
            raise np.linalg.LinAlgError("form pencil is numerically non-diagonalizable")
        s = np.einsum("ij,ij->j", vl.conj(), G_H @ vr)
        W = vl / s.conj()[None, :]
        return cls(d, vr, W, G_H)

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.d)

    def coords(self, x: np.ndarray) -> np.ndarray:
        """Eigen-coordinates of an H vector (columns allowed)."""
        return self.W.conj().T @ (self.G_H @ x)

    def coords_dual(self, w: np.ndarray) -> np.ndarray:
        """Eigen-coordinates of ``G_H^{-1} w`` for a vector already in form space."""
        return self.W.conj().T @ w

    def back(self, c: np.ndarray) -> np.ndarray:
        out = self.V @ c
        return out if self.is_real else np.real_if_close(out, tol=1e6).real

    def apply(self, fvals: np.ndarray, x: np.ndarray) -> np.ndarray:
        c = self.coords(x)
        return self.back(fvals[:, None] * c if c.ndim == 2 else fvals * c)


@dataclass(frozen=True)
class OperatorSlice:
    """Frozen operator ``A(t)`` with the sector certificate of its family."""

    t: float
    A_form: np.ndarray
    G_H: np.ndarray
    sector_angle: float
    vertex: float = 0.0

    @property
    def A_H(self) -> np.ndarray:
        return sla.solve(self.G_H, self.A_form, assume_a="pos")

    @property
    def dim(self) -> int:
        return self.A_form.shape[0]

    def eigen(self) -> EigenData:
        return EigenData.from_form(self.A_form, self.G_H)

    def h_norm(self, x: np.ndarray) -> float:
        return float(np.sqrt(max(np.real(np.vdot(x, self.G_H @ x)), 0.0)))


def sector_angle(bounds: Bounds) -> float:
    """``arctan(M / alpha1) + 0.1``, capped below pi."""
    return min(math.atan(bounds.M / bounds.alpha1) + SECTOR_MARGIN, math.pi - 0.05)


def operator_slice(
    ff: FormFamily,
    t: float,
    bounds: Bounds | None = None,
    t_grid: Sequence[float] | None = None,
) -> OperatorSlice:
    """Freeze ``ff`` at time ``t``.

    The sector is certified over ``t_grid`` (default: 17 uniform points) so
    slices at different times share one angle.  A family needing ``delta > 0``
    gets its sector vertex moved to ``-delta``.
    """
    if bounds is None:
        grid = np.linspace(0.0, ff.tau, 17) if t_grid is None else t_grid
        bounds = certify_bounds(ff, grid)
    return OperatorSlice(
        t=float(t),
        A_form=ff.form_at(t),
        G_H=ff.gp.G_H,
        sector_angle=sector_angle(bounds),
        vertex=-bounds.delta,
    )


def numerical_range_angle(slc: OperatorSlice, samples: int = 200, seed: int = 0) -> float:
    """Largest ``|arg|`` of ``(x^* A_form x) / (x^* G_H x)`` over random ``x``."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((slc.dim, samples)) + 1j * rng.standard_normal((slc.dim, samples))
    num = np.einsum("ij,ij->j", X.conj(), slc.A_form @ X) - slc.vertex * np.einsum(
        "ij,ij->j", X.conj(), slc.G_H @ X
    )
    return float(np.max(np.abs(np.angle(num))))


def semigroup_apply(slc: OperatorSlice, s: float, x: np.ndarray) -> np.ndarray:
    """``exp(-s A) x`` by scaling and squaring."""
    if s < 0:
        raise ValueError(f"semigroup time must be nonnegative, got {s}")
    x = np.asarray(x)
    if s == 0:
        return x.copy()
    return sla.expm(-s * slc.A_H) @ x


def in_sector(slc: OperatorSlice, z: complex) -> bool:
    w = complex(z) - slc.vertex
    return w == 0 or abs(np.angle(w)) <= slc.sector_angle


def _resolvent_matrix(slc: OperatorSlice, z: complex) -> np.ndarray:
    if in_sector(slc, z):
        dist = float(np.min(np.abs(np.linalg.eigvals(slc.A_H) - z)))
        raise SectorError(
            f"z = {z} lies in the sector of angle {slc.sector_angle:.4f} with vertex "
            f"{slc.vertex:g}; distance to spectrum {dist:.3e}"
        )
    return z * slc.G_H - slc.A_form


def resolvent_apply(slc: OperatorSlice, z: complex, x: np.ndarray) -> np.ndarray:
    """``(z - A)^{-1} x`` for ``z`` outside the sector."""
    Z = _resolvent_matrix(slc, z)
    try:
        return sla.solve(Z, slc.G_H @ np.asarray(x, dtype=complex))
    except sla.LinAlgError as exc:
        dist = float(np.min(np.abs(np.linalg.eigvals(slc.A_H) - z)))
        raise SectorError(f"singular resolvent at z = {z}; distance {dist:.3e}") from exc


def resolvent_v_ratio(slc: OperatorSlice, z: complex, x: np.ndarray, G_V: np.ndarray) -> float:
    """``sqrt|z| ||R(z) x||_V / ||x||_H``; bounded uniformly off the sector."""
    y = resolvent_apply(slc, z, x)
    yv = math.sqrt(max(np.real(np.vdot(y, G_V @ y)), 0.0))
    return math.sqrt(abs(z)) * yv / slc.h_norm(np.asarray(x))


def h_operator_norm(M: np.ndarray, G_H: np.ndarray) -> float:
    """Operator norm on (coordinates, H) of the matrix ``M``."""
    L = np.linalg.cholesky(G_H)
    X = L.T @ M
    X = sla.solve_triangular(L, X.conj().T, lower=True).conj().T
    return float(np.linalg.norm(X, 2))


def resolvent_difference_norm(
    ff: FormFamily,
    t: float,
    s: float,
    z: complex,
    beta: float | None = None,
    gamma: float | None = None,
    bounds: Bounds | None = None,
) -> float:
    """``||R(z, A(t)) - R(z, A(s))||_{B(H)}``.

    ``beta`` and ``gamma`` only label the bound being probed
    (``|z|^{-(1 - (beta + gamma)/2)}``); the returned value is the exact norm.
    """
    if bounds is None:
        bounds = certify_bounds(ff, np.linspace(0.0, ff.tau, 17))
    st = operator_slice(ff, t, bounds)
    ss = operator_slice(ff, s, bounds)
    if t == s or not np.any(ff.form_difference(t, s)):
        _resolvent_matrix(st, z)
        return 0.0
    G = ff.gp.G_H
    Rt = sla.solve(_resolvent_matrix(st, z), G.astype(complex))
    Rs = sla.solve(_resolvent_matrix(ss, z), G.astype(complex))
    return h_operator_norm(Rt - Rs, G)


def frac_power_apply(slc: OperatorSlice, theta: float, x: np.ndarray) -> np.ndarray:
    """Principal power ``A^theta x`` of a sectorial, invertible slice."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"power must lie in [0, 1], got {theta}")
    x = np.asarray(x)
    if theta == 0:
        return x.copy()
    if theta == 1:
        return slc.A_H @ x
    try:
        eig = slc.eigen()
    except np.linalg.LinAlgError:
        eig = None
    if eig is not None:
        if np.any(np.real(eig.d) <= 0):
            raise SectorError("fractional power needs spectrum in the open right half plane")
        return eig.apply(np.power(eig.d.astype(complex if not eig.is_real else float), theta), x)
    ev = np.linalg.eigvals(slc.A_H)
    if np.any(np.real(ev) <= 0):
        raise SectorError("fractional power needs spectrum in the open right half plane")
    return np.real_if_close(sla.fractional_matrix_power(slc.A_H, theta) @ x)


def geometric_grid(tau: float, nodes: int = 200, ratio: float = 0.7) -> np.ndarray:
    """``0`` followed by ``tau * ratio^k``, increasing."""
    pts = tau * ratio ** np.arange(nodes - 1, -1, -1)
    return np.concatenate([[0.0], pts])


def _loglinear_integral(t: np.ndarray, F: np.ndarray) -> float:
    """Integral of a positive sampled function, exact for exponentials on each cell."""
    dt = np.diff(t)
    a, b = F[:-1], F[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.log(b / a)
        cell = dt * (b - a) / ratio
    trap = 0.5 * dt * (a + b)
    bad = (a <= 0) | (b <= 0) | ~np.isfinite(cell) | (np.abs(ratio) < 1e-12)
    return float(np.sum(np.where(bad, trap, cell)))


def real_interp_norm(
    u0: np.ndarray,
    slice0: OperatorSlice,
    p: float,
    time_grid: np.ndarray | None = None,
    tau: float = 1.0,
) -> float:
    """``||u0||_H + (int_0^tau ||A e^{-tA} u0||_H^p dt)^{1/p}``.

    The integral runs on a grid graded geometrically toward ``t = 0``.
    """
    if p <= 1:
        raise ValueError(f"exponent must exceed 1, got {p}")
    u0 = np.asarray(u0)
    base = slice0.h_norm(u0)
    if base == 0:
        return 0.0
    t = geometric_grid(tau) if time_grid is None else np.asarray(time_grid, float)
    eig = slice0.eigen()
    if np.any(np.real(eig.d) <= 0):
        raise SectorError("real interpolation norm needs an invertible sectorial slice")
    c = eig.coords(u0)
    vals = eig.d[:, None] * np.exp(-np.outer(eig.d, t)) * c[:, None]
    X = eig.V @ vals
    norms = np.sqrt(np.maximum(np.real(np.einsum("it,ij,jt->t", X.conj(), slice0.G_H, X)), 0))
    return base + _loglinear_integral(t, norms**p) ** (1.0 / p)

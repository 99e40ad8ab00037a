"""Finite-dimensional Gelfand triple V -> H -> V' and its interpolation scale.

Vectors are coordinate arrays; ``G_H`` and ``G_V`` are the Gram matrices of the
H and V inner products in those coordinates.  Dual elements are identified
through the H pivot, so ``<w, v> = w^* G_H v``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

SPD_RTOL = 1e-12
EIG_RESIDUAL_RTOL = 1e-9


class NotPositiveDefiniteError(ValueError):
    """A Gram matrix failed the symmetric positive definite check."""


def check_spd(mat: np.ndarray, name: str) -> float:
    """Validate ``mat`` as Hermitian positive definite and return its smallest eigenvalue."""
    mat = np.asarray(mat)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise NotPositiveDefiniteError(f"{name} must be square, got shape {mat.shape}")
    scale = max(np.abs(mat).max(), np.finfo(float).tiny)
    asym = np.abs(mat - mat.conj().T).max()
    if asym > SPD_RTOL * scale:
        raise NotPositiveDefiniteError(
            f"{name} is not symmetric: max |G - G^*| = {asym:.3e} (scale {scale:.3e})"
        )
    lmin = float(np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))[0])
    if lmin <= SPD_RTOL * scale:
        raise NotPositiveDefiniteError(
            f"{name} is not positive definite: smallest eigenvalue {lmin:.3e}"
        )
    return lmin


@dataclass(frozen=True)
class GramPair:
    """H and V inner products on a shared coordinate space."""

    G_H: np.ndarray
    G_V: np.ndarray

    def __post_init__(self) -> None:
        G_H = np.array(self.G_H, dtype=float)
        G_V = np.array(self.G_V, dtype=float)
        if G_H.shape != G_V.shape:
            raise ValueError(f"Gram shapes differ: G_H {G_H.shape}, G_V {G_V.shape}")
        check_spd(G_H, "G_H")
        check_spd(G_V, "G_V")
        G_H.setflags(write=False)
        G_V.setflags(write=False)
        object.__setattr__(self, "G_H", G_H)
        object.__setattr__(self, "G_V", G_V)

    @property
    def dim(self) -> int:
        return self.G_H.shape[0]

    @cached_property
    def embedding_constant(self) -> float:
        """``sup ||u||_H / ||u||_V``, i.e. ``lambda_min(G_V, G_H)^(-1/2)``."""
        lam = sla.eigh(self.G_V, self.G_H, eigvals_only=True)
        return float(lam[0] ** -0.5)

    def h_norm(self, u: np.ndarray) -> float:
        u = np.asarray(u)
        return float(np.sqrt(max(np.real(np.vdot(u, self.G_H @ u)), 0.0)))

    def v_norm(self, u: np.ndarray) -> float:
        u = np.asarray(u)
        return float(np.sqrt(max(np.real(np.vdot(u, self.G_V @ u)), 0.0)))


@dataclass(frozen=True)
class SpectralScale:
    """Generalized eigendecomposition ``G_V Phi = G_H Phi diag(lam)``.

    Columns of ``phi`` are G_H-orthonormal.  ``gp`` is kept so coordinates can be
    mapped into the scale basis.
    """

    eigenvalues: np.ndarray
    phi: np.ndarray
    gp: GramPair = field(repr=False)

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    def coefficients(self, u: np.ndarray) -> np.ndarray:
        """Scale-basis coefficients ``c = Phi^* G_H u``."""
        return self.phi.T @ (self.gp.G_H @ np.asarray(u))

    def power_gram(self, sigma: float) -> np.ndarray:
        """Gram matrix of the V_sigma inner product in the original coordinates."""
        B = self.gp.G_H @ self.phi
        return (B * self.eigenvalues**sigma) @ B.T

    def mixed_norm(self, mat: np.ndarray, beta: float, gamma: float) -> float:
        """Norm of the form ``(u, v) -> v^* mat u`` on ``V_beta x V_gamma``."""
        sb = self.eigenvalues ** (-0.5 * beta)
        sg = self.eigenvalues ** (-0.5 * gamma)
        core = self.phi.T @ np.asarray(mat) @ self.phi
        return float(np.linalg.norm(sg[:, None] * core * sb[None, :], 2))


def build_spectral_scale(gp: GramPair) -> SpectralScale:
    """Solve the generalized eigenproblem of ``(G_V, G_H)``."""
    lam, phi = sla.eigh(gp.G_V, gp.G_H)
    resid = np.linalg.norm(gp.G_V @ phi - (gp.G_H @ phi) * lam, "fro")
    bound = EIG_RESIDUAL_RTOL * np.linalg.norm(gp.G_V, "fro")
    if resid > bound:
        raise np.linalg.LinAlgError(
            f"generalized eigensolver residual {resid:.3e} exceeds {bound:.3e}"
        )
    if lam[0] <= 0:
        raise NotPositiveDefiniteError(f"non-positive scale eigenvalue {lam[0]:.3e}")
    lam.setflags(write=False)
    phi.setflags(write=False)
    return SpectralScale(lam, phi, gp)


def interp_norm(u: np.ndarray, scale: SpectralScale, beta: float) -> float:
    """Norm of ``u`` in the complex interpolation space ``[H, V]_beta``.

    Realized spectrally as ``sum_i lam_i^beta |c_i|^2`` with ``c = Phi^* G_H u``.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"interpolation index must lie in [0, 1], got {beta}")
    c = scale.coefficients(u)
    return float(np.sqrt(np.sum(scale.eigenvalues**beta * np.abs(c) ** 2)))


def dual_pairing(w: np.ndarray, v: np.ndarray, gp: GramPair) -> complex | float:
    """``<w, v>`` with ``w`` in V' identified through the H pivot."""
    w = np.asarray(w)
    v = np.asarray(v)
    if w.shape != (gp.dim,) or v.shape != (gp.dim,):
        raise ValueError(
            f"dimension mismatch: w {w.shape}, v {v.shape}, space dim {gp.dim}"
        )
    val = np.vdot(w, gp.G_H @ v)
    if np.isrealobj(w) and np.isrealobj(v):
        return float(np.real(val))
    return complex(val)

"""Time-dependent sesquilinear forms ``a(t; u, v) = v^* A_form(t) u``.

A :class:`FormFamily` is either a plain callable ``t -> A_form(t)`` or an
affine combination ``base + sum_m theta_m(t) B_m``.  The affine layout is what
the example builders produce; the solver engine exploits it, but every
operation also works through :meth:`FormFamily.form_at` alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from maxreg.hilbert import GramPair, SpectralScale, build_spectral_scale

Profile = Callable[[np.ndarray], np.ndarray]

COERCIVITY_FLOOR = 1e-8
DELTA_CAP = 1e6
MODULUS_GRID_POINTS = 64
MODULUS_DYADIC_LEVELS = 10
FIT_MIN_R2 = 0.9


class HypothesisError(ValueError):
    """A form family violates boundedness or quasi-coercivity."""


def _evaluate_profile(profile: Profile, ts: np.ndarray) -> np.ndarray:
    ts = np.asarray(ts, dtype=float)
    try:
        vals = np.asarray(profile(ts), dtype=float)
    except (TypeError, ValueError):
        vals = None
    if vals is None or vals.shape != ts.shape:
        vals = np.array([float(profile(t)) for t in ts.ravel()]).reshape(ts.shape)
    return vals


@dataclass(frozen=True)
class FormFamily:
    """Form family on ``[0, tau]`` sharing the Gram pair ``gp``.

    ``mu`` is the accumulated H-shift: the stored form is ``a(t) + mu [.|.]_H``.
    Differences ``a(t) - a(s)`` never see the shift.
    """

    gp: GramPair
    tau: float
    func: Callable[[float], np.ndarray] | None = None
    base: np.ndarray | None = None
    terms: tuple[tuple[np.ndarray, Profile], ...] = ()
    mu: float = 0.0
    name: str = "matrix"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValueError(f"horizon must be positive, got {self.tau}")
        if (self.func is None) == (self.base is None):
            raise ValueError("give exactly one of `func` or `base`")

    @classmethod
    def from_callable(cls, gp: GramPair, func, tau: float, **kw) -> FormFamily:
        return cls(gp=gp, tau=float(tau), func=func, **kw)

    @classmethod
    def from_affine(
        cls,
        gp: GramPair,
        base: np.ndarray,
        terms: Sequence[tuple[np.ndarray, Profile]],
        tau: float,
        **kw,
    ) -> FormFamily:
        base = np.array(base, dtype=float)
        terms = tuple((np.array(B, dtype=float), prof) for B, prof in terms)
        for B, _ in terms:
            if B.shape != base.shape:
                raise ValueError(f"term shape {B.shape} != base shape {base.shape}")
        return cls(gp=gp, tau=float(tau), base=base, terms=terms, **kw)

    @property
    def dim(self) -> int:
        return self.gp.dim

    @property
    def is_affine(self) -> bool:
        return self.base is not None

    def profiles(self, ts) -> np.ndarray:
        """Profile values ``theta_m(t)``, shape ``(n_terms, len(ts))``."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if not self.terms:
            return np.zeros((0, ts.size))
        return np.stack([_evaluate_profile(prof, ts) for _, prof in self.terms])

    def unshifted_form(self, t: float) -> np.ndarray:
        if self.func is not None:
            return np.asarray(self.func(float(t)), dtype=float)
        out = self.base.copy()
        for (B, _), th in zip(self.terms, self.profiles([t])[:, 0]):
            out += th * B
        return out

    def form_at(self, t: float) -> np.ndarray:
        out = self.unshifted_form(t)
        if self.mu:
            out = out + self.mu * self.gp.G_H
        return out

    def form_difference(self, t: float, s: float) -> np.ndarray:
        """``A_form(t) - A_form(s)``; independent of the shift, bit for bit."""
        if self.func is not None:
            return self.unshifted_form(t) - self.unshifted_form(s)
        diff = np.zeros_like(self.base)
        th = self.profiles([t, s])
        for m, (B, _) in enumerate(self.terms):
            diff += (th[m, 0] - th[m, 1]) * B
        return diff

    def operator_at(self, t: float) -> np.ndarray:
        """Matrix of A(t) acting on H coordinates, ``G_H^{-1} A_form(t)``."""
        return sla.solve(self.gp.G_H, self.form_at(t), assume_a="pos")

    @cached_property
    def is_autonomous(self) -> bool:
        probe = np.linspace(0.0, self.tau, 17)
        if self.is_affine:
            th = self.profiles(probe)
            return bool(np.all(th == th[:, :1]))
        ref = self.unshifted_form(0.0)
        return all(np.array_equal(self.unshifted_form(t), ref) for t in probe[1:])

    @cached_property
    def is_symmetric(self) -> bool:
        probe = np.linspace(0.0, self.tau, 5)
        return all(
            np.array_equal(A, A.T) for A in (self.unshifted_form(t) for t in probe)
        )


def shift(ff: FormFamily, mu: float) -> FormFamily:
    """Add ``mu [.|.]_H`` to every form; differences are untouched."""
    if mu < 0:
        raise ValueError(f"shift must be nonnegative, got {mu}")
    if mu == 0:
        return ff
    return replace(ff, mu=ff.mu + float(mu))


@dataclass(frozen=True)
class Bounds:
    M: float
    alpha1: float
    delta: float


def _v_whitened(ff: FormFamily, t: float, chol: np.ndarray) -> np.ndarray:
    A = ff.form_at(t)
    X = sla.solve_triangular(chol, A, lower=True)
    return sla.solve_triangular(chol, X.T, lower=True).T


def certify_bounds(ff: FormFamily, t_grid: Sequence[float]) -> Bounds:
    """Certify uniform boundedness and quasi-coercivity on ``t_grid``.

    ``M`` is the largest V -> V' norm of the forms.  ``delta`` is the smallest
    value on the ladder ``0, 1, 2, 4, ...`` for which the symmetrized forms
    plus ``delta`` times the H product dominate ``alpha1 ||.||_V^2`` with
    ``alpha1 >= 1e-8``.
    """
    t_grid = np.asarray(list(t_grid), dtype=float)
    if t_grid.size == 0:
        raise ValueError("t_grid is empty")
    if np.any(t_grid < 0) or np.any(t_grid > ff.tau * (1 + 1e-12)):
        raise ValueError(f"t_grid must lie in [0, {ff.tau}]")
    chol = np.linalg.cholesky(ff.gp.G_V)
    H_w = sla.solve_triangular(chol, ff.gp.G_H, lower=True)
    H_w = sla.solve_triangular(chol, H_w.T, lower=True).T
    H_w = 0.5 * (H_w + H_w.T)

    M = 0.0
    sym_parts = []
    for t in t_grid:
        Aw = _v_whitened(ff, t, chol)
        M = max(M, float(np.linalg.norm(Aw, 2)))
        sym_parts.append(0.5 * (Aw + Aw.conj().T))

    def alpha_for(delta: float) -> float:
        return min(float(np.linalg.eigvalsh(S + delta * H_w)[0]) for S in sym_parts)

    delta = 0.0
    while delta <= DELTA_CAP:
        a1 = alpha_for(delta)
        if a1 >= COERCIVITY_FLOOR:
            return Bounds(M=M, alpha1=a1, delta=delta)
        delta = 1.0 if delta == 0 else 2.0 * delta
    raise HypothesisError(
        f"family {ff.name!r} is not quasi-coercive: no delta <= {DELTA_CAP:g} "
        f"gives alpha1 >= {COERCIVITY_FLOOR:g}"
    )


@dataclass(frozen=True)
class ModulusCertificate:
    """Sampled modulus of continuity of ``t -> a(t)`` in ``V_beta x V_gamma``."""

    beta: float
    gamma: float
    samples: tuple[tuple[float, float], ...]
    holder_alpha: float
    holder_C: float
    r_squared: float
    accepted: bool
    raw: tuple[float, ...] = field(default=(), repr=False)

    def omega(self, h):
        """Fitted power law ``C h^alpha``."""
        return self.holder_C * np.asarray(h, dtype=float) ** self.holder_alpha


def default_gaps(tau: float) -> np.ndarray:
    uniform = tau * np.arange(1, MODULUS_GRID_POINTS) / (MODULUS_GRID_POINTS - 1)
    dyadic = tau * 2.0 ** -np.arange(0, MODULUS_DYADIC_LEVELS + 1)
    return np.unique(np.concatenate([uniform, dyadic]))


def fit_power_law(h: np.ndarray, w: np.ndarray) -> tuple[float, float, float]:
    """Least squares fit of ``log w = log C + alpha log h``; returns (alpha, C, R^2)."""
    h = np.asarray(h, dtype=float)
    w = np.asarray(w, dtype=float)
    mask = (w > 0) & (h > 0)
    if mask.sum() < 2:
        return math.nan, math.nan, 0.0
    x, y = np.log(h[mask]), np.log(w[mask])
    A = np.vstack([x, np.ones_like(x)]).T
    (alpha, logC), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ np.array([alpha, logC])
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return float(alpha), float(math.exp(logC)), r2


def estimate_modulus(
    ff: FormFamily,
    beta: float,
    gamma: float,
    h_grid: Sequence[float] | None = None,
    scale: SpectralScale | None = None,
) -> ModulusCertificate:
    """Estimate ``omega(h)`` with ``|a(t;u,v)-a(s;u,v)| <= omega(|t-s|) ||u||_{V_beta} ||v||_{V_gamma}``.

    For each gap ``h`` the maximum is taken over start points ``s`` on a uniform
    64-point grid (``s = 0`` always included).  The samples are replaced by
    their running maximum before a log-log power-law fit.
    """
    for name, val in (("beta", beta), ("gamma", gamma)):
        if not 0.0 <= val <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {val}")
    gaps = default_gaps(ff.tau) if h_grid is None else np.asarray(list(h_grid), float)
    if gaps.size == 0:
        raise ValueError("h_grid is empty")
    gaps = np.sort(gaps)
    if scale is None:
        scale = build_spectral_scale(ff.gp)

    lam = scale.eigenvalues
    left = scale.phi * lam ** (-0.5 * gamma)
    right = scale.phi * lam ** (-0.5 * beta)
    starts_all = ff.tau * np.arange(MODULUS_GRID_POINTS) / (MODULUS_GRID_POINTS - 1)

    if ff.is_affine:
        cores = [left.T @ B @ right for B, _ in ff.terms]
        single = [float(np.linalg.norm(C, 2)) for C in cores] if len(cores) == 1 else None

        def norm_of(t, s):
            th = ff.profiles([t, s])
            d = th[:, 0] - th[:, 1]
            if single is not None:
                return abs(d[0]) * single[0]
            if not np.any(d):
                return 0.0
            return float(np.linalg.norm(sum(c * C for c, C in zip(d, cores)), 2))
    else:

        def norm_of(t, s):
            D = ff.form_difference(t, s)
            if not np.any(D):
                return 0.0
            return float(np.linalg.norm(left.T @ D @ right, 2))

    raw = []
    for h in gaps:
        starts = starts_all[starts_all + h <= ff.tau * (1 + 1e-12)]
        if starts.size == 0 or starts[0] != 0.0:
            starts = np.concatenate([[0.0], starts])
        best = 0.0
        for s in starts:
            best = max(best, norm_of(min(s + h, ff.tau), s))
        raw.append(best)
    raw = np.array(raw)
    env = np.maximum.accumulate(raw)
    samples = tuple((float(h), float(w)) for h, w in zip(gaps, env))

    if not np.any(env > 0):
        return ModulusCertificate(
            beta, gamma, samples, holder_alpha=1.0, holder_C=0.0,
            r_squared=1.0, accepted=True, raw=tuple(raw),
        )
    alpha, C, r2 = fit_power_law(gaps, env)
    return ModulusCertificate(
        beta, gamma, samples, holder_alpha=alpha, holder_C=C,
        r_squared=r2, accepted=r2 >= FIT_MIN_R2, raw=tuple(raw),
    )

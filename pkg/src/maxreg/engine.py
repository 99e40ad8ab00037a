"""The operators L, R, Q and the Volterra solve ``(I - Q) h = L f + R u0``.

With ``h = A(.) u(.)`` the solution satisfies

    h(t) = (Q h)(t) + (L f)(t) + (R u0)(t),

    (L f)(t) = A(t) int_0^t exp(-(t-s)A(t)) f(s) ds,
    (R u0)(t) = A(t) exp(-t A(t)) u0,
    (Q g)(t) = int_0^t A(t) exp(-(t-s)A(t)) (A(t) - A(s)) A(s)^{-1} g(s) ds.

Every node ``t_k`` works in the eigenbasis of the frozen operator ``A(t_k)``,
so semigroup factors reduce to scalar exponentials handled by the kernels in
:mod:`maxreg.kernels`.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad_vec

from maxreg import kernels
from maxreg.forms import FormFamily, shift
from maxreg.grid import GridFunction, check_same_grid
from maxreg.operators import EigenData

log = logging.getLogger(__name__)

NEUMANN_RTOL = 1e-10
NEUMANN_MAXITER = 200
MAX_LEVELS = 60
GENERIC_CACHE_LIMIT = 5e7


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, residuals):
        super().__init__(msg)
        self.residuals = list(residuals)


class DiniViolation(ValueError):
    """A power-law modulus too rough for the kernel singularity."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature layout for the singular Volterra kernel of Q.

    Away from ``s = t`` each grid interval gets ``panels_per_interval`` Gauss
    panels.  The last interval is graded geometrically toward ``s = t`` with
    ratio ``grading_ratio`` until the stiffest mode is resolved; the final
    panel uses product integration against ``r^(modulus_alpha - singular_exponent)``
    when a power-law modulus is known, adaptive quadrature otherwise.
    """

    panels_per_interval: int = 2
    grading_ratio: float = 0.5
    gauss_order: int = 4
    singular_exponent: float = 1.0
    modulus_alpha: float | None = None
    stiffness_cut: float = 1e-6

    def __post_init__(self) -> None:
        if self.panels_per_interval < 1 or self.gauss_order < 1:
            raise ValueError("panel and Gauss counts must be positive")
        if not 0.0 < self.grading_ratio < 1.0:
            raise ValueError(f"grading ratio must lie in (0, 1), got {self.grading_ratio}")
        if self.singular_exponent <= 0:
            raise ValueError("singular exponent must be positive")
        if self.modulus_alpha is not None:
            if self.modulus_alpha < 0:
                raise ValueError("modulus exponent must be nonnegative")
            if self.modulus_alpha <= self.singular_exponent - 1.0:
                raise DiniViolation(
                    f"modulus exponent {self.modulus_alpha} <= gamma/2 = "
                    f"{self.singular_exponent - 1.0}: the Dini integral of "
                    "omega(t) / t^(1 + gamma/2) diverges"
                )

    @classmethod
    def for_exponents(cls, gamma: float, alpha: float | None, **kw) -> QuadratureSpec:
        return cls(singular_exponent=1.0 + 0.5 * gamma, modulus_alpha=alpha, **kw)

    def final_weight(self, r_end: float) -> float:
        """Product-integration weight for the panel ``[0, r_end]`` sampled at its midpoint."""
        e = self.modulus_alpha - self.singular_exponent
        return r_end * 2.0**e / (e + 1.0)


@dataclass
class _NodeRule:
    r: np.ndarray
    w: np.ndarray
    jl: np.ndarray
    lam: np.ndarray
    s: np.ndarray
    dth: np.ndarray | None = None
    forms: np.ndarray | None = None
    r_end: float = 0.0


@dataclass
class EnginePlan:
    """Everything about a (family, grid, quadrature) triple that does not depend on data."""

    ff: FormFamily
    grid: np.ndarray
    quad: QuadratureSpec
    eig: list = field(default_factory=list)
    rules: list = field(default_factory=list)

    @property
    def N(self) -> int:
        return self.grid.size - 1

    @property
    def G_H(self) -> np.ndarray:
        return self.ff.gp.G_H

    def solve_nodes(self, G: np.ndarray) -> np.ndarray:
        """``A(t_k)^{-1} g_k`` at every node."""
        out = np.empty_like(G, dtype=float)
        for k, e in enumerate(self.eig):
            out[k] = e.back(e.coords(G[k]) / e.d)
        return out

    def apply_nodes(self, U: np.ndarray) -> np.ndarray:
        """``A(t_k) u_k`` at every node."""
        out = np.empty_like(U, dtype=float)
        for k, e in enumerate(self.eig):
            out[k] = e.back(e.coords(U[k]) * e.d)
        return out


def _gauss(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def build_plan(ff: FormFamily, grid: np.ndarray, quad: QuadratureSpec) -> EnginePlan:
    grid = np.asarray(grid, dtype=float)
    if grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
        raise ValueError("engine grid must start at 0 and increase strictly")
    if grid[-1] > ff.tau * (1 + 1e-12):
        raise ValueError(f"grid end {grid[-1]} exceeds the horizon {ff.tau}")
    plan = EnginePlan(ff, grid, quad)
    symmetric = ff.is_symmetric
    for t in grid:
        plan.eig.append(EigenData.from_form(ff.form_at(t), ff.gp.G_H, symmetric))
    for e in plan.eig:
        if np.any(np.real(e.d) <= 0):
            raise ValueError(
                "engine needs coercive forms (positive spectrum); apply a shift first"
            )
    if ff.is_autonomous:
        return plan

    xg, wg = _gauss(quad.gauss_order)
    P = quad.panels_per_interval
    N = grid.size - 1
    # far-field points: P Gauss panels per interval, ordered by interval
    sub = (np.arange(P)[:, None] + xg[None, :]).ravel() / P
    wsub = np.tile(wg, P) / P
    dt = np.diff(grid)
    far_s = (grid[:-1, None] + dt[:, None] * sub[None, :]).ravel()
    far_w = (dt[:, None] * wsub[None, :]).ravel()
    far_j = np.repeat(np.arange(N), sub.size)
    far_lam = np.tile(sub, N)
    per = sub.size
    far_th = ff.profiles(far_s) if ff.is_affine else None
    far_forms = None
    if not ff.is_affine:
        npts = far_s.size * ff.dim**2
        if npts > GENERIC_CACHE_LIMIT:
            warnings.warn(f"caching {npts:.2e} form entries for a non-affine family")
        far_forms = np.stack([ff.unshifted_form(s) for s in far_s])

    q = quad.grading_ratio
    for k in range(1, N + 1):
        tk = grid[k]
        delta = dt[k - 1]
        lam_max = float(np.max(np.abs(plan.eig[k].d)))
        target = min(delta * q, quad.stiffness_cut / lam_max)
        levels = int(np.clip(math.ceil(math.log(target / delta) / math.log(q)), 1, MAX_LEVELS))
        edges = delta * q ** np.arange(levels + 1)
        lo, hi = edges[1:], edges[:-1]
        near_r = (lo[:, None] + (hi - lo)[:, None] * xg[None, :]).ravel()
        near_w = ((hi - lo)[:, None] * wg[None, :]).ravel()
        r_end = float(edges[-1])
        if quad.modulus_alpha is not None:
            near_r = np.append(near_r, 0.5 * r_end)
            near_w = np.append(near_w, quad.final_weight(r_end))
        nf = (k - 1) * per
        s = np.concatenate([far_s[:nf], tk - near_r])
        rule = _NodeRule(
            r=tk - s,
            w=np.concatenate([far_w[:nf], near_w]),
            jl=np.concatenate([far_j[:nf], np.full(near_r.size, k - 1)]),
            lam=np.concatenate([far_lam[:nf], 1.0 - near_r / delta]),
            s=s,
            r_end=r_end,
        )
        rule.r[nf:] = near_r
        if ff.is_affine:
            th_k = ff.profiles([tk])
            th_near = ff.profiles(tk - near_r)
            rule.dth = th_k - np.concatenate([far_th[:, :nf], th_near], axis=1)
        else:
            near_forms = np.stack([ff.unshifted_form(x) for x in tk - near_r])
            rule.forms = np.concatenate([far_forms[:nf], near_forms])
        plan.rules.append(rule)
    return plan


def _as_plan(ff_or_plan, grid, quad) -> EnginePlan:
    if isinstance(ff_or_plan, EnginePlan):
        return ff_or_plan
    return build_plan(ff_or_plan, grid, quad or QuadratureSpec())


def apply_L(
    ff: FormFamily | EnginePlan,
    f: GridFunction,
    quad: QuadratureSpec | None = None,
    damping: float = 0.0,
) -> GridFunction:
    """``(L g)(t_k)`` for ``g(s) = e^{-damping s} f(s)`` with ``f`` piecewise linear.

    Without damping this uses integration by parts,
    ``L f(t) = f(t) - e^{-tA(t)} f(0) - int_0^t e^{-(t-s)A(t)} f'(s) ds``, and with
    ``f'`` piecewise constant the remaining integral is exact.  With damping the
    exponential weight is folded into the kernel, which keeps the result exact.
    """
    plan = _as_plan(ff, f.grid, quad)
    check_same_grid(plan.grid, f.grid)
    F = f.values
    out = np.zeros_like(F, dtype=float)
    if not np.any(F):
        return f.with_values(out, exclude_origin=False)
    t = plan.grid
    if damping:
        FG = F @ plan.G_H
        for k in range(1, t.size):
            e = plan.eig[k]
            C = e.W.conj().T @ FG[: k + 1].T
            acc = kernels.linear_duhamel_accumulate(e.d - damping, t[k], t[: k + 1], C)
            out[k] = np.exp(-damping * t[k]) * e.back(e.d * acc)
        return f.with_values(out, exclude_origin=False)
    slopes = np.diff(F, axis=0) / np.diff(t)[:, None]
    GS = slopes @ plan.G_H  # G_H symmetric
    for k in range(1, t.size):
        e = plan.eig[k]
        c0 = e.coords(F[0]) * np.exp(-t[k] * e.d)
        C = e.W.conj().T @ GS[:k].T
        acc = kernels.duhamel_accumulate(e.d, t[k], t[: k + 1], C)
        out[k] = F[k] - e.back(c0 + acc)
    return f.with_values(out, exclude_origin=False)


def apply_R(ff: FormFamily | EnginePlan, u0: np.ndarray, grid: np.ndarray | None = None) -> GridFunction:
    """``(R u0)(t_k) = A(t_k) e^{-t_k A(t_k)} u0``.

    The node ``t = 0`` stores the finite-dimensional limit ``A(0) u0`` and is
    excluded from L_p sums.
    """
    plan = ff if isinstance(ff, EnginePlan) else build_plan(ff, grid, QuadratureSpec())
    u0 = np.asarray(u0, dtype=float)
    out = np.zeros((plan.grid.size, plan.ff.dim))
    if np.any(u0):
        for k, (tk, e) in enumerate(zip(plan.grid, plan.eig)):
            out[k] = e.back(e.d * np.exp(-tk * e.d) * e.coords(u0))
    return GridFunction(plan.grid, out, exclude_origin=True)


def _final_panel_adaptive(plan: EnginePlan, k: int, Y: np.ndarray, e: EigenData) -> np.ndarray:
    ff = plan.ff
    tk = plan.grid[k]
    delta = tk - plan.grid[k - 1]
    r_end = plan.rules[k - 1].r_end

    def integrand(r):
        lam = 1.0 - r / delta
        y = (1.0 - lam) * Y[k - 1] + lam * Y[k]
        z = e.coords_dual(ff.form_difference(tk, tk - r) @ y)
        val = e.d * np.exp(-r * e.d) * z
        return np.concatenate([np.real(val), np.imag(val)])

    res, _ = quad_vec(integrand, 0.0, r_end, epsabs=1e-9)
    n = e.d.size
    return res[:n] + 1j * res[n:] if not e.is_real else res[:n]


def apply_Q(ff: FormFamily | EnginePlan, g: GridFunction, quad: QuadratureSpec | None = None) -> GridFunction:
    """``(Q g)(t_k)`` with the graded singular quadrature of :class:`QuadratureSpec`.

    ``A(s)^{-1} g(s)`` is interpolated linearly between nodes.
    """
    plan = _as_plan(ff, g.grid, quad)
    check_same_grid(plan.grid, g.grid)
    ff = plan.ff
    out = np.zeros((plan.grid.size, ff.dim))
    if ff.is_autonomous or not np.any(g.values):
        return g.with_values(out, exclude_origin=False)
    Y = plan.solve_nodes(g.values)
    if ff.is_affine:
        BY = np.stack([B @ Y.T for B, _ in ff.terms])  # (M, n, N+1)
    for k in range(1, plan.grid.size):
        e = plan.eig[k]
        rule = plan.rules[k - 1]
        if ff.is_affine:
            Pk = np.einsum("ji,mjk->mik", e.W.conj(), BY[:, :, : k + 1])
            acc = kernels.affine_accumulate(e.d, rule.r, rule.w, rule.dth, rule.jl, rule.lam, Pk)
        else:
            Ys = Y[rule.jl] * (1.0 - rule.lam)[:, None] + Y[rule.jl + 1] * rule.lam[:, None]
            dA = ff.unshifted_form(plan.grid[k])[None] - rule.forms
            wv = np.einsum("qij,qj->iq", dA, Ys)
            acc = kernels.kernel_accumulate(e.d, rule.r, rule.w, e.coords_dual(wv))
        if plan.quad.modulus_alpha is None:
            acc = acc + _final_panel_adaptive(plan, k, Y, e)
        out[k] = e.back(acc)
    return g.with_values(out, exclude_origin=False)


@dataclass(frozen=True)
class Solution:
    u: GridFunction
    u_prime: GridFunction
    Au: GridFunction
    neumann_iters: int
    residuals: tuple[float, ...]
    mu: float = 0.0


def neumann_solve(plan: EnginePlan, rhs: GridFunction, rtol=NEUMANN_RTOL, maxiter=NEUMANN_MAXITER):
    """Iterate ``h <- Q h + rhs`` until the relative update drops below ``rtol``."""
    h = rhs.values.copy()
    residuals = []
    G = plan.G_H
    if not np.any(h):
        return h, 0, residuals
    for it in range(1, maxiter + 1):
        h_new = apply_Q(plan, rhs.with_values(h)).values + rhs.values
        diff = GridFunction(rhs.grid, h_new - h).norm(G, 2)
        size = GridFunction(rhs.grid, h_new).norm(G, 2)
        rel = diff / size if size > 0 else 0.0
        residuals.append(rel)
        h = h_new
        log.debug("neumann iteration %d: relative update %.3e", it, rel)
        if rel < rtol:
            return h, it, residuals
    raise ConvergenceError(
        f"Neumann iteration did not reach {rtol:g} in {maxiter} steps "
        f"(last update {residuals[-1]:.3e})",
        residuals,
    )


def solve_representation(
    ff: FormFamily,
    f: GridFunction,
    u0: np.ndarray,
    quad: QuadratureSpec | None = None,
    mu: float = 0.0,
    plan: EnginePlan | None = None,
) -> Solution:
    """Solve ``u' + A(t) u = f``, ``u(0) = u0`` through ``(I - Q) A u = L f + R u0``.

    With ``mu > 0`` the problem for ``v = e^{-mu t} u`` and the shifted forms is
    solved and transformed back.
    """
    quad = quad or QuadratureSpec()
    u0 = np.asarray(u0, dtype=float)
    grid = f.grid
    ff_mu = shift(ff, mu)
    if plan is None:
        plan = build_plan(ff_mu, grid, quad)
    elif plan.ff.mu != ff.mu + mu:
        raise ValueError("plan was built for a different shift")
    check_same_grid(plan.grid, grid)
    rhs = apply_L(plan, f, damping=mu) + apply_R(plan, u0)
    h, iters, residuals = neumann_solve(plan, rhs)
    v = plan.solve_nodes(h)
    grow = np.exp(mu * grid)[:, None]
    u = v * grow
    Au = (h - mu * v) * grow
    return Solution(
        u=GridFunction(grid, u, p=f.p),
        u_prime=GridFunction(grid, f.values - Au, p=f.p, exclude_origin=True),
        Au=GridFunction(grid, Au, p=f.p, exclude_origin=True),
        neumann_iters=iters,
        residuals=tuple(residuals),
        mu=mu,
    )


@dataclass(frozen=True)
class QNormEstimate:
    """Lower bound for ``||Q||`` on discrete ``L_p(0, tau; H)``."""

    value: float
    ratios: tuple[float, ...]
    lower_bound: bool = True


def q_norm_estimate(
    ff: FormFamily,
    quad: QuadratureSpec,
    p: float,
    mu: float,
    grid: np.ndarray,
    samples: int = 50,
    power_steps: int = 5,
    seed: int = 0,
) -> QNormEstimate:
    """Largest ``||Q g||_p / ||g||_p`` over random ``g`` plus power-iteration refinements."""
    plan = build_plan(shift(ff, mu), grid, quad)
    G = plan.G_H
    if plan.ff.is_autonomous:
        return QNormEstimate(0.0, (0.0,))
    rng = np.random.default_rng(seed)
    ratios = []
    best, best_g = -1.0, None
    L = np.linalg.cholesky(G)
    for _ in range(samples):
        # white noise in the H metric
        vals = np.linalg.solve(L.T, rng.standard_normal((ff.dim, grid.size))).T
        g = GridFunction(grid, vals, p=p)
        g = g.scaled(1.0 / g.norm(G))
        ratio = apply_Q(plan, g).norm(G)
        ratios.append(ratio)
        if ratio > best:
            best, best_g = ratio, g
    g = best_g
    for _ in range(power_steps):
        Qg = apply_Q(plan, g)
        nq = Qg.norm(G)
        if nq == 0:
            break
        g = Qg.scaled(1.0 / nq)
        ratio = apply_Q(plan, g).norm(G)
        ratios.append(ratio)
        best = max(best, ratio)
    return QNormEstimate(float(best), tuple(ratios))

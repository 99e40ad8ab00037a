"""Dini classification, maximal-regularity measurements, sweeps and reports."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from maxreg.engine import DiniViolation, QuadratureSpec, Solution, q_norm_estimate, solve_representation
from maxreg.forms import FormFamily, certify_bounds, shift
from maxreg.grid import GridFunction, uniform_grid
from maxreg.operators import frac_power_apply, operator_slice, real_interp_norm
from maxreg.pde import Expected, build_example

log = logging.getLogger(__name__)

U0_CLASSES = ("zero", "real_interp", "sqrt_domain")
F_KINDS = ("zero", "random_smooth", "manufactured")
DEFAULT_GRIDS = (100, 200, 400, 800)
DEFAULT_SWEEP_ALPHAS = (0.1, 0.2, 0.3, 0.5)
STABILITY_SPREAD = 0.2
SQRT_DOMAIN_POWER = 0.6
INTERP_MARGIN = 0.1

CSV_COLUMNS = (
    "example", "n", "N", "p", "alpha", "beta", "gamma", "u_Lp", "uprime_Lp", "Au_Lp",
    "f_Lp", "u0_interp", "C_est", "dini_main", "dini_p", "admissible", "q_norm_est",
    "neumann_iters",
)


class SolverFailure(RuntimeError):
    """A solve failed on one grid; the cause is chained."""


@dataclass(frozen=True)
class DiniResult:
    """Closed-form Dini integrals for ``omega(t) = t^alpha``.

    ``main_value`` is ``int_0^tau t^(alpha - gamma/2 - 1) dt`` and ``p_value``
    is ``int_0^tau t^(p(alpha - (beta+gamma)/2)) dt``; both are ``inf`` when
    the integral diverges.
    """

    cond_main: bool
    main_value: float
    cond_p: bool
    p_value: float

    def admissible(self, with_data: bool) -> bool:
        return self.cond_main and (self.cond_p or not with_data)


def dini_classify(alpha: float, gamma: float, beta: float, p: float, tau: float) -> DiniResult:
    if tau <= 0:
        raise ValueError(f"horizon must be positive, got {tau}")
    if not 1.0 < p < math.inf:
        raise ValueError(f"p must lie in (1, inf), got {p}")
    e_main = alpha - 0.5 * gamma
    e_p = p * (alpha - 0.5 * (beta + gamma)) + 1.0
    main = tau**e_main / e_main if e_main > 0 else math.inf
    pv = tau**e_p / e_p if e_p > 0 else math.inf
    return DiniResult(e_main > 0, main, e_p > 0, pv)


def make_quadrature(
    expected: Expected,
    alpha: float | None,
    strict: bool = True,
    **kw,
) -> QuadratureSpec:
    """Quadrature with the kernel exponent ``1 + gamma/2`` of the example.

    With ``strict=False`` an exponent violating the Dini condition falls back
    to the exponent ``1`` of the H-norm kernel, which is always integrable on
    a Galerkin space.
    """
    if alpha is not None and alpha <= 0.5 * expected.gamma:
        if strict:
            raise DiniViolation(
                f"alpha = {alpha} <= gamma/2 = {0.5 * expected.gamma}: "
                "the Dini integral of omega(t)/t^(1 + gamma/2) diverges"
            )
        return QuadratureSpec.for_exponents(0.0, alpha if alpha > 0 else None, **kw)
    return QuadratureSpec.for_exponents(expected.gamma, alpha, **kw)


# ----------------------------------------------------------------- data


def smooth_vector(dim: int, rng: np.random.Generator, modes: int = 5) -> np.ndarray:
    """Random combination of low cosine modes sampled at ``dim`` points."""
    xi = np.linspace(0.0, 1.0, dim)
    k = np.arange(modes)
    c = rng.standard_normal(modes) / (1.0 + k)
    return np.cos(np.pi * np.outer(xi, k)) @ c


def make_source(ff: FormFamily, kind: str, seed: int = 0):
    """Source term ``t -> f(t)`` and, for manufactured data, the exact solution."""
    if kind not in F_KINDS:
        raise ValueError(f"f kind must be one of {F_KINDS}, got {kind!r}")
    n = ff.dim
    if kind == "zero":
        return (lambda t: np.zeros(n)), None
    rng = np.random.default_rng(seed)
    if kind == "random_smooth":
        S = np.column_stack([smooth_vector(n, rng) for _ in range(4)])
        amp = rng.standard_normal(4)
        freq = rng.uniform(0.5, 4.0, 4)
        phase = rng.uniform(0.0, 2 * np.pi, 4)
        return (lambda t: S @ (amp * np.cos(freq * t + phase))), None
    w = smooth_vector(n, rng)
    exact = lambda t: math.sin(t) * w  # noqa: E731
    return (lambda t: math.cos(t) * w + math.sin(t) * (ff.operator_at(t) @ w)), exact


def make_u0(ff: FormFamily, u0_class: str, p: float, seed: int = 0, delta: float = 0.0) -> np.ndarray:
    """Initial value of the requested regularity class.

    ``real_interp`` applies ``(delta + A(0))^(-theta)`` with
    ``theta = 1 - 1/p + 0.1`` (capped at 1) to a smooth random vector;
    ``sqrt_domain`` uses ``theta = 0.6``.
    """
    if u0_class not in U0_CLASSES:
        raise ValueError(f"u0 class must be one of {U0_CLASSES}, got {u0_class!r}")
    if u0_class == "zero":
        return np.zeros(ff.dim)
    w = smooth_vector(ff.dim, np.random.default_rng(seed))
    theta = SQRT_DOMAIN_POWER if u0_class == "sqrt_domain" else min(1.0, 1.0 - 1.0 / p + INTERP_MARGIN)
    slc = operator_slice(shift(ff, delta), 0.0)
    eig = slc.eigen()
    return eig.apply(eig.d ** (-theta), w)


def u0_norm(ff: FormFamily, u0: np.ndarray, u0_class: str, p: float, delta: float = 0.0) -> float:
    """Norm of ``u0`` in the initial-value space matching its class."""
    if u0_class == "zero" or not np.any(u0):
        return 0.0
    slc = operator_slice(shift(ff, delta), 0.0)
    if u0_class == "sqrt_domain":
        if p != 2:
            raise ValueError("the square-root domain class is the trace space for p = 2 only")
        return slc.h_norm(frac_power_apply(slc, 0.5, u0))
    return real_interp_norm(u0, slc, p, tau=ff.tau)


# ----------------------------------------------------------------- problems


@dataclass(frozen=True)
class EvolutionProblem:
    family: FormFamily
    p: float
    source: Callable[[float], np.ndarray]
    u0: np.ndarray
    u0_class: str = "zero"
    expected: Expected = field(default_factory=lambda: Expected(0.0, 0.0, 0.0))
    alpha: float | None = None
    delta: float = 0.0

    def __post_init__(self) -> None:
        if not 1.0 < self.p < math.inf:
            raise ValueError(f"p must lie in (1, inf), got {self.p}")
        if self.u0_class not in U0_CLASSES:
            raise ValueError(f"u0 class must be one of {U0_CLASSES}, got {self.u0_class!r}")
        u0 = np.asarray(self.u0, dtype=float)
        if u0.shape != (self.family.dim,):
            raise ValueError(f"u0 has shape {u0.shape}, expected ({self.family.dim},)")
        if self.u0_class == "zero" and np.any(u0):
            raise ValueError("u0 must vanish for the 'zero' class")
        object.__setattr__(self, "u0", u0)

    @property
    def with_data(self) -> bool:
        return self.u0_class != "zero"

    def dini(self) -> DiniResult:
        a = self.alpha if self.alpha is not None else 1.0
        e = self.expected
        return dini_classify(a, e.gamma, e.beta, self.p, self.family.tau)


def build_problem(
    example: str,
    p: float,
    alpha: float,
    n: int | None = None,
    u0_class: str = "zero",
    u0_seed: int = 0,
    f_kind: str = "random_smooth",
    f_seed: int = 0,
    tau: float = 1.0,
    beta_gamma: Sequence[float] | None = None,
    **params,
) -> EvolutionProblem:
    """Assemble an example family together with its data."""
    kw = dict(params, alpha=alpha, tau=tau)
    if n is not None:
        kw["n"] = n
    ff, _, expected = build_example(example, **kw)
    if beta_gamma is not None:
        b, g = beta_gamma
        expected = Expected(float(b), float(g), 0.5 * float(g))
    bounds = certify_bounds(ff, np.linspace(0.0, tau, 17))
    source, _ = make_source(ff, f_kind, f_seed)
    u0 = make_u0(ff, u0_class, p, u0_seed, bounds.delta)
    return EvolutionProblem(ff, p, source, u0, u0_class, expected, alpha, bounds.delta)


@dataclass(frozen=True)
class GridSolve:
    N: int
    f: GridFunction
    solution: Solution
    q_norm_est: float = math.nan


def solve_on_grid(
    problem: EvolutionProblem,
    N: int,
    quad: QuadratureSpec,
    mu: float = 0.0,
    q_samples: int = 0,
) -> GridSolve:
    t = uniform_grid(N, problem.family.tau)
    f = GridFunction.sample(t, problem.source, p=problem.p)
    sol = solve_representation(problem.family, f, problem.u0, quad, mu=mu)
    qn = math.nan
    if q_samples:
        qn = q_norm_estimate(problem.family, quad, problem.p, mu, t, samples=q_samples, power_steps=2).value
    return GridSolve(N, f, sol, qn)


def ode_residual(problem: EvolutionProblem, gs: GridSolve, p: float) -> float:
    """``||u' + A u - f||_p / ||f||_p`` with ``A u`` recomputed from the forms."""
    ff = problem.family
    sol = gs.solution
    t = gs.f.grid
    Au = np.array([ff.operator_at(tk) @ uk for tk, uk in zip(t, sol.u.values)])
    res = GridFunction(t, sol.u_prime.values + Au - gs.f.values, exclude_origin=True)
    G = ff.gp.G_H
    fn = gs.f.norm(G, p)
    return res.norm(G, p) / fn if fn > 0 else res.norm(G, p)


@dataclass
class RegularityReport:
    example: str
    n: int
    p: float
    alpha: float | None
    beta: float
    gamma: float
    norms: dict
    rhs: dict
    C_est: float
    dini: dict
    admissible: bool
    refinement_trace: list
    rows: list
    stable: bool
    zero_denominator: bool = False

    def as_dict(self) -> dict:
        return asdict(self)


def regularity_report(problem: EvolutionProblem, solves: Sequence[GridSolve], p: float | None = None) -> RegularityReport:
    """Norms and ``C_est`` per grid, in the exponent ``p`` (default: the problem's)."""
    p = problem.p if p is None else p
    ff = problem.family
    G = ff.gp.G_H
    e = problem.expected
    dini = dini_classify(problem.alpha if problem.alpha is not None else 1.0, e.gamma, e.beta, p, ff.tau)
    admissible = dini.admissible(problem.with_data)
    u0n = u0_norm(ff, problem.u0, problem.u0_class, p, problem.delta)
    rows, trace = [], []
    zero_den = False
    norms = rhs = {}
    C = 0.0
    for gs in solves:
        sol = gs.solution
        norms = {
            "u_Lp": sol.u.norm(G, p),
            "uprime_Lp": sol.u_prime.norm(G, p),
            "Au_Lp": sol.Au.norm(G, p),
        }
        rhs = {"f_Lp": gs.f.norm(G, p), "u0_interp": u0n}
        den = rhs["f_Lp"] + u0n
        zero_den = den == 0
        C = sum(norms.values()) / den if den > 0 else 0.0
        trace.append((gs.N, C))
        rows.append({
            "example": ff.name, "n": ff.dim, "N": gs.N, "p": p, "alpha": problem.alpha,
            "beta": e.beta, "gamma": e.gamma, **norms, **rhs, "C_est": C,
            "dini_main": dini.cond_main, "dini_p": dini.cond_p, "admissible": admissible,
            "q_norm_est": gs.q_norm_est, "neumann_iters": sol.neumann_iters,
            "ode_residual": ode_residual(problem, gs, p),
        })
    cs = [c for _, c in trace]
    stable = bool(cs) and (min(cs) == max(cs) or (min(cs) > 0 and max(cs) / min(cs) - 1 <= STABILITY_SPREAD))
    return RegularityReport(
        example=ff.name, n=ff.dim, p=p, alpha=problem.alpha, beta=e.beta, gamma=e.gamma,
        norms=norms, rhs=rhs, C_est=C, dini=asdict(dini), admissible=admissible,
        refinement_trace=trace, rows=rows, stable=stable, zero_denominator=zero_den,
    )


def verify_maxreg(
    problem: EvolutionProblem,
    grids: Sequence[int] = DEFAULT_GRIDS,
    quad: QuadratureSpec | None = None,
    mu: float = 0.0,
    q_samples: int = 0,
) -> RegularityReport:
    """Solve on each grid and collect the a priori quotient ``C_est``."""
    if quad is None:
        quad = make_quadrature(problem.expected, problem.alpha, strict=False)
    solves = []
    for N in grids:
        try:
            solves.append(solve_on_grid(problem, N, quad, mu, q_samples if N == grids[0] else 0))
        except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
            raise SolverFailure(f"{problem.family.name}, N = {N}: {exc}") from exc
        log.info("%s N=%d solved in %d Neumann steps", problem.family.name, N, solves[-1].solution.neumann_iters)
    return regularity_report(problem, solves)


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    admissible_theory: bool
    trace: tuple
    stable: bool
    report: RegularityReport = field(repr=False, compare=False)


def exponent_sweep(
    example: str,
    alphas: Sequence[float] = DEFAULT_SWEEP_ALPHAS,
    p: float = 2.0,
    grids: Sequence[int] = DEFAULT_GRIDS,
    **problem_kw,
) -> list[SweepRow]:
    """Theory flag against observed ``C_est`` stability for each Hölder exponent."""
    rows = []
    for a in alphas:
        prob = build_problem(example, p, a, **problem_kw)
        rep = verify_maxreg(prob, grids)
        rows.append(SweepRow(a, rep.admissible, tuple(rep.refinement_trace), rep.stable, rep))
    return rows


# ----------------------------------------------------------------- output


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def emit_report(report, fmt: str, path: str | Path) -> Path:
    """Write one report (or a list of them) as JSON or CSV."""
    reports = report if isinstance(report, (list, tuple)) else [report]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        payload = [r.as_dict() if hasattr(r, "as_dict") else r for r in reports]
        path.write_text(json.dumps(_jsonable(payload if len(payload) > 1 else payload[0]), indent=2))
    elif fmt == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, extrasaction="ignore")
            writer.writeheader()
            for r in reports:
                for row in r.rows:
                    writer.writerow(_jsonable(row))
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path

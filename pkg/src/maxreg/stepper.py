"""Theta-scheme time stepping for ``u' + A(t) u = f``, used as an independent oracle."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg as sla

from maxreg.forms import FormFamily
from maxreg.grid import GridFunction, uniform_grid

MAX_STEPS = 2**16
START_STEPS = 8

Source = Callable[[float], np.ndarray] | GridFunction


@dataclass(frozen=True)
class StepperConfig:
    steps: int
    theta: float = 1.0
    tau: float = 1.0

    def __post_init__(self) -> None:
        if self.steps < 2:
            raise ValueError(f"need at least 2 steps, got {self.steps}")
        if not 0.5 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [1/2, 1], got {self.theta}")

    @property
    def grid(self) -> np.ndarray:
        return uniform_grid(self.steps, self.tau)


def _sample_source(f: Source, grid: np.ndarray, dim: int) -> np.ndarray:
    if isinstance(f, GridFunction):
        if f.grid.size == grid.size and np.array_equal(f.grid, grid):
            return f.values
        return f.interpolate(grid)
    if f is None:
        return np.zeros((grid.size, dim))
    return np.array([np.asarray(f(t), dtype=float) for t in grid])


def solve_theta(ff: FormFamily, f: Source, u0: np.ndarray, cfg: StepperConfig) -> GridFunction:
    """Step ``G_H (u_{k+1} - u_k)/dt + theta A_{k+1} u_{k+1} + (1-theta) A_k u_k``
    ``= G_H (theta f_{k+1} + (1-theta) f_k)``."""
    if abs(cfg.tau - ff.tau) > 1e-12 * ff.tau:
        raise ValueError(f"stepper horizon {cfg.tau} differs from family horizon {ff.tau}")
    t = cfg.grid
    G = ff.gp.G_H
    F = _sample_source(f, t, ff.dim)
    th = cfg.theta
    U = np.empty((t.size, ff.dim))
    U[0] = np.asarray(u0, dtype=float)
    A_prev = ff.form_at(t[0])
    GF = F @ G
    constant = ff.is_autonomous
    lu = None
    for k in range(cfg.steps):
        dt = t[k + 1] - t[k]
        A_next = A_prev if constant else ff.form_at(t[k + 1])
        rhs = G @ U[k] - (1.0 - th) * dt * (A_prev @ U[k]) + dt * (th * GF[k + 1] + (1.0 - th) * GF[k])
        if lu is None or not constant:
            try:
                lu = sla.lu_factor(G + th * dt * A_next, check_finite=False)
            except sla.LinAlgError as exc:  # pragma: no cover - excluded by coercivity
                raise sla.LinAlgError(f"singular step matrix at t = {t[k + 1]}") from exc
            if not np.all(np.isfinite(lu[0])) or np.min(np.abs(np.diag(lu[0]))) == 0:
                raise sla.LinAlgError(f"singular step matrix at t = {t[k + 1]}")
        U[k + 1] = sla.lu_solve(lu, rhs, check_finite=False)
        A_prev = A_next
    return GridFunction(t, U)


class Refinement(NamedTuple):
    u: GridFunction
    steps: int
    converged: bool


def refine_until(
    ff: FormFamily,
    f: Source,
    u0: np.ndarray,
    tol: float,
    theta: float = 1.0,
    start: int = START_STEPS,
    max_steps: int = MAX_STEPS,
) -> Refinement:
    """Double the step count until successive solutions differ by less than ``tol``.

    The difference is the discrete ``L_2(0, tau; H)`` norm on the coarser grid.
    Hitting ``max_steps`` returns the finest solution with ``converged=False``.
    """
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    G = ff.gp.G_H
    N = start
    prev = solve_theta(ff, f, u0, StepperConfig(N, theta, ff.tau))
    while True:
        N *= 2
        cur = solve_theta(ff, f, u0, StepperConfig(N, theta, ff.tau))
        diff = prev.with_values(cur.values[::2] - prev.values).norm(G, 2)
        if diff < tol:
            return Refinement(cur, N, True)
        if N >= max_steps:
            warnings.warn(f"refine_until stopped at N = {N} with difference {diff:.3e} > {tol:g}")
            return Refinement(cur, N, False)
        prev = cur

"""Time grids and H-valued grid functions with discrete L_p norms."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np


def uniform_grid(N: int, tau: float) -> np.ndarray:
    """``N + 1`` equispaced nodes on ``[0, tau]``."""
    if N < 1:
        raise ValueError(f"need at least one interval, got N={N}")
    t = np.linspace(0.0, tau, N + 1)
    t[-1] = tau
    return t


def trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    dt = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


@dataclass(frozen=True)
class GridFunction:
    """Nodal values of an H-valued function, piecewise linear in time.

    ``values[k]`` is the coordinate vector at ``grid[k]``.  With
    ``exclude_origin`` the node at ``t = 0`` carries zero quadrature weight
    (used for functions singular at the origin).
    """

    grid: np.ndarray
    values: np.ndarray
    p: float = 2.0
    exclude_origin: bool = False

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values)
        if grid.ndim != 1 or grid.size < 2:
            raise ValueError("grid needs at least two nodes")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if grid[0] != 0.0:
            raise ValueError(f"grid must start at 0, got {grid[0]}")
        if values.ndim != 2 or values.shape[0] != grid.size:
            raise ValueError(f"values shape {values.shape} does not match grid size {grid.size}")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @classmethod
    def sample(cls, grid: np.ndarray, func: Callable[[float], np.ndarray], **kw) -> GridFunction:
        grid = np.asarray(grid, dtype=float)
        return cls(grid, np.array([np.asarray(func(t), dtype=float) for t in grid]), **kw)

    @classmethod
    def zeros(cls, grid: np.ndarray, dim: int, **kw) -> GridFunction:
        return cls(grid, np.zeros((len(grid), dim)), **kw)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def tau(self) -> float:
        return float(self.grid[-1])

    def weights(self) -> np.ndarray:
        w = trapezoid_weights(self.grid)
        if self.exclude_origin:
            w[0] = 0.0
        return w

    def pointwise_norms(self, G_H: np.ndarray | None = None) -> np.ndarray:
        v = self.values
        if G_H is None:
            sq = np.einsum("ki,ki->k", v.conj(), v)
        else:
            sq = np.einsum("ki,ij,kj->k", v.conj(), G_H, v)
        return np.sqrt(np.maximum(np.real(sq), 0.0))

    def norm(self, G_H: np.ndarray | None = None, p: float | None = None) -> float:
        """Discrete ``L_p(0, tau; H)`` norm; trapezoid-weighted power sum."""
        p = self.p if p is None else p
        nk = self.pointwise_norms(G_H)
        if math.isinf(p):
            if self.exclude_origin:
                nk = nk[1:]
            return float(nk.max(initial=0.0))
        return float(np.sum(self.weights() * nk**p) ** (1.0 / p))

    def interpolate(self, ts) -> np.ndarray:
        """Linear interpolation in time; rows follow ``ts``."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        j = np.clip(np.searchsorted(self.grid, ts, side="right") - 1, 0, self.grid.size - 2)
        lam = (ts - self.grid[j]) / (self.grid[j + 1] - self.grid[j])
        return self.values[j] * (1 - lam)[:, None] + self.values[j + 1] * lam[:, None]

    def with_values(self, values: np.ndarray, **kw) -> GridFunction:
        return replace(self, values=np.asarray(values), **kw)

    def __add__(self, other: GridFunction) -> GridFunction:
        if not np.array_equal(self.grid, other.grid):
            raise ValueError("grid mismatch")
        return self.with_values(
            self.values + other.values,
            exclude_origin=self.exclude_origin or other.exclude_origin,
        )

    def __sub__(self, other: GridFunction) -> GridFunction:
        return self + other.scaled(-1.0)

    def scaled(self, c: float) -> GridFunction:
        return self.with_values(c * self.values)


def check_same_grid(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape or not np.array_equal(a, b):
        raise ValueError("grid mismatch between grid function and engine grid")

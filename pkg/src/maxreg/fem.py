"""P1 finite elements: 1D matrices through the kernels, plus a small 2D square mesh."""

from __future__ import annotations

from typing import Callable

import numpy as np

from maxreg import kernels

QUAD_POINTS = 3
STIFFNESS, MASS, DRIFT = 0, 1, 2

Coefficient = Callable[[np.ndarray], np.ndarray] | float | None


def gauss_unit(order: int = QUAD_POINTS):
    """Gauss-Legendre nodes and weights on ``[0, 1]``."""
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def uniform_mesh(a: float, b: float, elements: int) -> np.ndarray:
    if elements < 1:
        raise ValueError(f"need at least one element, got {elements}")
    if not b > a:
        raise ValueError(f"empty interval [{a}, {b}]")
    return np.linspace(a, b, elements + 1)


def _coef_at_points(x: np.ndarray, xi: np.ndarray, coef: Coefficient) -> np.ndarray:
    pts = x[:-1, None] + (x[1:] - x[:-1])[:, None] * xi[None, :]
    if coef is None:
        return np.ones_like(pts)
    if callable(coef):
        vals = np.asarray(coef(pts), dtype=float)
        return np.broadcast_to(vals, pts.shape).copy()
    return np.full_like(pts, float(coef))


def assemble(x: np.ndarray, kind: int, coef: Coefficient = None, order: int = QUAD_POINTS) -> np.ndarray:
    xi, wq = gauss_unit(order)
    return kernels.assemble_1d(x, xi, wq, _coef_at_points(x, xi, coef), kind)


def stiffness(x, coef: Coefficient = None):
    return assemble(x, STIFFNESS, coef)


def mass(x, coef: Coefficient = None):
    return assemble(x, MASS, coef)


def drift(x, coef: Coefficient = None):
    """``int a u' v``; rows are test functions, so the matrix is not symmetric."""
    return assemble(x, DRIFT, coef)


def endpoint_mass(size: int) -> np.ndarray:
    """Counting measure on the two endpoints of a 1D mesh."""
    E = np.zeros((size, size))
    E[0, 0] = E[-1, -1] = 1.0
    return E


def interior(mat: np.ndarray) -> np.ndarray:
    """Drop the first and last node (homogeneous Dirichlet ends)."""
    return mat[1:-1, 1:-1].copy()


class SquareMesh:
    """Uniform right-triangle mesh of the unit square with ``nx`` cells per side."""

    def __init__(self, nx: int):
        if nx < 1:
            raise ValueError(f"need at least one cell per side, got {nx}")
        self.nx = nx
        g = np.linspace(0.0, 1.0, nx + 1)
        X, Y = np.meshgrid(g, g, indexing="xy")
        self.points = np.column_stack([X.ravel(), Y.ravel()])
        idx = np.arange((nx + 1) ** 2).reshape(nx + 1, nx + 1)
        a, b = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()
        c, d = idx[1:, :-1].ravel(), idx[1:, 1:].ravel()
        self.triangles = np.concatenate([np.column_stack([a, b, d]), np.column_stack([a, d, c])])
        edges = [np.column_stack([idx[0, :-1], idx[0, 1:]]), np.column_stack([idx[-1, :-1], idx[-1, 1:]]),
                 np.column_stack([idx[:-1, 0], idx[1:, 0]]), np.column_stack([idx[:-1, -1], idx[1:, -1]])]
        self.boundary_edges = np.concatenate(edges)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def _geometry(self):
        P = self.points[self.triangles]  # (T, 3, 2)
        J = np.stack([P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]], axis=2)  # columns are edge vectors
        area = 0.5 * np.abs(np.linalg.det(J))
        ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        grads = ref @ np.linalg.inv(J)  # (T, 3, 2)
        return area, grads

    def _scatter(self, local: np.ndarray) -> np.ndarray:
        out = np.zeros((self.size, self.size))
        tri = self.triangles
        for a in range(3):
            for b in range(3):
                np.add.at(out, (tri[:, a], tri[:, b]), local[:, a, b])
        return out

    def stiffness(self) -> np.ndarray:
        area, grads = self._geometry()
        return self._scatter(area[:, None, None] * np.einsum("tak,tbk->tab", grads, grads))

    def mass(self) -> np.ndarray:
        area, _ = self._geometry()
        ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
        return self._scatter(area[:, None, None] * ref[None])

    def drift(self, a: tuple[float, float]) -> np.ndarray:
        area, grads = self._geometry()
        flux = grads @ np.asarray(a, dtype=float)  # (T, 3): a . grad phi_j
        local = (area / 3.0)[:, None, None] * np.broadcast_to(flux[:, None, :], (flux.shape[0], 3, 3))
        return self._scatter(local)

    def boundary_mass(self) -> np.ndarray:
        out = np.zeros((self.size, self.size))
        e = self.boundary_edges
        h = np.linalg.norm(self.points[e[:, 1]] - self.points[e[:, 0]], axis=1)
        loc = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
        for a in range(2):
            for b in range(2):
                np.add.at(out, (e[:, a], e[:, b]), h * loc[a, b])
        return out

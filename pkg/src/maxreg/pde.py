"""Galerkin builders for the Schrödinger, Robin and Wentzell example families.

Every builder returns ``(family, gram_pair, expected)`` where ``expected``
records the interpolation indices ``(beta, gamma)`` of the form modulus and
the Hölder threshold that the theory asks of the time profile.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from maxreg import fem
from maxreg.forms import FormFamily
from maxreg.hilbert import GramPair, SpectralScale, build_spectral_scale

REFINEMENT_GROWTH_MAX = 0.5


@dataclass(frozen=True)
class PowerProfile:
    """``amplitude * t**alpha``."""

    alpha: float
    amplitude: float = 1.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.amplitude * np.power(np.maximum(t, 0.0), self.alpha)


@dataclass(frozen=True)
class Expected:
    beta: float
    gamma: float
    alpha_threshold: float

    def threshold_with_data(self, p: float) -> float:
        """Hölder threshold when initial data from the trace space is present."""
        return max(self.alpha_threshold, 0.5 * (self.beta + self.gamma) - 1.0 / p)

    def as_dict(self) -> dict:
        return {"beta": self.beta, "gamma": self.gamma, "alpha_threshold": self.alpha_threshold}


def _check_common(n: int, alpha: float, amplitude: float, tau: float) -> None:
    if n < 2:
        raise ValueError(f"mesh needs at least 2 elements, got {n}")
    if alpha < 0:
        raise ValueError(f"Hölder exponent must be nonnegative, got {alpha}")
    if amplitude < 0:
        raise ValueError(f"amplitude must be nonnegative, got {amplitude}")
    if tau <= 0:
        raise ValueError(f"horizon must be positive, got {tau}")


# ---------------------------------------------------------------- Schrödinger

WEIGHTS = ("bounded", "hardy")


@dataclass(frozen=True)
class SchrodingerParams:
    """``-u'' + (m0 + t^alpha p0) u`` on ``[-R, R]`` with Dirichlet ends.

    ``weight`` picks ``p0 = 1`` (``"bounded"``) or the Hardy weight
    ``1/|x|^2`` capped at ``1/h^2``.  The floor is ``m0 = 1 + p0`` so that
    ``m0 <= m(t) <= (1 + amplitude tau^alpha) m0``.
    """

    n: int = 64
    R: float = 8.0
    alpha: float = 0.5
    amplitude: float = 1.0
    weight: str = "bounded"
    tau: float = 1.0
    sigma: float | None = None

    def __post_init__(self) -> None:
        _check_common(self.n, self.alpha, self.amplitude, self.tau)
        if self.weight not in WEIGHTS:
            raise ValueError(f"weight must be one of {WEIGHTS}, got {self.weight!r}")
        if self.R <= 0:
            raise ValueError(f"half-width must be positive, got {self.R}")
        if self.sigma is not None and not 0.0 <= self.sigma <= 1.0:
            raise ValueError(f"sobolev index must lie in [0, 1], got {self.sigma}")

    @property
    def sobolev_index(self) -> float:
        if self.sigma is not None:
            return self.sigma
        return 0.0 if self.weight == "bounded" else 1.0

    @property
    def h(self) -> float:
        return 2.0 * self.R / self.n

    def p0(self, x):
        x = np.asarray(x, dtype=float)
        if self.weight == "bounded":
            return np.ones_like(x)
        return 1.0 / np.maximum(x * x, self.h**2)

    def m0(self, x):
        return 1.0 + self.p0(x)


def _schrodinger_pieces(params: SchrodingerParams):
    x = fem.uniform_mesh(-params.R, params.R, params.n)
    K = fem.interior(fem.stiffness(x))
    M = fem.interior(fem.mass(x))
    M0 = fem.interior(fem.mass(x, params.m0))
    P0 = fem.interior(fem.mass(x, params.p0))
    return x, K, M, M0, P0


def build_schrodinger(params: SchrodingerParams):
    x, K, M, M0, P0 = _schrodinger_pieces(params)
    if np.any(params.m0(x) < 0) or np.any(params.p0(x) < 0):
        raise ValueError("potentials must be nonnegative")
    gp = GramPair(M, K + M0 + M)
    ff = FormFamily.from_affine(
        gp, K + M0, [(P0, PowerProfile(params.alpha, params.amplitude))], params.tau,
        name="schrodinger",
        meta={"c1": 1.0, "c2": 1.0 + params.amplitude * params.tau**params.alpha, "mesh": x},
    )
    s = params.sobolev_index
    return ff, gp, Expected(s, s, 0.5 * s)


def sobolev_weight_constant(P0: np.ndarray, sigma: float, scale: SpectralScale) -> float:
    """Smallest ``C`` with ``u^T P0 u <= C ||u||_{V_sigma}^2``."""
    G = scale.power_gram(sigma)
    return float(sla.eigh(P0, 0.5 * (G + G.T), eigvals_only=True)[-1])


def certify_sobolev_weight(params: SchrodingerParams, sigma: float) -> tuple[float, bool]:
    """Weighted-mass constant at ``params.n`` and at ``2 n``.

    Passes when the constant is finite and grows by less than 50% under the
    refinement.  Returns the constant on the finer mesh.
    """
    consts = []
    for n in (params.n, 2 * params.n):
        pr = SchrodingerParams(**{**params.__dict__, "n": n})
        _, K, M, M0, P0 = _schrodinger_pieces(pr)
        scale = build_spectral_scale(GramPair(M, K + M0 + M))
        consts.append(sobolev_weight_constant(P0, sigma, scale))
    c0, c1 = consts
    ok = bool(np.isfinite(c1) and c1 <= (1.0 + REFINEMENT_GROWTH_MAX) * c0)
    return c1, ok


# ---------------------------------------------------------------- Robin

DOMAINS = ("interval", "square")


@dataclass(frozen=True)
class RobinParams:
    """``-u'' + a(t) u'`` with ``u' = beta(t) u`` type boundary coupling.

    Both the boundary coefficient ``b0 + amplitude t^alpha`` and the drift
    ``drift (1 + amplitude t^alpha)`` share one time profile.
    """

    n: int = 50
    alpha: float = 0.3
    amplitude: float = 1.0
    b0: float = 1.0
    drift: float = 0.0
    domain: str = "interval"
    tau: float = 1.0

    def __post_init__(self) -> None:
        _check_common(self.n, self.alpha, self.amplitude, self.tau)
        if self.b0 < 0:
            raise ValueError(f"boundary coefficient must be nonnegative, got {self.b0}")
        if self.domain not in DOMAINS:
            raise ValueError(f"domain must be one of {DOMAINS}, got {self.domain!r}")


def build_robin(params: RobinParams):
    if params.domain == "interval":
        x = fem.uniform_mesh(0.0, 1.0, params.n)
        K, M = fem.stiffness(x), fem.mass(x)
        E = fem.endpoint_mass(x.size)
        D = fem.drift(x) if params.drift else np.zeros_like(K)
    else:
        mesh = fem.SquareMesh(params.n)
        K, M, E = mesh.stiffness(), mesh.mass(), mesh.boundary_mass()
        D = mesh.drift((1.0, 0.0)) if params.drift else np.zeros_like(K)
    gp = GramPair(M, K + M)
    varying = E + params.drift * D if params.drift else E
    ff = FormFamily.from_affine(
        gp, K + params.b0 * E + params.drift * D,
        [(varying, PowerProfile(params.alpha, params.amplitude))], params.tau,
        name="robin",
    )
    return ff, gp, Expected(1.0, 0.5, 0.25)


# ---------------------------------------------------------------- Wentzell


@dataclass(frozen=True)
class WentzellParams:
    """Heat equation with dynamic boundary condition on ``[0, 1]``.

    The state is ``(u, Tr u)`` in ``L2(0, 1) + L2({0, 1})``; nodal values
    parametrize it, with the end nodes carrying the boundary component.
    """

    n: int = 50
    alpha: float = 0.1
    amplitude: float = 1.0
    b0: float = 1.0
    tau: float = 1.0

    def __post_init__(self) -> None:
        _check_common(self.n, self.alpha, self.amplitude, self.tau)
        if self.b0 < 0:
            raise ValueError(f"boundary coefficient must be nonnegative, got {self.b0}")


def build_wentzell(params: WentzellParams):
    x = fem.uniform_mesh(0.0, 1.0, params.n)
    K, M = fem.stiffness(x), fem.mass(x)
    E = fem.endpoint_mass(x.size)
    G_H = M + E
    gp = GramPair(G_H, K + G_H)
    ff = FormFamily.from_affine(
        gp, K + params.b0 * E, [(E, PowerProfile(params.alpha, params.amplitude))], params.tau,
        name="wentzell",
    )
    return ff, gp, Expected(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class MatrixParams:
    """Random SPD family ``A0 + t^alpha B`` with ``B`` positive semidefinite."""

    n: int = 8
    alpha: float = 0.5
    amplitude: float = 1.0
    seed: int = 0
    tau: float = 1.0

    def __post_init__(self) -> None:
        _check_common(self.n, self.alpha, self.amplitude, self.tau)


def build_matrix(params: MatrixParams):
    rng = np.random.default_rng(params.seed)
    n = params.n
    X = rng.standard_normal((n, n))
    G_H = X @ X.T / n + np.eye(n)
    Y = rng.standard_normal((n, n))
    A0 = Y @ Y.T + n * np.eye(n)
    Z = rng.standard_normal((n, 2))
    gp = GramPair(G_H, A0 + G_H)
    ff = FormFamily.from_affine(
        gp, A0, [(Z @ Z.T, PowerProfile(params.alpha, params.amplitude))], params.tau, name="matrix"
    )
    return ff, gp, Expected(0.0, 0.0, 0.0)


BUILDERS = {
    "matrix": (MatrixParams, build_matrix),
    "schrodinger": (SchrodingerParams, build_schrodinger),
    "robin": (RobinParams, build_robin),
    "wentzell": (WentzellParams, build_wentzell),
}


def build_example(name: str, **kw):
    """Build an example family by id, forwarding keyword parameters."""
    try:
        params_cls, builder = BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown example {name!r}; choose from {sorted(BUILDERS)}") from None
    return builder(params_cls(**kw))

import numpy as np
import pytest
from scipy.integrate import quad

from maxreg.engine import (
    ConvergenceError,
    DiniViolation,
    QuadratureSpec,
    apply_L,
    apply_Q,
    apply_R,
    build_plan,
    neumann_solve,
    q_norm_estimate,
    solve_representation,
)
from maxreg.forms import FormFamily, shift
from maxreg.grid import GridFunction, uniform_grid
from maxreg.hilbert import GramPair
from maxreg.pde import PowerProfile, RobinParams, build_robin

from oracles import duhamel_nodes

ONE = GramPair(np.eye(1), 2 * np.eye(1))


def scalar_family(a, c=0.0, alpha=1.0):
    return FormFamily.from_affine(ONE, [[a]], [(np.eye(1), PowerProfile(alpha, c))], 1.0)


def robin(n=12, **kw):
    return build_robin(RobinParams(n=n, **kw))


def smooth_f(t, n, seed=0):
    rng = np.random.default_rng(seed)
    S = rng.standard_normal((n, 3))
    return GridFunction(t, np.cos(np.outer(t, [1.0, 2.0, 3.0])) @ S.T)


def test_L_zero():
    ff = scalar_family(2.0)
    t = uniform_grid(10, 1.0)
    assert not np.any(apply_L(ff, GridFunction.zeros(t, 1)).values)


def test_L_scalar_constant():
    a, c = 3.0, 1.7
    t = uniform_grid(20, 1.0)
    out = apply_L(scalar_family(a), GridFunction(t, np.full((21, 1), c)))
    assert np.allclose(out.values[:, 0], c * (1 - np.exp(-a * t)), rtol=1e-13, atol=1e-14)


def test_L_matrix_oracle():
    ff, gp, _ = robin(10, amplitude=0.0)
    t = uniform_grid(60, 1.0)
    f = smooth_f(t, gp.dim)
    AH = ff.operator_at(0.0)
    U = duhamel_nodes(AH, t, f.values, np.zeros(gp.dim))
    ref = GridFunction(t, U @ AH.T)
    err = (apply_L(ff, f) - ref).norm(gp.G_H, 2) / ref.norm(gp.G_H, 2)
    assert err <= 1e-6


def test_L_grid_mismatch():
    ff = scalar_family(1.0)
    plan = build_plan(ff, uniform_grid(10, 1.0), QuadratureSpec())
    with pytest.raises(ValueError, match="grid"):
        apply_L(plan, GridFunction.zeros(uniform_grid(11, 1.0), 1))


def test_R_scalar_and_origin():
    a, u0 = 2.5, 0.7
    t = uniform_grid(10, 1.0)
    R = apply_R(scalar_family(a), np.array([u0]), t)
    assert np.allclose(R.values[:, 0], a * np.exp(-a * t) * u0, rtol=1e-13)
    assert R.exclude_origin and R.weights()[0] == 0
    assert not np.any(apply_R(scalar_family(a), np.zeros(1), t).values)


def test_Q_autonomous_and_zero():
    ff, gp, _ = robin(10, amplitude=0.0)
    t = uniform_grid(20, 1.0)
    g = smooth_f(t, gp.dim)
    assert not np.any(apply_Q(ff, g).values)
    ff2, _, _ = robin(10)
    assert not np.any(apply_Q(ff2, GridFunction.zeros(t, gp.dim), QuadratureSpec.for_exponents(0.5, 0.3)).values)


@pytest.mark.parametrize("spec", [QuadratureSpec.for_exponents(0.0, 1.0), QuadratureSpec()])
def test_Q_scalar_adaptive_oracle(spec):
    c = 0.7
    ff = scalar_family(1.0, c)
    t = uniform_grid(50, 1.0)
    Q = apply_Q(ff, GridFunction(t, (1 + t)[:, None]), spec).values[:, 0]
    a = lambda s: 1 + c * s  # noqa: E731
    ref = [
        quad(lambda s: a(tk) * np.exp(-(tk - s) * a(tk)) * (a(tk) - a(s)) / a(s) * (1 + s), 0, tk, epsabs=1e-12)[0]
        for tk in t
    ]
    assert np.max(np.abs(Q - ref)) <= 1e-5


def test_callable_path_matches_affine():
    ff, gp, _ = robin(6)
    gen = FormFamily.from_callable(gp, ff.unshifted_form, 1.0)
    t = uniform_grid(12, 1.0)
    g = smooth_f(t, gp.dim)
    q = QuadratureSpec.for_exponents(0.5, 0.3)
    assert np.allclose(apply_Q(gen, g, q).values, apply_Q(ff, g, q).values, rtol=1e-9, atol=1e-12)


def test_adaptive_final_panel_close_to_product_rule():
    ff, gp, _ = robin(6)
    t = uniform_grid(10, 1.0)
    g = smooth_f(t, gp.dim)
    a = apply_Q(ff, g, QuadratureSpec.for_exponents(0.5, 0.3)).values
    b = apply_Q(ff, g, QuadratureSpec()).values
    assert np.allclose(a, b, rtol=1e-6, atol=1e-9)


def test_quadrature_spec_validation():
    with pytest.raises(DiniViolation, match="Dini"):
        QuadratureSpec.for_exponents(0.5, 0.25)
    with pytest.raises(ValueError):
        QuadratureSpec(grading_ratio=1.0)
    with pytest.raises(ValueError):
        QuadratureSpec(panels_per_interval=0)


def test_causality_bit_identical():
    ff, gp, _ = robin(8)
    t = uniform_grid(16, 1.0)
    g = smooth_f(t, gp.dim)
    q = QuadratureSpec.for_exponents(0.5, 0.3)
    plan = build_plan(ff, t, q)
    vals = g.values.copy()
    vals[10:] += 5.0
    g2 = g.with_values(vals)
    for op in (apply_Q, apply_L):
        a, b = op(plan, g).values, op(plan, g2).values
        assert np.array_equal(a[:10], b[:10])


def test_linearity():
    ff, gp, _ = robin(8)
    t = uniform_grid(16, 1.0)
    plan = build_plan(ff, t, QuadratureSpec.for_exponents(0.5, 0.3))
    g1, g2 = smooth_f(t, gp.dim, 1), smooth_f(t, gp.dim, 2)
    for op in (apply_Q, apply_L):
        lhs = op(plan, g1.scaled(2.0) + g2.scaled(-3.0)).values
        rhs = 2 * op(plan, g1).values - 3 * op(plan, g2).values
        assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * np.abs(rhs).max())
    u1, u2 = np.ones(gp.dim), np.arange(gp.dim, dtype=float)
    assert np.allclose(apply_R(plan, u1 + u2).values, apply_R(plan, u1).values + apply_R(plan, u2).values, rtol=1e-12)


def test_solve_autonomous_oracle():
    ff, gp, _ = robin(10, amplitude=0.0)
    t = uniform_grid(100, 1.0)
    f = smooth_f(t, gp.dim)
    u0 = np.cos(np.linspace(0, np.pi, gp.dim))
    sol = solve_representation(ff, f, u0)
    U = duhamel_nodes(ff.operator_at(0.0), t, f.values, u0)
    err = np.linalg.norm(sol.u.values - U) / np.linalg.norm(U)
    assert err <= 1e-6
    assert sol.neumann_iters == 1


def test_solve_zero_data():
    ff, gp, _ = robin(8)
    t = uniform_grid(10, 1.0)
    sol = solve_representation(ff, GridFunction.zeros(t, gp.dim), np.zeros(gp.dim), QuadratureSpec.for_exponents(0.5, 0.3))
    assert not np.any(sol.u.values) and sol.neumann_iters == 0


def _shift_gap(amplitude, N, mu, n=10):
    ff, gp, _ = robin(n, amplitude=amplitude)
    t = uniform_grid(N, 1.0)
    f = smooth_f(t, gp.dim)
    u0 = np.cos(np.linspace(0, np.pi, gp.dim))
    q = QuadratureSpec.for_exponents(0.5, 0.3)
    a = solve_representation(ff, f, u0, q)
    b = solve_representation(ff, f, u0, q, mu=mu)
    gap = np.linalg.norm(a.u.values - b.u.values) / np.linalg.norm(a.u.values)
    return gap, ff, f, (a, b)


def test_mu_shift_exact_when_autonomous():
    gap, *_ = _shift_gap(0.0, 40, 5.0)
    assert gap <= 1e-12


def test_mu_shift_consistency_and_residual():
    gap, ff, f, sols = _shift_gap(1.0, 800, 5.0, n=6)
    assert gap <= 1e-6
    t = f.grid
    for sol in sols:
        Au = np.array([ff.operator_at(tk) @ uk for tk, uk in zip(t, sol.u.values)])
        res = GridFunction(t, sol.u_prime.values + Au - f.values, exclude_origin=True)
        assert res.norm(ff.gp.G_H, 2) <= 1e-8 * f.norm(ff.gp.G_H, 2)


def test_damped_L_matches_scalar_closed_form():
    a, mu = 3.0, 2.0
    t = uniform_grid(20, 1.0)
    ff = shift(scalar_family(a), mu)
    out = apply_L(ff, GridFunction(t, np.ones((21, 1))), damping=mu).values[:, 0]
    # (a + mu) int_0^t e^{-(t-s)(a+mu)} e^{-mu s} ds
    ref = (a + mu) * np.exp(-mu * t) * (1 - np.exp(-a * t)) / a
    assert np.allclose(out, ref, rtol=1e-13, atol=1e-15)


def test_nonsymmetric_family_against_exponential_stepping():
    ff, gp, _ = robin(8, drift=0.8)
    assert not ff.is_symmetric
    t = uniform_grid(40, 1.0)
    f = smooth_f(t, gp.dim)
    sol = solve_representation(ff, f, np.zeros(gp.dim), QuadratureSpec.for_exponents(0.5, 0.3))
    # frozen-coefficient exponential stepping on a much finer grid
    fine = uniform_grid(4000, 1.0)
    F = f.interpolate(fine)
    U = [np.zeros(gp.dim)]
    for k in range(fine.size - 1):
        AH = ff.operator_at(0.5 * (fine[k] + fine[k + 1]))
        U.append(duhamel_nodes(AH, fine[k : k + 2], F[k : k + 2], U[-1])[-1])
    ref = np.array(U)[::100]
    assert np.linalg.norm(sol.u.values - ref) <= 2e-3 * np.linalg.norm(ref)


def test_neumann_cap_reports_residuals():
    ff, gp, _ = robin(8, amplitude=5.0)
    t = uniform_grid(10, 1.0)
    plan = build_plan(ff, t, QuadratureSpec.for_exponents(0.5, 0.3))
    rhs = apply_L(plan, smooth_f(t, gp.dim))
    with pytest.raises(ConvergenceError) as info:
        neumann_solve(plan, rhs, maxiter=2)
    assert len(info.value.residuals) == 2


def test_q_norm_autonomous_and_scaling():
    t = uniform_grid(20, 1.0)
    q = QuadratureSpec.for_exponents(0.5, 0.3)
    auto, _, _ = robin(8, amplitude=0.0)
    assert q_norm_estimate(auto, q, 2.0, 0.0, t).value == 0.0
    one, _, _ = robin(8, amplitude=1.0)
    two, _, _ = robin(8, amplitude=2.0)
    a = q_norm_estimate(one, q, 2.0, 10.0, t, samples=10)
    b = q_norm_estimate(two, q, 2.0, 10.0, t, samples=10)
    assert a.lower_bound
    assert 2 * 0.8 <= b.value / a.value <= 2 * 1.2


def test_plan_rejects_noncoercive_and_long_grids():
    gp = GramPair(np.eye(1), np.eye(1))
    neg = FormFamily.from_affine(gp, [[-1.0]], [], 1.0)
    with pytest.raises(ValueError, match="shift"):
        build_plan(neg, uniform_grid(4, 1.0), QuadratureSpec())
    assert build_plan(shift(neg, 2.0), uniform_grid(4, 1.0), QuadratureSpec()).N == 4
    with pytest.raises(ValueError):
        build_plan(scalar_family(1.0), uniform_grid(4, 2.0), QuadratureSpec())

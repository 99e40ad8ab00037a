import numpy as np
import pytest

from maxreg.forms import certify_bounds, estimate_modulus
from maxreg.harness import dini_classify
from maxreg.pde import (
    MatrixParams,
    RobinParams,
    SchrodingerParams,
    WentzellParams,
    build_example,
    build_matrix,
    build_robin,
    build_schrodinger,
    build_wentzell,
    certify_sobolev_weight,
)

BUILDS = [
    ("schrodinger", lambda **kw: build_schrodinger(SchrodingerParams(n=40, **kw))),
    ("robin", lambda **kw: build_robin(RobinParams(n=30, **kw))),
    ("wentzell", lambda **kw: build_wentzell(WentzellParams(n=30, **kw))),
    ("matrix", lambda **kw: build_matrix(MatrixParams(**kw))),
]


@pytest.mark.parametrize("name, build", BUILDS)
def test_certified_bounds(name, build):
    ff, _, _ = build()
    b = certify_bounds(ff, np.linspace(0, ff.tau, 9))
    assert np.isfinite(b.M) and b.alpha1 > 0 and b.delta <= 1


@pytest.mark.parametrize("name, build", BUILDS)
def test_zero_amplitude_is_autonomous(name, build):
    ff, _, e = build(amplitude=0.0)
    assert ff.is_autonomous
    mod = estimate_modulus(ff, e.beta, e.gamma)
    assert all(w == 0 for _, w in mod.samples)


@pytest.mark.parametrize("name, build", BUILDS)
@pytest.mark.parametrize("alpha", [0.3, 0.6])
def test_exponent_round_trip(name, build, alpha):
    ff, _, e = build(alpha=alpha)
    assert estimate_modulus(ff, e.beta, e.gamma).holder_alpha == pytest.approx(alpha, abs=0.1)


@pytest.mark.parametrize("name, build", BUILDS)
def test_symmetric_assembly_bitwise(name, build):
    ff, gp, _ = build()
    for t in (0.0, 0.37, 1.0):
        A = ff.form_at(t)
        assert np.array_equal(A, A.T)
    assert np.array_equal(gp.G_H, gp.G_H.T) and np.array_equal(gp.G_V, gp.G_V.T)


def test_drift_breaks_symmetry():
    ff, _, _ = build_robin(RobinParams(n=10, drift=0.5))
    assert not ff.is_symmetric
    assert certify_bounds(ff, np.linspace(0, 1, 5)).alpha1 > 0


def test_expected_records():
    assert build_schrodinger(SchrodingerParams(n=8))[2].as_dict() == {"beta": 0.0, "gamma": 0.0, "alpha_threshold": 0.0}
    assert build_schrodinger(SchrodingerParams(n=8, weight="hardy"))[2].alpha_threshold == 0.5
    assert build_robin(RobinParams(n=8))[2].as_dict() == {"beta": 1.0, "gamma": 0.5, "alpha_threshold": 0.25}
    assert build_wentzell(WentzellParams(n=8))[2].as_dict() == {"beta": 0.0, "gamma": 0.0, "alpha_threshold": 0.0}


def test_wentzell_gram_carries_boundary_block():
    ff, gp, _ = build_wentzell(WentzellParams(n=10))
    ones = np.ones(gp.dim)
    # |(1, Tr 1)|_H^2 = |Omega| + number of boundary points
    assert ones @ gp.G_H @ ones == pytest.approx(3.0, rel=1e-14)


def test_robin_p4_with_data_inadmissible():
    e = build_robin(RobinParams(n=8, alpha=0.3))[2]
    assert e.threshold_with_data(4.0) == pytest.approx(0.5)
    d = dini_classify(0.3, e.gamma, e.beta, 4.0, 1.0)
    assert d.admissible(with_data=False) and not d.admissible(with_data=True)
    assert dini_classify(0.3, e.gamma, e.beta, 2.0, 1.0).admissible(with_data=True)


def test_schrodinger_bounded_small_alpha_admissible():
    e = build_schrodinger(SchrodingerParams(n=8, alpha=0.05))[2]
    for p in (1.5, 2.0, 10.0):
        assert dini_classify(0.05, e.gamma, e.beta, p, 1.0).admissible(with_data=True)


def test_sobolev_weight_bounded_sigma0():
    C, ok = certify_sobolev_weight(SchrodingerParams(n=32), 0.0)
    assert ok and C <= 1.0 + 1e-12


def test_sobolev_weight_hardy():
    C1, ok1 = certify_sobolev_weight(SchrodingerParams(n=32, weight="hardy"), 1.0)
    assert ok1 and C1 <= 8.0
    C0, ok0 = certify_sobolev_weight(SchrodingerParams(n=32, weight="hardy"), 0.0)
    assert not ok0 and C0 > C1


def test_square_domain_smoke():
    ff, gp, e = build_robin(RobinParams(n=6, domain="square"))
    assert gp.dim == 49
    ones = np.ones(gp.dim)
    assert ones @ gp.G_H @ ones == pytest.approx(1.0, rel=1e-12)
    # boundary mass of the constant equals the perimeter
    assert ones @ ff.terms[0][0] @ ones == pytest.approx(4.0, rel=1e-12)
    assert certify_bounds(ff, [0.0, 1.0]).alpha1 > 0


@pytest.mark.parametrize("kw, match", [
    ({"n": 1}, "mesh"), ({"alpha": -0.1}, "Hölder"), ({"b0": -1.0}, "boundary"), ({"domain": "disk"}, "domain"),
])
def test_robin_param_validation(kw, match):
    with pytest.raises(ValueError, match=match):
        RobinParams(**kw)


def test_schrodinger_validation():
    with pytest.raises(ValueError, match="weight"):
        SchrodingerParams(weight="coulomb")
    with pytest.raises(ValueError, match="sobolev"):
        SchrodingerParams(sigma=1.5)


def test_build_example_dispatch():
    ff, _, _ = build_example("wentzell", n=5)
    assert ff.name == "wentzell"
    with pytest.raises(ValueError, match="unknown example"):
        build_example("heat")

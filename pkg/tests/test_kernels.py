import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maxreg import kernels
from maxreg.kernels import _numba, _numpy


def _complexify(rng, shape, cplx):
    x = rng.standard_normal(shape)
    return x + 1j * rng.standard_normal(shape) if cplx else x


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 8), q=st.integers(1, 30), cplx=st.booleans())
def test_kernel_accumulate_backends_agree(seed, n, q, cplx):
    rng = np.random.default_rng(seed)
    d = np.abs(_complexify(rng, n, cplx)) * 50 + (1j * rng.standard_normal(n) if cplx else 0)
    r, w = rng.uniform(0, 1, q), rng.uniform(0, 1, q)
    Z = _complexify(rng, (n, q), cplx)
    a = kernels.kernel_accumulate(d, r, w, Z, impl=_numba)
    b = kernels.kernel_accumulate(d, r, w, Z, impl=_numpy)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 6), m=st.integers(1, 3), k=st.integers(1, 6), cplx=st.booleans())
def test_affine_accumulate_backends_agree(seed, n, m, k, cplx):
    rng = np.random.default_rng(seed)
    q = 3 * k
    d = rng.uniform(0.1, 100, n).astype(complex if cplx else float)
    P = _complexify(rng, (m, n, k + 1), cplx)
    jl = rng.integers(0, k, q)
    lam = rng.uniform(0, 1, q)
    r, w = rng.uniform(0, 1, q), rng.uniform(0, 1, q)
    dth = rng.standard_normal((m, q))
    a = kernels.affine_accumulate(d, r, w, dth, jl, lam, P, impl=_numba)
    b = kernels.affine_accumulate(d, r, w, dth, jl, lam, P, impl=_numpy)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 6), k=st.integers(1, 20))
def test_duhamel_backends_agree(seed, n, k):
    rng = np.random.default_rng(seed)
    d = np.concatenate([[0.0, 1e-9], rng.uniform(0, 1e4, n)])
    tn = np.concatenate([[0.0], np.cumsum(rng.uniform(1e-3, 0.1, k))])
    C = rng.standard_normal((d.size, k))
    a = kernels.duhamel_accumulate(d, tn[-1], tn, C, impl=_numba)
    b = kernels.duhamel_accumulate(d, tn[-1], tn, C, impl=_numpy)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-14)


def test_duhamel_closed_form():
    # int_0^1 e^{-(1-s) 2} ds = (1 - e^{-2}) / 2
    out = kernels.duhamel_accumulate(np.array([2.0, 0.0]), 1.0, np.linspace(0, 1, 5), np.ones((2, 4)))
    assert out[0] == pytest.approx((1 - np.exp(-2)) / 2, rel=1e-14)
    assert out[1] == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("kind", [0, 1, 2])
def test_assembly_backends_agree(kind):
    rng = np.random.default_rng(kind)
    x = np.sort(np.concatenate([[0, 1], rng.uniform(0, 1, 20)]))
    xi, wq = np.polynomial.legendre.leggauss(3)
    coef = rng.uniform(0.5, 2, (x.size - 1, 3))
    a = kernels.assemble_1d(x, 0.5 * (xi + 1), 0.5 * wq, coef, kind, impl=_numba)
    b = kernels.assemble_1d(x, 0.5 * (xi + 1), 0.5 * wq, coef, kind, impl=_numpy)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)
    if kind < 2:
        assert np.array_equal(a, a.T) and np.array_equal(b, b.T)


def test_backend_flag_reported():
    assert kernels.BACKEND in ("numba", "numpy")


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 6), k=st.integers(1, 20))
def test_linear_duhamel_backends_agree(seed, n, k):
    rng = np.random.default_rng(seed)
    d = np.concatenate([[0.0, 1e-9, -3.0, 5e-3], rng.uniform(0, 1e4, n)])
    tn = np.concatenate([[0.0], np.cumsum(rng.uniform(1e-3, 0.1, k))])
    F = rng.standard_normal((d.size, k + 1))
    a = kernels.linear_duhamel_accumulate(d, tn[-1], tn, F, impl=_numba)
    b = kernels.linear_duhamel_accumulate(d, tn[-1], tn, F, impl=_numpy)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("d", [-2.0, 0.0, 1e-4, 0.3, 40.0])
def test_linear_duhamel_against_quadrature(d):
    from scipy.integrate import quad

    tn = np.array([0.0, 0.2, 0.5, 0.9])
    F = np.array([[1.0, -2.0, 0.5, 3.0]])
    f = lambda s: np.interp(s, tn, F[0])  # noqa: E731
    ref = quad(lambda s: np.exp(-(1.0 - s) * d) * f(s), 0, 0.9, points=tn[1:-1], epsabs=1e-14)[0]
    out = kernels.linear_duhamel_accumulate(np.array([d]), 1.0, tn, F)[0]
    assert out == pytest.approx(ref, rel=1e-11, abs=1e-14)


@pytest.mark.parametrize("flag, ok", [("numpy", True), ("numba", True), ("fortran", False)])
def test_backend_environment_flag(flag, ok):
    import os
    import subprocess
    import sys

    env = {**os.environ, "MAXREG_BACKEND": flag}
    proc = subprocess.run(
        [sys.executable, "-c", "from maxreg import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True,
    )
    if ok:
        assert proc.returncode == 0 and proc.stdout.strip() == flag
    else:
        assert proc.returncode != 0 and "MAXREG_BACKEND" in proc.stderr

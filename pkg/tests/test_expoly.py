import numpy as np
import pytest

from formalpowers.exceptions import AlgebraError
from formalpowers.expoly import (
    TAYLOR_SWITCH,
    ExpPoly,
    ep_eval,
    ep_integrate_segment,
    exp_moment_taylor,
    exp_moments,
)
from formalpowers.quadrature import Path, QuadratureRule, integrate_path

C = 1.0


def u2(c=C):
    # -sinh(c y)/c
    return ExpPoly.from_terms(c, {(0, 0, 1): -0.5 / c, (0, 0, -1): 0.5 / c})


def u3(c=C):
    # (x^2 - y/c) e^{cy} + sinh(cy)/c^2
    return ExpPoly.from_terms(c, {(2, 0, 1): 1.0, (0, 1, 1): -1 / c, (0, 0, 1): 0.5 / c**2, (0, 0, -1): -0.5 / c**2})


def test_eval_examples():
    assert ep_eval(ExpPoly.exp(C), 0j) == pytest.approx(1.0)
    assert ep_eval(u2(), 1j) == pytest.approx(-np.sinh(1.0), abs=1e-15)
    assert ep_eval(u3(), 1 + 0j) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("method", ["direct", "compensated"])
def test_eval_methods_agree(method, rng):
    f = u3(2.5)
    z = rng.uniform(-1, 1, 20) + 1j * rng.uniform(-1, 1, 20)
    x, y = z.real, z.imag
    ref = (x**2 - y / 2.5) * np.exp(2.5 * y) + np.sinh(2.5 * y) / 2.5**2
    np.testing.assert_allclose(f(z, method=method), ref, atol=1e-13)


def test_arithmetic_closure():
    xe = ExpPoly.exp(C).mul_x()
    assert xe.mul_x().terms == {(2, 0, 1): 1}
    prod = ExpPoly.exp(C, 1) * ExpPoly.exp(C, -1)
    assert prod.terms == {(0, 0, 0): 1}
    s = u2() + ExpPoly.from_terms(C, {(0, 0, 1): 0.5, (0, 0, -1): -0.5})
    assert s.is_zero()
    assert ExpPoly.exp(C).mul_exp(-1).terms == {(0, 0, 0): 1}
    assert ExpPoly.exp(C).mul_y().degree == (0, 1)


def test_kappa_mismatch_rejected():
    with pytest.raises(AlgebraError):
        ExpPoly.exp(1.0) + ExpPoly.exp(2.0)
    with pytest.raises(AlgebraError):
        ExpPoly.exp(1j).conj()
    with pytest.raises(AlgebraError):
        ExpPoly(1.0, np.zeros((2, 2)))


def test_pruning_and_terms():
    f = ExpPoly.from_terms(1.0, {(1, 0, 0): 1e-320, (0, 1, 1): 2.0})
    assert f.terms == {(0, 1, 1): 2.0}
    with pytest.raises(AlgebraError):
        ExpPoly.from_terms(1.0, {(-1, 0, 0): 1.0})


def test_calculus_matches_closed_form():
    f = u3(1.3)
    z = np.array([0.3 + 0.4j, -0.6 - 0.2j])
    x, y = z.real, z.imag
    c = 1.3
    fx = 2 * x * np.exp(c * y)
    fy = (x**2 - y / c) * c * np.exp(c * y) - np.exp(c * y) / c + np.cosh(c * y) / c
    np.testing.assert_allclose(f.dx()(z), fx, atol=1e-14)
    np.testing.assert_allclose(f.dy()(z), fy, atol=1e-14)
    # u3 solves the Yukawa equation: laplacian = c^2 u3
    np.testing.assert_allclose(f.laplacian()(z), c**2 * f(z), atol=1e-13)


def test_partial_antiderivatives():
    f = u3(0.7)
    z = np.array([0.2 + 0.5j, -0.4 - 0.3j])
    np.testing.assert_allclose(f.int_x(0.1).dx()(z), f(z), atol=1e-14)
    np.testing.assert_allclose(f.int_y(-0.2).dy()(z), f(z), atol=1e-14)
    np.testing.assert_allclose(f.int_y(-0.2)(z.real - 0.2j), 0, atol=1e-14)


def test_segment_integration_examples():
    assert ep_integrate_segment(ExpPoly.constant(1.0, 1.0), 0, 1 + 1j) == pytest.approx(1 + 1j, abs=1e-15)
    assert ep_integrate_segment(ExpPoly.exp(1.0), 0, 1j) == pytest.approx(1j * (np.e - 1), abs=1e-15)
    f = ExpPoly.exp(1.0).mul_x()
    ref = integrate_path(f, Path.segment(0, 1 + 1j), QuadratureRule("gauss", 64))
    assert abs(ep_integrate_segment(f, 0, 1 + 1j) - ref) < 1e-14


def test_segment_integration_linear():
    f, g = u2(3.0), u3(3.0)
    a, b = 0.1 - 0.5j, -0.3 + 0.6j
    assert ep_integrate_segment(f + g, a, b) == pytest.approx(ep_integrate_segment(f, a, b) + ep_integrate_segment(g, a, b), abs=1e-14)


def test_moment_branch_seam():
    for m in range(6):
        for beta in (TAYLOR_SWITCH * 0.999, TAYLOR_SWITCH * 1.001, 1j * TAYLOR_SWITCH * 1.001):
            assert abs(exp_moments(m, beta)[m] - exp_moment_taylor(m, beta, 20)) < 1e-15


def test_moments_large_beta():
    for beta in (20.0, -15.0, 8j):
        t, w = np.polynomial.legendre.leggauss(80)
        t = 0.5 * (t + 1)
        ref = [0.5 * np.sum(w * t**m * np.exp(beta * t)) for m in range(12)]
        np.testing.assert_allclose(exp_moments(11, beta), ref, rtol=1e-12)


def test_dump_lists_terms():
    text = u2().dump()
    assert "kappa" in text
    assert len([l for l in text.splitlines() if not l.startswith("#")]) == 2

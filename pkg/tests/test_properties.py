import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from formalpowers.expoly import ExpPoly, exp_moments
from formalpowers.geometry import unit_disk
from formalpowers.problems import complete_system, particular_solution, yukawa
from formalpowers.quadrature import abar, polyline
from formalpowers.vekua import exponential_sequence, formal_powers, vekua_residual

GL_X, GL_W = np.polynomial.legendre.leggauss(64)

coef = st.floats(-2.0, 2.0, allow_nan=False)
term = st.tuples(st.integers(0, 5), st.integers(0, 5), st.integers(-2, 2))
kappas = st.floats(-5.0, 5.0, allow_nan=False)
points = st.complex_numbers(max_magnitude=1.0, allow_nan=False, allow_infinity=False)


def gauss_segment(f, za, zb):
    t = 0.5 * (GL_X + 1)
    return 0.5 * (zb - za) * np.sum(GL_W * f(za + t * (zb - za)))


def gauss_abs_segment(f, za, zb):
    t = 0.5 * (GL_X + 1)
    return 0.5 * abs(zb - za) * np.sum(GL_W * np.abs(f(za + t * (zb - za))))


@settings(max_examples=100, deadline=None)
@given(kappa=kappas, terms=st.dictionaries(term, coef, min_size=1, max_size=8), za=points, zb=points)
def test_segment_integral_matches_gauss(kappa, terms, za, zb):
    f = ExpPoly.from_terms(kappa, terms)
    exact = f.integrate_segment(za, zb)
    ref = gauss_segment(lambda z: f(z, method="direct"), za, zb)
    scale = max(gauss_abs_segment(lambda z: f(z, method="direct"), za, zb), 1e-300)
    assert abs(exact - ref) <= 1e-12 * max(scale, abs(ref), 1e-3)


@settings(max_examples=50, deadline=None)
@given(beta=st.complex_numbers(max_magnitude=20.0, allow_nan=False, allow_infinity=False), m=st.integers(0, 12))
def test_moments_match_gauss(beta, m):
    t = 0.5 * (GL_X + 1)
    ref = 0.5 * np.sum(GL_W * t**m * np.exp(beta * t))
    scale = 0.5 * np.sum(GL_W * t**m * np.abs(np.exp(beta * t)))
    assert abs(exp_moments(m, beta)[m] - ref) <= 1e-13 * scale


@settings(max_examples=40, deadline=None)
@given(kappa=kappas, terms=st.dictionaries(term, coef, min_size=1, max_size=6))
def test_integration_inverts_differentiation(kappa, terms):
    f = ExpPoly.from_terms(kappa, terms)
    z = np.array([0.3 + 0.2j, -0.4 + 0.5j])
    np.testing.assert_allclose(f.int_x(0.1).dx()(z), f(z), atol=1e-10 * max(1.0, np.max(np.abs(f(z)))))


@pytest.mark.parametrize("n", range(7))
def test_formal_power_asymptotics(n):
    # Z^(n)(1, 0; z) - z^n = O(|z|^(n+1)) as z -> 0
    fp = formal_powers(exponential_sequence(1.0), 0, 6)[2 * n]
    theta = 0.7
    r = np.array([1e-2, 1e-1])
    z = r * np.exp(1j * theta)
    gap = np.abs(fp(z) - z**n)
    slope = np.log(gap[1] / gap[0]) / np.log(r[1] / r[0])
    assert slope >= n + 0.9


@settings(max_examples=20, deadline=None)
@given(c=st.floats(0.2, 6.0))
def test_basis_members_solve_equation(c):
    d = unit_disk()
    basis = complete_system(particular_solution(yukawa(c)), d, 9)
    z = np.array([0.2 + 0.3j, -0.5 + 0.1j, 0.1 - 0.6j])
    assert np.max(basis.laplacian_residual(z)) < 1e-8 * max(1.0, np.exp(c))


@settings(max_examples=20, deadline=None)
@given(kappa=st.floats(-3.0, 3.0), z=st.complex_numbers(max_magnitude=0.8, allow_nan=False, allow_infinity=False))
def test_formal_powers_solve_vekua_equation(kappa, z):
    fps = formal_powers(exponential_sequence(kappa), 0, 3)
    f = lambda w: np.exp(kappa * np.imag(w))
    pts = np.array([z])
    for fp in fps:
        scale = max(1.0, float(np.abs(fp(pts))[0]))
        assert vekua_residual(lambda w: fp(w), f, pts)[0] < 1e-5 * scale


def test_abar_path_independence():
    # phi = x^2 y + e^x cos y;  Phi = d phi / d zbar
    def Phi(z):
        x, y = z.real, z.imag
        px = 2 * x * y + np.exp(x) * np.cos(y)
        py = x * x - np.exp(x) * np.sin(y)
        return 0.5 * (px + 1j * py)

    target = 0.4 + 0.5j
    a = abar(Phi, 0j, target)
    b = abar(Phi, 0j, target, path=polyline([0j, 0.6 + 0j, 0.6 + 0.5j, target]))
    c = abar(Phi, 0j, target, path=polyline([0j, -0.3j, -0.2 + 0.4j, target]))
    exact = 0.4**2 * 0.5 + np.exp(0.4) * np.cos(0.5) - 1.0
    assert abs(a - exact) < 1e-10
    assert abs(b - a) < 1e-10
    assert abs(c - a) < 1e-10

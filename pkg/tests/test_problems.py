import numpy as np
import pytest

from formalpowers.exceptions import ConformalMapError, NotASolutionError, PositivityError
from formalpowers.geometry import boundary_sample, ellipse_with_area_pi, peaked_disk, unit_disk
from formalpowers.problems import (
    complete_system,
    coordinate_catalog,
    exponential_potential,
    laplace,
    ode_profile,
    particular_solution,
    schrodinger,
    second_example_solution,
    yukawa,
)

RING = 0.7 * boundary_sample(unit_disk(), 5)


def test_second_example_solution_solves_equation():
    z = 0.5 * boundary_sample(unit_disk(), 9)
    res = exponential_potential().residual(second_example_solution, z)
    assert np.max(np.abs(res)) < 1e-9


def test_ode_profile_cosh():
    prof = ode_profile(np.ones_like, (-1.0, 1.0), y_start=0.0)
    np.testing.assert_allclose(prof.h, np.cosh(prof.y), atol=1e-11)
    y = np.linspace(-1, 1, 37)
    np.testing.assert_allclose(prof(y), np.cosh(y), atol=1e-11)
    np.testing.assert_allclose(prof.derivative(y), np.sinh(y), atol=1e-10)


def test_ode_profile_fourth_order():
    errs = []
    for step in (1e-2, 5e-3):
        prof = ode_profile(np.ones_like, (-1.0, 1.0), y_start=0.0, step=step)
        errs.append(np.max(np.abs(prof.h - np.cosh(prof.y))))
    assert 13 < errs[0] / errs[1] < 19


def test_ode_profile_residual():
    prof = ode_profile(lambda y: 0.25 * np.exp(y), (-1.05, 1.05))
    y = np.linspace(-1, 1, 41)
    assert np.max(prof.residual(y)) < 1e-4


def test_ode_profile_errors():
    with pytest.raises(ValueError):
        ode_profile(np.ones_like, (1.0, -1.0))
    with pytest.raises(PositivityError):
        ode_profile(lambda y: -10 * np.ones_like(y), (-1.0, 1.0))


@pytest.mark.parametrize("name", ["cartesian", "polar", "parabolic", "elliptic", "bipolar"])
def test_coordinate_derivatives(name):
    cs = coordinate_catalog(name, alpha=2.0)
    z = np.array([0.4 + 0.3j, -0.2 + 0.6j, 0.5 - 0.5j])
    h = 1e-5
    fd = (cs.Phi(z + h) - cs.Phi(z - h)) / (2 * h)
    np.testing.assert_allclose(cs.dPhi(z), fd, rtol=1e-8)
    fd2 = (cs.dPhi(z + h) - cs.dPhi(z - h)) / (2 * h)
    np.testing.assert_allclose(cs.d2Phi(z), fd2, rtol=1e-6)
    cs.check(z)


def test_coordinate_singularities():
    with pytest.raises(ConformalMapError):
        coordinate_catalog("polar").check(np.array([0j]))
    with pytest.raises(ConformalMapError):
        coordinate_catalog("bipolar", 1.0).check(np.array([1 + 0j]))
    with pytest.raises(ValueError):
        coordinate_catalog("elliptic", alpha=0.0)
    with pytest.raises(ValueError):
        coordinate_catalog("toroidal")


def test_particular_solution_kinds():
    d = unit_disk()
    assert particular_solution(yukawa(2.0), domain=d).kind == "exponential"
    assert particular_solution(laplace(), domain=d).kind == "constant"
    ps = particular_solution(exponential_potential(), domain=d)
    assert ps.kind == "profile"
    assert np.max(np.abs(ps.problem.residual(ps.u0, RING))) < 1e-6


def test_exponential_particular_solution():
    ps = particular_solution(yukawa(3.0), "exponential", domain=unit_disk())
    np.testing.assert_allclose(ps.u0(RING), np.exp(3.0 * RING.imag))
    np.testing.assert_allclose(ps.f(RING), ps.S(RING.real) * ps.T(RING.imag))


def test_particular_solution_errors():
    with pytest.raises(ValueError):
        particular_solution(laplace(), "exponential")
    with pytest.raises(ValueError):
        particular_solution(laplace(), "custom")
    with pytest.raises(ValueError):
        particular_solution(yukawa(1.0), "spherical")


def test_custom_particular_solution_must_solve_equation():
    one = lambda z: np.ones(np.shape(z))
    with pytest.raises(NotASolutionError):
        particular_solution(
            yukawa(1.0), "custom", domain=unit_disk(), u0=lambda z: 1 + np.real(z) ** 2 + 0 * z.imag, S=one, T=one
        )


def test_eigen_particular_solution_is_complex():
    ps = particular_solution(laplace(), "eigen", lam=2.0)
    assert not ps.real
    np.testing.assert_allclose(ps.u0(RING), np.exp(2j * RING.imag))


def test_yukawa_closed_forms():
    c = 2.0
    basis = complete_system(particular_solution(yukawa(c), domain=unit_disk()), unit_disk(), 4)
    x, y = RING.real, RING.imag
    V = basis.values(RING)
    np.testing.assert_allclose(V[:, 0], np.exp(c * y), atol=1e-14)
    np.testing.assert_allclose(V[:, 1], x * np.exp(c * y), atol=1e-14)
    np.testing.assert_allclose(V[:, 2], -np.sinh(c * y) / c, atol=1e-14)
    np.testing.assert_allclose(V[:, 3], (x * x - y / c) * np.exp(c * y) + np.sinh(c * y) / c**2, atol=1e-14)


def test_harmonic_basis():
    basis = complete_system(particular_solution(laplace()), unit_disk(), 6)
    z = 0.3 + 0.2j
    expected = [1, z.real, -z.imag, (z**2).real, -(z**2).imag, (z**3).real, -(z**3).imag]
    np.testing.assert_allclose(basis.values(np.array([z]))[0], expected, atol=1e-15)


def test_exact_members_satisfy_equation():
    basis = complete_system(particular_solution(yukawa(1.0), domain=unit_disk()), unit_disk(), 10, check=True)
    assert basis.mode == "exact"
    assert np.max(basis.laplacian_residual(RING)) < 1e-10


def test_numeric_members_satisfy_equation():
    d = unit_disk()
    basis = complete_system(particular_solution(exponential_potential(), domain=d), d, 8, check=True)
    assert basis.mode == "numeric"
    assert np.max(basis.laplacian_residual(0.7 * RING)) < 1e-8


def test_numeric_matches_exact_for_yukawa():
    d = unit_disk()
    ps = particular_solution(yukawa(1.0), domain=d)
    ex = complete_system(ps, d, 9, "exact").values(RING)
    nu = complete_system(ps, d, 9, "numeric").values(RING)
    np.testing.assert_allclose(nu, ex, atol=1e-12)


def test_exact_gradient_matches_numeric():
    d = ellipse_with_area_pi(0.6)
    ps = particular_solution(yukawa(1.5), domain=d)
    gx, gy = complete_system(ps, d, 7, "exact").gradient(RING)
    nx, ny = complete_system(ps, d, 7, "numeric").gradient(RING)
    np.testing.assert_allclose(nx, gx, atol=1e-8)
    np.testing.assert_allclose(ny, gy, atol=1e-8)


def test_complete_system_errors():
    d = unit_disk()
    ps = particular_solution(exponential_potential(), domain=d)
    with pytest.raises(ValueError):
        complete_system(ps, d, -1)
    with pytest.raises(ValueError):
        complete_system(ps, d, 4, "exact")
    with pytest.raises(ValueError):
        complete_system(ps, d, 4, "symbolic")


def test_peaked_domain_is_star_shaped_for_moderate_height():
    d = peaked_disk(0.5)
    basis = complete_system(particular_solution(yukawa(1.0), domain=d), d, 6)
    assert len(basis) == 7


def test_schrodinger_descriptor():
    prob = schrodinger(lambda y: 2 + 0 * y, "flat")
    assert prob.params["name"] == "flat"
    np.testing.assert_allclose(prob.q(RING), -2.0)

import numpy as np
import pytest

from formalpowers.exceptions import ConformalMapError, DegeneratePairError, GeometryError, PositivityError
from formalpowers.geometry import boundary_sample, unit_disk
from formalpowers.quadrature import polyline
from formalpowers.vekua import (
    GeneratingPair,
    associated_q1,
    char_coeffs,
    conjugate_metaharmonic,
    elliptic_residual,
    exponential_sequence,
    factorization_residual,
    fg_derivative,
    fg_integral,
    formal_powers,
    generating_sequence,
    main_pair,
    taylor_coefficients,
    vekua_residual,
)


def one(z):
    return np.ones_like(np.real(z))


def f_exp(z):
    return np.exp(np.imag(z))


def df_exp(z):
    e = np.exp(np.imag(z))
    return -0.5j * e, 0.5j * e


PTS = np.array([0.3 + 0.1j, -0.2 + 0.5j, 0.05 - 0.6j])
RING = 0.8 * boundary_sample(unit_disk(), 7)


@pytest.fixture(scope="module")
def exp_powers():
    return formal_powers(exponential_sequence(1.0), 0, 6)


def test_main_pair_coefficients():
    # for f = exp(y): a = A = 0, b = f_zbar/f = i/2, B = f_z/f = -i/2
    pair = main_pair(f_exp, df_exp, points=PTS)
    cc = char_coeffs(pair, PTS)
    np.testing.assert_allclose(cc.a, 0, atol=1e-15)
    np.testing.assert_allclose(cc.A, 0, atol=1e-15)
    np.testing.assert_allclose(cc.b, 0.5j, atol=1e-15)
    np.testing.assert_allclose(cc.B, -0.5j, atol=1e-15)


def test_main_pair_finite_difference_derivatives():
    cc_fd = char_coeffs(main_pair(f_exp), PTS)
    np.testing.assert_allclose(cc_fd.B, -0.5j, atol=1e-6)


def test_main_pair_rejects_nonpositive_f():
    with pytest.raises(PositivityError):
        main_pair(lambda z: np.real(z), points=PTS)


def test_degenerate_pair():
    pair = GeneratingPair(lambda z: np.ones_like(z), lambda z: 2 * np.ones_like(z))
    with pytest.raises(DegeneratePairError):
        pair.check(PTS)
    with pytest.raises(DegeneratePairError):
        char_coeffs(pair, PTS)


def test_generators_have_zero_derivative():
    pair = main_pair(f_exp, df_exp)
    for W in (pair.F, pair.G):
        np.testing.assert_allclose(fg_derivative(W, pair)(PTS), 0, atol=1e-8)


def test_derivative_lowers_formal_power(exp_powers):
    # the (F, G)-derivative of Z^(2)(1) is 2 Z^(1)(1) for a constant sequence
    pair = main_pair(f_exp, df_exp)
    d = fg_derivative(lambda w: exp_powers[4](w), pair)(PTS)
    np.testing.assert_allclose(d, 2 * exp_powers[2](PTS), atol=1e-7)


def test_fg_integral_raises_formal_power(exp_powers):
    pair = main_pair(f_exp, df_exp)
    for z in PTS:
        got = fg_integral(lambda w: exp_powers[0](w), pair, polyline([0, z]))
        assert got == pytest.approx(exp_powers[2](np.array([z]))[0], abs=1e-13)


def test_unit_f_gives_monomials():
    seq = generating_sequence(one, one)
    fps = formal_powers(seq, 0, 5, targets=PTS)
    for n in range(6):
        np.testing.assert_allclose(fps[2 * n](), PTS**n, atol=1e-14)
        np.testing.assert_allclose(fps[2 * n + 1](), 1j * PTS**n, atol=1e-14)


def test_exact_powers_solve_vekua_equation(exp_powers):
    for fp in exp_powers:
        assert np.max(vekua_residual(lambda w: fp(w), f_exp, PTS)) < 1e-6


def test_exact_powers_vanish_at_center(exp_powers):
    z0 = np.array([0j])
    for fp in exp_powers[2:]:
        assert abs(fp(z0)[0]) < 1e-15


def test_initial_values(exp_powers):
    np.testing.assert_allclose(exp_powers[0](PTS), np.exp(PTS.imag), rtol=1e-14)
    np.testing.assert_allclose(exp_powers[1](PTS), 1j * np.exp(-PTS.imag), rtol=1e-14)


def test_closed_form_matches_series(exp_powers):
    fp = exp_powers[6]
    U, V = fp.closed_form()
    u, v = fp.components(PTS)
    np.testing.assert_allclose(U(PTS), u, atol=1e-13)
    np.testing.assert_allclose(V(PTS), v, atol=1e-13)


@pytest.mark.parametrize("kappa", [1.0, 3.0, 2j, 1 + 1j])
def test_exact_and_numeric_agree(kappa):
    seq = exponential_sequence(kappa)
    ex = formal_powers(seq, 0, 8)
    nu = formal_powers(seq, 0, 8, targets=RING, mode="numeric")
    for e, n in zip(ex, nu):
        for a, b in zip(e.components(RING), n.values):
            assert np.max(np.abs(a - b)) < 1e-12


def test_numeric_powers_are_only_known_at_targets():
    nu = formal_powers(exponential_sequence(1.0), 0, 1, targets=PTS, mode="numeric")
    with pytest.raises(ValueError):
        nu[0].components(PTS)


def test_mode_errors():
    seq = generating_sequence(one, one)
    with pytest.raises(ValueError):
        formal_powers(seq, 0, 2, mode="exact")
    with pytest.raises(ValueError):
        formal_powers(seq, 0, 2, mode="numeric")


def test_center_outside_domain():
    with pytest.raises(GeometryError):
        formal_powers(exponential_sequence(1.0), 2.0, 2, domain=unit_disk())


def test_conformal_map_check():
    with np.errstate(divide="ignore", invalid="ignore"), pytest.raises(ConformalMapError):
        generating_sequence(np.exp, one, Phi=np.log, dPhi=lambda z: 1 / z, points=np.array([0j, 0.5 + 0j]))


def test_taylor_coefficients_of_formal_powers(exp_powers):
    seq = exponential_sequence(1.0)
    for i, fp in enumerate(exp_powers[:6]):
        a = taylor_coefficients(lambda w: fp(w), seq, 0, 3).a
        expected = np.zeros(4, dtype=complex)
        expected[i // 2] = 1 if i % 2 == 0 else 1j
        np.testing.assert_allclose(a, expected, atol=1e-8)


def test_taylor_coefficients_real_combination(exp_powers):
    W = lambda w: 2 * exp_powers[4](w) - 3 * exp_powers[3](w) + exp_powers[0](w)
    a = taylor_coefficients(W, exponential_sequence(1.0), 0, 3).a
    np.testing.assert_allclose(a, [1, -3j, 2, 0], atol=1e-8)


def test_taylor_order_cap():
    with pytest.raises(ValueError):
        taylor_coefficients(lambda w: w, exponential_sequence(1.0), 0, 13)


def test_conjugate_of_x_is_y():
    v = conjugate_metaharmonic(np.real, one, one)
    np.testing.assert_allclose(v(RING), RING.imag, atol=1e-13)


def test_associated_potential(exp_powers):
    # p = 1, q = -1, u0 = exp(y): q1 = -(q + 2 |grad u0|^2 / u0^2) = -1
    q1 = associated_q1(one, lambda z: -one(z), f_exp)
    np.testing.assert_allclose(q1(PTS), -1.0, atol=1e-6)
    V = lambda w: exp_powers[4].components(w)[1]
    U = lambda w: exp_powers[4].components(w)[0]
    assert np.max(np.abs(elliptic_residual(V, one, q1, PTS))) < 1e-6
    assert np.max(np.abs(elliptic_residual(U, one, lambda z: -one(z), PTS))) < 1e-5


def test_factorization_second_order():
    phi = lambda z: np.real(z) ** 3 * np.imag(z)
    q = lambda z: -one(z)
    r1 = factorization_residual(one, q, f_exp, phi, PTS[:2], h=1e-2)
    r2 = factorization_residual(one, q, f_exp, phi, PTS[:2], h=1e-3)
    assert r2 < 1e-8
    assert 50 < r1 / r2 < 200


def test_polar_successor_identities():
    # successive pairs satisfy a_{m+1} = a_m and b_{m+1} = -B_m
    seq = generating_sequence(
        lambda s: np.exp(0.3 * s),
        lambda t: 2 + np.cos(t),
        Phi=np.log,
        dPhi=lambda z: 1 / z,
        d2Phi=lambda z: -1 / z**2,
        dS=lambda s: 0.3 * np.exp(0.3 * s),
        dT=lambda t: -np.sin(t),
        points=PTS,
    )
    for m in range(4):
        c0 = char_coeffs(seq.pair(m), PTS)
        c1 = char_coeffs(seq.pair(m + 1), PTS)
        np.testing.assert_allclose(c1.a, c0.a, atol=1e-13)
        np.testing.assert_allclose(c1.b, -c0.B, atol=1e-13)

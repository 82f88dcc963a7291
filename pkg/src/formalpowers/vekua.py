"""Pseudoanalytic calculus for the main Vekua equation ``W_zbar = (f_zbar/f) conj(W)``.

Generating pairs, characteristic coefficients, the (F, G)-derivative and
integral, generating sequences for separable ``f = S(s) T(t)`` and the
recursive construction of formal powers.

Formal powers are produced in two ways:

* exact mode, for ``f = exp(kappa y)``: the recursion is carried out in the
  :class:`~formalpowers.expoly.ExpPoly` algebra and yields closed forms;
* numeric mode, for any separable ``f``: every evaluation target gets a ray
  from the center, and the recursion runs on that ray's quadrature nodes
  with cumulative integration matrices.

Both modes keep the Vekua imaginary unit ``j`` separate from the complex
unit of the coefficients: a value ``W = U + j V`` is stored as the pair
``(U, V)``.  For real ``f`` the components are real and ``W = U + i V`` in
the usual sense; for complex ``f`` (eigenvalue scans) the same code yields
the analytic continuation of the real construction.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial, gcd
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.linalg import toeplitz

from .exceptions import ConformalMapError, DegeneratePairError, GeometryError, PositivityError, SeparabilityError
from .expoly import ExpPoly
from .quadrature import DEFAULT_RULE, Path, QuadratureRule, abar, cumulative_matrix, integrate_path

FD_STEP = 1e-3
DEGENERATE_TOL = 1e-14


# ---------------------------------------------------------------------------
# differentiation helpers


def partials(field: Callable, z, h: float = FD_STEP):
    """Fourth-order centered differences ``(d/dx, d/dy)`` of a field of ``z``."""
    z = np.asarray(z, dtype=complex)

    def d(e):
        return (-field(z + 2 * e) + 8 * field(z + e) - 8 * field(z - e) + field(z - 2 * e)) / (12 * h)

    return d(h), d(1j * h)


def wirtinger(field: Callable, z, h: float = FD_STEP):
    """``(d/dz, d/dzbar)`` of a complex field by finite differences."""
    fx, fy = partials(field, z, h)
    return 0.5 * (fx - 1j * fy), 0.5 * (fx + 1j * fy)


# ---------------------------------------------------------------------------
# pairs and coefficients


@dataclass(frozen=True)
class GeneratingPair:
    """Two fields ``F``, ``G`` with ``Im(conj(F) G) > 0``.

    ``dF`` and ``dG``, when given, return ``(d/dz, d/dzbar)`` analytically;
    otherwise finite differences are used.
    """

    F: Callable
    G: Callable
    dF: Callable | None = None
    dG: Callable | None = None
    provenance: str = "numeric"

    def derivatives(self, z):
        z = np.asarray(z, dtype=complex)
        Fz, Fzb = self.dF(z) if self.dF is not None else wirtinger(self.F, z)
        Gz, Gzb = self.dG(z) if self.dG is not None else wirtinger(self.G, z)
        return Fz, Fzb, Gz, Gzb

    def check(self, z) -> None:
        z = np.asarray(z, dtype=complex)
        val = np.imag(np.conj(self.F(z)) * self.G(z))
        if not np.all(val > 0):
            raise DegeneratePairError("Im(conj(F) G) must be positive at every sample point")


@dataclass(frozen=True)
class CharacteristicCoefficients:
    a: np.ndarray
    b: np.ndarray
    A: np.ndarray
    B: np.ndarray


def main_pair(f: Callable, df: Callable | None = None, points=None) -> GeneratingPair:
    """The pair ``(f, i/f)`` of the main Vekua equation for a positive ``f``.

    ``df(z)`` may supply ``(f_z, f_zbar)``.  Positivity and the pair
    inequality are verified at ``points`` when given.
    """
    if points is not None:
        vals = np.asarray(f(np.asarray(points, dtype=complex)))
        if np.any(np.abs(vals.imag) > 1e-12 * np.abs(vals)) or np.any(vals.real <= 0):
            raise PositivityError("f must be real and positive at every sample point")

    def G(z):
        return 1j / f(z)

    dG = None
    if df is not None:

        def dG(z):
            fz, fzb = df(z)
            fv = f(z)
            return -1j * fz / fv**2, -1j * fzb / fv**2

    pair = GeneratingPair(lambda z: f(z) + 0j, G, df, dG, "main")
    if points is not None:
        pair.check(points)
    return pair


def char_coeffs(pair: GeneratingPair, z) -> CharacteristicCoefficients:
    """Characteristic coefficients ``a, b, A, B`` at the points ``z``."""
    z = np.asarray(z, dtype=complex)
    F, G = pair.F(z), pair.G(z)
    Fz, Fzb, Gz, Gzb = pair.derivatives(z)
    den = F * np.conj(G) - np.conj(F) * G
    if np.any(np.abs(den) < DEGENERATE_TOL):
        raise DegeneratePairError("F conj(G) - conj(F) G vanishes")
    a = -(np.conj(F) * Gzb - Fzb * np.conj(G)) / den
    b = (F * Gzb - Fzb * G) / den
    A = -(np.conj(F) * Gz - Fz * np.conj(G)) / den
    B = (F * Gz - Fz * G) / den
    return CharacteristicCoefficients(a, b, A, B)


def fg_derivative(W: Callable, pair: GeneratingPair, dW: Callable | None = None) -> Callable:
    """The (F, G)-derivative ``W_z - A W - B conj(W)`` as a field."""

    def Wdot(z):
        z = np.asarray(z, dtype=complex)
        Wz = dW(z)[0] if dW is not None else wirtinger(W, z)[0]
        cc = char_coeffs(pair, z)
        w = W(z)
        return Wz - cc.A * w - cc.B * np.conj(w)

    return Wdot


def fg_integral(W: Callable, pair: GeneratingPair, path: Path, rule: QuadratureRule = DEFAULT_RULE) -> complex:
    """Bers' (F, G)-integral of ``W`` along ``path``, evaluated at its end point."""

    def den(z):
        F, G = pair.F(z), pair.G(z)
        d = F * np.conj(G) - np.conj(F) * G
        if np.any(np.abs(d) < DEGENERATE_TOL):
            raise DegeneratePairError("F conj(G) - conj(F) G vanishes on the path")
        return d

    k1 = integrate_path(lambda z: 2 * np.conj(pair.G(z)) / den(z) * W(z), path, rule)
    k2 = integrate_path(lambda z: 2 * np.conj(pair.F(z)) / den(z) * W(z), path, rule)
    z1 = np.array([path.vertices[-1]])
    return complex(pair.F(z1)[0] * k1.real - pair.G(z1)[0] * k2.real)


# ---------------------------------------------------------------------------
# generating sequences


@dataclass(frozen=True)
class GeneratingSequence:
    """Generating sequence of ``f = S(s) T(t)`` with ``s + i t = Phi(z)``.

    Even members are ``(Phi_z^m S T, i Phi_z^m / (S T))``, odd members
    ``(Phi_z^m T / S, i Phi_z^m S / T)``.  ``S`` and ``T`` may return complex
    values (complex particular solutions); then the pairs are only available
    through :meth:`components`.  ``dS``/``dT``/``d2Phi`` enable analytic
    derivatives for real ``S``, ``T``.
    """

    S: Callable
    T: Callable
    Phi: Callable = staticmethod(lambda z: z)
    dPhi: Callable = staticmethod(lambda z: np.ones_like(z))
    d2Phi: Callable | None = staticmethod(lambda z: np.zeros_like(z))
    dS: Callable | None = None
    dT: Callable | None = None
    constant: bool = False
    kappa: complex | None = None  # set when f = exp(kappa y) in Cartesian coordinates
    name: str = "custom"

    def g(self, m: int, z):
        w = self.Phi(np.asarray(z, dtype=complex))
        s, t = w.real, w.imag
        if m % 2 == 0:
            return self.S(s) * self.T(t)
        return self.T(t) / self.S(s)

    def components(self, m: int, z):
        """``(F1, F2, G1, G2)`` with ``F_m = F1 + j F2`` and ``G_m = G1 + j G2``."""
        z = np.asarray(z, dtype=complex)
        g = self.g(m, z)
        P = self.dPhi(z) ** m if m else np.ones_like(z)
        P1, P2 = P.real, P.imag
        return g * P1, g * P2, -P2 / g, P1 / g

    def check(self, z) -> None:
        z = np.asarray(z, dtype=complex)
        dphi = self.dPhi(z)
        if np.any(~np.isfinite(dphi)) or np.any(np.abs(dphi) < 1e-12):
            raise ConformalMapError("Phi_z vanishes or is unbounded on the sample set")
        w = self.Phi(z)
        if np.any(np.abs(self.S(w.real)) < 1e-300) or np.any(np.abs(self.T(w.imag)) < 1e-300):
            raise SeparabilityError("S and T must not vanish")

    def pair(self, m: int) -> GeneratingPair:
        """The ``m``-th pair as ordinary complex fields (real ``S``, ``T`` only)."""

        def F(z):
            z = np.asarray(z, dtype=complex)
            return self.g(m, z) * (self.dPhi(z) ** m)

        def G(z):
            z = np.asarray(z, dtype=complex)
            return 1j * (self.dPhi(z) ** m) / self.g(m, z)

        dF = dG = None
        if self.dS is not None and self.dT is not None and self.d2Phi is not None:

            def dg(z):
                # derivatives of the real factor g(s, t) through Cauchy-Riemann
                w = self.Phi(z)
                s, t = w.real, w.imag
                S, T, dS, dT = self.S(s), self.T(t), self.dS(s), self.dT(t)
                if m % 2 == 0:
                    gs, gt = dS * T, S * dT
                else:
                    gs, gt = -T * dS / S**2, dT / S
                phz = self.dPhi(z)
                return 0.5 * phz * (gs - 1j * gt), 0.5 * np.conj(phz) * (gs + 1j * gt)

            def dPm(z):
                if m == 0:
                    return np.zeros_like(z)
                return m * self.dPhi(z) ** (m - 1) * self.d2Phi(z)

            def dF(z):
                z = np.asarray(z, dtype=complex)
                gz, gzb = dg(z)
                P = self.dPhi(z) ** m
                return gz * P + self.g(m, z) * dPm(z), gzb * P

            def dG(z):
                z = np.asarray(z, dtype=complex)
                gz, gzb = dg(z)
                g = self.g(m, z)
                P = self.dPhi(z) ** m
                return 1j * (dPm(z) / g - P * gz / g**2), -1j * P * gzb / g**2

        return GeneratingPair(F, G, dF, dG, "sequence")


def generating_sequence(S, T, Phi=None, dPhi=None, d2Phi=None, dS=None, dT=None, points=None, kappa=None, name="custom"):
    """Build a :class:`GeneratingSequence`; validates ``Phi_z``, ``S``, ``T`` at ``points``."""
    kw = {}
    if Phi is not None:
        kw.update(Phi=Phi, dPhi=dPhi, d2Phi=d2Phi)
    seq = GeneratingSequence(S, T, dS=dS, dT=dT, kappa=kappa, name=name, constant=Phi is None and _is_unit(S), **kw)
    if points is not None:
        seq.check(points)
    return seq


def _is_unit(S) -> bool:
    probe = np.linspace(-2.0, 2.0, 9)
    try:
        return bool(np.allclose(S(probe), 1.0, rtol=0, atol=0))
    except Exception:
        return False


def exponential_sequence(kappa) -> GeneratingSequence:
    """Constant sequence of ``f = exp(kappa y)``: ``S = 1``, ``T = exp(kappa t)``, ``Phi = z``."""
    kappa = complex(kappa)
    k = kappa.real if kappa.imag == 0 else kappa
    return GeneratingSequence(
        S=lambda s: np.ones_like(s),
        T=lambda t: np.exp(k * t),
        dS=lambda s: np.zeros_like(s),
        dT=lambda t: k * np.exp(k * t),
        constant=True,
        kappa=kappa,
        name="exponential",
    )


# ---------------------------------------------------------------------------
# formal powers


class Bivariate:
    """Polynomial ``sum T[j, m] X**j Y**m`` in local coordinates ``X + iY = z - z0``."""

    def __init__(self, coef: np.ndarray, z0: complex):
        self.coef = np.asarray(coef)
        self.z0 = complex(z0)

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        w = (z - self.z0).ravel()
        hy = np.polynomial.polynomial.polyval(w.imag, self.coef.T)
        return np.polynomial.polynomial.polyval(w.real, hy, tensor=False).reshape(z.shape)

    def dx(self) -> "Bivariate":
        J = self.coef.shape[0]
        return Bivariate(self.coef[1:] * np.arange(1, J)[:, None], self.z0)

    def dy(self) -> "Bivariate":
        M = self.coef.shape[1]
        return Bivariate(self.coef[:, 1:] * np.arange(1, M)[None, :], self.z0)

    def __add__(self, other: "Bivariate") -> "Bivariate":
        a, b = self.coef, other.coef
        out = np.zeros((max(a.shape[0], b.shape[0]), max(a.shape[1], b.shape[1])), dtype=np.result_type(a, b))
        out[: a.shape[0], : a.shape[1]] += a
        out[: b.shape[0], : b.shape[1]] += b
        return Bivariate(out, self.z0)

    def laplacian(self) -> "Bivariate":
        return self.dx().dx() + self.dy().dy()


@dataclass
class FormalPower:
    """``Z^(n)(a, z0; .)`` for ``a`` in ``{1, i}``.

    Exact mode carries ``series``: the components as convergent double
    series in ``z - z0``, produced by the same recursion as the closed form;
    ``closed_form()`` rebuilds the :class:`ExpPoly` expressions.  Numeric mode
    stores the component values at the evaluation targets (``values``).
    """

    n: int
    a: complex
    z0: complex
    series: tuple | None = None
    values: tuple | None = None
    targets: np.ndarray | None = None
    kappa: complex | None = None

    def closed_form(self) -> tuple:
        """``(U, V)`` as :class:`ExpPoly` objects (exact mode only)."""
        if self.kappa is None:
            raise ValueError("closed forms exist only for exponential sequences")
        kappa = complex(self.kappa)
        if self.z0 == 0:
            return tuple(
                ExpPoly.from_terms(kappa, {(j, k, e): float(v) * kappa ** (j + k - self.n) for (j, k, e), v in t.items()})
                for t in unit_closed_forms(self.n, self.a)
            )
        return _closed_form(kappa, self.z0, self.n, self.a)

    def components(self, z=None):
        if self.series is not None:
            if z is None:
                raise ValueError("exact formal powers need evaluation points")
            U, V = self.series
            return U(z), V(z)
        if z is not None:
            raise ValueError("numeric formal powers are only known at their targets")
        return self.values

    def __call__(self, z=None):
        """Complex value ``U + i V`` (meaningful for real ``f``)."""
        U, V = self.components(z)
        return U + 1j * V


def _exact_initial(kappa, z0, a):
    g0 = np.exp(complex(kappa) * complex(z0).imag)
    if a == 1:
        return ExpPoly.exp(kappa, 1, 1.0 / g0), ExpPoly.zero(kappa)
    return ExpPoly.zero(kappa), ExpPoly.exp(kappa, -1, g0)


def _exact_step(U: ExpPoly, V: ExpPoly, n: int, z0: complex):
    """One recursion step for the constant pair ``(exp(kappa y), j exp(-kappa y))``."""
    x0, y0 = z0.real, z0.imag
    P, Q = U.mul_exp(-1), V.mul_exp(-1)  # W / f
    R, S = U.mul_exp(1), V.mul_exp(1)  # f W
    phi = P.int_x(x0) + (-Q).at_x(x0).int_y(y0)  # phi_x = P, phi_y = -Q
    psi = S.int_x(x0) + R.at_x(x0).int_y(y0)  # psi_x = S, psi_y = R
    return phi.mul_exp(1) * n, psi.mul_exp(-1) * n


def _closed_form(kappa: complex, z0: complex, n: int, a: complex):
    U, V = _exact_initial(kappa, z0, a)
    for k in range(1, n + 1):
        U, V = _exact_step(U, V, k, z0)
    return U, V


def series_order(kappa, radius: float, n_max: int) -> int:
    """Number of ``Y`` coefficients that resolves every power on ``|Y| <= radius``."""
    a = 2.0 * abs(complex(kappa)) * max(radius, 1e-3)
    p, term = 0, 1.0
    while term > 1e-24 or p < 2 * a:
        p += 1
        term *= a / p
    order = p + n_max + 12
    return 8 * ((order + 7) // 8)


def _rational_step(U: dict, V: dict, n: int):
    """Recursion step for ``f = exp(y)`` centred at the origin, in exact rationals.

    Terms are ``{(j, k, s): c}`` for ``c x**j y**k exp(s y)``.
    """

    def mulexp(t, sh):
        return {(j, k, e + sh): v for (j, k, e), v in t.items()}

    def int_x(t):
        return {(j + 1, k, e): v / (j + 1) for (j, k, e), v in t.items()}

    def int_y_on_axis(t, sign):
        out = defaultdict(Fraction)
        for (j, k, e), v in t.items():
            if j:
                continue
            v = sign * v
            if e == 0:
                out[(0, k + 1, 0)] += v / (k + 1)
                continue
            c = Fraction(1, e)
            for r in range(k + 1):
                out[(0, k - r, e)] += v * c
                c = -c * (k - r) / e
            out[(0, 0, 0)] -= v * Fraction((-1) ** k * factorial(k), e ** (k + 1))
        return out

    def add(p, q):
        out = defaultdict(Fraction, p)
        for key, v in q.items():
            out[key] += v
        return {key: v for key, v in out.items() if v}

    phi = add(int_x(mulexp(U, -1)), int_y_on_axis(mulexp(V, -1), -1))
    psi = add(int_x(mulexp(V, 1)), int_y_on_axis(mulexp(U, 1), 1))
    return (
        {key: n * v for key, v in mulexp(phi, 1).items()},
        {key: n * v for key, v in mulexp(psi, -1).items()},
    )


_UNIT_FORMS: dict = {1: [({(0, 0, 1): Fraction(1)}, {})], 1j: [({}, {(0, 0, -1): Fraction(1)})]}


def unit_closed_forms(n: int, a: complex) -> tuple[dict, dict]:
    """Exact rational terms of ``Z^(n)(a, 0; .)`` for ``f = exp(y)``."""
    forms = _UNIT_FORMS[a]
    while len(forms) <= n:
        forms.append(_rational_step(*forms[-1], len(forms)))
    return forms[n]


@lru_cache(maxsize=512)
def _unit_taylor(n: int, a: complex, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Taylor coefficients ``T[j, m]`` of both components for ``kappa = 1``, rounded once from exact values."""
    out = []
    for terms in unit_closed_forms(n, a):
        T = np.zeros((n + 2, order))
        groups = defaultdict(dict)
        for (j, k, e), v in terms.items():
            groups[(j, e)][k] = v
        # falling factorials m!/(m-k)!, so that T[j, m] = sum_k p_k e**(m-k) ff[m][k] / (den m!)
        kmax = max((k for (_, k, _) in terms), default=0)
        ff = [[1] * (kmax + 1) for _ in range(order)]
        for m in range(order):
            for k in range(1, min(m, kmax) + 1):
                ff[m][k] = ff[m][k - 1] * (m - k + 1)
        for (j, e), poly in groups.items():
            den = 1
            for v in poly.values():
                den = den * v.denominator // gcd(den, v.denominator)
            num = [(k, int(v * den)) for k, v in poly.items()]
            mfact = 1
            for m in range(order):
                if m:
                    mfact *= m
                if e == 0:
                    acc = sum(pk * mfact for k, pk in num if k == m)
                else:
                    acc = sum(pk * ff[m][k] * (1 if e == 1 or (m - k) % 2 == 0 else -1) for k, pk in num if k <= m)
                if acc:
                    T[j, m] += acc / (den * mfact)  # correctly rounded integer division
        out.append(T)
    return out[0], out[1]


def exponential_power_series(kappa, z0, n_max: int, radius: float = 1.5, order: int | None = None):
    """Coefficient arrays of ``Z^(n)(a, z0; .)`` for ``f = exp(kappa y)``.

    Uses the exact rational forms for ``kappa = 1`` and the scaling
    ``Z_kappa^(n)(z0 + w) = kappa**-n Z_1^(n)(kappa w)``, valid for complex
    ``kappa`` by analytic continuation (a rescaled pair has the same formal
    powers, so the center only enters through ``w = z - z0``).  The ``Y``
    series is truncated at ``order`` terms; all kept coefficients are
    correctly rounded.

    Returns ``{(n, a): (TU, TV)}`` with ``T[j, m]`` multiplying ``X**j Y**m``.
    """
    kappa = complex(kappa)
    M = order or series_order(kappa, radius, n_max)
    k = kappa.real if kappa.imag == 0 else kappa
    J = n_max + 2
    expo = np.arange(J)[:, None] + np.arange(M)[None, :]
    out = {}
    for n in range(n_max + 1):
        scale = np.zeros((J, M), dtype=type(k) if isinstance(k, complex) else float)
        ok = expo >= n
        scale[ok] = np.power(k, (expo[ok] - n).astype(float))
        for a in (1, 1j):
            TU, TV = _unit_taylor(n, a, M)
            out[(n, a)] = (np.pad(TU, ((0, J - n - 2), (0, 0))) * scale, np.pad(TV, ((0, J - n - 2), (0, 0))) * scale)
    return out


def exact_formal_powers(kappa, z0, n_max: int, radius: float = 1.5) -> list[FormalPower]:
    """Formal powers of ``f = exp(kappa y)`` for ``n = 0..n_max``, ``a = 1, i``.

    The result evaluates to machine precision on ``|y - y0| <= radius``;
    :meth:`FormalPower.closed_form` yields the exponential-polynomial form.
    """
    z0 = complex(z0)
    table = exponential_power_series(kappa, z0, n_max, radius)
    return [
        FormalPower(n, a, z0, series=(Bivariate(table[(n, a)][0], z0), Bivariate(table[(n, a)][1], z0)), kappa=kappa)
        for n in range(n_max + 1)
        for a in (1, 1j)
    ]


def _initial_coefficients(seq: GeneratingSequence, m: int, z0: complex, a: complex):
    F1, F2, G1, G2 = (np.asarray(v).ravel()[0] for v in seq.components(m, np.array([z0])))
    M = np.array([[F1, G1], [F2, G2]])
    det = F1 * G2 - F2 * G1
    if abs(det) < DEGENERATE_TOL:
        raise DegeneratePairError("generators are linearly dependent at the center")
    return np.linalg.solve(M, np.array([a.real, a.imag], dtype=M.dtype))


def ray_formal_power_table(
    seq: GeneratingSequence,
    z0,
    targets,
    n_max: int,
    rule: QuadratureRule = DEFAULT_RULE,
    coefficients=(1, 1j),
    complex_valued: bool | None = None,
):
    """Run the recursion along the rays ``z0 -> target``.

    Returns ``{(a, m, k): (U, V)}`` with the components of ``Z_m^(k)(a, z0; .)``
    at every target, for all ``m + k <= n_max``.
    """
    z0 = complex(z0)
    targets = np.atleast_1d(np.asarray(targets, dtype=complex))
    t, Q, w = cumulative_matrix(rule)
    delta = targets - z0
    nodes = z0 + delta[:, None] * t[None, :]
    dx, dy = delta.real[:, None], delta.imag[:, None]

    comps_nodes = [seq.components(m, nodes) for m in range(n_max + 1)]
    comps_end = [seq.components(m, targets) for m in range(n_max + 1)]
    if complex_valued is None:
        complex_valued = any(np.iscomplexobj(np.asarray(c)) for c in comps_nodes[0])
    dtype = complex if complex_valued else float

    def cast(arrs):
        return tuple(np.asarray(x, dtype=dtype) if complex_valued else np.asarray(np.real(x), dtype=float) for x in arrs)

    comps_nodes = [cast(c) for c in comps_nodes]
    comps_end = [cast(c) for c in comps_end]

    table = {}
    for a in coefficients:
        a = complex(a)
        # level 0: Z_m^(0) = lam F_m + mu G_m
        level_nodes = []
        for m in range(n_max + 1):
            lam, mu = _initial_coefficients(seq, m, z0, a)
            if not complex_valued:
                lam, mu = float(np.real(lam)), float(np.real(mu))
            F1, F2, G1, G2 = comps_nodes[m]
            level_nodes.append((lam * F1 + mu * G1, lam * F2 + mu * G2))
            e1, e2, h1, h2 = comps_end[m]
            table[(a, m, 0)] = (lam * e1 + mu * h1, lam * e2 + mu * h2)
        for k in range(1, n_max + 1):
            new_level = []
            for m in range(n_max - k + 1):
                U, V = level_nodes[m + 1]
                F1, F2, G1, G2 = comps_nodes[m]
                d = F2 * G1 - F1 * G2
                if np.any(np.abs(d) < DEGENERATE_TOL):
                    raise DegeneratePairError("degenerate pair on a ray")
                # K1 = -j conj(G)/d = (-G2, -G1)/d ;  K2 = -j conj(F)/d = (-F2, -F1)/d
                a1 = (-G2 * U + G1 * V) / d
                b1 = (-G2 * V - G1 * U) / d
                a2 = (-F2 * U + F1 * V) / d
                b2 = (-F2 * V - F1 * U) / d
                r1 = a1 * dx - b1 * dy  # Re_j of K1 W dzeta
                r2 = a2 * dx - b2 * dy
                c1 = r1 @ Q.T
                c2 = r2 @ Q.T
                new_level.append((k * (F1 * c1 - G1 * c2), k * (F2 * c1 - G2 * c2)))
                e1, e2, h1, h2 = comps_end[m]
                ce1 = r1 @ w
                ce2 = r2 @ w
                table[(a, m, k)] = (k * (e1 * ce1 - h1 * ce2), k * (e2 * ce1 - h2 * ce2))
            level_nodes = new_level
    return table


def numeric_formal_powers(seq, z0, targets, n_max, rule=DEFAULT_RULE, complex_valued=None) -> list[FormalPower]:
    table = ray_formal_power_table(seq, z0, targets, n_max, rule, complex_valued=complex_valued)
    targets = np.atleast_1d(np.asarray(targets, dtype=complex))
    out = [
        FormalPower(n, a, complex(z0), values=table[(complex(a), 0, n)], targets=targets)
        for n in range(n_max + 1)
        for a in (1, 1j)
    ]
    return out


def formal_powers(seq: GeneratingSequence, z0, n_max: int, targets=None, domain=None, rule=DEFAULT_RULE, mode="auto"):
    """Formal powers ``Z^(n)(1, z0; .)`` and ``Z^(n)(i, z0; .)`` for ``n <= n_max``.

    ``mode="exact"`` (or ``"auto"`` with an exponential sequence) returns
    closed forms; otherwise values at ``targets`` along rays.  With a
    ``domain``, the center must be interior and every segment
    ``z0 -> target`` must stay inside it.
    """
    z0 = complex(z0)
    if domain is not None:
        if not domain.contains(z0)[0]:
            raise GeometryError("the center must be an interior point")
        if not domain.is_star_shaped():
            raise GeometryError("the domain is not star-shaped with respect to its center")
        if targets is not None and not np.all(domain.segments_inside(targets)):
            raise GeometryError("some target cannot be reached by a straight segment inside the domain")
    if mode == "auto":
        mode = "exact" if seq.kappa is not None else "numeric"
    if mode == "exact":
        if seq.kappa is None:
            raise ValueError("exact mode needs f = exp(kappa y)")
        return exact_formal_powers(seq.kappa, z0, n_max)
    if targets is None:
        raise ValueError("numeric mode needs evaluation targets")
    return numeric_formal_powers(seq, z0, targets, n_max, rule)


# ---------------------------------------------------------------------------
# Taylor coefficients


@dataclass(frozen=True)
class TaylorCoefficients:
    a: np.ndarray

    def __getitem__(self, n):
        return self.a[n]

    def __len__(self):
        return len(self.a)


def _cheb_fit_2d(values: np.ndarray, deg: int) -> np.ndarray:
    """Coefficients of the tensor Chebyshev interpolant on Chebyshev-Lobatto points."""
    x = np.cos(np.pi * np.arange(deg + 1) / deg)
    V = C.chebvander(x, deg)
    inv = np.linalg.inv(V)
    return inv @ values @ inv.T


def taylor_coefficients(
    W: Callable,
    seq: GeneratingSequence,
    z0,
    n_max: int,
    radius: float = 0.25,
    degree: int = 28,
    domain=None,
) -> TaylorCoefficients:
    """``a_n = W^[n](z0) / n!`` with ``W^[m+1]`` the (F_m, G_m)-derivative of ``W^[m]``.

    The successive derivatives are taken spectrally: every ``W^[m]`` is
    interpolated on a Chebyshev grid over the square of half-width ``radius``
    around ``z0`` and differentiated exactly.
    """
    z0 = complex(z0)
    if n_max > 12:
        raise ValueError("n_max is capped at 12")
    x = np.cos(np.pi * np.arange(degree + 1) / degree)
    grid = z0 + radius * (x[None, :] + 1j * x[:, None])  # rows: y, columns: x
    if domain is not None and not np.all(domain.contains(grid.ravel())):
        raise GeometryError("the differentiation stencil leaves the domain")
    vals = np.asarray(W(grid), dtype=complex)
    out = []
    for m in range(n_max + 1):
        out.append(_cheb_eval_center(vals, degree, radius) / factorial(m))
        if m == n_max:
            break
        coef = _cheb_fit_2d(vals, degree)  # coef[iy, ix]
        cx = C.chebder(coef, axis=1) / radius
        cy = C.chebder(coef, axis=0) / radius
        Wx = C.chebgrid2d(x, x, cx.T).T
        Wy = C.chebgrid2d(x, x, cy.T).T
        Wz = 0.5 * (Wx - 1j * Wy)
        cc = char_coeffs(seq.pair(m), grid)
        vals = Wz - cc.A * vals - cc.B * np.conj(vals)
    return TaylorCoefficients(np.array(out))


def _cheb_eval_center(vals, degree, radius):
    coef = _cheb_fit_2d(vals, degree)
    return C.chebval2d(0.0, 0.0, coef.T)


# ---------------------------------------------------------------------------
# conjugate metaharmonic functions and the factorization


def _dzbar(field, z, grad=None, h=FD_STEP):
    if grad is not None:
        gx, gy = grad(z)
    else:
        gx, gy = partials(field, z, h)
    return 0.5 * (gx + 1j * gy)


def conjugate_metaharmonic(
    u: Callable,
    p: Callable,
    u0: Callable,
    base=0j,
    rule: QuadratureRule = DEFAULT_RULE,
    grad_u: Callable | None = None,
    domain=None,
    check: bool = True,
) -> Callable:
    """``v = u0^-1 Abar(i p u0^2 d/dzbar (u / u0))`` with ``v(base) = 0``.

    ``W = p^(1/2) u + i p^(-1/2) v`` then solves the main Vekua equation.
    """

    def ratio(z):
        return u(z) / u0(z)

    def Phi(z):
        z = np.asarray(z, dtype=complex)
        if grad_u is not None:
            gx, gy = grad_u(z)
            u0x, u0y = partials(u0, z)
            U0 = u0(z)
            rx = (gx * U0 - u(z) * u0x) / U0**2
            ry = (gy * U0 - u(z) * u0y) / U0**2
            dz = 0.5 * (rx + 1j * ry)
        else:
            dz = _dzbar(ratio, z)
        return 1j * p(z) * u0(z) ** 2 * dz

    def v(z):
        z = np.asarray(z, dtype=complex)
        flat = np.array([abar(Phi, base, zz, rule, domain=domain, check=check) for zz in z.ravel()])
        return (flat.reshape(z.shape)) / np.real(u0(z))

    return v


def inverse_conjugate_metaharmonic(
    v: Callable, p: Callable, u0: Callable, base=0j, rule: QuadratureRule = DEFAULT_RULE, domain=None, check=True
) -> Callable:
    """``u = -u0 Abar(i p^-1 u0^-2 d/dzbar (u0 v))`` with ``u(base) = 0``."""

    def prod(z):
        return u0(z) * v(z)

    def Phi(z):
        z = np.asarray(z, dtype=complex)
        return 1j / (p(z) * u0(z) ** 2) * _dzbar(prod, z)

    def u(z):
        z = np.asarray(z, dtype=complex)
        flat = np.array([abar(Phi, base, zz, rule, domain=domain, check=check) for zz in z.ravel()])
        return -np.real(u0(z)) * flat.reshape(z.shape)

    return u


def associated_q1(p: Callable, q: Callable, u0: Callable, grad_p=None, grad_u0=None) -> Callable:
    """Potential of the equation ``(div p^-1 grad + q1) v = 0`` satisfied by ``p^(1/2) Im W``."""

    def q1(z):
        z = np.asarray(z, dtype=complex)
        px, py = grad_p(z) if grad_p is not None else partials(p, z)
        ux, uy = grad_u0(z) if grad_u0 is not None else partials(u0, z)
        P, U = p(z), u0(z)
        if np.any(P <= 0) or np.any(U <= 0):
            raise PositivityError("p and u0 must be positive")
        inner = (px * ux + py * uy) / (P * U)
        sq = (ux**2 + uy**2) / U**2
        return np.real(-(q(z) / P + 2 * inner + 2 * sq) / P)

    return q1


def elliptic_residual(u: Callable, p: Callable, q: Callable, z, h: float = 1e-3):
    """``(div p grad + q) u`` by second-order centered differences (conservative form)."""
    z = np.asarray(z, dtype=complex)
    out = q(z) * u(z)
    for e in (h, 1j * h):
        out = out + (p(z + e / 2) * (u(z + e) - u(z)) - p(z - e / 2) * (u(z) - u(z - e))) / h**2
    return out


def factorization_residual(p: Callable, q: Callable, u0: Callable, phi: Callable, z, h: float = 1e-3) -> float:
    """Largest pointwise gap between the two sides of the factorization identity.

    Left: ``(div p grad + q) phi / 4``.  Right: ``p^(1/2) (d_z + (f_zbar/f) C)
    (d_zbar - (f_zbar/f) C) p^(1/2) phi`` with ``f = p^(1/2) u0``.  All
    derivatives use centered differences of step ``h``, so the residual is
    O(h^2).
    """
    z = np.asarray(z, dtype=complex)

    def f(w):
        return np.sqrt(p(w)) * u0(w)

    def d2(field, w):
        fx = (field(w + h) - field(w - h)) / (2 * h)
        fy = (field(w + 1j * h) - field(w - 1j * h)) / (2 * h)
        return 0.5 * (fx - 1j * fy), 0.5 * (fx + 1j * fy)

    def beta(w):
        return d2(f, w)[1] / f(w)

    def psi(w):
        return np.sqrt(p(w)) * phi(w)

    def chi(w):
        return d2(psi, w)[1] - beta(w) * psi(w)  # psi is real: C psi = psi

    rhs = np.sqrt(p(z)) * (d2(chi, z)[0] + beta(z) * np.conj(chi(z)))
    lhs = 0.25 * elliptic_residual(phi, p, q, z, h)
    return float(np.max(np.abs(lhs - rhs)))


def vekua_residual(W: Callable, f: Callable, z, h: float = FD_STEP) -> np.ndarray:
    """``|W_zbar - (f_zbar/f) conj(W)|`` by finite differences."""
    z = np.asarray(z, dtype=complex)
    Wzb = wirtinger(W, z, h)[1]
    fzb = wirtinger(f, z, h)[1]
    return np.abs(Wzb - fzb / f(z) * np.conj(W(z)))

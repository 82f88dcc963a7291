"""Exact algebra of exponential polynomials.

An :class:`ExpPoly` is a finite sum

    sum  c[j, k, s] * x**j * y**k * exp(s * kappa * y)

with integer exponent signs ``s`` and one complex scale ``kappa`` shared by
all terms.  The class is closed under the operations the Yukawa-type
formal-power recursion needs (sums, multiplication by ``x``, ``y`` and
``exp(+-kappa y)``, partial antiderivatives) and integrates exactly along
straight segments.  Coefficients are stored densely in an array indexed by
``(j, k, s + smax)``.
"""

from __future__ import annotations

import io
from functools import lru_cache
from math import factorial

import numpy as np
from scipy.signal import convolve

from .exceptions import AlgebraError

PRUNE = 1e-300
TAYLOR_SWITCH = 1e-3
TAYLOR_TERMS = 12


def exp_moments(mmax: int, beta: complex) -> np.ndarray:
    """``I_m(beta) = integral_0^1 t**m exp(beta t) dt`` for ``m = 0..mmax``.

    Small ``|beta|`` uses a 12-term Taylor expansion in ``beta``.  Otherwise
    the forward recurrence ``I_m = (e^beta - m I_{m-1}) / beta`` is used while
    it is stable (``m < 2|beta|``) and the convergent series
    ``I_m = e^beta * sum_k (-beta)^k / ((m+1)...(m+k+1))`` above that.
    """
    beta = complex(beta)
    out = np.empty(mmax + 1, dtype=complex)
    ab = abs(beta)
    if ab < TAYLOR_SWITCH:
        k = np.arange(TAYLOR_TERMS)
        fact = np.array([factorial(int(i)) for i in k], float)
        powers = beta ** k / fact
        for m in range(mmax + 1):
            out[m] = np.sum(powers / (m + k + 1))
        return out
    eb = np.exp(beta)
    m_switch = min(mmax + 1, int(np.ceil(2.0 * ab)))
    if m_switch > 0:
        out[0] = np.expm1(beta) / beta
        for m in range(1, m_switch):
            out[m] = (eb - m * out[m - 1]) / beta
    for m in range(m_switch, mmax + 1):
        term = 1.0 / (m + 1)
        total = term
        k = 1
        while True:
            term *= -beta / (m + k + 1)
            total += term
            if abs(term) < 1e-17 * abs(total):
                break
            k += 1
        out[m] = eb * total
    return out


def exp_moment_taylor(m: int, beta: complex, terms: int = TAYLOR_TERMS) -> complex:
    """Reference Taylor series for a single moment (used for seam checks)."""
    return complex(sum(beta ** k / (factorial(k) * (m + k + 1)) for k in range(terms)))


@lru_cache(maxsize=256)
def _binomial_rows(n: int) -> np.ndarray:
    rows = np.zeros((n + 1, n + 1))
    for i in range(n + 1):
        rows[i, 0] = 1.0
        for k in range(1, i + 1):
            rows[i, k] = rows[i - 1, k - 1] + (rows[i - 1, k] if k < i else 0.0)
    return rows


def _affine_powers(a: complex, d: complex, n: int) -> np.ndarray:
    """Row ``p`` holds the t-polynomial coefficients of ``(a + d t)**p``."""
    binom = _binomial_rows(n)
    out = np.zeros((n + 1, n + 1), dtype=complex)
    for p in range(n + 1):
        k = np.arange(p + 1)
        out[p, : p + 1] = binom[p, : p + 1] * a ** (p - k) * d ** k
    return out


class ExpPoly:
    """Exponential polynomial in ``(x, y)`` with exponent scale ``kappa``."""

    __slots__ = ("kappa", "coef", "smax", "_taylor")

    def __init__(self, kappa, coef, smax: int | None = None):
        coef = np.asarray(coef, dtype=complex)
        if coef.ndim != 3:
            raise AlgebraError("coefficient array must be 3-dimensional")
        if smax is None:
            smax = (coef.shape[2] - 1) // 2
        if coef.shape[2] != 2 * smax + 1:
            raise AlgebraError("exponent axis must have odd length 2*smax+1")
        self.kappa = complex(kappa)
        self.coef = coef
        self.smax = smax
        self._taylor = {}
        self._normalize()

    # ---- construction -------------------------------------------------
    @classmethod
    def from_terms(cls, kappa, terms: dict) -> "ExpPoly":
        if not terms:
            return cls.zero(kappa)
        jm = max(j for j, _, _ in terms)
        km = max(k for _, k, _ in terms)
        sm = max(abs(s) for _, _, s in terms)
        coef = np.zeros((jm + 1, km + 1, 2 * sm + 1), dtype=complex)
        for (j, k, s), c in terms.items():
            if j < 0 or k < 0:
                raise AlgebraError("powers of x and y must be non-negative")
            coef[j, k, s + sm] += c
        return cls(kappa, coef, sm)

    @classmethod
    def zero(cls, kappa) -> "ExpPoly":
        return cls(kappa, np.zeros((1, 1, 1), dtype=complex), 0)

    @classmethod
    def constant(cls, kappa, value) -> "ExpPoly":
        return cls(kappa, np.full((1, 1, 1), value, dtype=complex), 0)

    @classmethod
    def exp(cls, kappa, sigma: int = 1, scale=1.0) -> "ExpPoly":
        return cls.from_terms(kappa, {(0, 0, sigma): scale})

    # ---- bookkeeping ----------------------------------------------------
    def _normalize(self):
        c = self.coef
        if self.kappa == 0 and self.smax > 0:
            c = c.sum(axis=2, keepdims=True)
            self.smax = 0
        c = np.where(np.abs(c) < PRUNE, 0, c)
        nz = np.nonzero(c)
        if len(nz[0]) == 0:
            self.coef = np.zeros((1, 1, 1), dtype=complex)
            self.smax = 0
            return
        jm, km = nz[0].max(), nz[1].max()
        sm = int(np.max(np.abs(nz[2] - self.smax)))
        lo = self.smax - sm
        self.coef = c[: jm + 1, : km + 1, lo : lo + 2 * sm + 1]
        self.smax = sm

    @property
    def terms(self) -> dict:
        """Nonzero terms as ``{(j, k, sigma): coefficient}``."""
        j, k, s = np.nonzero(self.coef)
        return {(int(a), int(b), int(c) - self.smax): complex(self.coef[a, b, c]) for a, b, c in zip(j, k, s)}

    @property
    def degree(self) -> tuple[int, int]:
        return self.coef.shape[0] - 1, self.coef.shape[1] - 1

    def is_zero(self) -> bool:
        return not np.any(self.coef)

    def _check(self, other: "ExpPoly"):
        if not isinstance(other, ExpPoly):
            raise AlgebraError(f"cannot combine ExpPoly with {type(other).__name__}")
        if self.kappa != other.kappa:
            raise AlgebraError(f"kappa mismatch: {self.kappa} vs {other.kappa}")

    def _padded(self, shape, smax):
        out = np.zeros(shape, dtype=complex)
        lo = smax - self.smax
        j, k, s = self.coef.shape
        out[:j, :k, lo : lo + s] = self.coef
        return out

    # ---- arithmetic ---------------------------------------------------
    def __add__(self, other):
        if np.isscalar(other):
            other = ExpPoly.constant(self.kappa, other)
        self._check(other)
        sm = max(self.smax, other.smax)
        shape = (
            max(self.coef.shape[0], other.coef.shape[0]),
            max(self.coef.shape[1], other.coef.shape[1]),
            2 * sm + 1,
        )
        return ExpPoly(self.kappa, self._padded(shape, sm) + other._padded(shape, sm), sm)

    __radd__ = __add__

    def __neg__(self):
        return ExpPoly(self.kappa, -self.coef, self.smax)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, ExpPoly):
            self._check(other)
            return ExpPoly(self.kappa, convolve(self.coef, other.coef, method="direct"), self.smax + other.smax)
        return ExpPoly(self.kappa, self.coef * complex(other), self.smax)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return ExpPoly(self.kappa, self.coef / complex(scalar), self.smax)

    def mul_x(self) -> "ExpPoly":
        c = np.concatenate([np.zeros((1,) + self.coef.shape[1:], complex), self.coef], axis=0)
        return ExpPoly(self.kappa, c, self.smax)

    def mul_y(self) -> "ExpPoly":
        j, _, s = self.coef.shape
        c = np.concatenate([np.zeros((j, 1, s), complex), self.coef], axis=1)
        return ExpPoly(self.kappa, c, self.smax)

    def mul_exp(self, sigma: int) -> "ExpPoly":
        """Multiply by ``exp(sigma * kappa * y)``."""
        sigma = int(sigma)
        sm = self.smax + abs(sigma)
        j, k, _ = self.coef.shape
        out = np.zeros((j, k, 2 * sm + 1), dtype=complex)
        lo = sm - self.smax + sigma
        out[:, :, lo : lo + self.coef.shape[2]] = self.coef
        return ExpPoly(self.kappa, out, sm)

    def conj(self) -> "ExpPoly":
        """Complex conjugate of the function; only defined for real ``kappa``."""
        if self.kappa.imag != 0:
            raise AlgebraError("conjugation requires a real kappa")
        return ExpPoly(self.kappa, self.coef.conj(), self.smax)

    # ---- calculus -------------------------------------------------------
    def dx(self) -> "ExpPoly":
        if self.coef.shape[0] == 1:
            return ExpPoly.zero(self.kappa)
        j = np.arange(1, self.coef.shape[0])[:, None, None]
        return ExpPoly(self.kappa, self.coef[1:] * j, self.smax)

    def dy(self) -> "ExpPoly":
        sig = (np.arange(self.coef.shape[2]) - self.smax) * self.kappa
        out = self.coef * sig[None, None, :]
        if self.coef.shape[1] > 1:
            k = np.arange(1, self.coef.shape[1])[None, :, None]
            out[:, :-1, :] += self.coef[:, 1:, :] * k
        return ExpPoly(self.kappa, out, self.smax)

    def laplacian(self) -> "ExpPoly":
        return self.dx().dx() + self.dy().dy()

    def at_x(self, x0: complex) -> "ExpPoly":
        """Substitute ``x = x0``."""
        pw = complex(x0) ** np.arange(self.coef.shape[0])
        return ExpPoly(self.kappa, np.tensordot(pw, self.coef, axes=(0, 0))[None], self.smax)

    def at_y(self, y0: complex) -> "ExpPoly":
        """Substitute ``y = y0`` (result depends on ``x`` only)."""
        pk = complex(y0) ** np.arange(self.coef.shape[1])
        ps = np.exp((np.arange(self.coef.shape[2]) - self.smax) * self.kappa * complex(y0))
        c = np.einsum("jks,k,s->j", self.coef, pk, ps)
        return ExpPoly(self.kappa, c[:, None, None], 0)

    def int_x(self, x0: complex = 0.0) -> "ExpPoly":
        """``integral_{x0}^{x} f(xi, y) d xi``."""
        j = np.arange(1, self.coef.shape[0] + 1)[:, None, None]
        c = np.concatenate([np.zeros((1,) + self.coef.shape[1:], complex), self.coef / j], axis=0)
        x0 = complex(x0)
        if x0 != 0:
            pw = x0 ** np.arange(c.shape[0])
            c[0] -= np.tensordot(pw, c, axes=(0, 0))
        return ExpPoly(self.kappa, c, self.smax)

    def int_y(self, y0: complex = 0.0) -> "ExpPoly":
        """``integral_{y0}^{y} f(x, eta) d eta``."""
        J, K, S = self.coef.shape
        out = np.zeros((J, K + 1, S), dtype=complex)
        for s in range(S):
            a = (s - self.smax) * self.kappa
            plane = self.coef[:, :, s]
            if not np.any(plane):
                continue
            if a == 0:
                out[:, 1:, s] += plane / np.arange(1, K + 1)[None, :]
            else:
                out[:, :K, s] += plane @ _exp_antiderivative_matrix(K, a).T
        res = ExpPoly(self.kappa, out, self.smax)
        # subtract the value at y = y0 so that the integral vanishes there
        return res - res.at_y(y0)

    # ---- evaluation -----------------------------------------------------
    def __call__(self, z, method: str = "compensated") -> np.ndarray:
        """Evaluate at the points ``z``.

        ``method="direct"`` sums the stored terms in double precision.  High
        powers combine large coefficients that cancel almost completely near
        the origin, so the default ``"compensated"`` method first converts
        every ``y``-profile into its Taylor series with double-double
        accumulation and then sums a polynomial whose terms no longer cancel.
        """
        z = np.asarray(z, dtype=complex)
        x, y = z.real.ravel(), z.imag.ravel()
        J, K, S = self.coef.shape
        if method == "direct" or (S == 1 and self.smax == 0) or x.size == 0:
            px = x[:, None] ** np.arange(J)[None, :]
            py = y[:, None] ** np.arange(K)[None, :]
            pe = np.exp(y[:, None] * ((np.arange(S) - self.smax) * self.kappa)[None, :])
            val = np.einsum("pj,pk,ps,jks->p", px, py, pe, self.coef, optimize=True)
            return val.reshape(z.shape)
        if method != "compensated":
            raise ValueError(f"unknown evaluation method {method!r}")
        radius = float(np.max(np.abs(y)))
        t = self.taylor_y(self._taylor_order(radius))
        hy = np.polynomial.polynomial.polyval(y, t.T)  # shape (J, P)
        val = np.polynomial.polynomial.polyval(x, hy, tensor=False)
        return val.reshape(z.shape)

    def _taylor_order(self, radius: float) -> int:
        """Series length so that the neglected tail is below ``1e-18`` relative
        to the coefficient mass."""
        J, K, S = self.coef.shape
        a = abs(self.kappa) * self.smax * max(radius, 1e-3)
        r = max(radius, 1.0)
        mass = float(np.sum(np.abs(self.coef))) * r ** (K - 1) * np.exp(a) + 1.0
        p, term = 0, 1.0
        while term * mass > 1e-18 or p < 2 * a:
            p += 1
            term *= a / p
        order = K + p + 2
        return 8 * ((order + 7) // 8)  # round up so nearby radii share the cache

    def taylor_y(self, order: int) -> np.ndarray:
        """Taylor coefficients ``T[j, m]`` with ``f = sum_jm T[j, m] x**j y**m`` up to ``m < order``.

        The conversion ``y**k exp(s kappa y) -> sum_m (s kappa)**(m-k)/(m-k)! y**m``
        is accumulated in double-double arithmetic with the series of
        ``exp(s kappa y)`` taken to 34 significant digits.
        """
        if order in self._taylor:
            return self._taylor[order]
        J, K, S = self.coef.shape
        acc = _CompensatedSum((2, J, order))
        for si in range(S):
            s = si - self.smax
            er_hi, er_lo, ei_hi, ei_lo = _exp_series_dd(s * self.kappa, order)
            for k in range(K):
                c = self.coef[:, k, si]
                if not np.any(c):
                    continue
                n = order - k
                cr, ci = c.real[:, None], c.imag[:, None]
                sl = (slice(None), slice(k, order))
                # real part: cr*er - ci*ei ; imaginary part: cr*ei + ci*er
                acc.add_product(0, sl, cr, er_hi[:n], er_lo[:n])
                acc.add_product(0, sl, -ci, ei_hi[:n], ei_lo[:n])
                acc.add_product(1, sl, cr, ei_hi[:n], ei_lo[:n])
                acc.add_product(1, sl, ci, er_hi[:n], er_lo[:n])
        re, im = acc.result()
        out = re + 1j * im
        out.setflags(write=False)
        self._taylor[order] = out
        return out

    def gradient(self, z) -> tuple[np.ndarray, np.ndarray]:
        return self.dx()(z), self.dy()(z)

    def integrate_segment(self, za, zb) -> complex:
        """Exact ``integral f(z) dz`` along the straight segment ``za -> zb``.

        The segment is parametrized from its midpoint, ``z = zm + s h`` with
        ``s`` in ``[-1, 1]``; this keeps the binomial expansion of the powers
        of ``x`` and ``y`` free of the cancellation an end-point expansion
        suffers when ``|za|`` is comparable to the segment length.
        """
        za, zb = complex(za), complex(zb)
        h = 0.5 * (zb - za)
        zm = za + h
        J, K, S = self.coef.shape
        px = _affine_powers(zm.real, h.real, J - 1)
        py = _affine_powers(zm.imag, h.imag, K - 1)
        total = 0j
        deg = J + K - 2
        sign = (-1.0) ** np.arange(deg + 1)
        for s in range(S):
            plane = self.coef[:, :, s]
            if not np.any(plane):
                continue
            a = (s - self.smax) * self.kappa
            poly = np.zeros(deg + 1, dtype=complex)
            for j in range(J):
                if not np.any(plane[j]):
                    continue
                yk = plane[j] @ py  # t-polynomial of sum_k c_jk y(t)^k
                poly[: J + K - 1] += np.convolve(px[j], yk)[: deg + 1]
            # integral_{-1}^{1} s**m exp(b s) ds = I_m(b) + (-1)**m I_m(-b)
            b = a * h.imag
            moments = exp_moments(deg, b) + sign * exp_moments(deg, -b)
            total += np.exp(a * zm.imag) * np.dot(poly, moments)
        return complex(total * h)

    # ---- output -------------------------------------------------------
    def dump(self) -> str:
        """Plain-text term table ``j k sigma Re(c) Im(c)``."""
        buf = io.StringIO()
        buf.write(f"# kappa = {self.kappa.real!r} {self.kappa.imag!r}\n")
        buf.write("#  j   k  sigma  re                      im\n")
        for (j, k, s), c in sorted(self.terms.items()):
            buf.write(f"{j:4d}{k:4d}{s:7d}  {c.real: .17e} {c.imag: .17e}\n")
        return buf.getvalue()

    def __repr__(self):
        return f"ExpPoly(kappa={self.kappa!r}, terms={len(self.terms)})"


def _exp_antiderivative_matrix(K: int, a: complex) -> np.ndarray:
    """``M[p, k]``: coefficient of ``y**p exp(a y)`` in the antiderivative of
    ``y**k exp(a y)``, i.e. ``sum_r (-1)^r k!/(k-r)! y^(k-r) / a^(r+1)``."""
    M = np.zeros((K, K), dtype=complex)
    for k in range(K):
        c = 1.0 / a
        for r in range(k + 1):
            M[k - r, k] = c
            c = -c * (k - r) / a
    return M


_SPLIT = 134217729.0  # 2**27 + 1


def _split(a):
    t = _SPLIT * a
    hi = t - (t - a)
    return hi, a - hi


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


class _CompensatedSum:
    """Vectorized cascaded summation of products with double-double factors."""

    def __init__(self, shape):
        self.s = np.zeros(shape)
        self.e = np.zeros(shape)

    def add_product(self, part, sl, a, b_hi, b_lo):
        p, perr = _two_prod(a, b_hi[None, :])
        idx = (part,) + sl
        s, serr = _two_sum(self.s[idx], p)
        self.s[idx] = s
        self.e[idx] += serr + perr + a * b_lo[None, :]

    def result(self):
        return self.s[0] + self.e[0], self.s[1] + self.e[1]


@lru_cache(maxsize=256)
def _exp_series_dd(a: complex, order: int):
    """``a**p / p!`` for ``p < order`` as double-double real and imaginary parts."""
    import mpmath

    with mpmath.workdps(40):
        av = mpmath.mpc(a.real, a.imag)
        term = mpmath.mpc(1)
        out = np.zeros((4, order))
        for p in range(order):
            for i, part in enumerate((term.real, term.imag)):
                hi = float(part)
                out[2 * i, p] = hi
                out[2 * i + 1, p] = float(part - hi)
            term = term * av / (p + 1)
    out.setflags(write=False)
    return tuple(out)


def ep_eval(f: ExpPoly, z) -> np.ndarray:
    return f(z)


def ep_integrate_segment(f: ExpPoly, za, zb) -> complex:
    return f.integrate_segment(za, zb)

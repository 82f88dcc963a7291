"""Elliptic problems, particular solutions and complete systems of solutions.

Equations are written as ``(div p grad + q) u = 0``.  A positive particular
solution ``u0`` whose ``f = p^(1/2) u0`` separates as ``S(s) T(t)`` in an
orthogonal coordinate system ``s + i t = Phi(z)`` yields the complete system

    u_0 = u0,  u_(2n-1) = p^(-1/2) Re Z^(n)(1, z0; z),  u_(2n) = p^(-1/2) Re Z^(n)(i, z0; z)

built from the formal powers of the generating sequence of ``f``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .exceptions import ConformalMapError, GeometryError, NotASolutionError, PositivityError, SeparabilityError
from .geometry import Domain
from .quadrature import DEFAULT_RULE, QuadratureRule
from .vekua import (
    GeneratingSequence,
    exact_formal_powers,
    exponential_sequence,
    ray_formal_power_table,
)

# ---------------------------------------------------------------------------
# problems


def _one(z):
    return np.ones(np.shape(z))


@dataclass(frozen=True)
class EllipticProblem:
    """``(div p grad + q) u = 0``.

    ``potential`` is set for Schroedinger-type problems ``(-Laplace + V(y)) u = 0``,
    i.e. ``p = 1`` and ``q = -V(y)``; ``params`` records the descriptor.
    """

    p: Callable
    q: Callable
    tag: str = "general"
    params: dict = field(default_factory=dict)
    potential: Callable | None = None
    constant_p: bool = False

    def check(self, z) -> None:
        if np.any(np.real(self.p(np.asarray(z, dtype=complex))) <= 0):
            raise PositivityError("p must be positive on the domain")

    def residual(self, u: Callable, z, h: float = 2e-3) -> np.ndarray:
        """``(div p grad + q) u`` with fourth-order centered differences."""
        z = np.asarray(z, dtype=complex)
        w = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
        out = self.q(z) * u(z)
        if self.constant_p:
            lap = 0.0
            for e in (h, 1j * h):
                lap = lap + sum(wk * u(z + (k - 2) * e) for k, wk in enumerate(w)) / h**2
            return out + self.p(z) * lap
        for e in (h, 1j * h):
            half = [p_k for p_k in (self.p(z - 0.5 * e), self.p(z + 0.5 * e))]
            out = out + (half[1] * (u(z + e) - u(z)) - half[0] * (u(z) - u(z - e))) / h**2
        return out


def yukawa(c: float) -> EllipticProblem:
    """``(-Laplace + c^2) u = 0``."""
    c = float(c)
    return EllipticProblem(
        _one, lambda z: -(c**2) * np.ones(np.shape(z)), "yukawa", {"c": c}, lambda y: c**2 * np.ones(np.shape(y)), True
    )


def schrodinger(V: Callable, name: str = "schrodinger") -> EllipticProblem:
    """``(-Laplace + V(y)) u = 0`` for a potential depending on ``y`` only."""
    return EllipticProblem(_one, lambda z: -V(np.imag(z)), "schrodinger", {"name": name}, V, True)


def laplace() -> EllipticProblem:
    return EllipticProblem(_one, lambda z: np.zeros(np.shape(z)), "laplace", {}, lambda y: np.zeros(np.shape(y)), True)


def exponential_potential() -> EllipticProblem:
    """The second test equation ``(-Laplace + e^y / 4) u = 0``."""
    return schrodinger(lambda y: 0.25 * np.exp(y), "exp_y_over_4")


def second_example_solution(z):
    """Exact solution ``exp(e^(y/2) cos(x/2))`` of the second test equation."""
    z = np.asarray(z, dtype=complex)
    return np.exp(np.exp(z.imag / 2) * np.cos(z.real / 2))


def general(p: Callable, q: Callable) -> EllipticProblem:
    return EllipticProblem(p, q, "general")


# ---------------------------------------------------------------------------
# one-dimensional profiles


@dataclass(frozen=True)
class ODEProfile:
    """Solution of ``-h'' + V(y) h = 0`` on a grid with cubic Hermite dense output."""

    y: np.ndarray
    h: np.ndarray
    dh: np.ndarray
    V: Callable
    _h: CubicHermiteSpline = field(repr=False)
    _dh: CubicHermiteSpline = field(repr=False)

    def __call__(self, y):
        return self._h(np.asarray(y))

    def derivative(self, y):
        return self._dh(np.asarray(y))

    def residual(self, y) -> np.ndarray:
        """``|-h'' + V h|`` using the Hermite interpolant of ``h'``."""
        y = np.asarray(y, float)
        return np.abs(-self._dh.derivative()(y) + self.V(y) * self(y))


def ode_profile(
    V: Callable,
    y_range: tuple[float, float],
    h0: float = 1.0,
    dh0: float = 0.0,
    y_start: float | None = None,
    step: float = 1e-3,
    check_positive: bool = True,
) -> ODEProfile:
    """Integrate ``-h'' + V(y) h = 0`` over ``y_range`` with classical RK4.

    Initial data ``h(y_start) = h0``, ``h'(y_start) = dh0``; ``y_start``
    defaults to the lower end of the range, and the integration runs in both
    directions from it when it lies inside.  ``V`` may be complex.
    """
    lo, hi = map(float, y_range)
    if not hi > lo:
        raise ValueError("y_range must be increasing")
    y_start = lo if y_start is None else float(y_start)

    def integrate(a, b):
        n = max(1, int(np.ceil(abs(b - a) / step)))
        ys = np.linspace(a, b, n + 1)
        dt = ys[1] - ys[0]
        state = np.array([h0, dh0], dtype=complex)
        out = np.empty((n + 1, 2), dtype=complex)
        out[0] = state

        def rhs(y, s):
            return np.array([s[1], V(y) * s[0]])

        for i in range(n):
            y = ys[i]
            k1 = rhs(y, state)
            k2 = rhs(y + dt / 2, state + dt / 2 * k1)
            k3 = rhs(y + dt / 2, state + dt / 2 * k2)
            k4 = rhs(y + dt, state + dt * k3)
            state = state + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            out[i + 1] = state
        return ys, out

    parts = []
    if y_start > lo:
        ys, out = integrate(y_start, lo)
        parts.append((ys[::-1], out[::-1]))
    if y_start < hi:
        ys, out = integrate(y_start, hi)
        if parts:
            ys, out = ys[1:], out[1:]
        parts.append((ys, out))
    ys = np.concatenate([p[0] for p in parts])
    vals = np.concatenate([p[1] for p in parts])
    h, dh = vals[:, 0], vals[:, 1]
    if np.all(np.abs(h.imag) == 0) and np.all(np.abs(dh.imag) == 0):
        h, dh = h.real, dh.real
    d2h = np.asarray(V(ys)) * h
    if check_positive:
        sample = np.arange(lo, hi + 1e-12, 1e-3)
        hs = CubicHermiteSpline(ys, h, dh)(sample)
        if np.iscomplexobj(hs) or np.any(np.real(hs) <= 0):
            raise PositivityError("the profile h vanishes or changes sign on the range")
    return ODEProfile(ys, h, dh, V, CubicHermiteSpline(ys, h, dh), CubicHermiteSpline(ys, dh, d2h))


# ---------------------------------------------------------------------------
# coordinate systems


@dataclass(frozen=True)
class CoordinateSystem:
    """Orthogonal coordinates ``s + i t = Phi(z)``."""

    name: str
    Phi: Callable
    dPhi: Callable
    d2Phi: Callable
    singular: tuple = ()
    alpha: float | None = None

    def check(self, z, margin: float = 1e-8) -> None:
        z = np.asarray(z, dtype=complex)
        for zs in self.singular:
            if np.any(np.abs(z - zs) < margin):
                raise ConformalMapError(f"{self.name} coordinates are singular at {zs}")
        d = self.dPhi(z)
        if np.any(~np.isfinite(d)) or np.any(np.abs(d) < 1e-12):
            raise ConformalMapError("Phi_z vanishes or is unbounded on the sample set")


def coordinate_catalog(name: str, alpha: float = 1.0) -> CoordinateSystem:
    """Cartesian, polar, parabolic, elliptic or bipolar coordinates."""
    a = float(alpha)
    if name == "cartesian":
        return CoordinateSystem(name, lambda z: z + 0j, lambda z: np.ones_like(z, dtype=complex), lambda z: np.zeros_like(z, dtype=complex))
    if name == "polar":
        return CoordinateSystem(name, np.log, lambda z: 1 / z, lambda z: -1 / z**2, (0j,))
    if name == "parabolic":
        r2 = np.sqrt(2.0)
        return CoordinateSystem(
            name, lambda z: r2 * np.sqrt(z), lambda z: r2 / (2 * np.sqrt(z)), lambda z: -r2 / (4 * z * np.sqrt(z)), (0j,)
        )
    if a <= 0:
        raise ValueError("alpha must be positive")
    if name == "elliptic":
        return CoordinateSystem(
            name,
            lambda z: np.arcsin(z / a),
            lambda z: 1 / np.sqrt(a * a - z * z),
            lambda z: z / (a * a - z * z) ** 1.5,
            (a + 0j, -a + 0j),
            a,
        )
    if name == "bipolar":
        return CoordinateSystem(
            name,
            lambda z: np.log((a + z) / (a - z)),
            lambda z: 2 * a / (a * a - z * z),
            lambda z: 4 * a * z / (a * a - z * z) ** 2,
            (a + 0j, -a + 0j),
            a,
        )
    raise ValueError(f"unknown coordinate system {name!r}")


# ---------------------------------------------------------------------------
# particular solutions


@dataclass(frozen=True)
class ParticularSolution:
    """``u0`` with ``f = p^(1/2) u0 = S(s) T(t)``.

    ``kappa`` is set when ``f = exp(kappa y)`` (closed-form formal powers);
    ``real`` is false for the complex eigenvalue-mode solutions.
    """

    problem: EllipticProblem
    u0: Callable
    S: Callable
    T: Callable
    coords: CoordinateSystem
    kind: str
    real: bool = True
    kappa: complex | None = None
    profile: ODEProfile | None = None
    grad_u0: Callable | None = None
    dS: Callable | None = None
    dT: Callable | None = None

    def f(self, z):
        z = np.asarray(z, dtype=complex)
        return np.sqrt(self.problem.p(z)) * self.u0(z)

    def sequence(self) -> GeneratingSequence:
        if self.kappa is not None and self.coords.name == "cartesian":
            return exponential_sequence(self.kappa)
        return GeneratingSequence(
            self.S,
            self.T,
            self.coords.Phi,
            self.coords.dPhi,
            self.coords.d2Phi,
            dS=self.dS if self.real else None,
            dT=self.dT if self.real else None,
            constant=self.coords.name == "cartesian" and self.kind in ("constant", "profile"),
            name=self.kind,
        )

    def validate(self, z, tol: float = 1e-6) -> None:
        """Check positivity, the equation residual and the separation ``f = S T``."""
        z = np.asarray(z, dtype=complex)
        vals = self.u0(z)
        if self.real:
            if np.any(np.abs(np.imag(vals)) > 0) or np.any(np.real(vals) <= 0):
                raise PositivityError("u0 must be real and positive on the domain")
        elif np.any(np.abs(vals) <= 0):
            raise PositivityError("u0 vanishes on the domain")
        res = self.problem.residual(self.u0, z)
        scale = max(1.0, float(np.max(np.abs(vals))))
        if np.max(np.abs(res)) / scale > tol:
            raise NotASolutionError(f"u0 residual {np.max(np.abs(res)) / scale:.2e} exceeds {tol:.0e}")
        self.coords.check(z)
        w = self.coords.Phi(z)
        sep = self.S(w.real) * self.T(w.imag)
        if np.max(np.abs(sep - self.f(z))) > 1e-10 * max(1.0, float(np.max(np.abs(sep)))):
            raise SeparabilityError("f differs from S(s) T(t)")


def particular_solution(
    problem: EllipticProblem,
    kind: str = "auto",
    domain: Domain | None = None,
    lam: float = 0.0,
    profile_kwargs: dict | None = None,
    **custom,
) -> ParticularSolution:
    """Construct a positive (or, in eigen mode, non-vanishing) particular solution.

    ``kind``:

    * ``"constant"``: ``u0 = 1`` (needs ``q = 0``; ``f = p^(1/2)`` must separate
      in Cartesian coordinates, so ``p`` must be constant here);
    * ``"exponential"``: ``u0 = exp(c y)`` for ``yukawa(c)``;
    * ``"profile"``: ``u0 = exp(lam x) h(y)`` with ``-h'' + (V - lam^2) h = 0``;
    * ``"eigen"``: ``u0 = exp(i lam x) h(y)`` solving ``(-Laplace + V) u = lam^2 u``
      with ``-h'' + V h = 0``; for ``V = 0`` this is taken as ``exp(i lam y)``
      (the Yukawa solution with ``c = i lam``);
    * ``"custom"``: pass ``u0``, ``S``, ``T`` and ``coords`` explicitly.

    ``"auto"`` chooses ``exponential`` for Yukawa, ``constant`` for Laplace
    and ``profile`` for other Schroedinger problems.  ``domain`` fixes the
    ``y`` range of ODE profiles and the validation samples.
    """
    cart = coordinate_catalog("cartesian")
    if kind == "auto":
        kind = {"yukawa": "exponential", "laplace": "constant", "schrodinger": "profile"}.get(problem.tag, "custom")
    y_range = _y_range(domain)
    if kind == "constant":
        ps = ParticularSolution(problem, _one, _one, _one, cart, "constant", kappa=0.0, dS=lambda s: np.zeros(np.shape(s)), dT=lambda t: np.zeros(np.shape(t)))
    elif kind == "exponential":
        if problem.tag != "yukawa":
            raise ValueError("exponential particular solutions are available for yukawa(c) only")
        c = problem.params["c"]
        ps = ParticularSolution(
            problem,
            lambda z: np.exp(c * np.imag(z)),
            _one,
            lambda t: np.exp(c * t),
            cart,
            "exponential",
            kappa=c,
            grad_u0=lambda z: (np.zeros(np.shape(z)), c * np.exp(c * np.imag(z))),
            dS=lambda s: np.zeros(np.shape(s)),
            dT=lambda t: c * np.exp(c * t),
        )
    elif kind == "profile":
        if problem.potential is None:
            raise ValueError("profile particular solutions need a potential V(y)")
        V = problem.potential
        lam = float(lam)
        prof = ode_profile(lambda y: V(y) - lam**2, y_range, **(profile_kwargs or {}))
        ps = ParticularSolution(
            problem,
            lambda z: np.exp(lam * np.real(z)) * prof(np.imag(z)),
            lambda s: np.exp(lam * np.asarray(s)),
            prof,
            cart,
            "profile",
            kappa=None,
            profile=prof,
            dS=lambda s: lam * np.exp(lam * np.asarray(s)),
            dT=prof.derivative,
        )
    elif kind == "eigen":
        if problem.potential is None:
            raise ValueError("eigen mode needs a potential V(y)")
        V = problem.potential
        lam = float(lam)
        probe = np.linspace(*y_range, 9)
        eig_problem = EllipticProblem(
            problem.p, lambda z, q=problem.q: q(z) + lam**2, "eigen", {"lambda": lam, **problem.params}, problem.potential, True
        )
        if np.all(np.asarray(V(probe)) == 0):
            k = 1j * lam
            ps = ParticularSolution(eig_problem, lambda z: np.exp(k * np.imag(z)), _one, lambda t: np.exp(k * np.asarray(t)), cart, "eigen", real=False, kappa=k)
        else:
            prof = ode_profile(V, y_range, **(profile_kwargs or {}))
            ps = ParticularSolution(
                eig_problem,
                lambda z: np.exp(1j * lam * np.real(z)) * prof(np.imag(z)),
                lambda s: np.exp(1j * lam * np.asarray(s)),
                prof,
                cart,
                "eigen",
                real=False,
                profile=prof,
            )
    elif kind == "custom":
        try:
            ps = ParticularSolution(problem, custom["u0"], custom["S"], custom["T"], custom.get("coords", cart), "custom", real=custom.get("real", True), grad_u0=custom.get("grad_u0"), dS=custom.get("dS"), dT=custom.get("dT"))
        except KeyError as exc:
            raise ValueError(f"custom particular solutions need {exc.args[0]!r}") from None
    else:
        raise ValueError(f"unknown particular-solution kind {kind!r}")
    if domain is not None:
        from .geometry import interior_grid

        ps.validate(interior_grid(domain, min_points=60))
    return ps


def _y_range(domain: Domain | None, margin: float = 0.05) -> tuple[float, float]:
    if domain is None:
        return (-1.0 - margin, 1.0 + margin)
    poly = domain._polygon
    return (float(poly.imag.min()) - margin, float(poly.imag.max()) + margin)


# ---------------------------------------------------------------------------
# complete systems


class FormalPowerBasis:
    """The functions ``u_0 .. u_N`` of a complete system.

    Exact mode (``f = exp(kappa y)``) evaluates closed-form series with
    analytic derivatives.  Numeric mode runs the ray recursion for every
    set of targets, so each call costs one recursion; results are cached
    per target array.
    """

    def __init__(self, ps: ParticularSolution, domain: Domain, N: int, mode: str, rule: QuadratureRule = DEFAULT_RULE):
        self.ps = ps
        self.domain = domain
        self.N = int(N)
        self.mode = mode
        self.rule = rule
        self.z0 = domain.center
        self.n_max = (self.N + 1) // 2
        self.real = ps.real
        self._cache: dict = {}
        self._series = None
        if mode == "exact":
            self._build_series(self._extent(domain._polygon) * 1.05)

    def __len__(self):
        return self.N + 1

    # ---- exact mode -------------------------------------------------------
    def _extent(self, z) -> float:
        return float(np.max(np.abs(np.imag(np.asarray(z)) - self.z0.imag), initial=0.0))

    def _build_series(self, radius: float):
        fps = exact_formal_powers(self.ps.kappa, self.z0, self.n_max, radius=radius)
        self._series = [fp.series[0] for fp in fps]  # U components, ordered n, then a = 1, i
        self._radius = radius

    def _exact_members(self, z):
        if self._extent(z) > self._radius:
            self._build_series(self._extent(z) * 1.05)

    # ---- evaluation -------------------------------------------------------
    def values(self, z) -> np.ndarray:
        """Matrix ``[u_k(z_i)]`` of shape ``(len(z), N + 1)``."""
        z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
        key = ("v", z.tobytes())
        if key in self._cache:
            return self._cache[key]
        dtype = float if self.real else complex
        out = np.empty((z.size, self.N + 1), dtype=dtype)
        out[:, 0] = _cast(self.ps.u0(z), dtype)
        if self.N:
            if self.mode == "exact":
                self._exact_members(z)
                series = self._series
                for k in range(1, self.N + 1):
                    out[:, k] = _cast(series[k + 1](z), dtype)  # skip the identically zero Re Z^(0)(i)
            else:
                table = ray_formal_power_table(self.ps.sequence(), self.z0, z, self.n_max, self.rule, complex_valued=not self.real)
                for k in range(1, self.N + 1):
                    n, a = (k + 1) // 2, (1 if k % 2 else 1j)
                    out[:, k] = _cast(table[(complex(a), 0, n)][0], dtype)
            pf = 1.0 / np.sqrt(self.ps.problem.p(z))
            out[:, 1:] *= np.asarray(pf).reshape(-1, 1) if np.ndim(pf) else pf
        if len(self._cache) > 16:
            self._cache.clear()
        self._cache[key] = out
        return out

    def member(self, k: int) -> Callable:
        """``u_k`` as a field."""
        return lambda z: self.values(np.asarray(z, dtype=complex).ravel())[:, k].reshape(np.shape(z))

    def gradient(self, z, h: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        """``(d/dx, d/dy)`` of every member at ``z``: two ``(len(z), N + 1)`` arrays."""
        z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
        if self.mode == "exact":
            self._exact_members(z)
            pf = 1.0 / np.sqrt(self.ps.problem.p(np.array([self.z0]))[0])
            dtype = float if self.real else complex
            gx = np.empty((z.size, self.N + 1), dtype=dtype)
            gy = np.empty_like(gx)
            k = complex(self.ps.kappa)
            k = k.real if k.imag == 0 else k
            e = np.exp(k * z.imag)
            gx[:, 0] = 0.0
            gy[:, 0] = _cast(k * e, dtype)
            for i in range(1, self.N + 1):
                s = self._series[i + 1]
                gx[:, i] = _cast(pf * s.dx()(z), dtype)
                gy[:, i] = _cast(pf * s.dy()(z), dtype)
            return gx, gy
        h = h or 1e-3 * max(self.domain.radius, 1e-3)
        w = np.array([1.0, -8.0, 8.0, -1.0]) / (12 * h)
        off = np.array([-2, -1, 1, 2])
        grads = []
        for e in (h, 1j * h):
            pts = (z[None, :] + off[:, None] * e).ravel()
            vals = self.values(pts).reshape(4, z.size, self.N + 1)
            grads.append(np.tensordot(w, vals, axes=1))
        return grads[0], grads[1]

    def normal_derivative(self, z, normals, h: float | None = None) -> np.ndarray:
        """``du_k/dn`` at boundary points.

        Exact mode differentiates the series; numeric mode uses the inward
        one-sided third-order stencil with step ``1e-5 * radius``.
        """
        z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
        n = np.atleast_1d(np.asarray(normals, dtype=complex)).ravel()
        if self.mode == "exact":
            gx, gy = self.gradient(z)
            return gx * n.real[:, None] + gy * n.imag[:, None]
        h = h or 1e-5 * max(self.domain.radius, 1e-3)
        pts = z[None, :] - np.arange(4)[:, None] * h * n[None, :]
        if not np.all(self.domain.contains(pts[1:].ravel())):
            raise GeometryError("normal-derivative stencil leaves the domain")
        vals = self.values(pts.ravel()).reshape(4, z.size, self.N + 1)
        return np.tensordot(np.array([11.0, -18.0, 9.0, -2.0]) / (6 * h), vals, axes=1)

    def laplacian_residual(self, z, h: float = 2e-3) -> np.ndarray:
        """``|(div p grad + q) u_k|`` at ``z`` scaled by ``max(1, max |u_k|)``, per member.

        Exact mode uses the analytic Laplacian of the series; numeric mode a
        fourth-order five-point stencil in each direction.
        """
        z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
        vals = self.values(z)
        scale = np.maximum(1.0, np.max(np.abs(vals), axis=0))
        q = np.asarray(self.ps.problem.q(z))
        if self.mode == "exact" and self.ps.problem.constant_p:
            self._exact_members(z)
            res = np.empty_like(vals)
            k = complex(self.ps.kappa)
            k2 = (k * k).real if self.real else k * k
            res[:, 0] = (k2 + q) * vals[:, 0]
            pf = 1.0 / np.sqrt(self.ps.problem.p(np.array([self.z0]))[0])
            for i in range(1, self.N + 1):
                res[:, i] = pf * self._series[i + 1].laplacian()(z) + q * vals[:, i]
            return np.max(np.abs(res), axis=0) / scale
        res = np.stack([np.atleast_1d(self.ps.problem.residual(self.member(i), z, h)) for i in range(self.N + 1)], axis=1)
        return np.max(np.abs(res), axis=0) / scale


def _cast(v, dtype):
    v = np.asarray(v)
    if dtype is float:
        return v.real
    return v


def complete_system(
    ps: ParticularSolution,
    domain: Domain,
    N: int,
    mode: str = "auto",
    rule: QuadratureRule = DEFAULT_RULE,
    check: bool = False,
) -> FormalPowerBasis:
    """The complete system ``u_0 .. u_N`` on ``domain`` (centered at ``domain.center``).

    ``mode="auto"`` picks the exact mode when ``f = exp(kappa y)`` with
    constant ``p = 1``, numeric otherwise.  ``check=True`` verifies the PDE
    residual of every member on a small interior sample.
    """
    if N < 0:
        raise ValueError("N must be non-negative")
    if not domain.is_star_shaped():
        raise GeometryError("the domain must be star-shaped with respect to its center")
    exact_ok = ps.kappa is not None and ps.coords.name == "cartesian" and ps.problem.constant_p
    if mode == "auto":
        mode = "exact" if exact_ok else "numeric"
    if mode == "exact" and not exact_ok:
        raise ValueError("exact mode needs f = exp(kappa y) in Cartesian coordinates")
    if mode not in ("exact", "numeric"):
        raise ValueError(f"unknown mode {mode!r}")
    basis = FormalPowerBasis(ps, domain, N, mode, rule)
    if check:
        from .geometry import interior_grid

        pts = interior_grid(domain, min_points=30)
        pts = pts[domain.contains(pts, tol=-0.02)][:40]
        tol = 1e-8 if mode == "exact" else 1e-4
        res = basis.laplacian_residual(pts)
        if np.any(res > tol):
            bad = int(np.argmax(res))
            raise NotASolutionError(f"u_{bad} violates the equation: scaled residual {res[bad]:.2e}")
    return basis

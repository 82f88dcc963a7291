"""Complex line integrals along polylines and the real antiderivative operator.

Two rules are available.  ``gauss`` is composite Gauss-Legendre per
segment.  ``spline`` samples the integrand at equispaced points of each
segment, interpolates real and imaginary parts by cubic splines and
integrates the splines exactly.

The same rules also provide *cumulative* integration matrices on a
reference segment ``[0, 1]`` (:func:`cumulative_matrix`), which the
formal-power recursion uses to integrate along rays.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import legendre
from scipy.interpolate import CubicSpline

from .exceptions import CompatibilityError, IntegrationError, PathError


@dataclass(frozen=True)
class QuadratureRule:
    mode: str = "gauss"
    nodes_per_segment: int = 24
    spline_samples: int = 64

    def __post_init__(self):
        if self.mode not in ("gauss", "spline"):
            raise ValueError(f"unknown quadrature mode {self.mode!r}")
        if self.nodes_per_segment < 2:
            raise ValueError("nodes_per_segment must be at least 2")
        if self.spline_samples < 4:
            raise ValueError("spline_samples must be at least 4")


DEFAULT_RULE = QuadratureRule()


@dataclass(frozen=True)
class Path:
    """Polyline through ``vertices`` (complex)."""

    vertices: tuple

    def __post_init__(self):
        v = tuple(complex(z) for z in self.vertices)
        if len(v) < 2:
            raise PathError("a path needs at least two vertices")
        if any(a == b for a, b in zip(v[:-1], v[1:])):
            raise PathError("consecutive path vertices must be distinct")
        object.__setattr__(self, "vertices", v)

    @classmethod
    def segment(cls, za, zb) -> "Path":
        return cls((za, zb))

    @property
    def segments(self):
        return list(zip(self.vertices[:-1], self.vertices[1:]))

    def sample(self, per_segment: int = 32) -> np.ndarray:
        s = np.linspace(0.0, 1.0, per_segment + 1)
        return np.concatenate([a + s * (b - a) for a, b in self.segments])


@lru_cache(maxsize=64)
def _gauss01(n: int):
    x, w = legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _checked(values, nodes):
    values = np.asarray(values)
    bad = ~np.isfinite(values)
    if np.any(bad):
        k = np.flatnonzero(bad.ravel())[0]
        pt = np.broadcast_to(nodes, values.shape).ravel()[k]
        raise IntegrationError(f"non-finite integrand at z = {pt}", point=pt)
    return values


def integrate_path(g: Callable[[np.ndarray], np.ndarray], path: Path, rule: QuadratureRule = DEFAULT_RULE) -> complex:
    """Approximate the complex line integral of ``g(z) dz`` along ``path``."""
    total = 0j
    for za, zb in path.segments:
        dz = zb - za
        if rule.mode == "gauss":
            t, w = _gauss01(rule.nodes_per_segment)
            z = za + t * dz
            total += dz * np.sum(w * _checked(g(z), z))
        else:
            t = np.linspace(0.0, 1.0, rule.spline_samples)
            z = za + t * dz
            vals = _checked(g(z), z).astype(complex)
            re = CubicSpline(t, vals.real).integrate(0.0, 1.0)
            im = CubicSpline(t, vals.imag).integrate(0.0, 1.0)
            total += dz * (re + 1j * im)
    return complex(total)


@lru_cache(maxsize=64)
def cumulative_matrix(rule: QuadratureRule):
    """Nodes ``t`` on ``[0, 1]`` and matrices for running integrals.

    Returns ``(t, Q, w)`` where ``(Q @ v)[i]`` approximates the integral of the
    interpolant of ``v`` from 0 to ``t[i]`` and ``w @ v`` the integral from 0
    to 1.  For ``gauss`` the interpolant is the Legendre polynomial through the
    Gauss nodes; for ``spline`` it is the not-a-knot cubic spline through
    equispaced samples that include both ends.
    """
    if rule.mode == "gauss":
        n = rule.nodes_per_segment
        x, wq = legendre.leggauss(n)
        vander = legendre.legvander(x, n - 1)
        inv = np.linalg.inv(vander)
        # antiderivative of each Legendre basis function, vanishing at x = -1
        anti = np.zeros((n, n))
        for k in range(n):
            c = np.zeros(n)
            c[k] = 1.0
            ic = legendre.legint(c, lbnd=-1.0)
            anti[:, k] = legendre.legval(x, ic)
        q = 0.5 * anti @ inv
        t = 0.5 * (x + 1.0)
        w = 0.5 * wq
    else:
        n = rule.spline_samples
        t = np.linspace(0.0, 1.0, n)
        spl = CubicSpline(t, np.eye(n), axis=0).antiderivative()
        q = spl(t)
        q[0] = 0.0
        w = q[-1].copy()
    q.setflags(write=False)
    w.setflags(write=False)
    t.setflags(write=False)
    return t, q, w


def _dbar_fd(phi: Callable, z: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Centered-difference partials of a complex field: returns (d/dx, d/dy)."""
    dx = (phi(z + h) - phi(z - h)) / (2 * h)
    dy = (phi(z + 1j * h) - phi(z - 1j * h)) / (2 * h)
    return dx, dy


def compatibility_residual(
    Phi: Callable, points: np.ndarray, step: float = 1e-5
) -> float:
    """Largest ``|d/dy Re Phi - d/dx Im Phi|`` over ``points``, relative to the field scale."""
    dx, dy = _dbar_fd(Phi, points, step)
    res = np.abs(dy.real - dx.imag)
    scale = max(1.0, float(np.max(np.abs(Phi(points)))))
    return float(np.max(res) / scale)


def default_abar_path(base: complex, target: complex) -> Path:
    """Vertical leg at ``x = x0`` followed by a horizontal leg at height ``y``."""
    base, target = complex(base), complex(target)
    verts = [base]
    for v in (complex(base.real, target.imag), target):
        if v != verts[-1]:
            verts.append(v)
    return Path(tuple(verts))


def abar(
    Phi: Callable[[np.ndarray], np.ndarray],
    base,
    target,
    rule: QuadratureRule = DEFAULT_RULE,
    path: Path | None = None,
    domain=None,
    check: bool = True,
    tol: float = 1e-4,
    samples: int = 32,
    seed: int = 0,
) -> float:
    """Real antiderivative: ``phi(target)`` with ``phi(base) = 0`` and ``d phi/d zbar = Phi``.

    Computed as ``2 * integral(Re Phi dx + Im Phi dy)`` along ``path``
    (default: the two axis-parallel legs through ``(x0, y)``).
    """
    base, target = complex(base), complex(target)
    if base == target:
        return 0.0
    if path is None:
        path = default_abar_path(base, target)
    if domain is not None:
        pts = path.sample(64)
        if not np.all(domain.contains(pts, tol=1e-9)):
            raise PathError("integration path leaves the domain")
    if check:
        rng = np.random.default_rng(seed)
        pts = path.sample(64)
        pick = pts[rng.integers(0, len(pts), samples)]
        res = compatibility_residual(Phi, pick)
        if res > tol:
            raise CompatibilityError(f"curl residual {res:.3e} exceeds {tol:.1e}")
    total = 0.0
    for za, zb in path.segments:
        dz = zb - za

        def integrand(z, dz=dz):
            v = Phi(z)
            return v.real * dz.real + v.imag * dz.imag

        if rule.mode == "gauss":
            t, w = _gauss01(rule.nodes_per_segment)
            z = za + t * dz
            total += np.sum(w * _checked(integrand(z), z))
        else:
            t = np.linspace(0.0, 1.0, rule.spline_samples)
            z = za + t * dz
            total += CubicSpline(t, _checked(integrand(z), z)).integrate(0.0, 1.0)
    return float(2.0 * total)


def abar_field(Phi: Callable, base, rule: QuadratureRule = DEFAULT_RULE, **kwargs) -> Callable:
    """Vectorized wrapper: returns ``phi(z)`` for arrays of targets."""

    def phi(z):
        z = np.asarray(z, dtype=complex)
        flat = [abar(Phi, base, zz, rule, **kwargs) for zz in z.ravel()]
        return np.asarray(flat, float).reshape(z.shape)

    return phi


def polyline(points: Sequence[complex]) -> Path:
    return Path(tuple(points))

"""Planar domains bounded by a single Jordan curve.

Points are carried as complex numbers ``z = x + iy`` everywhere in the
package; the helpers :func:`as_complex` and :func:`as_xy` convert between
that representation and ``(n, 2)`` coordinate arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import DomainParameterError, GeometryError

TWO_PI = 2.0 * np.pi

_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


def as_complex(points) -> np.ndarray:
    """Convert complex scalars/arrays or ``(..., 2)`` coordinate arrays to complex."""
    arr = np.asarray(points)
    if np.iscomplexobj(arr):
        return arr.astype(complex)
    if arr.ndim >= 1 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    return arr.astype(complex)


def as_xy(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.stack([z.real, z.imag], axis=-1)


def _segments_intersect(p: np.ndarray) -> bool:
    """True if the closed polygon with vertices ``p`` (complex) self-intersects."""
    a = p
    b = np.roll(p, -1)
    n = len(p)
    d = b - a
    # cross(u, v) = Im(conj(u) v)
    def cross(u, v):
        return u.real * v.imag - u.imag * v.real

    i, j = np.triu_indices(n, k=2)
    keep = ~((i == 0) & (j == n - 1))
    i, j = i[keep], j[keep]
    d1 = cross(d[i], a[j] - a[i])
    d2 = cross(d[i], b[j] - a[i])
    d3 = cross(d[j], a[i] - a[j])
    d4 = cross(d[j], b[i] - a[j])
    hit = (d1 * d2 < 0) & (d3 * d4 < 0)
    return bool(np.any(hit))


def point_in_polygon(z, poly: np.ndarray) -> np.ndarray:
    """Even-odd ray crossing test; ``poly`` is a closed complex vertex list."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    x, y = z.real[:, None], z.imag[:, None]
    xa, ya = poly.real[None, :], poly.imag[None, :]
    nxt = np.roll(poly, -1)
    xb, yb = nxt.real[None, :], nxt.imag[None, :]
    straddle = (ya > y) != (yb > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xcross = xa + (y - ya) * (xb - xa) / (yb - ya)
    inside = np.count_nonzero(straddle & (x < xcross), axis=1) % 2 == 1
    return inside


@dataclass(frozen=True)
class BoundaryCurve:
    """Closed, positively oriented parametrization ``gamma: [0, 1) -> C``.

    ``breaks`` lists parameter values where the curve has a corner; the
    arclength table integrates each smooth piece separately.
    """

    gamma: Callable[[np.ndarray], np.ndarray]
    dgamma: Callable[[np.ndarray], np.ndarray]
    breaks: tuple = ()
    panels: int = 64
    _knots: np.ndarray = field(init=False, repr=False)
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if abs(complex(self.gamma(np.array([0.0]))[0]) - complex(self.gamma(np.array([1.0]))[0])) > 1e-12:
            raise GeometryError("boundary curve is not closed")
        pieces = np.unique(np.concatenate([[0.0], np.asarray(self.breaks, float), [1.0]]))
        knots = np.concatenate(
            [np.linspace(a, b, self.panels + 1)[:-1] for a, b in zip(pieces[:-1], pieces[1:])] + [[1.0]]
        )
        lengths = np.array([self._piece_length(a, b) for a, b in zip(knots[:-1], knots[1:])])
        object.__setattr__(self, "_knots", knots)
        object.__setattr__(self, "_cum", np.concatenate([[0.0], np.cumsum(lengths)]))
        if _segments_intersect(self.gamma(self.dense_parameters(600))):
            raise GeometryError("boundary curve self-intersects")

    def dense_parameters(self, n: int) -> np.ndarray:
        t = np.linspace(0.0, 1.0, n, endpoint=False)
        return np.unique(np.concatenate([t, np.asarray(self.breaks, float)]))

    def _piece_length(self, a, b):
        t = 0.5 * (b - a) * _GL_X + 0.5 * (a + b)
        return 0.5 * (b - a) * np.sum(_GL_W * np.abs(self.dgamma(t)))

    @property
    def length(self) -> float:
        return float(self._cum[-1])

    def arclength(self, t) -> np.ndarray:
        """Arclength from ``gamma(0)`` to ``gamma(t)``."""
        t = np.atleast_1d(np.asarray(t, float))
        idx = np.clip(np.searchsorted(self._knots, t, side="right") - 1, 0, len(self._knots) - 2)
        a = self._knots[idx]
        nodes = a[:, None] + 0.5 * (t - a)[:, None] * (_GL_X[None, :] + 1.0)
        partial = 0.5 * (t - a) * np.sum(_GL_W[None, :] * np.abs(self.dgamma(nodes)), axis=1)
        return self._cum[idx] + partial

    def parameter_at_arclength(self, s) -> np.ndarray:
        """Invert :meth:`arclength` by safeguarded Newton iteration."""
        s = np.atleast_1d(np.asarray(s, float))
        idx = np.clip(np.searchsorted(self._cum, s, side="right") - 1, 0, len(self._knots) - 2)
        lo, hi = self._knots[idx], self._knots[idx + 1]
        span = self._cum[idx + 1] - self._cum[idx]
        t = lo + (hi - lo) * (s - self._cum[idx]) / span
        for _ in range(50):
            f = self.arclength(t) - s
            step = f / np.abs(self.dgamma(t))
            t_new = np.clip(t - step, lo, hi)
            if np.max(np.abs(t_new - t)) < 1e-16:
                t = t_new
                break
            t = t_new
        return t

    def normal(self, t) -> np.ndarray:
        """Unit outward normal; at a corner, the bisector of the one-sided normals."""
        t = np.atleast_1d(np.asarray(t, float))
        tang = self.dgamma(t)
        n = -1j * tang / np.abs(tang)
        brk = np.asarray(self.breaks, float)
        for b in np.concatenate([brk, [0.0, 1.0]]):
            at = np.abs(t - b) < 1e-12
            if not np.any(at):
                continue
            left = -1j * self.dgamma(np.array([(b - 1e-9) % 1.0]))
            right = -1j * self.dgamma(np.array([(b + 1e-9) % 1.0]))
            avg = left / abs(left[0]) + right / abs(right[0])
            n[at] = avg[0] / abs(avg[0])
        return n


@dataclass(frozen=True)
class CollocationSet:
    points: np.ndarray  # complex
    normals: np.ndarray  # complex unit vectors
    parameters: np.ndarray

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class Domain:
    """Simply connected domain with a formal-power center."""

    boundary: BoundaryCurve
    center: complex = 0j
    kind: str = "custom"
    params: dict = field(default_factory=dict)
    implicit: Callable[[np.ndarray], np.ndarray] | None = None
    _polygon: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        poly = self.boundary.gamma(self.boundary.dense_parameters(4096))
        object.__setattr__(self, "_polygon", poly)
        if not self.contains(self.center)[0]:
            raise GeometryError("domain center is not an interior point")
        winding = np.sum(np.angle((np.roll(poly, -1) - self.center) / (poly - self.center)))
        if round(winding / TWO_PI) != 1:
            raise GeometryError("boundary must wind once, counter-clockwise, around the center")

    def contains(self, z, tol: float = 0.0) -> np.ndarray:
        """Interior test; ``tol > 0`` also accepts points within ``tol`` of the boundary
        (closed-form tests only), ``tol < 0`` demands that margin inside."""
        z = np.atleast_1d(np.asarray(as_complex(z), dtype=complex))
        if self.implicit is not None:
            return self.implicit(z) < tol
        inside = point_in_polygon(z, self._polygon)
        if tol > 0:
            inside |= self.distance_to_boundary(z) <= tol
        elif tol < 0:
            inside &= self.distance_to_boundary(z) > -tol
        return inside

    def distance_to_boundary(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        a = self._polygon
        d = np.roll(a, -1) - a
        w = z[:, None] - a[None, :]
        s = np.clip((w * d.conj()).real / np.abs(d) ** 2, 0.0, 1.0)
        return np.min(np.abs(w - s * d), axis=1)

    @property
    def radius(self) -> float:
        """Largest distance from the center to the boundary."""
        return float(np.max(np.abs(self._polygon - self.center)))

    @property
    def area(self) -> float:
        """Area by Gauss-Legendre quadrature of ``1/2 * integral(x dy - y dx)``."""
        b = self.boundary
        total = 0.0
        for a, c in zip(b._knots[:-1], b._knots[1:]):
            t = 0.5 * (c - a) * _GL_X + 0.5 * (a + c)
            g, dg = b.gamma(t), b.dgamma(t)
            total += 0.5 * (c - a) * np.sum(_GL_W * 0.5 * (g.real * dg.imag - g.imag * dg.real))
        return float(total)

    def is_star_shaped(self, samples: int = 2048) -> bool:
        """Strict star-shapedness with respect to :attr:`center`."""
        t = self.boundary.dense_parameters(samples)
        t = t[np.min(np.abs(t[:, None] - np.asarray(self.boundary.breaks + (0.0,), float)[None, :]), axis=1) > 1e-9]
        g = self.boundary.gamma(t) - self.center
        dg = self.boundary.dgamma(t)
        return bool(np.all(g.real * dg.imag - g.imag * dg.real > 0))

    def segments_inside(self, targets, samples: int = 16, tol: float = 1e-9) -> np.ndarray:
        """Whether each straight segment ``center -> target`` stays in the closed domain."""
        targets = np.atleast_1d(np.asarray(targets, dtype=complex))
        s = np.linspace(0.0, 1.0, samples + 1)[1:]
        pts = self.center + s[None, :] * (targets - self.center)[:, None]
        ok = self.contains(pts.ravel(), tol=tol).reshape(pts.shape)
        if self.implicit is None:
            ok |= self.distance_to_boundary(pts.ravel()).reshape(pts.shape) <= tol
        return np.all(ok, axis=1)


def unit_disk() -> Domain:
    """The unit disk centered at the origin; ``gamma(0) = 1``."""
    return ellipse_with_area_pi(0.0, kind="disk")


def ellipse_with_area_pi(e: float, kind: str = "ellipse") -> Domain:
    """Ellipse of eccentricity ``e`` and area ``pi`` (semi-axes ``a b = 1``)."""
    if not 0.0 <= e < 1.0:
        raise DomainParameterError(f"eccentricity must lie in [0, 1), got {e}")
    a = (1.0 - e * e) ** -0.25
    b = (1.0 - e * e) ** 0.25

    def gamma(t):
        th = TWO_PI * np.asarray(t, float)
        return a * np.cos(th) + 1j * b * np.sin(th)

    def dgamma(t):
        th = TWO_PI * np.asarray(t, float)
        return TWO_PI * (-a * np.sin(th) + 1j * b * np.cos(th))

    def implicit(z):
        return (z.real / a) ** 2 + (z.imag / b) ** 2 - 1.0

    return Domain(BoundaryCurve(gamma, dgamma), 0j, kind, {"e": e, "a": a, "b": b}, implicit)


def peaked_disk(height: float, half_width: float = np.pi / 8) -> Domain:
    """Unit disk whose arc over ``[-half_width, half_width]`` is replaced by two
    straight segments meeting at the apex ``1 + height``.

    The curve is parametrized by normalized arclength and starts at the apex.
    """
    if not height > 0:
        raise DomainParameterError(f"peak height must be positive, got {height}")
    if not 0 < half_width < np.pi / 2:
        raise DomainParameterError("half_width must lie in (0, pi/2)")
    apex = 1.0 + height
    up = np.exp(1j * half_width)
    down = np.conj(up)
    seg = abs(up - apex)
    arc = TWO_PI - 2.0 * half_width
    total = 2.0 * seg + arc
    t1, t2 = seg / total, (seg + arc) / total

    def gamma(t):
        s = np.asarray(t, float) * total
        out = np.empty(s.shape, dtype=complex)
        m1 = s < seg
        m3 = s >= seg + arc
        m2 = ~(m1 | m3)
        out[m1] = apex + (up - apex) * (s[m1] / seg)
        out[m2] = np.exp(1j * (half_width + (s[m2] - seg)))
        out[m3] = down + (apex - down) * ((s[m3] - seg - arc) / seg)
        return out

    def dgamma(t):
        s = np.asarray(t, float) * total
        out = np.empty(s.shape, dtype=complex)
        m1 = s < seg
        m3 = s >= seg + arc
        m2 = ~(m1 | m3)
        out[m1] = (up - apex) / seg * total
        out[m2] = 1j * np.exp(1j * (half_width + (s[m2] - seg))) * total
        out[m3] = (apex - down) / seg * total
        return out

    tri = np.array([apex, up, down])
    edges = np.roll(tri, -1) - tri
    outward = -1j * edges / np.abs(edges)

    def implicit(z):
        # union of disk and triangle: minimum of the two (signed) distance functions
        disk = np.abs(z) - 1.0
        tri_sd = np.max(((z[:, None] - tri[None, :]) * np.conj(outward)[None, :]).real, axis=1)
        return np.minimum(disk, tri_sd)

    return Domain(
        BoundaryCurve(gamma, dgamma, breaks=(t1, t2)),
        0j,
        "peaked_disk",
        {"height": height, "half_width": half_width},
        implicit,
    )


def collocation_points(domain: Domain, m: int, spacing: str = "arclength") -> CollocationSet:
    """``m`` boundary points, uniform in arclength (or parameter), from ``gamma(0)``."""
    if m < 1:
        raise DomainParameterError("need at least one collocation point")
    b = domain.boundary
    if spacing == "arclength":
        t = b.parameter_at_arclength(b.length * np.arange(m) / m)
        t[0] = 0.0
    elif spacing == "parameter":
        t = np.arange(m) / m
    else:
        raise DomainParameterError(f"unknown spacing {spacing!r}")
    return CollocationSet(b.gamma(t), b.normal(t), t)


def boundary_sample(domain: Domain, m: int) -> np.ndarray:
    """``m`` boundary points offset by half a spacing from the collocation nodes."""
    b = domain.boundary
    return b.gamma(b.parameter_at_arclength(b.length * (np.arange(m) + 0.5) / m))


def interior_grid(domain: Domain, resolution: int | None = None, min_points: int = 500) -> np.ndarray:
    """Lattice points strictly inside ``domain`` (complex array).

    Without ``resolution`` the lattice is refined until at least
    ``min_points`` samples fall inside.
    """
    poly = domain._polygon
    x0, x1 = poly.real.min(), poly.real.max()
    y0, y1 = poly.imag.min(), poly.imag.max()

    def lattice(n):
        xs = np.linspace(x0, x1, n)
        ys = np.linspace(y0, y1, n)
        z = (xs[None, :] + 1j * ys[:, None]).ravel()
        return z[domain.contains(z, tol=-1e-12 * max(1.0, domain.radius))]

    if resolution is not None:
        if resolution < 2:
            raise DomainParameterError("resolution must be at least 2")
        return lattice(resolution)
    n = 8
    pts = lattice(n)
    while len(pts) < min_points:
        n += 4
        pts = lattice(n)
    return pts

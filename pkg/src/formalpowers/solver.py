"""Boundary collocation with complete systems and the eigenvalue scan.

A boundary value problem is solved by the ansatz ``u^N = sum_k b_k u_k``
with coefficients from ``N + 1`` (or more) boundary conditions.  For
eigenvalue problems the square matrix of boundary values ``U(lam)``
becomes singular at eigenvalues; the scan locates minima of its smallest
singular value after row normalization.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import lu_factor, lu_solve, qr, solve_triangular
from scipy.optimize import minimize_scalar
from scipy.signal import find_peaks

from .exceptions import IllConditionedError, PositivityError, UnderdeterminedError
from .geometry import CollocationSet, Domain, boundary_sample, collocation_points, interior_grid
from .problems import EllipticProblem, FormalPowerBasis, complete_system, particular_solution
from .quadrature import DEFAULT_RULE, QuadratureRule

COND_WARN = 1e13
COND_ERROR = 1e15


@dataclass(frozen=True)
class BoundaryCondition:
    """``B[u] = v`` on the boundary with ``B`` the trace or the outward normal derivative.

    ``data(z)`` gives Dirichlet values; for Neumann conditions it is called
    as ``data(z, normals)``.  ``pin`` is the value imposed at the first
    collocation point when a pure Neumann problem for ``q = 0`` needs a
    Dirichlet row.
    """

    operator: str
    data: Callable
    pin: float | None = None

    def __post_init__(self):
        if self.operator not in ("dirichlet", "neumann"):
            raise ValueError(f"unknown boundary operator {self.operator!r}")

    @classmethod
    def dirichlet(cls, data: Callable) -> "BoundaryCondition":
        return cls("dirichlet", data)

    @classmethod
    def neumann(cls, data: Callable, pin: float | None = None) -> "BoundaryCondition":
        return cls("neumann", data, pin)

    @classmethod
    def neumann_from_gradient(cls, grad: Callable, pin: float | None = None) -> "BoundaryCondition":
        """Neumann data ``grad(z) . n`` from a gradient field returning ``(u_x, u_y)``."""

        def data(z, n):
            gx, gy = grad(z)
            return gx * np.real(n) + gy * np.imag(n)

        return cls("neumann", data, pin)

    def values(self, pts: CollocationSet) -> np.ndarray:
        if self.operator == "dirichlet":
            return np.asarray(self.data(pts.points))
        return np.asarray(self.data(pts.points, pts.normals))


@dataclass
class CollocationSystem:
    """Matrix ``B[u_k](zeta_j)``, right-hand side and, after solving, coefficients."""

    matrix: np.ndarray
    rhs: np.ndarray
    points: CollocationSet
    row_kinds: list
    basis: FormalPowerBasis
    condition: float = field(default=np.nan)
    col_scale: np.ndarray | None = None

    @property
    def shape(self):
        return self.matrix.shape


def _equilibrated(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scale = np.max(np.abs(matrix), axis=0)
    scale[scale == 0] = 1.0
    return matrix / scale, scale


def assemble(
    basis: FormalPowerBasis,
    bc: BoundaryCondition,
    m_points: int | None = None,
    spacing: str = "arclength",
) -> CollocationSystem:
    """Fill the collocation matrix at ``m_points`` boundary points (default ``N + 1``).

    The condition number is estimated on the column-equilibrated matrix.
    """
    n = len(basis)
    m = n if m_points is None else int(m_points)
    if m < n:
        raise UnderdeterminedError(f"{m} collocation points for {n} basis functions")
    pts = collocation_points(basis.domain, m, spacing)
    kinds = [bc.operator] * m
    if bc.operator == "dirichlet":
        A = basis.values(pts.points)
    else:
        A = basis.normal_derivative(pts.points, pts.normals)
    rhs = np.array(bc.values(pts), dtype=A.dtype if np.iscomplexobj(A) else float)
    q = np.asarray(basis.ps.problem.q(pts.points))
    if bc.operator == "neumann" and np.all(q == 0):
        # a constant is then a Neumann solution; fix it with one Dirichlet row
        A = A.copy()
        A[0] = basis.values(pts.points[:1])[0]
        rhs[0] = 0.0 if bc.pin is None else bc.pin
        kinds[0] = "dirichlet"
    As, scale = _equilibrated(A)
    cond = float(np.linalg.cond(As))
    return CollocationSystem(A, rhs, pts, kinds, basis, cond, scale)


@dataclass
class ApproximateSolution:
    """``u^N(z) = sum_k b_k u_k(z)``."""

    basis: FormalPowerBasis
    coefficients: np.ndarray
    residual: float
    condition: float

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return (self.basis.values(z.ravel()) @ self.coefficients).reshape(z.shape)

    def normal_derivative(self, z, normals) -> np.ndarray:
        return self.basis.normal_derivative(z, normals) @ self.coefficients


def solve_bvp(system: CollocationSystem, mode: str = "square") -> ApproximateSolution:
    """Solve for the coefficients ``b_k``.

    ``square`` uses LU with partial pivoting and needs as many points as
    basis functions; ``least_squares`` uses a QR factorization.  Both work on
    the column-equilibrated matrix.  A condition estimate above
    ``COND_ERROR`` raises :class:`IllConditionedError`; above ``COND_WARN``
    a warning is issued.
    """
    A, rhs = system.matrix, system.rhs
    As, scale = _equilibrated(A)
    cond = system.condition
    if not np.isfinite(cond) or cond > COND_ERROR:
        raise IllConditionedError(f"collocation matrix condition {cond:.3e} exceeds {COND_ERROR:.0e}", cond)
    if cond > COND_WARN:
        warnings.warn(f"collocation matrix condition {cond:.3e} is large", RuntimeWarning, stacklevel=2)
    if mode == "square":
        if A.shape[0] != A.shape[1]:
            raise ValueError("square mode needs as many points as basis functions")
        y = lu_solve(lu_factor(As), rhs)
    elif mode == "least_squares":
        Q, R = qr(As, mode="economic")
        y = solve_triangular(R, Q.conj().T @ rhs)
    else:
        raise ValueError(f"unknown solve mode {mode!r}")
    b = y / scale
    res = float(np.max(np.abs(A @ b - rhs)))
    return ApproximateSolution(system.basis, b, res, cond)


def max_abs_error(
    sol: ApproximateSolution,
    exact: Callable,
    grid: np.ndarray | None = None,
    boundary_points: int = 400,
) -> float:
    """Maximum of ``|u^N - exact|`` over an interior grid and a boundary sample.

    The boundary sample is offset from the collocation points by half a
    spacing.
    """
    domain = sol.basis.domain
    if grid is None:
        grid = interior_grid(domain)
    pts = np.concatenate([np.asarray(grid, dtype=complex).ravel(), boundary_sample(domain, boundary_points)])
    return float(np.max(np.abs(sol(pts) - exact(pts))))


def normal_derivative(basis: FormalPowerBasis, k: int, z, normals) -> np.ndarray:
    """``du_k/dn`` at boundary points ``z`` with unit outward ``normals``."""
    return basis.normal_derivative(z, normals)[:, k]


def solve_dirichlet(
    problem: EllipticProblem,
    domain: Domain,
    N: int,
    data: Callable,
    mode: str = "auto",
    rule: QuadratureRule = DEFAULT_RULE,
    solve_mode: str = "square",
    m_points: int | None = None,
    ps_kind: str = "auto",
) -> ApproximateSolution:
    """Convenience pipeline: particular solution, basis, assembly and solve."""
    ps = particular_solution(problem, ps_kind, domain=domain)
    basis = complete_system(ps, domain, N, mode, rule)
    system = assemble(basis, BoundaryCondition.dirichlet(data), m_points)
    return solve_bvp(system, solve_mode)


# ---------------------------------------------------------------------------
# eigenvalues


@dataclass
class EigenScan:
    """Result of :func:`find_eigenvalues`; the eigenvalues are ``roots**2``."""

    lambda_grid: np.ndarray
    indicator: np.ndarray
    roots: list
    root_indicator: list
    N: int
    skipped: list = field(default_factory=list)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.asarray(self.roots) ** 2


def boundary_matrix(
    problem: EllipticProblem,
    domain: Domain,
    N: int,
    lam: float,
    rule: QuadratureRule = DEFAULT_RULE,
) -> np.ndarray:
    """Square complex matrix ``U(lam) = [u_k(zeta_j)]`` for ``(-Laplace + V) u = lam^2 u``."""
    ps = particular_solution(problem, "eigen", domain=None if problem.tag == "laplace" else domain, lam=lam)
    basis = complete_system(ps, domain, N, "auto", rule)
    pts = collocation_points(domain, N + 1)
    return basis.values(pts.points)


def row_normalized(U: np.ndarray) -> np.ndarray:
    return U / np.max(np.abs(U), axis=1, keepdims=True)


def eigen_indicator(
    problem: EllipticProblem,
    domain: Domain,
    N: int,
    lam: float,
    rule: QuadratureRule = DEFAULT_RULE,
    details: bool = False,
):
    """Smallest singular value of the row-normalized ``U(lam)``.

    With ``details=True`` returns ``(sigma_min, log|det U|)``.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    U = boundary_matrix(problem, domain, N, lam, rule)
    sigma = float(np.linalg.svd(row_normalized(U), compute_uv=False)[-1])
    if details:
        return sigma, float(np.linalg.slogdet(U)[1])
    return sigma


def find_eigenvalues(
    problem: EllipticProblem,
    domain: Domain,
    N: int,
    lam_range: tuple[float, float],
    grid_step: float = 0.01,
    k_wanted: int | None = None,
    prominence: float = 0.5,
    xtol: float = 1e-6,
    rule: QuadratureRule = DEFAULT_RULE,
) -> EigenScan:
    """Scan the indicator on a grid, bracket its dips and refine them.

    A grid minimum counts when ``-log10`` of the indicator has a peak of at
    least ``prominence`` decades.  Each bracket is refined by golden-section
    search until the bracket is shorter than ``xtol``.
    """
    lo, hi = map(float, lam_range)
    if not (0 < lo < hi):
        raise ValueError("lambda range must satisfy 0 < min < max")
    grid = np.arange(lo, hi + 0.5 * grid_step, grid_step)
    ind = np.full(grid.shape, np.nan)
    skipped = []

    def indicator(lam):
        return eigen_indicator(problem, domain, N, lam, rule)

    for i, lam in enumerate(grid):
        try:
            ind[i] = indicator(lam)
        except PositivityError:
            skipped.append(float(lam))
    logs = -np.log10(np.where(np.isfinite(ind), ind, np.nanmax(ind)))
    peaks, _ = find_peaks(logs, prominence=prominence)
    roots, values = [], []
    for i in peaks:
        a, b = grid[i - 1], grid[i + 1]
        res = minimize_scalar(
            lambda t: indicator(t) if a <= t <= b else np.inf,
            bracket=(a, grid[i], b),
            method="golden",
            options={"xtol": xtol / max(grid[i], 1.0) / 4},
        )
        roots.append(float(res.x))
        values.append(float(res.fun))
    order = np.argsort(roots)
    roots = [roots[i] for i in order]
    values = [values[i] for i in order]
    if k_wanted is not None:
        roots, values = roots[:k_wanted], values[:k_wanted]
    return EigenScan(grid, ind, roots, values, N, skipped)

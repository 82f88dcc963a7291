"""Complete systems of solutions for planar elliptic equations built from
pseudoanalytic formal powers, with boundary collocation and an eigenvalue
scan.

Typical use::

    from formalpowers import unit_disk, yukawa, particular_solution, complete_system
    from formalpowers import BoundaryCondition, assemble, solve_bvp

    d = unit_disk()
    basis = complete_system(particular_solution(yukawa(1.0), domain=d), d, N=14)
    sol = solve_bvp(assemble(basis, BoundaryCondition.dirichlet(lambda z: np.exp(z.real))))
"""

from .exceptions import *  # noqa: F401,F403
from .expoly import ExpPoly
from .geometry import (
    BoundaryCurve,
    Domain,
    boundary_sample,
    collocation_points,
    ellipse_with_area_pi,
    interior_grid,
    peaked_disk,
    unit_disk,
)
from .problems import (
    EllipticProblem,
    FormalPowerBasis,
    complete_system,
    coordinate_catalog,
    exponential_potential,
    general,
    laplace,
    ode_profile,
    particular_solution,
    schrodinger,
    second_example_solution,
    yukawa,
)
from .quadrature import DEFAULT_RULE, Path, QuadratureRule, abar, integrate_path
from .solver import (
    BoundaryCondition,
    assemble,
    eigen_indicator,
    find_eigenvalues,
    max_abs_error,
    solve_bvp,
    solve_dirichlet,
)
from .vekua import (
    exact_formal_powers,
    exponential_sequence,
    formal_powers,
    generating_sequence,
    numeric_formal_powers,
)

__version__ = "0.1.0"

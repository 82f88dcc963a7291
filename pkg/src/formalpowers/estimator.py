"""Scikit-learn style regressor over a complete system of exact solutions.

``fit(X, y)`` takes boundary points ``X`` (shape ``(m, 2)``) and data
``y`` and determines the coefficients of ``u^N = sum_k b_k u_k`` by
collocation (``m = N + 1``) or least squares (``m > N + 1``).  ``predict``
evaluates ``u^N`` anywhere in the domain, so a fitted estimator is an
approximate solution of the boundary value problem.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lu_factor, lu_solve, qr, solve_triangular
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, check_X_y, validate_data

from .exceptions import IllConditionedError, UnderdeterminedError
from .geometry import ellipse_with_area_pi, peaked_disk, unit_disk
from .problems import complete_system, exponential_potential, laplace, particular_solution, yukawa
from .quadrature import QuadratureRule
from .solver import COND_ERROR

_EQUATIONS = {"yukawa": lambda c: yukawa(c), "laplace": lambda c: laplace(), "exponential_potential": lambda c: exponential_potential()}


class FormalPowerRegressor(RegressorMixin, BaseEstimator):
    """Fit boundary data with ``N + 1`` solutions of an elliptic equation.

    Parameters
    ----------
    equation : {"yukawa", "laplace", "exponential_potential"}
    c : float
        Yukawa parameter, ignored otherwise.
    N : int
        Highest basis index.
    domain : {"disk", "ellipse", "peaked"}
    e, height : float
        Ellipse eccentricity and peak height.
    mode : {"auto", "exact", "numeric"}
    nodes : int
        Gauss nodes per ray in numeric mode.
    """

    def __init__(self, equation="yukawa", c=1.0, N=14, domain="disk", e=0.0, height=0.5, mode="auto", nodes=24):
        self.equation = equation
        self.c = c
        self.N = N
        self.domain = domain
        self.e = e
        self.height = height
        self.mode = mode
        self.nodes = nodes

    def _domain(self):
        if self.domain == "disk":
            return unit_disk()
        if self.domain == "ellipse":
            return ellipse_with_area_pi(self.e)
        if self.domain == "peaked":
            return peaked_disk(self.height)
        raise ValueError(f"unknown domain {self.domain!r}")

    def fit(self, X, y):
        if self.equation not in _EQUATIONS:
            raise ValueError(f"unknown equation {self.equation!r}")
        if int(self.N) < 0:
            raise ValueError("N must be non-negative")
        X, y = check_X_y(X, y, y_numeric=True)
        if X.shape[1] != 2:
            raise ValueError("X must have two columns (x, y)")
        self.n_features_in_ = 2
        n = int(self.N) + 1
        if X.shape[0] < n:
            raise UnderdeterminedError(f"{X.shape[0]} samples for {n} basis functions")
        dom = self._domain()
        ps = particular_solution(_EQUATIONS[self.equation](float(self.c)), domain=dom)
        self.basis_ = complete_system(ps, dom, int(self.N), self.mode, QuadratureRule("gauss", int(self.nodes)))
        A = self.basis_.values(X[:, 0] + 1j * X[:, 1])
        scale = np.max(np.abs(A), axis=0)
        scale[scale == 0] = 1.0
        As = A / scale
        self.condition_ = float(np.linalg.cond(As))
        if not np.isfinite(self.condition_) or self.condition_ > COND_ERROR:
            raise IllConditionedError(f"collocation matrix condition {self.condition_:.3e}", self.condition_)
        if As.shape[0] == As.shape[1]:
            b = lu_solve(lu_factor(As), y)
        else:
            Q, R = qr(As, mode="economic")
            b = solve_triangular(R, Q.T @ y)
        self.coef_ = b / scale
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, reset=False)
        return self.basis_.values(X[:, 0] + 1j * X[:, 1]) @ self.coef_

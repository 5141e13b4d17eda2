"""Estimator-style front end for the coupled interior/exterior Poisson solve."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import cheb
from .exterior import build_basis
from .influence import assemble, condition_number, exterior_sample, solve_coupled
from .interior import DirichletSolver, Geometry
from .quadrature import DEFAULT_TOL


class CoupledPoissonSolver(TransformerMixin, BaseEstimator):
    """Poisson problem on ``[-H, H] x [-1, 1]`` matched to a free-space exterior.

    ``fit`` builds the exterior basis and factorizes the influence matrix; it
    depends only on the geometry, so one fitted solver serves any number of
    sources. ``transform`` maps source coefficients to field coefficients.

    Parameters
    ----------
    H : float
        Half-width of the rectangle (``H >= 1``).
    K, L : int
        Chebyshev degrees in x and y. ``L`` defaults to ``K``.
    collocation : {"lobatto", "gauss"}
        Boundary points of the influence matrix.
    dropped : int or None
        Singular directions removed from the influence matrix; ``None`` uses
        the default for the collocation mode.
    tol : float
        Absolute quadrature tolerance for the exterior basis.
    correction : {"pseudo-inverse", "unit"}
        Treatment of the dropped singular values.
    n_jobs : int
        Threads used to build the exterior basis.
    allow_degenerate : bool
        Accept ``H == 2``.
    """

    def __init__(
        self,
        H=1.0,
        K=8,
        L=None,
        collocation="lobatto",
        dropped=None,
        tol=DEFAULT_TOL,
        correction="pseudo-inverse",
        n_jobs=1,
        allow_degenerate=False,
    ):
        self.H = H
        self.K = K
        self.L = L
        self.collocation = collocation
        self.dropped = dropped
        self.tol = tol
        self.correction = correction
        self.n_jobs = n_jobs
        self.allow_degenerate = allow_degenerate

    def _geometry(self) -> Geometry:
        L = self.K if self.L is None else self.L
        return Geometry(self.H, self.K, L, self.allow_degenerate)

    def fit(self, X=None, y=None):
        """Build the basis and influence system; ``X`` and ``y`` are ignored."""
        if not (np.isfinite(self.tol) and self.tol > 0):
            raise ValueError(f"tol must be positive, got {self.tol}")
        geom = self._geometry()
        basis = build_basis(geom, self.tol, workers=self.n_jobs)
        system = assemble(
            geom, basis, mode=self.collocation, dropped=self.dropped, correction=self.correction
        )
        return self._attach(system)

    @classmethod
    def from_system(cls, system):
        """Wrap an already assembled :class:`~influxion.influence.InfluenceSystem`."""
        g = system.geom
        est = cls(
            H=g.H,
            K=g.K,
            L=g.L,
            collocation=system.collocation.mode,
            dropped=system.dropped,
            tol=system.quad_tol,
            correction=system.correction,
            allow_degenerate=g.allow_degenerate,
        )
        return est._attach(system)

    def _attach(self, system):
        self.system_ = system
        self.geometry_ = system.geom
        self.solver_ = DirichletSolver(system.geom)
        self.condition_number_ = condition_number(system)
        self.dropped_ = system.dropped
        return self

    def _check_rho(self, X):
        check_is_fitted(self, "system_")
        X = np.asarray(X, dtype=float)
        shape = (self.geometry_.K + 1, self.geometry_.L + 1)
        if X.shape == shape:
            return X[None], True
        if X.ndim == 3 and X.shape[1:] == shape:
            return X, False
        raise ValueError(f"expected source coefficients of shape {shape} or (n, *{shape}), got {X.shape}")

    def solve(self, rho):
        """Full :class:`~influxion.influence.CoupledSolution` for one source."""
        rho, single = self._check_rho(rho)
        if not single:
            raise ValueError("solve takes a single source; use transform for a stack")
        return solve_coupled(rho[0], self.system_, self.solver_)

    def transform(self, X):
        """Field coefficients for one source or a stack of sources."""
        rho, single = self._check_rho(X)
        fields = np.stack([solve_coupled(r, self.system_, self.solver_).field for r in rho])
        return fields[0] if single else fields

    def source_from_function(self, func):
        """Coefficients of ``func(x, y)`` sampled on the solver's Lobatto grid."""
        check_is_fitted(self, "system_")
        X, Y = np.meshgrid(self.geometry_.x_nodes(), self.geometry_.y_nodes(), indexing="ij")
        return cheb.to_coeffs_2d(func(X, Y))

    def evaluate(self, field, x, y):
        """Interior field values at physical points ``(x[i], y[i])``."""
        check_is_fitted(self, "system_")
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if np.any(np.abs(x) > self.geometry_.H * (1 + 1e-12)) or np.any(np.abs(y) > 1 + 1e-12):
            raise ValueError("evaluation points must lie in the closed rectangle")
        return cheb.eval_points_2d(field, x / self.geometry_.H, y)

    def exterior(self, rho, points):
        """Exterior potential at points outside the rectangle (diagnostic)."""
        sol = self.solve(rho)
        return exterior_sample(sol.coefficients, self.system_.generators, points, self.system_.quad_tol)

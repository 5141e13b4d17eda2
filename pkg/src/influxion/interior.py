"""Dirichlet Poisson solver on the rectangle ``[-H, H] x [-1, 1]``.

The field is a tensor Chebyshev series ``sum a[k, l] T_k(x / H) T_l(y)``.
Equations are collocated at the interior Chebyshev-Gauss-Lobatto nodes and
Dirichlet data is imposed at the boundary nodes. The interior blocks of both
second-derivative matrices are diagonalized once per geometry, so a solve is
a handful of dense products.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import cheb
from .validation import (
    DegenerateSegmentError,
    DimensionError,
    SolverError,
    check_finite,
    check_positive_int,
    check_shape,
)

CORNER_TOL = 1e-10


@dataclass(frozen=True)
class Geometry:
    """Rectangle half-width ``H`` and Chebyshev degrees ``K`` (x) and ``L`` (y).

    ``allow_degenerate`` permits ``H == 2``, where the constant-mode density of
    the horizontal sides needs the arbitrary-constant variant.
    """

    H: float = 1.0
    K: int = 8
    L: int = 8
    allow_degenerate: bool = False

    def __post_init__(self):
        H = float(self.H)
        if not math.isfinite(H) or H < 1.0:
            raise ValueError(f"H must be >= 1, got {self.H}")
        K = check_positive_int(self.K, "K", minimum=2)
        L = check_positive_int(self.L, "L", minimum=2)
        if K < L:
            raise ValueError(f"K must be >= L, got K={K}, L={L}")
        if H == 2.0 and not self.allow_degenerate:
            raise DegenerateSegmentError(
                "H = 2 makes the horizontal sides of length 4: the k=0 horizontal "
                "density amplitude -2*pi/ln(H/2) is undefined; pass allow_degenerate=True "
                "to use the arbitrary-constant variant"
            )
        if abs(math.log(H / 2.0)) < 0.05 and H != 2.0:
            warnings.warn(
                f"H={H} is close to 2; the k=0 horizontal density is ill-conditioned",
                RuntimeWarning,
                stacklevel=3,
            )
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "L", L)

    @property
    def n_boundary(self) -> int:
        return 2 * (self.K + self.L)

    def x_nodes(self) -> np.ndarray:
        return self.H * cheb.lobatto_points(self.K)

    def y_nodes(self) -> np.ndarray:
        return cheb.lobatto_points(self.L)

    def check_field(self, coeffs, name="field") -> np.ndarray:
        return check_shape(coeffs, (self.K + 1, self.L + 1), name)


class Side(enum.Enum):
    """Rectangle sides in the fixed basis/collocation order.

    Bottom and Top are parameterized by ``x`` (reference coordinate ``x / H``),
    Left and Right by ``y``.
    """

    BOTTOM = 0
    TOP = 1
    LEFT = 2
    RIGHT = 3

    @property
    def horizontal(self) -> bool:
        return self in (Side.BOTTOM, Side.TOP)

    @property
    def sign(self) -> float:
        """+1 for Top/Right, -1 for Bottom/Left."""
        return 1.0 if self in (Side.TOP, Side.RIGHT) else -1.0

    @property
    def normal(self) -> np.ndarray:
        """Outward unit normal."""
        return np.array([0.0, self.sign]) if self.horizontal else np.array([self.sign, 0.0])

    def half_length(self, geom: Geometry) -> float:
        return geom.H if self.horizontal else 1.0

    def degree(self, geom: Geometry) -> int:
        return geom.K if self.horizontal else geom.L

    def center(self, geom: Geometry) -> np.ndarray:
        return np.array([0.0, self.sign]) if self.horizontal else np.array([self.sign * geom.H, 0.0])

    def tangent(self) -> np.ndarray:
        return np.array([1.0, 0.0]) if self.horizontal else np.array([0.0, 1.0])

    def points(self, geom: Geometry, s) -> np.ndarray:
        """Plane points ``(..., 2)`` for arc coordinates ``s`` (physical units)."""
        s = np.asarray(s, dtype=float)
        return self.center(geom) + s[..., None] * self.tangent()


SIDES = (Side.BOTTOM, Side.TOP, Side.LEFT, Side.RIGHT)

# (horizontal side, vertical side, reference coordinate on each)
CORNERS = (
    (Side.BOTTOM, Side.LEFT, -1.0, -1.0),
    (Side.BOTTOM, Side.RIGHT, 1.0, -1.0),
    (Side.TOP, Side.LEFT, -1.0, 1.0),
    (Side.TOP, Side.RIGHT, 1.0, 1.0),
)


@dataclass(frozen=True)
class BoundaryTrace:
    """Per-side Chebyshev expansions of boundary values.

    ``raw=True`` skips the corner-consistency check, for traces that are only
    consistent after corner averaging.
    """

    bottom: np.ndarray
    top: np.ndarray
    left: np.ndarray
    right: np.ndarray
    raw: bool = field(default=False, compare=False)

    def __post_init__(self):
        for side in SIDES:
            a = check_finite(getattr(self, side.name.lower()), side.name.lower())
            if a.ndim != 1:
                raise DimensionError(f"{side.name.lower()} must be 1-D")
            a = a.copy()
            a.setflags(write=False)
            object.__setattr__(self, side.name.lower(), a)
        if not self.raw:
            gap = self.corner_mismatch()
            if gap > CORNER_TOL * max(1.0, self.scale()):
                raise ValueError(f"corner values disagree by {gap:.3e}")

    def __getitem__(self, side: Side) -> np.ndarray:
        return getattr(self, side.name.lower())

    @classmethod
    def from_sides(cls, sides: dict, raw=False) -> BoundaryTrace:
        return cls(*(sides[s] for s in SIDES), raw=raw)

    @classmethod
    def from_function(cls, func, geom: Geometry) -> BoundaryTrace:
        """Sample ``func(x, y)`` at each side's Lobatto nodes."""
        sides = {}
        for side in SIDES:
            n = side.degree(geom)
            s = side.half_length(geom) * cheb.lobatto_points(n)
            p = side.points(geom, s)
            sides[side] = cheb.to_coeffs(np.asarray(func(p[:, 0], p[:, 1]), dtype=float))
        return cls.from_sides(sides)

    @classmethod
    def zeros(cls, geom: Geometry) -> BoundaryTrace:
        return cls.from_sides({s: np.zeros(s.degree(geom) + 1) for s in SIDES})

    def scale(self) -> float:
        return max(float(np.max(np.abs(self[s]))) for s in SIDES)

    def corner_values(self):
        """Pairs of corner values ``(from horizontal side, from vertical side)``."""
        return [
            (cheb.eval_series(self[h], xh), cheb.eval_series(self[v], yv))
            for h, v, xh, yv in CORNERS
        ]

    def corner_mismatch(self) -> float:
        return max(abs(a - b) for a, b in self.corner_values())

    def check_geometry(self, geom: Geometry) -> None:
        for side in SIDES:
            if self[side].size != side.degree(geom) + 1:
                raise DimensionError(
                    f"{side.name.lower()} trace has degree {self[side].size - 1}, "
                    f"expected {side.degree(geom)}"
                )

    def __add__(self, other):
        return BoundaryTrace(*(self[s] + other[s] for s in SIDES), raw=self.raw or other.raw)

    def __mul__(self, alpha):
        return BoundaryTrace(*(alpha * self[s] for s in SIDES), raw=self.raw)

    __rmul__ = __mul__


def boundary_grid_values(trace: BoundaryTrace, geom: Geometry) -> np.ndarray:
    """Grid array with the trace written on its boundary rows/columns.

    Corner nodes take the mean of the two adjacent side expansions.
    """
    K, L = geom.K, geom.L
    V = np.zeros((K + 1, L + 1))
    V[0, :] = cheb.to_values(trace[Side.RIGHT])
    V[K, :] = cheb.to_values(trace[Side.LEFT])
    V[:, 0] = cheb.to_values(trace[Side.TOP])
    V[:, L] = cheb.to_values(trace[Side.BOTTOM])
    for h, v, xh, yv in CORNERS:
        i = 0 if xh > 0 else K
        j = 0 if yv > 0 else L
        V[i, j] = 0.5 * (cheb.eval_series(trace[h], xh) + cheb.eval_series(trace[v], yv))
    return V


class DirichletSolver:
    """Factorized collocation solver for ``Laplace(phi) = rho`` with Dirichlet data.

    The factorization is built once and is read-only afterwards, so one
    instance may serve concurrent solves.
    """

    def __init__(self, geom: Geometry):
        self.geom = geom
        K, L = geom.K, geom.L
        Dx = cheb.lobatto_diff_matrix(K) / geom.H
        Dy = cheb.lobatto_diff_matrix(L)
        self._Dxx = Dx @ Dx
        self._Dyy = Dy @ Dy
        self._Px, self._Pxi, self._lx = _diagonalize(self._Dxx[1:K, 1:K])
        self._Py, self._Pyi, self._ly = _diagonalize(self._Dyy[1:L, 1:L])
        denom = self._lx[:, None] + self._ly[None, :]
        if not np.all(np.isfinite(denom)) or np.any(denom == 0.0):
            raise SolverError("singular interior Laplacian")
        self._denom = denom
        for a in (self._Dxx, self._Dyy, self._Px, self._Pxi, self._Py, self._Pyi, self._denom):
            a.setflags(write=False)

    def solve_grid(self, rho_values: np.ndarray, boundary: np.ndarray) -> np.ndarray:
        """Grid-value solve: ``boundary`` holds the Dirichlet values on its rim."""
        K, L = self.geom.K, self.geom.L
        V = np.array(boundary, dtype=float)
        V[1:K, 1:L] = 0.0
        lift = self._Dxx @ V + V @ self._Dyy.T
        G = rho_values[1:K, 1:L] - lift[1:K, 1:L]
        W = (self._Pxi @ G @ self._Pyi.T) / self._denom
        V[1:K, 1:L] = self._Px @ W @ self._Py.T
        if not np.all(np.isfinite(V)):
            raise SolverError("non-finite values in interior solve")
        return V

    def solve(self, rho, trace: BoundaryTrace) -> np.ndarray:
        """Coefficients of the solution for source coefficients ``rho``."""
        rho = self.geom.check_field(rho, "rho")
        trace.check_geometry(self.geom)
        V = self.solve_grid(cheb.to_values_2d(rho), boundary_grid_values(trace, self.geom))
        return cheb.to_coeffs_2d(V)


def _diagonalize(A):
    lam, P = np.linalg.eig(A)
    if np.max(np.abs(lam.imag), initial=0.0) > 1e-8 * np.max(np.abs(lam.real)):
        raise SolverError("second-derivative matrix has complex spectrum")
    lam, P = lam.real, P.real
    if not np.all(np.isfinite(lam)):
        raise SolverError("non-finite eigenvalue in interior operator")
    return P, np.linalg.inv(P), lam


def solve_dirichlet(rho, trace: BoundaryTrace, geom: Geometry) -> np.ndarray:
    """One-off Dirichlet solve; build a :class:`DirichletSolver` to reuse the factorization."""
    return DirichletSolver(geom).solve(rho, trace)


def normal_derivative(field, side: Side, geom: Geometry) -> np.ndarray:
    """Outward normal derivative on ``side`` as a series in the side's reference coordinate."""
    a = geom.check_field(field)
    if side.horizontal:
        l = np.arange(geom.L + 1, dtype=float)
        # T_l'(+1) = l^2, T_l'(-1) = (-1)^(l+1) l^2
        d = l**2 if side is Side.TOP else -((-1.0) ** (l + 1)) * l**2
        return a @ d
    k = np.arange(geom.K + 1, dtype=float)
    d = k**2 if side is Side.RIGHT else -((-1.0) ** (k + 1)) * k**2
    return (d @ a) / geom.H


def laplacian_coeffs(field, geom: Geometry) -> np.ndarray:
    """Coefficients of the Laplacian of a field (same array shape)."""
    a = geom.check_field(field)
    axx = np.apply_along_axis(lambda c: cheb.diff_coeffs(cheb.diff_coeffs(c, geom.H), geom.H), 0, a)
    ayy = np.apply_along_axis(lambda c: cheb.diff_coeffs(cheb.diff_coeffs(c)), 1, a)
    return axx + ayy


def laplacian_residual(field, rho, geom: Geometry) -> float:
    """Max ``|Laplace(field) - rho|`` over interior Lobatto nodes."""
    rho = geom.check_field(rho, "rho")
    r = cheb.to_values_2d(laplacian_coeffs(field, geom) - rho)
    return float(np.max(np.abs(r[1:-1, 1:-1])))


def evaluate(field, x, y, geom: Geometry) -> np.ndarray:
    """Evaluate a field at physical points ``(x, y)`` (broadcast together)."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    return cheb.eval_points_2d(field, x / geom.H, y)

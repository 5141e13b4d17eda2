"""Influence (capacitance) matrix and the coupled interior/exterior solve.

Column ``j`` of the matrix is the outward normal-derivative mismatch
``d/dn (phi_j - Phi_j)`` of exterior basis function ``phi_j`` and the interior
harmonic field ``Phi_j`` sharing its boundary trace, sampled at the
collocation points. For a source ``rho`` the coefficients ``c`` solve
``C c = d/dn Phi_p`` where ``Phi_p`` solves the Poisson problem with zero
boundary values; the final field uses the boundary data ``sum_j c_j trace_j``.

The matrix is factorized by SVD and the ``dropped`` smallest singular
directions are discarded (pseudo-inverse).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import cheb
from .exterior import single_layer_gradient, single_layer_value
from .interior import (
    CORNERS,
    SIDES,
    BoundaryTrace,
    DirichletSolver,
    Geometry,
    boundary_grid_values,
    normal_derivative,
)
from .validation import SolverError, check_finite

GAP_THRESHOLD = 1e3
MATCH_TOL = 1e-10
NULL_TOL = 1e-8
DEFAULT_DROPPED = {"lobatto": 4, "gauss": 0}


class RankGapWarning(RuntimeWarning):
    """The singular-value gap at the dropped rank is smaller than expected."""


@dataclass(frozen=True)
class CollocationSet:
    """Ordered boundary collocation points.

    ``owner[i]`` is the side a point belongs to, or ``None`` for a corner, in
    which case ``corner[i]`` is the index into :data:`interior.CORNERS`.
    ``xi[i]`` is the reference coordinate on the owning side (for corners,
    on the horizontal side).
    """

    geom: Geometry
    mode: str
    owner: tuple
    corner: tuple
    xi: np.ndarray
    points: np.ndarray

    def __len__(self):
        return len(self.owner)

    @classmethod
    def build(cls, geom: Geometry, mode: str = "lobatto") -> CollocationSet:
        owner, corner, xi = [], [], []
        if mode == "lobatto":
            corner_index = {(h, round(x)): i for i, (h, v, x, y) in enumerate(CORNERS)}
            for side in SIDES:
                nodes = cheb.lobatto_points(side.degree(geom))[::-1]
                if not side.horizontal:
                    nodes = nodes[1:-1]
                for x in nodes:
                    if side.horizontal and abs(x) == 1.0:
                        owner.append(None)
                        corner.append(corner_index[(side, round(x))])
                    else:
                        owner.append(side)
                        corner.append(-1)
                    xi.append(x)
        elif mode == "gauss":
            for side in SIDES:
                for x in cheb.gauss_points(side.degree(geom))[::-1]:
                    owner.append(side)
                    corner.append(-1)
                    xi.append(x)
        else:
            raise ValueError(f"unknown collocation mode {mode!r}; use 'lobatto' or 'gauss'")
        xi = np.array(xi)
        pts = np.empty((xi.size, 2))
        for i, (side, c) in enumerate(zip(owner, corner)):
            s = CORNERS[c][0] if side is None else side
            pts[i] = s.points(geom, xi[i] * s.half_length(geom))
        if len(owner) != geom.n_boundary:
            raise AssertionError("collocation count differs from 2(K+L)")
        return cls(geom, mode, tuple(owner), tuple(corner), xi, pts)

    def sample(self, side_coeffs) -> np.ndarray:
        """Evaluate per-side expansions at the points; corners average both sides."""
        out = np.empty(len(self))
        for side in SIDES:
            idx = [i for i, o in enumerate(self.owner) if o is side]
            if idx:
                out[idx] = cheb.eval_series(side_coeffs[side], self.xi[idx])
        for i, c in enumerate(self.corner):
            if c >= 0:
                h, v, xh, yv = CORNERS[c]
                out[i] = 0.5 * (cheb.eval_series(side_coeffs[h], xh) + cheb.eval_series(side_coeffs[v], yv))
        return out

    @property
    def corner_mask(self) -> np.ndarray:
        return np.array([c >= 0 for c in self.corner])


def interior_neumann(field, geom: Geometry) -> dict:
    return {side: normal_derivative(field, side, geom) for side in SIDES}


@dataclass(frozen=True)
class InfluenceSystem:
    """Assembled and factorized influence matrix plus the per-basis data it needs."""

    geom: Geometry
    collocation: CollocationSet
    matrix: np.ndarray
    U: np.ndarray
    singular_values: np.ndarray
    Vt: np.ndarray
    dropped: int
    traces: tuple
    generators: tuple
    exterior_neumann: tuple = field(repr=False)
    quad_tol: float = 1e-11
    correction: str = "pseudo-inverse"

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def gap(self, r=None) -> float:
        """Ratio of the smallest retained to the largest dropped singular value."""
        return _gap(self.singular_values, self.dropped if r is None else r)


def assemble(
    geom: Geometry,
    basis,
    solver: DirichletSolver | None = None,
    mode: str = "lobatto",
    dropped: int | None = None,
    gap_threshold: float = GAP_THRESHOLD,
    correction: str = "pseudo-inverse",
) -> InfluenceSystem:
    """Build the influence matrix from a complete exterior basis.

    ``dropped`` defaults to 4 in lobatto mode and 0 in gauss mode. A
    :class:`RankGapWarning` is issued when the singular-value gap at that rank
    is below ``gap_threshold``. If the default rank fails that check it is
    replaced by the number of singular values below ``NULL_TOL * s_max``;
    an explicitly requested rank is kept as given.
    """
    basis = list(basis)
    _check_basis(basis, geom)
    solver = solver or DirichletSolver(geom)
    colloc = CollocationSet.build(geom, mode)
    n = geom.n_boundary
    C = np.empty((n, n))
    zero = np.zeros((geom.K + 1, geom.L + 1))
    for j, entry in enumerate(basis):
        harmonic = solver.solve(zero, entry.trace)
        _check_dirichlet_match(harmonic, entry.trace, geom)
        inner = interior_neumann(harmonic, geom)
        mismatch = {s: entry.neumann[s] - inner[s] for s in SIDES}
        C[:, j] = colloc.sample(mismatch)
    if not np.all(np.isfinite(C)):
        raise SolverError("non-finite entry in the influence matrix")
    return factorize(
        geom, colloc, C, basis, dropped=dropped, gap_threshold=gap_threshold, correction=correction
    )


def null_count(singular_values, rel_tol=NULL_TOL) -> int:
    """Number of singular values below ``rel_tol`` times the largest."""
    s = np.asarray(singular_values)
    return int(np.sum(s < rel_tol * s[0])) if s.size else 0


def factorize(geom, colloc, C, basis, dropped=None, gap_threshold=GAP_THRESHOLD, correction="pseudo-inverse"):
    """SVD of an assembled matrix; see :func:`assemble` for the rank policy."""
    automatic = dropped is None
    if automatic:
        dropped = DEFAULT_DROPPED[colloc.mode]
    dropped = int(dropped)
    if not 0 <= dropped < C.shape[0]:
        raise ValueError(f"dropped rank must be in [0, {C.shape[0]}), got {dropped}")
    if correction not in ("pseudo-inverse", "unit"):
        raise ValueError(f"unknown correction {correction!r}")
    U, s, Vt = np.linalg.svd(C)
    if dropped and _gap(s, dropped) < gap_threshold:
        message = f"singular-value gap at dropped rank {dropped} is {_gap(s, dropped):.3g} (< {gap_threshold:g})"
        if automatic:
            dropped = null_count(s)
            message += f"; falling back to the detected null-space size {dropped}"
        else:
            message += "; keeping the requested rank"
        warnings.warn(message, RankGapWarning, stacklevel=3)
    sys = InfluenceSystem(
        geom=geom,
        collocation=colloc,
        matrix=C,
        U=U,
        singular_values=s,
        Vt=Vt,
        dropped=dropped,
        traces=tuple(e.trace for e in basis),
        generators=tuple(e.generator for e in basis),
        exterior_neumann=tuple(e.neumann for e in basis),
        quad_tol=basis[0].quad_tol if basis else 1e-11,
        correction=correction,
    )
    for a in (C, U, s, Vt):
        a.setflags(write=False)
    return sys


def _gap(s, r):
    if r <= 0 or r >= s.size:
        return np.inf
    return s[-r - 1] / max(s[-r], np.finfo(float).tiny)


def _check_basis(basis, geom):
    expected = [(side, k) for side in SIDES for k in range(side.degree(geom))]
    got = [(e.generator.side, e.generator.k) for e in basis]
    if got != expected:
        raise ValueError("basis must hold modes 0..K-1 on Bottom/Top and 0..L-1 on Left/Right, in order")


def _check_dirichlet_match(harmonic, trace, geom):
    got = cheb.to_values_2d(harmonic)
    want = boundary_grid_values(trace, geom)
    rim = np.ones_like(got, dtype=bool)
    rim[1:-1, 1:-1] = False
    gap = np.max(np.abs(got[rim] - want[rim]))
    if gap > MATCH_TOL * max(1.0, np.max(np.abs(want))):
        raise SolverError(f"interior harmonic field misses its Dirichlet trace by {gap:.3e}")


def regularized_solve(sys: InfluenceSystem, rhs) -> np.ndarray:
    """Coefficients ``c`` from the SVD with the smallest ``dropped`` directions removed.

    With the default pseudo-inverse correction those directions are
    annihilated; the ``"unit"`` correction replaces their singular values by 1.
    """
    rhs = check_finite(rhs, "rhs")
    if rhs.shape != (sys.size,):
        raise ValueError(f"rhs must have length {sys.size}, got shape {rhs.shape}")
    r = sys.dropped
    if r >= sys.size:
        raise ValueError("dropped rank must be smaller than the matrix dimension")
    s = sys.singular_values
    inv = np.zeros_like(s)
    keep = s.size - r
    inv[:keep] = 1.0 / s[:keep]
    if sys.correction == "unit":
        inv[keep:] = 1.0
    return sys.Vt.T @ (inv * (sys.U.T @ rhs))


def condition_number(sys: InfluenceSystem) -> float:
    """Largest over smallest retained singular value."""
    s = sys.singular_values
    return float(s[0] / s[s.size - sys.dropped - 1])


def combine_traces(sys: InfluenceSystem, c) -> BoundaryTrace:
    """Boundary data ``sum_j c_j trace_j``."""
    sides = {s: sum(cj * t[s] for cj, t in zip(c, sys.traces)) for s in SIDES}
    return BoundaryTrace.from_sides(sides, raw=True)


@dataclass(frozen=True)
class CoupledSolution:
    field: np.ndarray
    coefficients: np.ndarray
    particular: np.ndarray
    rhs: np.ndarray

    def neumann_residual(self, sys: InfluenceSystem) -> float:
        """Max Neumann mismatch at non-corner collocation points."""
        inner = sys.collocation.sample(interior_neumann(self.field, sys.geom))
        outer = sum(
            cj * sys.collocation.sample(nm) for cj, nm in zip(self.coefficients, sys.exterior_neumann)
        )
        mask = ~sys.collocation.corner_mask
        return float(np.max(np.abs(inner - outer)[mask]))


def solve_coupled(rho, sys: InfluenceSystem, solver: DirichletSolver | None = None) -> CoupledSolution:
    """Interior field of the coupled problem for source coefficients ``rho``."""
    geom = sys.geom
    rho = geom.check_field(rho, "rho")
    solver = solver or DirichletSolver(geom)
    particular = solver.solve(rho, BoundaryTrace.zeros(geom))
    rhs = sys.collocation.sample(interior_neumann(particular, geom))
    c = regularized_solve(sys, rhs)
    field = solver.solve(rho, combine_traces(sys, c))
    return CoupledSolution(field, c, particular, rhs)


def exterior_sample(c, generators, points, tol=1e-11):
    """Exterior potential ``sum_j c_j phi_j`` at points outside the closed rectangle."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    geom = generators[0].geom
    inside = (np.abs(pts[:, 0]) <= geom.H) & (np.abs(pts[:, 1]) <= 1.0)
    if np.any(inside):
        raise ValueError("exterior_sample needs points strictly outside the rectangle")
    total = np.zeros(len(pts))
    for cj, d in zip(c, generators):
        if cj != 0.0:
            total += cj * single_layer_value(d, pts, tol=tol)
    return total


def exterior_gradient(c, generators, points, tol=1e-11):
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    total = np.zeros((len(pts), 2))
    for cj, d in zip(c, generators):
        if cj != 0.0:
            total += cj * single_layer_gradient(d, pts, tol=tol)
    return total

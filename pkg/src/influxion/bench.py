"""Electrostatic benchmark: Gaussian-localized sources with closed-form potentials.

The source family is ``rho_m = r^m exp(-r^2 / delta^2) cos(m theta)`` and the
reference potentials solve ``Laplace(Phi) = rho_m`` in the whole plane.
Errors of a computed interior field are measured on a fixed uniform grid.
"""

from __future__ import annotations

import itertools
import math
import time
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import exp1

from . import cheb
from .exterior import build_basis
from .influence import assemble, condition_number, solve_coupled
from .interior import DirichletSolver, Geometry
from .validation import check_positive_int

EVAL_POINTS = 101
EXCLUSION = 1e-3
# below this value of r^2/delta^2 the m=2 bracket is summed as a series
_SERIES_CUTOFF = 0.1


@dataclass(frozen=True)
class SourceSpec:
    """Source ``r^m exp(-r^2/delta^2) cos(m (theta - rotation))``.

    ``rotation`` is in radians.
    """

    m: int = 0
    delta: float = 0.15
    rotation: float = 0.0

    def __post_init__(self):
        check_positive_int(self.m, "m", minimum=0)
        if self.m > 2:
            raise ValueError(f"m must be 0, 1 or 2 (analytic reference available), got {self.m}")
        if not (math.isfinite(self.delta) and self.delta > 0.0):
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not math.isfinite(self.rotation):
            raise ValueError("rotation must be finite")

    @classmethod
    def parse(cls, text: str) -> SourceSpec:
        """Parse ``"m=<int>,delta=<float>[,rot=<degrees>]"`` (``delta2=`` also accepted)."""
        fields = {}
        for part in text.split(","):
            if "=" not in part:
                raise ValueError(f"malformed source field {part!r}; expected key=value")
            key, value = (p.strip() for p in part.split("=", 1))
            fields[key] = value
        unknown = set(fields) - {"m", "delta", "delta2", "rot"}
        if unknown:
            raise ValueError(f"unknown source field(s): {', '.join(sorted(unknown))}")
        if "m" not in fields or ("delta" in fields) == ("delta2" in fields):
            raise ValueError("source needs m and exactly one of delta / delta2")
        delta = float(fields["delta"]) if "delta" in fields else math.sqrt(float(fields["delta2"]))
        return cls(int(fields["m"]), delta, math.radians(float(fields.get("rot", 0.0))))

    def density(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r2 = x**2 + y**2
        theta = np.arctan2(y, x) - self.rotation
        return r2 ** (self.m / 2) * np.exp(-r2 / self.delta**2) * np.cos(self.m * theta)


@dataclass(frozen=True)
class StudyRow:
    N: int
    E: float
    E_self: float | None
    cond: float
    seconds: float


def source_field(spec: SourceSpec, geom: Geometry) -> np.ndarray:
    """Chebyshev coefficients of the source sampled on the Lobatto grid."""
    X, Y = np.meshgrid(geom.x_nodes(), geom.y_nodes(), indexing="ij")
    return cheb.to_coeffs_2d(spec.density(X, Y))


def _m2_bracket(x):
    # (1 + x) exp(-x) - 1, accurate for small x
    out = np.empty_like(x)
    small = x < _SERIES_CUTOFF
    xs = x[small]
    # sum over n >= 2 of (1 - n) (-x)^n / n!
    term = 0.5 * xs**2
    total = -term
    for n in range(3, 16):
        term = term * (-xs) / n
        total = total + (1 - n) * term
    out[small] = total
    xl = x[~small]
    out[~small] = np.expm1(-xl) + xl * np.exp(-xl)
    return out


def analytic_reference(spec: SourceSpec, r, theta):
    """Free-space potential of the source at polar coordinates ``(r, theta)``.

    Finite at ``r = 0`` through the analytic limits.
    """
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float) - spec.rotation
    if np.any(r < 0):
        raise ValueError("r must be non-negative")
    d2 = spec.delta**2
    r, theta = np.broadcast_arrays(r, theta)
    out = np.zeros(r.shape)
    pos = r > 0
    rp, tp = r[pos], theta[pos]
    x = rp**2 / d2
    if spec.m == 0:
        out[pos] = 0.25 * d2 * (exp1(x) + 2.0 * np.log(rp))
        out[~pos] = 0.25 * d2 * (-np.euler_gamma + 2.0 * math.log(spec.delta))
    elif spec.m == 1:
        out[pos] = 0.25 * d2**2 / rp * np.expm1(-x) * np.cos(tp)
    else:
        out[pos] = 0.25 * d2**3 / rp**2 * _m2_bracket(x) * np.cos(2.0 * tp)
    return float(out) if out.ndim == 0 else out


def evaluation_grid(geom: Geometry, n: int = EVAL_POINTS):
    """Uniform ``n x n`` grid on the closed rectangle, as 1-D axes."""
    return np.linspace(-geom.H, geom.H, n), np.linspace(-1.0, 1.0, n)


def sample_field(field, geom: Geometry, n: int = EVAL_POINTS) -> np.ndarray:
    xs, ys = evaluation_grid(geom, n)
    return cheb.eval_grid_2d(field, xs / geom.H, ys)


def reference_grid(spec: SourceSpec, geom: Geometry, n: int = EVAL_POINTS) -> np.ndarray:
    xs, ys = evaluation_grid(geom, n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return analytic_reference(spec, np.hypot(X, Y), np.arctan2(Y, X))


def relative_error(field, spec: SourceSpec, geom: Geometry, exclusion: float = EXCLUSION, n: int = EVAL_POINTS) -> float:
    """Max of ``|ref - field| / |ref|`` over the evaluation grid.

    Points where ``|ref| < exclusion * max|ref|`` are skipped.
    """
    return grid_relative_error(sample_field(field, geom, n), reference_grid(spec, geom, n), exclusion)


def grid_relative_error(values, reference, exclusion: float = EXCLUSION) -> float:
    """Relative max error of sampled values against reference samples."""
    values = np.asarray(values, dtype=float)
    ref = np.asarray(reference, dtype=float)
    if values.shape != ref.shape:
        raise ValueError(f"shape mismatch {values.shape} vs {ref.shape}")
    keep = np.abs(ref) >= exclusion * np.max(np.abs(ref))
    if not np.any(keep):
        raise ValueError("every evaluation point was excluded; lower the exclusion threshold")
    return float(np.max(np.abs(values[keep] - ref[keep]) / np.abs(ref[keep])))


def angular_variation(field, geom: Geometry, radius: float, samples: int = 256) -> float:
    """``(max - min) / |mean|`` of the field on a circle around the origin."""
    t = np.linspace(0.0, 2.0 * np.pi, samples, endpoint=False)
    vals = cheb.eval_points_2d(field, radius * np.cos(t) / geom.H, radius * np.sin(t))
    return float((vals.max() - vals.min()) / abs(vals.mean()))


def build_system(geom: Geometry, mode="lobatto", tol=1e-11, workers=1, dropped=None):
    """Exterior basis plus factorized influence matrix for one geometry."""
    basis = build_basis(geom, tol, workers=workers)
    return assemble(geom, basis, mode=mode, dropped=dropped)


def convergence_study(spec: SourceSpec, n_list, H: float = 1.0, mode="lobatto", tol=1e-11, workers=1, systems=None):
    """One :class:`StudyRow` per resolution ``K = L = N``.

    ``E_self`` is the max grid difference to the final (largest) ``N``.
    ``systems`` may map ``N`` to a prebuilt influence system.
    """
    n_list = [check_positive_int(n, "N", minimum=2) for n in n_list]
    if not n_list:
        raise ValueError("empty N list")
    if any(b <= a for a, b in itertools.pairwise(n_list)):
        raise ValueError("N list must be strictly ascending")
    samples, rows = [], []
    for N in n_list:
        t0 = time.perf_counter()
        geom = Geometry(H, N, N)
        sys = (systems or {}).get(N) or build_system(geom, mode, tol, workers)
        sol = solve_coupled(source_field(spec, geom), sys, DirichletSolver(geom))
        seconds = time.perf_counter() - t0
        samples.append(sample_field(sol.field, geom))
        rows.append((N, relative_error(sol.field, spec, geom), condition_number(sys), seconds))
    final = samples[-1]
    out = []
    for (N, E, cond, seconds), grid in zip(rows, samples):
        e_self = float(np.max(np.abs(grid - final))) if len(n_list) > 1 else None
        out.append(StudyRow(N, E, e_self, cond, seconds))
    return out


@dataclass(frozen=True)
class ConditioningStudy:
    N: np.ndarray
    cond: np.ndarray
    smallest: np.ndarray  # five smallest singular values per N, ascending
    fit: tuple | None  # (a, b, c) of a N^2 + b N + c
    slope: float | None  # least-squares slope of log(cond) against log(N)


def conditioning_study(n_list, H: float = 1.0, mode="lobatto", tol=1e-11, workers=1, systems=None):
    """Condition numbers over ``K = L = N`` with a quadratic and a log-log fit.

    The fits need at least three resolutions; with fewer they are ``None``.
    """
    n_list = [check_positive_int(n, "N", minimum=2) for n in n_list]
    conds, smallest = [], []
    for N in n_list:
        geom = Geometry(H, N, N)
        sys = (systems or {}).get(N) or build_system(geom, mode, tol, workers)
        conds.append(condition_number(sys))
        s = np.sort(sys.singular_values)[:5]
        smallest.append(np.pad(s, (0, 5 - s.size), constant_values=np.nan))
    N = np.array(n_list, dtype=float)
    cond = np.array(conds)
    fit = slope = None
    if np.unique(N).size >= 3:
        fit = tuple(float(v) for v in np.polyfit(N, cond, 2))
        slope = float(np.polyfit(np.log(N), np.log(cond), 1)[0])
    else:
        warnings.warn("fewer than three resolutions; condition-number fit omitted", RuntimeWarning, stacklevel=2)
    return ConditioningStudy(N.astype(int), cond, np.array(smallest), fit, slope)

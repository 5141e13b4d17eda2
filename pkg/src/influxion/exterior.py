"""Exterior harmonic basis built from single-layer potentials on the sides.

A side of half-length ``a`` carries the density

    sigma_k(s) = A_k T_k(s / a) / (pi a sqrt(1 - (s / a)^2))

whose logarithmic potential equals ``T_k(s / a)`` on the side itself. The
potential and its normal derivative elsewhere on the boundary are computed
by quadrature after substituting ``s = a cos(theta)``, which turns
``sigma_k ds`` into ``(A_k / pi) cos(k theta) d theta`` and leaves at most a
logarithmic (or near-``1/r``) singularity where the evaluation point touches
the segment's end.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import cheb
from .interior import SIDES, BoundaryTrace, Geometry, Side
from .quadrature import DEFAULT_TOL, AdaptiveQuadrature, graded_panels
from .validation import DegenerateSegmentError, check_positive_int

# integrals are processed in chunks to bound memory
_CHUNK = 1500


def density_amplitude(k: int, a: float, degenerate: bool = False) -> float:
    """Amplitude ``A_k`` of the density reproducing ``T_k`` on a segment of half-length ``a``.

    For ``a == 2`` (segment length 4) the ``k = 0`` amplitude is undefined. With
    ``degenerate=True`` the bracketed constant of the general Carleman solution
    is set to 1 instead, giving ``A_0 = -2`` and a zero on-segment potential.
    """
    k = check_positive_int(k, "k", minimum=0)
    a = float(a)
    if not a > 0.0:
        raise ValueError(f"half-length must be positive, got {a}")
    if k > 0:
        return 2.0 * math.pi * k
    if a == 2.0:
        if degenerate:
            return -2.0
        raise DegenerateSegmentError(
            "segment of length 4 (If b-a=4): the k=0 density amplitude -2*pi/ln(a/2) "
            "is undefined; enable the degenerate-segment variant explicitly"
        )
    return -2.0 * math.pi / math.log(a / 2.0)


@dataclass(frozen=True)
class SideDensity:
    """Density ``sigma_k`` living on one side of the rectangle."""

    side: Side
    k: int
    geom: Geometry
    amplitude: float = field(init=False)

    def __post_init__(self):
        check_positive_int(self.k, "k", minimum=0)
        amp = density_amplitude(self.k, self.a, degenerate=self.geom.allow_degenerate)
        object.__setattr__(self, "amplitude", amp)

    @property
    def a(self) -> float:
        return self.side.half_length(self.geom)

    @property
    def on_segment_value(self) -> float:
        """Constant that multiplies ``T_k`` in the potential on the segment."""
        # -A_0 ln(a/2) / (2 pi) is exactly 1, or 0 for the degenerate width
        if self.k == 0 and self.a == 2.0:
            return 0.0
        return 1.0

    def local(self, points):
        """Coordinates ``(u, v)`` along and normal (outward) to the segment."""
        p = np.asarray(points, dtype=float) - self.side.center(self.geom)
        return p @ self.side.tangent(), p @ self.side.normal


def density_value(d: SideDensity, s):
    """``sigma_k(s)`` for arc coordinates strictly inside the segment."""
    s = np.asarray(s, dtype=float)
    xi = s / d.a
    if np.any(np.abs(xi) >= 1.0):
        raise ValueError("density is singular at and beyond the segment ends")
    val = d.amplitude * np.cos(d.k * np.arccos(xi)) / (math.pi * d.a * np.sqrt(1.0 - xi**2))
    return float(val) if val.ndim == 0 else val


def total_charge(d: SideDensity, tol=1e-12) -> float:
    """``int sigma_k ds`` over the segment by adaptive quadrature in ``theta``."""

    def f(i, th):
        s = d.a * np.cos(th)
        inside = np.abs(s) < d.a
        out = np.zeros_like(th)
        out[inside] = density_value(d, s[inside]) * d.a * np.sin(th[inside])
        return out

    quad = AdaptiveQuadrature(tol)
    val, _ = quad.integrate(f, np.zeros(1, dtype=np.intp), np.zeros(1), np.full(1, math.pi), 1)
    return float(val[0])


def _layer_integrals(kind, k, a, u, v, nu=None, nv=None, tol=DEFAULT_TOL, quad=None):
    """Integrals over ``theta in [0, pi]`` for a batch of (mode, point) pairs.

    ``kind == "value"``: ``int ln r(theta) cos(k theta)``.
    ``kind == "normal"``: ``int ((u - a cos) nu + v nv) / r^2 cos(k theta)``.
    ``tol`` is the absolute tolerance on these raw integrals.
    """
    k = np.asarray(k, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    count = u.size
    # theta -> pi - theta maps u -> -u and multiplies cos(k theta) by (-1)^k, so
    # every point is moved to u >= 0 where the nearer segment end is theta = 0,
    # which floating point represents exactly.
    flip = u < 0.0
    parity = np.where(flip & (k % 2 == 1), -1.0, 1.0)
    u = np.abs(u)
    if kind == "normal":
        nu = np.where(flip, -np.asarray(nu, float), np.asarray(nu, float))
        nv = np.broadcast_to(np.asarray(nv, float), (count,))
    quad = quad or AdaptiveQuadrature()
    out = np.empty(count)
    err = np.empty(count)
    for start in range(0, count, _CHUNK):
        sl = slice(start, min(start + _CHUNK, count))
        uk, vk, kk = u[sl], v[sl], k[sl]
        # distance to the segment decides whether panels are graded
        du = np.maximum(uk - a, 0.0)
        dist = np.hypot(du, vk)
        singular = np.where(dist < a, np.arccos(np.clip(uk / a, -1.0, 1.0)), np.nan)
        ids, lo, hi = graded_panels(singular)
        offset = uk - a

        if kind == "value":

            def f(i, th, vk=vk, kk=kk, offset=offset):
                dx = offset[i] + 2.0 * a * np.sin(0.5 * th) ** 2
                return 0.5 * np.log(dx * dx + vk[i] ** 2) * np.cos(kk[i] * th)

        else:
            nuk, nvk = nu[sl], nv[sl]

            def f(i, th, vk=vk, kk=kk, nuk=nuk, nvk=nvk, offset=offset):
                dx = offset[i] + 2.0 * a * np.sin(0.5 * th) ** 2
                return (dx * nuk[i] + vk[i] * nvk[i]) / (dx * dx + vk[i] ** 2) * np.cos(kk[i] * th)

        tol_k = np.broadcast_to(np.asarray(tol, float), (count,))[sl]
        out[sl], err[sl] = quad.integrate(f, ids, lo, hi, uk.size, tol=tol_k, span=math.pi)
    return parity * out, err


def _value_scale(d: SideDensity) -> float:
    return -d.amplitude / (2.0 * math.pi**2)


def single_layer_value(d: SideDensity, points, tol=DEFAULT_TOL):
    """Potential of ``d`` at plane points ``(..., 2)``.

    Points on the open generating segment use the analytic identity;
    everything else, including the segment ends, uses quadrature.
    """
    pts = np.asarray(points, dtype=float)
    shape = pts.shape[:-1]
    u, v = d.local(pts.reshape(-1, 2))
    out = np.empty(u.size)
    on = (v == 0.0) & (np.abs(u) < d.a)
    out[on] = d.on_segment_value * np.cos(d.k * np.arccos(u[on] / d.a))
    off = ~on
    if np.any(off):
        scale = _value_scale(d)
        vals, _ = _layer_integrals(
            "value", np.full(off.sum(), d.k), d.a, u[off], v[off], tol=tol / max(abs(scale), 1e-300)
        )
        out[off] = scale * vals
    return float(out[0]) if shape == () else out.reshape(shape)


def single_layer_gradient(d: SideDensity, points, tol=DEFAULT_TOL):
    """Gradient ``(..., 2)`` of the potential off the generating segment."""
    pts = np.asarray(points, dtype=float)
    shape = pts.shape[:-1]
    flat = pts.reshape(-1, 2)
    u, v = d.local(flat)
    if np.any((v == 0.0) & (np.abs(u) <= d.a)):
        raise ValueError("gradient is discontinuous on the generating segment")
    scale = _value_scale(d)
    t, n = d.side.tangent(), d.side.normal
    kk = np.full(u.size, d.k)
    g_u, _ = _layer_integrals("normal", kk, d.a, u, v, np.ones(u.size), np.zeros(u.size), tol=tol / abs(scale))
    g_v, _ = _layer_integrals("normal", kk, d.a, u, v, np.zeros(u.size), np.ones(u.size), tol=tol / abs(scale))
    grad = scale * (g_u[:, None] * t + g_v[:, None] * n)
    return grad.reshape(shape + (2,))


def single_layer_normal_derivative(d: SideDensity, side: Side, s, tol=DEFAULT_TOL):
    """Outward normal derivative on ``side`` at arc coordinates ``s``.

    On the generating side this is the exterior limit ``-sigma(s) / 2``.
    Corners are rejected: the derivative is unbounded there.
    """
    s = np.asarray(s, dtype=float)
    shape = s.shape
    s = s.reshape(-1)
    if np.any(np.abs(s) >= side.half_length(d.geom)):
        raise ValueError("normal derivative requested at a corner")
    if side is d.side:
        out = -0.5 * np.asarray(density_value(d, s))
    else:
        pts = side.points(d.geom, s)
        u, v = d.local(pts)
        n = side.normal
        nu = np.full(u.size, n @ d.side.tangent())
        nv = np.full(u.size, n @ d.side.normal)
        scale = _value_scale(d)
        vals, _ = _layer_integrals(
            "normal", np.full(u.size, d.k), d.a, u, v, nu, nv, tol=tol / abs(scale)
        )
        out = scale * vals
    out = np.asarray(out, dtype=float)
    return float(out[0]) if shape == () else out.reshape(shape)


@dataclass(frozen=True)
class ExteriorBasisEntry:
    """One exterior basis function: its generator, boundary trace and Neumann data."""

    generator: SideDensity
    trace: BoundaryTrace
    neumann: dict
    quad_tol: float


def neumann_nodes(side: Side, geom: Geometry) -> np.ndarray:
    """Arc coordinates of the Gauss samples used for a side's Neumann expansion."""
    n = side.degree(geom)
    return side.half_length(geom) * cheb.gauss_points(n + 1)


def build_basis(geom: Geometry, tol=DEFAULT_TOL, sides=SIDES, modes=None, workers=1):
    """All basis entries in the fixed order (Bottom, Top, Left, Right; ascending mode).

    ``modes`` optionally restricts the modes built per side (a dict side->iterable).
    Integrals for every mode of one generating side are batched together, and
    generating sides are processed by up to ``workers`` threads.
    """
    jobs = []
    for gen in sides:
        kmax = gen.degree(geom)
        ks = list(range(kmax)) if modes is None else list(modes.get(gen, ()))
        for k in ks:
            if not 0 <= k < kmax:
                raise ValueError(f"mode {k} out of range for {gen.name.lower()} (< {kmax})")
        if ks:
            jobs.append((gen, ks))
    workers = max(1, int(workers))
    if workers == 1 or len(jobs) < 2:
        chunks = [_build_side(gen, ks, geom, tol) for gen, ks in jobs]
    else:
        with ThreadPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            chunks = list(pool.map(lambda job: _build_side(job[0], job[1], geom, tol), jobs))
    return [entry for chunk in chunks for entry in chunk]


def _build_side(gen: Side, ks, geom: Geometry, tol):
    dens = [SideDensity(gen, k, geom) for k in ks]
    scales = np.array([_value_scale(d) for d in dens])
    traces = {k: {} for k in ks}
    neum = {k: {} for k in ks}
    for side in SIDES:
        deg = side.degree(geom)
        if side is gen:
            for d in dens:
                c = np.zeros(deg + 1)
                c[d.k] = d.on_segment_value
                traces[d.k][side] = c
                s = neumann_nodes(side, geom)
                neum[d.k][side] = cheb.interp_coeffs(s / side.half_length(geom), -0.5 * density_value(d, s), deg)
            continue
        a = gen.half_length(geom)
        # values at Lobatto nodes (corners included)
        s_val = side.half_length(geom) * cheb.lobatto_points(deg)
        u, v = dens[0].local(side.points(geom, s_val))
        m = s_val.size
        kk = np.repeat(np.array(ks), m)
        tol_raw = np.repeat(tol / np.abs(scales), m)
        vals, _ = _layer_integrals("value", kk, a, np.tile(u, len(ks)), np.tile(v, len(ks)), tol=tol_raw)
        vals = vals.reshape(len(ks), m) * scales[:, None]
        # normal derivatives at Gauss nodes
        s_n = neumann_nodes(side, geom)
        u, v = dens[0].local(side.points(geom, s_n))
        mn = s_n.size
        n = side.normal
        nu = np.full(mn * len(ks), n @ gen.tangent())
        nv = np.full(mn * len(ks), n @ gen.normal)
        dn, _ = _layer_integrals(
            "normal", np.repeat(np.array(ks), mn), a, np.tile(u, len(ks)), np.tile(v, len(ks)),
            nu, nv, tol=np.repeat(tol / np.abs(scales), mn),
        )
        dn = dn.reshape(len(ks), mn) * scales[:, None]
        xi_n = s_n / side.half_length(geom)
        for i, d in enumerate(dens):
            traces[d.k][side] = cheb.to_coeffs(vals[i])
            neum[d.k][side] = cheb.interp_coeffs(xi_n, dn[i], deg)
    return [ExteriorBasisEntry(d, BoundaryTrace.from_sides(traces[d.k]), neum[d.k], tol) for d in dens]


def build_basis_entry(side: Side, k: int, geom: Geometry, tol=DEFAULT_TOL) -> ExteriorBasisEntry:
    """Single basis entry; see :func:`build_basis`."""
    return build_basis(geom, tol, sides=(side,), modes={side: [k]})[0]

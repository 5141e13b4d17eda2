"""Batched adaptive quadrature for many independent 1-D integrals.

Each panel is integrated with an ``n``-point Gauss-Legendre rule and with the
same rule on its two halves; the difference is the error estimate. Panels
that fail the test are bisected, reusing the half-panel values. All panels of
one generation are evaluated in a single vectorized call, which is what makes
a few hundred thousand boundary integrals affordable in numpy.
"""

from __future__ import annotations

import numpy as np

from .validation import QuadratureError

DEFAULT_TOL = 1e-11
MAX_DEPTH = 40
GRADING_RATIO = 0.25
GRADING_LEVELS = 24


def _rule(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


class AdaptiveQuadrature:
    """Adaptive bisection integrator.

    Parameters
    ----------
    tol : float
        Absolute tolerance per integral. A panel is accepted when its error
        estimate is below its width share of ``tol``, or once the summed
        estimate over all panels of its integral is below ``tol``.
    order : int
        Gauss-Legendre points per panel.
    max_depth : int
        Bisection cap. Panels that reach it are accepted with their error
        estimate; integrals whose accumulated estimate then exceeds ``tol``
        raise :class:`QuadratureError` (or are only reported if ``strict`` is
        false).
    """

    def __init__(self, tol=DEFAULT_TOL, order=10, max_depth=MAX_DEPTH, strict=True):
        self.tol = float(tol)
        self.order = int(order)
        self.max_depth = int(max_depth)
        self.strict = strict
        self._x, self._w = _rule(self.order)

    def _estimate(self, func, ids, a, b):
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        theta = mid[:, None] + half[:, None] * self._x[None, :]
        vals = func(ids[:, None], theta)
        return half * (vals @ self._w), half * (np.abs(vals) @ self._w)

    def integrate(self, func, ids, a, b, count, tol=None, span=None):
        """Integrate ``func(ids, theta)`` over the given initial panels.

        ``ids[p]`` names the integral panel ``[a[p], b[p]]`` contributes to;
        ``count`` is the number of integrals. ``tol`` may be a scalar or a
        per-integral array; ``span`` is the per-integral total length used to
        share the tolerance between panels (defaults to the summed widths).

        Returns ``(values, error_estimates)``.
        """
        ids = np.asarray(ids, dtype=np.intp)
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        tol_i = np.broadcast_to(np.asarray(self.tol if tol is None else tol, float), (count,))
        if span is None:
            span = np.bincount(ids, weights=b - a, minlength=count)
        span = np.maximum(np.broadcast_to(np.asarray(span, float), (count,)), 1e-300)

        total = np.zeros(count)
        errs = np.zeros(count)
        capped = np.zeros(count, dtype=bool)
        whole, _ = self._estimate(func, ids, a, b)
        depth = 0
        while ids.size:
            mid = 0.5 * (a + b)
            # evaluate both halves in one call
            both, mag = self._estimate(
                func,
                np.concatenate([ids, ids]),
                np.concatenate([a, mid]),
                np.concatenate([mid, b]),
            )
            left, right = both[: ids.size], both[ids.size :]
            refined = left + right
            err = np.abs(refined - whole)
            allowed = tol_i[ids] * (b - a) / span[ids]
            # roundoff floor relative to the integral of |f| over the panel
            floor = 1e-13 * (mag[: ids.size] + mag[ids.size :])
            # an integral whose summed estimate already meets tol is finished
            pending = errs + np.bincount(ids, weights=err, minlength=count)
            done = (err <= allowed) | (err <= floor) | (pending[ids] <= tol_i[ids])
            broken = ~np.isfinite(err)
            if np.any(broken):
                raise QuadratureError(
                    f"non-finite integrand in {int(np.unique(ids[broken]).size)} integral(s)",
                    achieved=float("inf"),
                )
            if depth >= self.max_depth:
                capped[ids[~done]] = True
                done[:] = True
            np.add.at(total, ids[done], refined[done])
            np.add.at(errs, ids[done], err[done])
            keep = ~done
            ids = np.concatenate([ids[keep], ids[keep]])
            a, b = np.concatenate([a[keep], mid[keep]]), np.concatenate([mid[keep], b[keep]])
            whole = np.concatenate([left[keep], right[keep]])
            depth += 1
        bad = capped & (errs > tol_i)
        if self.strict and np.any(bad):
            worst = float(np.max(errs[bad]))
            raise QuadratureError(
                f"quadrature did not converge for {int(bad.sum())} integral(s) within "
                f"{self.max_depth} bisections; achieved error estimate {worst:.3e}",
                achieved=worst,
            )
        return total, errs


def graded_panels(singular, lo=0.0, hi=np.pi, ratio=GRADING_RATIO, levels=GRADING_LEVELS):
    """Initial panels on ``[lo, hi]`` for each integral, graded toward a point.

    ``singular[i]`` is the location of a (near-)singularity of integral ``i``
    or NaN for a smooth integrand. Breakpoints sit at geometric distances
    ``(hi - lo) * ratio**m`` on both sides of the singular point.

    Returns ``(ids, a, b)`` arrays.
    """
    singular = np.asarray(singular, dtype=float)
    width = hi - lo
    offsets = width * ratio ** np.arange(1, levels + 1)
    ids_out, a_out, b_out = [], [], []

    smooth = np.isnan(singular)
    idx = np.flatnonzero(smooth)
    ids_out.append(idx)
    a_out.append(np.full(idx.size, lo))
    b_out.append(np.full(idx.size, hi))

    idx = np.flatnonzero(~smooth)
    if idx.size:
        s = np.clip(singular[idx], lo, hi)
        pts = np.concatenate(
            [
                np.full((idx.size, 1), lo),
                s[:, None] - offsets[None, :],
                s[:, None],
                s[:, None] + offsets[None, :],
                np.full((idx.size, 1), hi),
            ],
            axis=1,
        )
        pts = np.clip(pts, lo, hi)
        pts.sort(axis=1)
        left, right = pts[:, :-1], pts[:, 1:]
        keep = right - left > 0.0
        rows = np.broadcast_to(idx[:, None], left.shape)
        ids_out.append(rows[keep])
        a_out.append(left[keep])
        b_out.append(right[keep])
    ids = np.concatenate(ids_out)
    order = np.argsort(ids, kind="stable")
    return ids[order], np.concatenate(a_out)[order], np.concatenate(b_out)[order]

"""Closed-form single-layer potentials used as an independent check of the quadrature.

With ``z = (u + iv) / a`` and ``w = z + sqrt(z - 1) sqrt(z + 1)`` the
potential of the weighted-Chebyshev density ``sigma_k`` is ``Re w^-k`` for
``k >= 1`` and ``c_0 + (Q / 2 pi) ln|w|``-type for ``k = 0``.
"""

import math

import numpy as np


def potential(d, points):
    u, v = d.local(np.asarray(points, float).reshape(-1, 2))
    z = (u + 1j * v) / d.a
    w = z + np.sqrt(z - 1) * np.sqrt(z + 1)
    if d.k == 0:
        return d.on_segment_value - d.amplitude / (2 * math.pi) * np.log(np.abs(w))
    return (w ** (-d.k)).real


def gradient(d, points):
    u, v = d.local(np.asarray(points, float).reshape(-1, 2))
    z = (u + 1j * v) / d.a
    root = np.sqrt(z - 1) * np.sqrt(z + 1)
    w = z + root
    if d.k == 0:
        dw = -d.amplitude / (2 * math.pi) / root
    else:
        dw = -d.k * w ** (-d.k) / root
    gu, gv = dw.real / d.a, -dw.imag / d.a
    return gu[:, None] * d.side.tangent() + gv[:, None] * d.side.normal

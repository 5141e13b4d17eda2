import math
import warnings

import numpy as np
import pytest
from oracles import gradient as exact_gradient
from oracles import potential as exact_potential
from scipy.integrate import quad

from influxion import cheb
from influxion.exterior import (
    SideDensity,
    build_basis,
    build_basis_entry,
    density_amplitude,
    density_value,
    single_layer_gradient,
    single_layer_normal_derivative,
    single_layer_value,
    total_charge,
)
from influxion.interior import SIDES, Geometry, Side
from influxion.validation import DegenerateSegmentError


def degenerate(H=2.0, K=8, L=8):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return Geometry(H, K, L, allow_degenerate=True)


def richardson_normal(d, points, normal, eps=1e-4):
    """Outward one-sided derivative at ``points`` from offsets eps and eps/2."""
    f0 = single_layer_value(d, points)
    d1 = (single_layer_value(d, points + eps * normal) - f0) / eps
    d2 = (single_layer_value(d, points + 0.5 * eps * normal) - f0) / (0.5 * eps)
    return 2 * d2 - d1


class TestAmplitude:
    def test_examples(self):
        assert density_amplitude(1, 1.0) == pytest.approx(2 * math.pi)
        assert density_amplitude(0, 1.0) == pytest.approx(9.0647202836543, rel=1e-12)
        assert density_amplitude(3, 2.0) == pytest.approx(6 * math.pi)

    def test_degenerate_segment(self):
        with pytest.raises(DegenerateSegmentError, match="If b-a=4"):
            density_amplitude(0, 2.0)
        assert density_amplitude(0, 2.0, degenerate=True) == -2.0

    def test_invalid(self):
        with pytest.raises(ValueError):
            density_amplitude(1, 0.0)
        with pytest.raises(ValueError):
            density_amplitude(-1, 1.0)


class TestDensity:
    def test_values(self):
        g = Geometry(1.0, 4, 4)
        assert density_value(SideDensity(Side.LEFT, 1, g), 0.5) == pytest.approx(1.1547005383792517, rel=1e-14)
        assert density_value(SideDensity(Side.LEFT, 1, g), 0.0) == pytest.approx(0.0, abs=1e-15)
        assert density_value(SideDensity(Side.LEFT, 0, g), 0.0) == pytest.approx(2.88539008177793, rel=1e-13)

    def test_endpoint_rejected(self):
        d = SideDensity(Side.LEFT, 2, Geometry(1.0, 4, 4))
        with pytest.raises(ValueError):
            density_value(d, 1.0)
        with pytest.raises(ValueError):
            density_value(d, [-0.2, -1.5])

    @pytest.mark.parametrize("k", [1, 2, 5])
    def test_scaling(self, k):
        H = 3.0
        s = np.linspace(-2.9, 2.9, 11)
        wide = SideDensity(Side.BOTTOM, k, Geometry(H, 6, 6))
        unit = SideDensity(Side.LEFT, k, Geometry(H, 6, 6))
        np.testing.assert_allclose(density_value(wide, s), density_value(unit, s / H) / H, rtol=1e-14)

    @pytest.mark.parametrize("a", [1.0, 1.5, 3.0])
    @pytest.mark.parametrize("k", range(6))
    def test_net_charge(self, a, k):
        d = SideDensity(Side.BOTTOM, k, Geometry(a, 6, 6))
        expected = -2 * math.pi / math.log(a / 2) if k == 0 else 0.0
        assert total_charge(d) == pytest.approx(expected, abs=1e-10)
        # independent route: algebraic-weight quadrature in the arc coordinate
        ref, _ = quad(
            lambda s: d.amplitude * math.cos(k * math.acos(s / a)) / (math.pi * a),
            -a, a, weight="alg", wvar=(-0.5, -0.5), epsabs=1e-13, epsrel=1e-13,
        )
        assert ref * math.sqrt(a * a) == pytest.approx(expected, abs=1e-10)


@pytest.fixture(scope="module")
def probes():
    rng = np.random.default_rng(7)
    far = rng.uniform(-4, 4, (40, 2))
    near_end = np.array([[1.0, -1.0], [-1.0, -1.0], [1.0 + 1e-3, -1.0], [1.0, -1.0 + 1e-4], [0.3, -1.0 + 1e-7]])
    walls = np.array([[1.0, y] for y in np.linspace(-1, 1, 9)] + [[x, 1.0] for x in np.linspace(-1, 1, 9)])
    return np.vstack([far, near_end, walls])


class TestPotential:
    @pytest.mark.parametrize("k", [0, 1, 2, 5, 11])
    @pytest.mark.parametrize("H", [1.0, 1.5, 3.0])
    def test_against_closed_form(self, k, H, probes):
        g = Geometry(H, 12, 12)
        d = SideDensity(Side.BOTTOM, k, g)
        pts = probes * [H, 1.0]
        np.testing.assert_allclose(single_layer_value(d, pts), exact_potential(d, pts), atol=1e-10)

    def test_on_segment(self):
        d = SideDensity(Side.BOTTOM, 4, degenerate())
        assert single_layer_value(d, np.array([0.3, -1.0])) == cheb.eval_series([0, 0, 0, 0, 1], 0.15)

    def test_far_field(self):
        g = Geometry(1.0, 4, 4)
        d0 = SideDensity(Side.LEFT, 0, g)
        p = np.array([1e6 - 1.0, 0.0])  # |p - center| = 1e6
        assert single_layer_value(d0, p) == pytest.approx(math.log(1e6) / math.log(0.5), abs=1e-5)
        for k in (1, 2, 3):
            assert abs(single_layer_value(SideDensity(Side.LEFT, k, g), p)) <= 1e-4

    def test_continuity_across_segment(self):
        g = Geometry(1.0, 12, 12)
        s = np.linspace(-0.9, 0.9, 7)
        for k in (0, 1, 4, 11):
            d = SideDensity(Side.TOP, k, g)
            pts = Side.TOP.points(g, s)
            for offset in (1e-6, -1e-6):
                got = single_layer_value(d, pts + [0.0, offset])
                assert np.max(np.abs(got - np.cos(k * np.arccos(s)) * d.on_segment_value)) <= 1e-4

    def test_harmonic(self):
        g = Geometry(1.5, 8, 8)
        rng = np.random.default_rng(11)
        pts = []
        while len(pts) < 20:
            p = rng.uniform(-4, 4, 2)
            if max(abs(p[0]) - 1.5, abs(p[1]) - 1.0) >= 0.1 or max(abs(p[0]) - 1.5, abs(p[1]) - 1.0) <= -0.1:
                pts.append(p)
        pts = np.array(pts)
        h = 1e-3
        for side in SIDES:
            for k in (0, 3):
                d = SideDensity(side, k, g)
                f = lambda q, d=d: single_layer_value(d, q)
                lap = (f(pts + [h, 0]) + f(pts - [h, 0]) + f(pts + [0, h]) + f(pts - [0, h]) - 4 * f(pts)) / h**2
                assert np.max(np.abs(lap)) <= 1e-4

    def test_gradient_against_closed_form(self, probes):
        g = Geometry(1.5, 8, 8)
        pts = probes[:40] * [1.5, 1.0]
        for k in (0, 2, 7):
            d = SideDensity(Side.RIGHT, k, g)
            np.testing.assert_allclose(single_layer_gradient(d, pts), exact_gradient(d, pts), atol=1e-9)

    def test_gradient_rejects_segment(self):
        d = SideDensity(Side.BOTTOM, 1, Geometry())
        with pytest.raises(ValueError):
            single_layer_gradient(d, np.array([0.2, -1.0]))


class TestNormalDerivative:
    def test_generating_side(self):
        g = Geometry(1.0, 4, 4)
        d = SideDensity(Side.LEFT, 1, g)
        val = single_layer_normal_derivative(d, Side.LEFT, 0.5)
        assert val == pytest.approx(-0.5773502691896258, rel=1e-13)
        fd = richardson_normal(d, Side.LEFT.points(g, np.array([0.5])), Side.LEFT.normal)
        assert fd[0] == pytest.approx(val, abs=1e-5)

    def test_opposite_side_vs_finite_difference(self):
        g = Geometry(1.0, 8, 8)
        d = SideDensity(Side.BOTTOM, 0, g)
        s = np.linspace(-0.7, 0.7, 5)
        h = 1e-4
        pts = Side.TOP.points(g, s)
        fd = (single_layer_value(d, pts + [0, h]) - single_layer_value(d, pts - [0, h])) / (2 * h)
        np.testing.assert_allclose(single_layer_normal_derivative(d, Side.TOP, s), fd, atol=1e-6)

    @pytest.mark.parametrize("k", [0, 2, 4])
    def test_mirror_symmetry(self, k):
        g = Geometry(1.5, 8, 8)
        d = SideDensity(Side.BOTTOM, k, g)
        s = np.linspace(-0.95, 0.95, 6)
        left = single_layer_normal_derivative(d, Side.LEFT, s)
        right = single_layer_normal_derivative(d, Side.RIGHT, s)
        np.testing.assert_allclose(left, right, atol=1e-10)

    def test_corner_rejected(self):
        d = SideDensity(Side.BOTTOM, 0, Geometry())
        with pytest.raises(ValueError, match="corner"):
            single_layer_normal_derivative(d, Side.LEFT, -1.0)

    @pytest.mark.parametrize("k", [0, 1, 3])
    def test_jump_relation(self, k):
        g = Geometry(1.0, 8, 8)
        d = SideDensity(Side.BOTTOM, k, g)
        s = np.array([-0.6, -0.1, 0.35, 0.7])
        pts = Side.BOTTOM.points(g, s)
        outside = richardson_normal(d, pts, Side.BOTTOM.normal)
        inside = -richardson_normal(d, pts, -Side.BOTTOM.normal)
        np.testing.assert_allclose(outside - inside, -density_value(d, s), atol=1e-5)


class TestBasis:
    def test_generating_trace_is_exact(self):
        g = Geometry(1.0, 12, 12)
        for e in build_basis(g):
            gen = e.generator
            expected = np.zeros(gen.side.degree(g) + 1)
            expected[gen.k] = 1.0
            assert np.array_equal(e.trace[gen.side], expected)

    def test_bottom_constant_mode(self):
        g = Geometry(1.0, 8, 8)
        e = build_basis_entry(Side.BOTTOM, 0, g)
        assert np.array_equal(e.trace[Side.BOTTOM], [1.0] + [0.0] * 8)
        for side in (Side.TOP, Side.LEFT, Side.RIGHT):
            s = np.linspace(-1, 1, 21) * side.half_length(g)
            got = cheb.eval_series(e.trace[side], s / side.half_length(g))
            # trace expansions interpolate the smooth potential, so compare at the nodes
            nodes = side.half_length(g) * cheb.lobatto_points(8)
            np.testing.assert_allclose(
                cheb.eval_series(e.trace[side], nodes / side.half_length(g)),
                exact_potential(e.generator, side.points(g, nodes)),
                atol=1e-9,
            )
            assert np.all(np.isfinite(got))

    def test_degenerate_width(self):
        e = build_basis_entry(Side.BOTTOM, 2, degenerate())
        assert np.array_equal(e.trace[Side.BOTTOM], [0, 0, 1, 0, 0, 0, 0, 0, 0])

    def test_square_swap_symmetry(self):
        g = Geometry(1.0, 8, 8)
        left = build_basis_entry(Side.LEFT, 1, g)
        bottom = build_basis_entry(Side.BOTTOM, 1, g)
        swap = {Side.BOTTOM: Side.LEFT, Side.LEFT: Side.BOTTOM, Side.TOP: Side.RIGHT, Side.RIGHT: Side.TOP}
        for side in SIDES:
            np.testing.assert_allclose(left.trace[swap[side]], bottom.trace[side], atol=1e-12)
            np.testing.assert_allclose(left.neumann[swap[side]], bottom.neumann[side], atol=1e-10)

    def test_neumann_expansion_interpolates_samples(self):
        g = Geometry(1.5, 10, 8)
        e = build_basis_entry(Side.TOP, 3, g)
        for side in (Side.BOTTOM, Side.LEFT):
            n = side.degree(g)
            s = side.half_length(g) * cheb.gauss_points(n + 1)
            exact = exact_gradient(e.generator, side.points(g, s)) @ side.normal
            np.testing.assert_allclose(cheb.eval_series(e.neumann[side], s / side.half_length(g)), exact, atol=1e-9)

    def test_mode_out_of_range(self):
        with pytest.raises(ValueError):
            build_basis_entry(Side.LEFT, 8, Geometry(1.0, 8, 8))

    def test_parallel_build_identical(self):
        g = Geometry(1.2, 6, 6)
        a, b = build_basis(g), build_basis(g, workers=4)
        for x, y in zip(a, b):
            for side in SIDES:
                assert np.array_equal(x.trace[side], y.trace[side])
                assert np.array_equal(x.neumann[side], y.neumann[side])

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from influxion import cheb

finite = st.floats(-1e3, 1e3, allow_nan=False)


def direct_series(c, x):
    return np.cos(np.outer(np.arccos(x), np.arange(len(c)))) @ c


class TestNodes:
    def test_lobatto_small(self):
        assert np.array_equal(cheb.lobatto_points(1), [1.0, -1.0])
        assert np.array_equal(cheb.lobatto_points(2), [1.0, 0.0, -1.0])

    def test_lobatto_symmetric_with_zero(self):
        x = cheb.lobatto_points(4)
        assert x[2] == 0.0
        assert np.array_equal(x, -x[::-1])
        assert np.all(np.diff(x) < 0)

    def test_gauss(self):
        assert np.array_equal(cheb.gauss_points(1), [0.0])
        np.testing.assert_allclose(cheb.gauss_points(2), [np.sqrt(0.5), -np.sqrt(0.5)], rtol=1e-15)
        assert cheb.gauss_points(3)[1] == 0.0
        x = cheb.gauss_points(7)
        assert np.all(np.abs(x) < 1) and np.array_equal(x, -x[::-1])

    @pytest.mark.parametrize("fn", [cheb.lobatto_points, cheb.gauss_points])
    def test_rejects_zero(self, fn):
        with pytest.raises(ValueError):
            fn(0)


class TestTransforms:
    def test_x_squared(self):
        np.testing.assert_allclose(cheb.to_coeffs(cheb.lobatto_points(2) ** 2), [0.5, 0, 0.5], atol=1e-15)

    def test_constant(self):
        c = cheb.to_coeffs(np.full(6, 3.25))
        np.testing.assert_allclose(c, [3.25, 0, 0, 0, 0, 0], atol=1e-14)

    def test_random_polynomial_round_trip(self):
        rng = np.random.default_rng(0)
        c = rng.standard_normal(9)
        v = direct_series(c, cheb.lobatto_points(8))
        np.testing.assert_allclose(cheb.to_coeffs(v), c, atol=1e-13)
        np.testing.assert_allclose(cheb.to_values(cheb.to_coeffs(v)), v, atol=1e-13)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            cheb.to_coeffs([])

    def test_2d_round_trip(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((7, 5))
        np.testing.assert_allclose(cheb.to_coeffs_2d(cheb.to_values_2d(a)), a, atol=1e-13)

    def test_interp_gauss_nodes(self):
        c = np.array([0.3, -1.0, 0.25, 2.0])
        x = cheb.gauss_points(4)
        np.testing.assert_allclose(cheb.interp_coeffs(x, direct_series(c, x), 3), c, atol=1e-14)


class TestEvaluation:
    def test_t3(self):
        assert cheb.eval_series([0, 0, 0, 1], 0.5) == pytest.approx(-1.0, abs=1e-15)

    def test_identity(self):
        x = np.linspace(-1, 1, 5)
        np.testing.assert_allclose(cheb.eval_series([0, 1], x), x)

    def test_against_trigonometric_sum(self):
        rng = np.random.default_rng(2)
        c = rng.standard_normal(11)
        x = rng.uniform(-1, 1, 20)
        np.testing.assert_allclose(cheb.eval_series(c, x), direct_series(c, x), atol=1e-13)

    def test_outside_rejected(self):
        cheb.eval_series([1.0, 2.0], 1.0 + 5e-13)
        with pytest.raises(ValueError):
            cheb.eval_series([1.0, 2.0], 1.01)


class TestDerivative:
    def test_t2(self):
        np.testing.assert_allclose(cheb.diff_coeffs([0, 0, 1]), [0, 4, 0])

    def test_constant(self):
        np.testing.assert_array_equal(cheb.diff_coeffs([5.0]), [0.0])
        np.testing.assert_array_equal(cheb.diff_coeffs([5.0, 0, 0]), [0.0, 0.0, 0.0])

    def test_against_finite_differences(self):
        rng = np.random.default_rng(3)
        c = rng.standard_normal(13)
        scale = 2.5
        s = np.linspace(-2.0, 2.0, 9)
        h = 1e-6
        fd = (cheb.eval_series(c, (s + h) / scale) - cheb.eval_series(c, (s - h) / scale)) / (2 * h)
        exact = cheb.eval_series(cheb.diff_coeffs(c, scale), s / scale)
        assert np.max(np.abs(fd - exact) / np.max(np.abs(exact))) < 1e-7

    def test_matches_differentiation_matrix(self):
        rng = np.random.default_rng(4)
        c = rng.standard_normal(10)
        D = cheb.lobatto_diff_matrix(9)
        np.testing.assert_allclose(D @ cheb.to_values(c), cheb.to_values(cheb.diff_coeffs(c)), atol=1e-11)


@settings(max_examples=60, deadline=None)
@given(arrays(float, st.integers(2, 40), elements=finite))
def test_round_trip_property(v):
    back = cheb.to_values(cheb.to_coeffs(v))
    assert np.allclose(back, v, rtol=1e-13, atol=1e-13 * max(1.0, np.max(np.abs(v))))


@settings(max_examples=60, deadline=None)
@given(arrays(float, st.integers(1, 20), elements=finite), st.integers(0, 3))
def test_polynomial_exactness(c, extra):
    n = c.size - 1 + extra
    v = direct_series(c, cheb.lobatto_points(max(n, 1)))
    got = cheb.to_coeffs(v)
    padded = np.zeros(got.size)
    padded[: c.size] = c
    assert np.allclose(got, padded, atol=1e-12 * max(1.0, np.max(np.abs(c))))


@settings(max_examples=60, deadline=None)
@given(arrays(float, st.integers(1, 16), elements=finite), st.booleans())
def test_parity(half, odd):
    n = 2 * half.size
    x = cheb.lobatto_points(n)
    base = np.concatenate([half, [0.0 if odd else 1.0], (-1 if odd else 1) * half[::-1]])
    c = cheb.to_coeffs(base)
    wrong = c[0::2] if odd else c[1::2]
    assert np.all(np.abs(wrong) <= 1e-14 * max(1.0, np.max(np.abs(base))))
    assert x.size == base.size


@settings(max_examples=40, deadline=None)
@given(arrays(float, st.integers(1, 65), elements=st.floats(-1, 1)), st.floats(-1, 1))
def test_clenshaw_property(c, x):
    assert abs(cheb.eval_series(c, x) - direct_series(c, np.array([x]))[0]) <= 1e-13 * max(1.0, np.sum(np.abs(c)))

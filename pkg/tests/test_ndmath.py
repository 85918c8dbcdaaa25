import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ndnet.ndmath import matvec, sigmoid, softplus

from conftest import central_diff


class TestSoftplus:
    def test_zero_is_log_two(self):
        assert softplus(0.0) == pytest.approx(math.log(2.0), abs=1e-15)

    def test_large_positive_asymptote(self):
        # softplus(x) = x + softplus(-x), and softplus(-50) ~ e^-50
        assert abs(softplus(50.0) - 50.0) < 1e-12
        assert softplus(50.0) >= 50.0

    def test_large_negative_small_argument_expansion(self):
        assert softplus(-50.0) == pytest.approx(math.exp(-50.0), rel=1e-10)

    def test_no_overflow_across_float64_range(self):
        x = np.array([-1e308, -750.0, 0.0, 750.0, 1e308])
        out = softplus(x)
        assert np.isfinite(out).all()
        assert (out >= 0).all()
        # strictly positive wherever e^x is representable at all
        assert (softplus(np.array([-745.0, -100.0, 100.0])) > 0).all()

    @given(st.floats(min_value=-700, max_value=30))
    def test_dominates_relu(self, x):
        # strict domination; above x ~ 34 the e^-x excess drops below one
        # ulp of x, so the strict property is only resolvable down here
        assert softplus(x) > max(0.0, x)

    @given(st.floats(min_value=30, max_value=700))
    def test_dominates_relu_saturated(self, x):
        assert softplus(x) >= x

    def test_derivative_matches_sigmoid(self, rng):
        xs = np.concatenate([rng.uniform(-30, 30, 50), [0.0, -5.0, 5.0]])
        for x in xs:
            fd = central_diff(lambda t: float(softplus(t)), x, h=1e-6)
            assert fd == pytest.approx(float(sigmoid(x)), rel=1e-6, abs=1e-9)

    def test_array_broadcast(self):
        out = softplus(np.array([[0.0, 1.0], [-1.0, 2.0]]))
        assert out.shape == (2, 2)


class TestSigmoid:
    def test_zero_is_half(self):
        assert sigmoid(0.0) == 0.5

    def test_saturation(self):
        assert abs(sigmoid(40.0) - (1.0 - math.exp(-40.0))) < 1e-15

    @given(st.floats(min_value=-1e6, max_value=1e6))
    def test_complement_identity(self, x):
        assert float(sigmoid(x)) + float(sigmoid(-x)) == pytest.approx(
            1.0, abs=2.3e-16)

    def test_strictly_increasing(self, rng):
        # |x| <= 30 keeps adjacent values more than one ulp of 1.0 apart
        xs = np.sort(rng.uniform(-30, 30, 200))
        out = sigmoid(xs)
        assert (np.diff(out) > 0).all()

    def test_range_and_finiteness(self):
        out = sigmoid(np.array([-1e308, 0.0, 1e308]))
        assert np.isfinite(out).all()
        assert (out >= 0).all() and (out <= 1).all()


class TestMatvec:
    def test_identity(self):
        v = np.array([1.0, 2.0, 3.0])
        assert np.array_equal(matvec(np.eye(3), v), v)

    def test_zero_matrix_annihilates(self, rng):
        v = rng.normal(size=4)
        assert np.array_equal(matvec(np.zeros((3, 4)), v), np.zeros(3))

    def test_hand_evaluated_product(self):
        # [[1,2],[3,4]] @ (1,1): row sums 1+2=3 and 3+4=7
        out = matvec([[1.0, 2.0], [3.0, 4.0]], [1.0, 1.0])
        assert np.array_equal(out, [3.0, 7.0])

    def test_dimension_mismatch_raises(self):
        with pytest.raises(ValueError, match="mismatch"):
            matvec(np.ones((2, 3)), np.ones(2))
        with pytest.raises(ValueError):
            matvec(np.ones(3), np.ones(3))

    def test_linearity(self, rng):
        for _ in range(20):
            m = rng.normal(size=(4, 5))
            u, v = rng.normal(size=5), rng.normal(size=5)
            a, b = rng.normal(), rng.normal()
            lhs = matvec(m, a * u + b * v)
            rhs = a * matvec(m, u) + b * matvec(m, v)
            np.testing.assert_allclose(lhs, rhs, atol=1e-12)

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq, minimize

from olc_sim.costs import CostError, CostFunction, QuadraticCost, load_response, phi_derivative, phi_term

alphas = st.floats(0.05, 50.0)
nus = st.floats(-1e6, 1e6, allow_nan=False)


@st.composite
def quadratics(draw):
    lo = draw(st.floats(-5.0, 0.0))
    hi = draw(st.floats(0.0, 5.0))
    return QuadraticCost(draw(alphas), lo, hi)


class TestLoadResponse:
    def test_interior(self):
        cost = QuadraticCost(1.0, -10.0, 10.0)
        root = brentq(lambda d: cost.marginal(d) - 0.25, -10.0, 10.0, xtol=1e-15)
        assert load_response(cost, 0.25) == pytest.approx(root, abs=1e-12)
        assert load_response(cost, 0.25) == 0.25

    def test_zero(self):
        assert load_response(QuadraticCost(1.0, -10.0, 10.0), 0.0) == 0.0

    def test_upper_clip(self):
        assert load_response(QuadraticCost(1.0, -0.1, 0.1), 5.0) == 0.1

    def test_vectorized(self):
        cost = QuadraticCost(2.0, -1.0, 0.5)
        assert load_response(cost, np.array([-1.0, 0.1, 1.0])).tolist() == [-1.0, 0.2, 0.5]

    @given(quadratics(), nus, nus)
    def test_monotone_and_bounded(self, cost, a, b):
        lo, hi = sorted((a, b))
        da, db = load_response(cost, lo), load_response(cost, hi)
        assert cost.d_min <= da <= db <= cost.d_max

    @given(alphas, st.floats(-1.0, 1.0))
    def test_unclipped_linear(self, alpha, nu):
        bound = 2.0 * alpha
        assert load_response(QuadraticCost(alpha, -bound, bound), nu) == alpha * nu


class TestPhi:
    def test_value(self):
        cost = QuadraticCost(1.0, -10.0, 10.0)
        assert phi_term(cost, 1.0, 1.0, 0.25) == pytest.approx(0.1875, abs=1e-15)

    def test_value_matches_inner_minimization(self):
        cost = QuadraticCost(1.0, -10.0, 10.0)
        D, P_m, nu = 1.0, 1.0, 0.25

        def lagrangian(x):
            d, d_hat = x
            return cost(d) - nu * d + d_hat**2 / (2 * D) - nu * d_hat + nu * P_m

        res = minimize(lagrangian, x0=[0.0, 0.0], bounds=[(-10, 10), (None, None)], tol=1e-14)
        assert phi_term(cost, D, P_m, nu) == pytest.approx(res.fun, abs=1e-10)

    def test_zero_frequency(self):
        assert phi_term(QuadraticCost(3.0, -1.0, 1.0), 2.0, 5.0, 0.0) == 0.0

    def test_derivative_value(self):
        cost = QuadraticCost(1.0, -10.0, 10.0)
        assert phi_derivative(cost, 1.0, 1.0, 0.25) == 0.5
        assert phi_derivative(cost, 1.0, 0.0, 0.0) == 0.0

    @given(quadratics(), st.floats(0.1, 5.0), st.floats(-3, 3), st.floats(-2, 2), st.floats(-2, 2))
    def test_concave(self, cost, D, P_m, a, b):
        mid = phi_term(cost, D, P_m, 0.5 * (a + b))
        assert mid >= 0.5 * (phi_term(cost, D, P_m, a) + phi_term(cost, D, P_m, b)) - 1e-9

    @given(quadratics(), st.floats(0.1, 5.0), st.floats(-3, 3), st.floats(-2, 2), st.floats(1e-6, 2))
    def test_derivative_strictly_decreasing(self, cost, D, P_m, nu, gap):
        assert phi_derivative(cost, D, P_m, nu) > phi_derivative(cost, D, P_m, nu + gap)

    @given(st.floats(0.2, 5.0), st.floats(0.1, 5.0), st.floats(-3, 3), st.floats(-0.5, 0.5))
    def test_derivative_matches_finite_difference(self, alpha, D, P_m, nu):
        cost = QuadraticCost(alpha, -1.0, 1.5)
        h = 1e-5
        inner = cost.d_min + 1e-3 < alpha * nu < cost.d_max - 1e-3
        if not (inner and cost.d_min < alpha * (nu - h) and alpha * (nu + h) < cost.d_max):
            return
        fd = (phi_term(cost, D, P_m, nu + h) - phi_term(cost, D, P_m, nu - h)) / (2 * h)
        assert abs(phi_derivative(cost, D, P_m, nu) - fd) <= 1e-6

    def test_one_sided_derivatives_at_clip_corner(self):
        cost = QuadraticCost(1.0, -0.1, 0.1)
        D, P_m, nu, h = 1.0, 0.3, 0.1, 1e-6
        left = (phi_term(cost, D, P_m, nu) - phi_term(cost, D, P_m, nu - h)) / h
        right = (phi_term(cost, D, P_m, nu + h) - phi_term(cost, D, P_m, nu)) / h
        expected = phi_derivative(cost, D, P_m, nu)
        assert left == pytest.approx(expected, abs=1e-5)
        assert right == pytest.approx(expected, abs=1e-5)


class TestCustomCost:
    def make(self):
        # c(d) = exp(d) - d on [-1, 2]: c' = exp(d) - 1, inverse log(1 + y)
        return CostFunction(lambda d: np.exp(d) - d, lambda d: np.exp(d) - 1.0,
                            lambda y: np.log1p(y), -1.0, 2.0)

    def test_response_and_clipping(self):
        cost = self.make()
        assert cost.response(0.0) == pytest.approx(0.0, abs=1e-15)
        assert cost.response(np.e - 1.0) == pytest.approx(1.0)
        assert cost.response(1e6) == 2.0
        assert cost.response(-1e6) == -1.0

    def test_phi_derivative_fd(self):
        cost = self.make()
        fd = (phi_term(cost, 1.0, 0.2, 0.3 + 1e-5) - phi_term(cost, 1.0, 0.2, 0.3 - 1e-5)) / 2e-5
        assert phi_derivative(cost, 1.0, 0.2, 0.3) == pytest.approx(fd, abs=1e-6)

    def test_rejects_nonconvex(self):
        with pytest.raises(CostError):
            CostFunction(np.sin, np.cos, np.arccos, 0.0, 3.0)

    def test_rejects_bad_bounds(self):
        with pytest.raises(CostError):
            QuadraticCost(1.0, 1.0, -1.0)
        with pytest.raises(CostError):
            QuadraticCost(0.0, -1.0, 1.0)

    def test_degenerate_interval(self):
        cost = QuadraticCost(100.0, 0.0, 0.0)
        assert load_response(cost, 3.0) == 0.0

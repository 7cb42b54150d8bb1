"""Finite-difference, forward-ODE, and analytic sensitivity routes."""

import numpy as np
import pytest

import identikit as ik


def interior_points(space, count, seed, inset=0.05):
    rng = np.random.default_rng(seed)
    span = space.upper - space.lower
    pts = []
    while len(pts) < count:
        theta = space.lower + (inset + (1 - 2 * inset) * rng.random(space.dimension)) * span
        if space.contains(theta):
            pts.append(theta)
    return pts


class TestFdJacobian:
    def test_reciprocal_derivative(self):
        model = ik.get_model("reciprocal")
        design = ik.Design(np.array([1.0]), 0.1)
        fd = ik.fd_jacobian(model, design, [2.0])
        assert abs(fd.values[0, 0] - (-0.25)) < 1e-6
        assert fd.method == "finite-difference"

    def test_linear_jacobian_is_design_matrix(self):
        X = np.column_stack([np.ones(6), np.arange(6.0), np.arange(6.0) ** 2 / 10])
        model = ik.get_model("linear", design_matrix=X)
        design = ik.Design(np.arange(6.0), 0.1)
        fd = ik.fd_jacobian(model, design, [0.5, -1.0, 2.0])
        np.testing.assert_allclose(fd.values, X, rtol=0, atol=1e-9)

    def test_biexponential_equal_columns_at_symmetric_point(self):
        model = ik.get_model("biexponential")
        design = ik.Design(np.linspace(0.25, 3.0, 6), 0.1)
        fd = ik.fd_jacobian(model, design, [1.0, 1.0])
        np.testing.assert_allclose(fd.values[:, 0], fd.values[:, 1], atol=1e-8)

    def test_matches_analytic_on_all_builtins(self):
        # every registered analytic Jacobian, 20 random interior points each
        for model in ik.builtin_registry():
            if model.jacobian is None:
                continue
            times = np.arange(4.0) if model.name == "linear" else np.linspace(0.1, 3.0, 6)
            design = ik.Design(times, 0.1)
            for theta in interior_points(model.space, 20, seed=7):
                fd = ik.fd_jacobian(model, design, theta)
                analytic = ik.sensitivity_matrix(model, design, theta, method="analytic")
                assert ik.relative_difference(fd.values, analytic.values) < 1e-5

    def test_one_sided_fallback_at_boundary(self):
        model = ik.get_model("biexponential")  # box [0.01, 10]^2
        design = ik.Design(np.array([0.5, 1.0]), 0.1)
        fd = ik.fd_jacobian(model, design, [0.01, 5.0])
        assert fd.one_sided == (0,)
        analytic = ik.sensitivity_matrix(model, design, [0.01, 5.0], method="analytic")
        assert ik.relative_difference(fd.values, analytic.values) < 1e-4

    def test_central_difference_error_is_second_order(self):
        # halving h cuts the error ~4x while truncation dominates round-off
        model = ik.get_model("reciprocal")
        design = ik.Design(np.array([1.0]), 0.1)
        exact = -0.25
        err = {
            h: abs(ik.fd_jacobian(model, design, [2.0],
                                  step_rule=lambda t, hh=h: np.full(1, hh)).values[0, 0] - exact)
            for h in (2e-3, 1e-3)
        }
        ratio = err[2e-3] / err[1e-3]
        assert 3.9 < ratio < 4.1


class TestForwardOde:
    def setup_method(self):
        self.model = ik.get_model("logistic")
        self.design = ik.Design(np.linspace(0.5, 5.0, 8), 0.1)

    def test_agrees_with_finite_differences(self):
        # finite differences are the oracle for the augmented-ODE route
        for theta in interior_points(self.model.space, 10, seed=11):
            fd = ik.fd_jacobian(self.model, self.design, theta)
            fo = ik.forward_ode_jacobian(self.model, self.design, theta)
            assert ik.relative_difference(fd.values, fo.values) < 1e-4

    def test_initial_state_sensitivity_at_t0(self):
        design = ik.Design(np.array([0.0]), 0.1)
        fo = ik.forward_ode_jacobian(self.model, design, [1.0, 2.0, 0.5])
        np.testing.assert_allclose(fo.values[0], [0.0, 0.0, 1.0], atol=1e-12)

    def test_requires_ode_partials(self):
        model = ik.get_model("reciprocal")
        with pytest.raises(ValueError):
            ik.forward_ode_jacobian(model, self.design, [1.0])

    def test_empty_design_rejected(self):
        with pytest.raises(ValueError):
            ik.Design(np.array([]), 0.1)


class TestDispatcher:
    def test_auto_prefers_analytic(self):
        model = ik.get_model("biexponential")
        design = ik.Design(np.array([1.0]), 0.1)
        assert ik.sensitivity_matrix(model, design, [2.0, 1.0]).method == "analytic"

    def test_auto_uses_forward_ode_for_ode_models(self):
        model = ik.get_model("logistic")
        design = ik.Design(np.array([1.0]), 0.1)
        assert ik.sensitivity_matrix(model, design, [1.0, 1.0, 0.5]).method == "forward-ode"

    def test_cross_check_logistic(self):
        model = ik.get_model("logistic")
        design = ik.Design(np.linspace(0.5, 4.0, 6), 0.1)
        assert ik.cross_check(model, design, [1.0, 2.0, 0.2]) < 1e-4

"""Sensitivity matrices: output derivatives with respect to the parameters.

Three routes are available and cross-validated against each other: central
finite differences, forward sensitivity ODEs (for ODE models), and analytic
Jacobians where a model registers one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .models import Design, EvaluationError, Model, evaluate

FD = "finite-difference"
FORWARD_ODE = "forward-ode"
ANALYTIC = "analytic"


@dataclass(frozen=True)
class SensitivityMatrix:
    """n-by-p Jacobian of the design outputs with respect to the parameters.

    ``one_sided`` lists columns where a central step would have left the
    admissible set and a one-sided difference was used instead.
    """

    values: np.ndarray
    theta: np.ndarray
    method: str
    one_sided: tuple[int, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("sensitivity matrix must be 2-D")
        if not np.all(np.isfinite(values)):
            raise EvaluationError("sensitivity matrix has non-finite entries")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))


def default_step(theta) -> np.ndarray:
    """h_j = cbrt(machine eps) * max(|theta_j|, 1), the standard central-difference scale."""
    theta = np.asarray(theta, dtype=float)
    return np.cbrt(np.finfo(float).eps) * np.maximum(np.abs(theta), 1.0)


def fd_jacobian(model: Model, design: Design, theta, step_rule=None) -> SensitivityMatrix:
    """Central-difference Jacobian, column by column.

    Columns whose +/- h step would exit the admissible set fall back to a
    one-sided difference and are flagged.
    """
    theta = model.space.require(theta)
    h = np.asarray((step_rule or default_step)(theta), dtype=float)
    p = theta.size
    cols = []
    one_sided = []
    base = None
    for j in range(p):
        up = theta.copy()
        dn = theta.copy()
        up[j] += h[j]
        dn[j] -= h[j]
        up_ok = model.space.contains(up)
        dn_ok = model.space.contains(dn)
        if up_ok and dn_ok:
            cols.append((evaluate(model, design, up) - evaluate(model, design, dn)) / (2 * h[j]))
        elif up_ok or dn_ok:
            if base is None:
                base = evaluate(model, design, theta)
            side = up if up_ok else dn
            sign = 1.0 if up_ok else -1.0
            cols.append(sign * (evaluate(model, design, side) - base) / h[j])
            one_sided.append(j)
        else:
            raise EvaluationError(
                f"cannot difference parameter {j}: both steps leave the admissible set"
            )
    return SensitivityMatrix(np.column_stack(cols), theta, FD, tuple(one_sided))


def forward_ode_jacobian(model: Model, design: Design, theta) -> SensitivityMatrix:
    """Integrate state and sensitivity equations s' = (dg/dx) s + dg/dtheta jointly."""
    if model.ode is None:
        raise ValueError(f"model {model.name} does not expose ODE right-hand-side partials")
    theta = model.space.require(theta)
    ode = model.ode
    p = theta.size
    x0 = np.asarray(ode.initial(theta), dtype=float)
    d = x0.size
    s0 = np.asarray(ode.initial_jac(theta), dtype=float)  # (d, p)

    def augmented(t, z):
        x = z[:d]
        s = z[d:].reshape(d, p)
        dx = np.asarray(ode.rhs(t, x, theta), dtype=float)
        ds = np.asarray(ode.jac_state(t, x, theta)) @ s + np.asarray(ode.jac_params(t, x, theta))
        return np.concatenate([dx, ds.ravel()])

    times = design.time_points
    z0 = np.concatenate([x0, s0.ravel()])
    if times[-1] == 0.0:
        sens = np.tile(s0[0], (times.size, 1))
        return SensitivityMatrix(sens, theta, FORWARD_ODE)
    sol = solve_ivp(
        augmented, (0.0, times[-1]), z0, t_eval=times,
        method=ode.method, rtol=ode.rtol, atol=ode.atol,
    )
    if not sol.success:
        raise EvaluationError(f"sensitivity integration failed: {sol.message}")
    sens = sol.y[d : d + p].T  # output = first state component
    return SensitivityMatrix(sens, theta, FORWARD_ODE)


def sensitivity_matrix(model: Model, design: Design, theta, method: str = "auto") -> SensitivityMatrix:
    """Preferred route: analytic if registered, else forward-ODE, else finite differences."""
    if method == "auto":
        if model.jacobian is not None:
            method = ANALYTIC
        elif model.ode is not None:
            method = FORWARD_ODE
        else:
            method = FD
    if method == ANALYTIC:
        if model.jacobian is None:
            raise ValueError(f"model {model.name} has no analytic Jacobian")
        theta = model.space.require(theta)
        return SensitivityMatrix(model.jacobian(design.time_points, theta), theta, ANALYTIC)
    if method == FORWARD_ODE:
        return forward_ode_jacobian(model, design, theta)
    if method == FD:
        return fd_jacobian(model, design, theta)
    raise ValueError(f"unknown sensitivity method {method!r}")


def relative_difference(candidate: np.ndarray, reference: np.ndarray) -> float:
    """Max-norm difference over max-norm of the reference, guarded against zero."""
    candidate = np.asarray(candidate, dtype=float)
    reference = np.asarray(reference, dtype=float)
    return float(np.max(np.abs(candidate - reference)) / (np.max(np.abs(reference)) + 1e-12))


def cross_check(model: Model, design: Design, theta) -> float:
    """Relative disagreement between finite differences and the best other route.

    For ODE models compares against forward sensitivities, otherwise against
    the analytic Jacobian; raises if no second route exists.
    """
    fd = fd_jacobian(model, design, theta)
    if model.ode is not None:
        other = forward_ode_jacobian(model, design, theta)
    elif model.jacobian is not None:
        other = sensitivity_matrix(model, design, theta, method=ANALYTIC)
    else:
        raise ValueError(f"model {model.name} has only the finite-difference route")
    return relative_difference(fd.values, other.values)

"""Least-squares parameter estimation.

Linear models get the closed-form orthogonal-decomposition solution; nonlinear
models get a damped Gauss-Newton (Levenberg-Marquardt) iteration with box
projection, ordering-constraint rejection, parameter masks, and Latin-hypercube
multi-start.  The objective throughout is S(theta) = 0.5 * ||y - f(theta)||^2.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .models import Dataset, EvaluationError, Model, OutOfBoundsError, evaluate
from .sensitivity import sensitivity_matrix

SMALL_GRADIENT = "small-gradient"
SMALL_STEP = "small-step"
MAX_ITER = "max-iter"
BOUNDARY = "boundary"


class UnidentifiableDesignError(ValueError):
    """The normal equations are singular; carries a null-space direction."""

    def __init__(self, message: str, null_direction: np.ndarray):
        super().__init__(message)
        self.null_direction = null_direction


@dataclass(frozen=True)
class ParameterMask:
    """Which parameters are held fixed during a fit, and at what values."""

    fixed: np.ndarray   # bool per parameter
    values: np.ndarray  # used where fixed

    def __post_init__(self):
        fixed = np.asarray(self.fixed, dtype=bool)
        values = np.asarray(self.values, dtype=float)
        if fixed.shape != values.shape:
            raise ValueError("fixed flags and values must have equal length")
        object.__setattr__(self, "fixed", fixed)
        object.__setattr__(self, "values", values)

    @classmethod
    def none(cls, p: int) -> "ParameterMask":
        return cls(np.zeros(p, dtype=bool), np.zeros(p))

    @classmethod
    def fixing(cls, p: int, assignments: dict[int, float]) -> "ParameterMask":
        fixed = np.zeros(p, dtype=bool)
        values = np.zeros(p)
        for i, v in assignments.items():
            fixed[i] = True
            values[i] = v
        return cls(fixed, values)

    @property
    def free_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.fixed)

    def pin(self, theta) -> np.ndarray:
        out = np.asarray(theta, dtype=float).copy()
        out[self.fixed] = self.values[self.fixed]
        return out


@dataclass
class FitOptions:
    gradient_tol: float = 1e-8
    step_tol: float = 1e-10
    max_iterations: int = 500
    damping_init_scale: float = 1e-3
    damping_up: float = 2.0
    damping_down: float = 1.0 / 3.0
    jacobian_method: str = "auto"


@dataclass(frozen=True)
class EstimateResult:
    theta: np.ndarray
    objective: float
    sigma2: float
    converged: bool
    iterations: int
    start: np.ndarray
    reason: str
    failure: str | None = None


def log_likelihood(objective: float, noise_sd: float) -> float:
    """Gaussian log-likelihood up to a constant: -S(theta) / sigma^2."""
    return -objective / noise_sd**2


def linear_least_squares(X, y) -> EstimateResult:
    """Closed-form solution of min 0.5 ||y - X theta||^2 by SVD.

    Raises :class:`UnidentifiableDesignError` with a null-space direction when
    X^T X is singular.  sigma^2 is estimated as 2 S / (n - p) when n > p.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n, p = X.shape
    if y.size != n:
        raise ValueError("y length must match the row count of X")
    _, s, vt = np.linalg.svd(X, full_matrices=True)
    rank = int(np.sum(s > s[0] * n * np.finfo(float).eps)) if s.size and s[0] > 0 else 0
    if rank < p:
        direction = vt[-1]
        raise UnidentifiableDesignError(
            f"design matrix is rank-deficient (rank {rank} < {p}); "
            f"no information along {direction.tolist()}",
            null_direction=direction,
        )
    theta, *_ = np.linalg.lstsq(X, y, rcond=None)
    residual = y - X @ theta
    objective = 0.5 * float(residual @ residual)
    sigma2 = 2.0 * objective / (n - p) if n > p else float("nan")
    return EstimateResult(
        theta=theta,
        objective=objective,
        sigma2=sigma2,
        converged=True,
        iterations=0,
        start=theta.copy(),
        reason=SMALL_GRADIENT,
    )


def _stacked_residual(model: Model, dataset: Dataset, theta) -> np.ndarray:
    f = evaluate(model, dataset.design, theta)
    return (dataset.observations - f[:, None]).ravel()


def fit(
    model: Model,
    dataset: Dataset,
    start,
    mask: ParameterMask | None = None,
    options: FitOptions | None = None,
) -> EstimateResult:
    """Levenberg-Marquardt minimisation of S(theta) over the free parameters.

    Steps are projected onto the box; steps violating ordering constraints are
    rejected (treated like an unsuccessful trial, raising the damping).  An
    evaluation failure mid-run returns the best point so far with
    ``converged=False`` and the failure message attached.
    """
    opts = options or FitOptions()
    space = model.space
    start = space.require(start)
    p = start.size
    mask = mask or ParameterMask.none(p)
    theta = mask.pin(start)
    if not space.contains(theta):
        raise OutOfBoundsError("mask pins parameters outside the admissible set")
    free = mask.free_indices
    reps = dataset.design.replicates
    n_obs = dataset.n_observations

    def result(theta, objective, converged, iterations, reason, failure=None):
        k = free.size
        sigma2 = 2.0 * objective / (n_obs - k) if n_obs > k else float("nan")
        return EstimateResult(
            theta=theta.copy(), objective=float(objective), sigma2=float(sigma2),
            converged=converged, iterations=iterations, start=start.copy(),
            reason=reason, failure=failure,
        )

    residual = _stacked_residual(model, dataset, theta)
    objective = 0.5 * float(residual @ residual)
    if free.size == 0:
        return result(theta, objective, True, 0, SMALL_GRADIENT)

    damping = None
    for iteration in range(1, opts.max_iterations + 1):
        try:
            V = sensitivity_matrix(model, dataset.design, theta, method=opts.jacobian_method).values
        except EvaluationError as exc:
            return result(theta, objective, False, iteration - 1, MAX_ITER, failure=str(exc))
        J = np.repeat(V, reps, axis=0)[:, free]
        g = J.T @ residual                      # descent direction; grad S = -g
        gnorm = float(np.max(np.abs(g)))
        if gnorm < opts.gradient_tol * (1.0 + abs(objective)):
            return result(theta, objective, True, iteration - 1, SMALL_GRADIENT)
        JtJ = J.T @ J
        if damping is None:
            peak = float(np.max(np.diag(JtJ)))
            damping = opts.damping_init_scale * (peak if peak > 0 else 1.0)

        accepted = False
        while True:
            try:
                delta = np.linalg.solve(JtJ + damping * np.eye(free.size), g)
            except np.linalg.LinAlgError:
                damping *= opts.damping_up
                continue
            trial = theta.copy()
            trial[free] += delta
            trial = space.clip(trial)
            trial = mask.pin(trial)
            step = float(np.max(np.abs(trial - theta)))
            relative_step = step / (1.0 + float(np.max(np.abs(theta))))
            if relative_step < opts.step_tol:
                reason = _termination_at(theta, free, gnorm, objective, space, opts)
                return result(theta, objective, True, iteration, reason)
            if space.contains(trial):
                try:
                    trial_residual = _stacked_residual(model, dataset, trial)
                except EvaluationError as exc:
                    return result(theta, objective, False, iteration, MAX_ITER, failure=str(exc))
                trial_objective = 0.5 * float(trial_residual @ trial_residual)
                if trial_objective < objective:
                    theta, residual, objective = trial, trial_residual, trial_objective
                    damping *= opts.damping_down
                    accepted = True
                    break
            damping *= opts.damping_up
        if not accepted:  # pragma: no cover - loop exits only via accept/return
            break
    return result(theta, objective, False, opts.max_iterations, MAX_ITER)


def _termination_at(theta, free, gnorm, objective, space, opts) -> str:
    at_bound = np.any(
        (theta[free] <= space.lower[free]) | (theta[free] >= space.upper[free])
    )
    if at_bound and gnorm >= opts.gradient_tol * (1.0 + abs(objective)):
        return BOUNDARY
    return SMALL_STEP


def latin_hypercube_starts(
    model: Model, k_starts: int, seed: int, max_tries: int = 10_000
) -> np.ndarray:
    """Latin-hypercube start points over the admissible box.

    Rows violating ordering constraints are replaced by uniform redraws so
    every start is feasible; the whole construction is deterministic in seed.
    """
    space = model.space
    rng = np.random.default_rng(seed)
    sampler = qmc.LatinHypercube(d=space.dimension, seed=rng)
    unit = sampler.random(k_starts)
    starts = space.lower + unit * (space.upper - space.lower)
    for k in range(k_starts):
        tries = 0
        while not space.contains(starts[k]):
            starts[k] = rng.uniform(space.lower, space.upper)
            tries += 1
            if tries > max_tries:
                raise RuntimeError("could not draw a feasible start point")
    return starts


def multi_start_fit(
    model: Model,
    dataset: Dataset,
    k_starts: int,
    seed: int,
    mask: ParameterMask | None = None,
    options: FitOptions | None = None,
    threads: int = 1,
) -> list[EstimateResult]:
    """Independent fits from dispersed starts, sorted by objective.

    Individual failures are flagged per start, never raised.  Results are
    identical for any thread count because each fit is deterministic in its
    start point.
    """
    if k_starts < 1:
        raise ValueError("k_starts must be >= 1")
    starts = latin_hypercube_starts(model, k_starts, seed)
    if mask is not None:
        starts[:, mask.fixed] = mask.values[mask.fixed]

    def run(start):
        try:
            return fit(model, dataset, start, mask=mask, options=options)
        except EvaluationError as exc:
            return EstimateResult(
                theta=np.asarray(start, dtype=float), objective=float("inf"),
                sigma2=float("nan"), converged=False, iterations=0,
                start=np.asarray(start, dtype=float), reason=MAX_ITER, failure=str(exc),
            )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(s) for s in starts]
    return sorted(results, key=lambda r: r.objective)


def estimates_csv(results: list[EstimateResult], names) -> tuple[list[str], list[list]]:
    """Header and rows for a multi-start summary CSV.

    Results arrive sorted by objective, so ``start_index`` is the rank of the
    start after sorting.
    """
    header = ["start_index", "objective", "converged"] + [f"theta_{n}" for n in names]
    rows = [
        [k, float(r.objective), int(r.converged)] + [float(v) for v in r.theta]
        for k, r in enumerate(results)
    ]
    return header, rows


OBJECTIVE_CLUSTER_RTOL = 1e-4
PARAMETER_CLUSTER_RTOL = 1e-3


def cluster_optima(
    results: list[EstimateResult],
    objective_rtol: float = OBJECTIVE_CLUSTER_RTOL,
    parameter_rtol: float = PARAMETER_CLUSTER_RTOL,
) -> list[list[EstimateResult]]:
    """Group converged results into distinct optima.

    Two results belong together when both the objective and the parameter
    vector agree to the stated relative tolerances (with +1 guards so
    near-zero optima compare absolutely).
    """
    clusters: list[list[EstimateResult]] = []
    for res in sorted(results, key=lambda r: r.objective):
        if not res.converged:
            continue
        for cluster in clusters:
            rep = cluster[0]
            close_obj = abs(res.objective - rep.objective) <= objective_rtol * (1.0 + abs(rep.objective))
            scale = 1.0 + float(np.max(np.abs(rep.theta)))
            close_par = float(np.max(np.abs(res.theta - rep.theta))) <= parameter_rtol * scale
            if close_obj and close_par:
                cluster.append(res)
                break
        else:
            clusters.append([res])
    return clusters

"""Deterministic time-series models, designs, and synthetic-data generation.

A model is a deterministic evaluator f(t, theta) over a box-shaped (optionally
order-constrained) parameter space.  A design fixes the observation times, the
noise level, and the replicate count; observations are the model output plus
independent additive Gaussian noise.  A small registry of built-in models with
known identifiability status is provided for testing and benchmarking.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .serialize import fmt

# Smallest admissible noise standard deviation; designs with sigma below this
# are rejected so downstream log-likelihood scales stay representable.
MIN_NOISE_SD = 1e-12


class OutOfBoundsError(ValueError):
    """Parameter vector lies outside the admissible set."""


class EvaluationError(RuntimeError):
    """Model evaluation produced a non-finite value."""


class UnknownModelError(KeyError):
    """Requested name is not in the built-in registry."""


# ---------------------------------------------------------------------------
# parameter space and design
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParameterSpace:
    """Axis-aligned box of admissible parameters, plus optional orderings.

    ``orderings`` is a tuple of index pairs (i, j) meaning theta_i > theta_j.
    Ordering constraints are enforced at membership-test time; they never
    reparameterize the space.
    """

    lower: np.ndarray
    upper: np.ndarray
    orderings: tuple[tuple[int, int], ...] = ()
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.ndim != 1 or lower.shape != upper.shape or lower.size == 0:
            raise ValueError("bounds must be equal-length 1-D arrays")
        if not np.all(lower < upper):
            raise ValueError("each lower bound must be strictly below its upper bound")
        p = lower.size
        for i, j in self.orderings:
            if i == j or not (0 <= i < p and 0 <= j < p):
                raise ValueError(f"ordering constraint ({i}, {j}) is invalid for p={p}")
        if self.names is not None and len(self.names) != p:
            raise ValueError("names must match the parameter count")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "orderings", tuple((int(i), int(j)) for i, j in self.orderings))

    @property
    def dimension(self) -> int:
        return self.lower.size

    def parameter_names(self) -> tuple[str, ...]:
        if self.names is not None:
            return self.names
        return tuple(f"theta{i + 1}" for i in range(self.dimension))

    def contains(self, theta) -> bool:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dimension,):
            return False
        if not np.all(np.isfinite(theta)):
            return False
        if np.any(theta < self.lower) or np.any(theta > self.upper):
            return False
        return all(theta[i] > theta[j] for i, j in self.orderings)

    def require(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if not self.contains(theta):
            raise OutOfBoundsError(
                f"parameter {theta.tolist()} outside admissible set "
                f"(bounds {self.lower.tolist()}..{self.upper.tolist()}, "
                f"orderings {list(self.orderings)})"
            )
        return theta

    def clip(self, theta) -> np.ndarray:
        """Project onto the box.  Ordering constraints are not repaired."""
        return np.clip(np.asarray(theta, dtype=float), self.lower, self.upper)

    def sample(self, rng: np.random.Generator, size: int, max_tries: int = 10_000) -> np.ndarray:
        """Uniform draws from the box, rejecting ordering violations."""
        out = np.empty((size, self.dimension))
        for k in range(size):
            for _ in range(max_tries):
                cand = rng.uniform(self.lower, self.upper)
                if self.contains(cand):
                    out[k] = cand
                    break
            else:
                raise RuntimeError("could not sample a feasible point; orderings too tight?")
        return out


@dataclass(frozen=True)
class Design:
    """Observation schedule: strictly increasing times, noise level, replicates."""

    time_points: np.ndarray
    noise_sd: float
    replicates: int = 1

    def __post_init__(self):
        times = np.asarray(self.time_points, dtype=float)
        if times.ndim != 1 or times.size < 1:
            raise ValueError("design needs at least one time point")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("time points must be strictly increasing")
        if not np.isfinite(self.noise_sd) or self.noise_sd < MIN_NOISE_SD:
            raise ValueError(f"noise_sd must be >= {MIN_NOISE_SD:g}")
        if int(self.replicates) < 1:
            raise ValueError("replicates must be a positive integer")
        object.__setattr__(self, "time_points", times)
        object.__setattr__(self, "noise_sd", float(self.noise_sd))
        object.__setattr__(self, "replicates", int(self.replicates))

    @property
    def size(self) -> int:
        return self.time_points.size

    def with_replicates(self, replicates: int) -> "Design":
        return Design(self.time_points, self.noise_sd, replicates)


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OdeSystem:
    """Scalar-observation ODE with the partial derivatives needed for
    forward sensitivity integration.

    The observed output is the first state component.  ``rtol``/``atol`` are
    deliberately tighter than any downstream finite-difference step so that
    integration error never masquerades as sensitivity.
    """

    rhs: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    jac_state: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    jac_params: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    initial: Callable[[np.ndarray], np.ndarray]
    initial_jac: Callable[[np.ndarray], np.ndarray]
    rtol: float = 1e-11
    atol: float = 1e-13
    method: str = "DOP853"


@dataclass(frozen=True)
class Model:
    """Deterministic scalar-output model over a parameter space.

    ``evaluator`` maps a single (t, theta) pair to a float; ``evaluate_times``
    is an optional vectorized override used by :func:`evaluate`.  Models with
    several outputs are represented by stacking outputs into an extended
    design, one row per (time, output) pair.
    """

    name: str
    space: ParameterSpace
    evaluator: Callable[[float, np.ndarray], float]
    evaluate_times: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    jacobian: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    ode: OdeSystem | None = None
    identifiability: str | None = None
    align_symmetry: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None

    def align_to_orbit(self, theta_ref, theta) -> np.ndarray:
        """Map ``theta_ref`` to the member of its symmetry orbit nearest ``theta``.

        Models without registered symmetries return ``theta_ref`` unchanged.
        """
        theta_ref = np.asarray(theta_ref, dtype=float)
        if self.align_symmetry is None:
            return theta_ref
        return self.align_symmetry(theta_ref, np.asarray(theta, dtype=float))


def evaluate(model: Model, design: Design, theta, *, check_bounds: bool = True) -> np.ndarray:
    """Model outputs at the design times.

    Raises :class:`OutOfBoundsError` for theta outside the admissible set and
    :class:`EvaluationError` if any output is non-finite.
    """
    theta = np.asarray(theta, dtype=float)
    if check_bounds:
        model.space.require(theta)
    times = design.time_points
    if model.evaluate_times is not None:
        values = np.asarray(model.evaluate_times(times, theta), dtype=float)
    else:
        values = np.array([model.evaluator(t, theta) for t in times], dtype=float)
    if values.shape != times.shape:
        raise EvaluationError(f"model {model.name} returned shape {values.shape}")
    if not np.all(np.isfinite(values)):
        bad = times[~np.isfinite(values)]
        raise EvaluationError(f"model {model.name} non-finite at t={bad.tolist()}")
    return values


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    """Observations on a design, one column per replicate.

    For synthetic data the generating parameter and RNG seed are recorded so
    the observations can be regenerated exactly.
    """

    design: Design
    observations: np.ndarray
    theta_true: np.ndarray | None = None
    seed: int | None = None

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=float)
        if obs.ndim == 1:
            obs = obs.reshape(-1, 1)
        expected = (self.design.size, self.design.replicates)
        if obs.shape != expected:
            raise ValueError(f"observations shape {obs.shape} != design shape {expected}")
        object.__setattr__(self, "observations", obs)
        if self.theta_true is not None:
            object.__setattr__(self, "theta_true", np.asarray(self.theta_true, dtype=float))

    @property
    def n_observations(self) -> int:
        return self.observations.size


def generate_data(model: Model, design: Design, theta_star, seed: int) -> Dataset:
    """Draw y = f(theta*) + sigma * z with one standard-normal z per observation.

    The noise stream is taken in design order (replicates within each time
    point) from ``numpy.random.default_rng(seed)``, so identical inputs always
    reproduce the identical dataset, and two sigmas under a shared seed differ
    only by the sigma ratio.
    """
    theta_star = model.space.require(theta_star)
    mean = evaluate(model, design, theta_star)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((design.size, design.replicates))
    y = mean[:, None] + design.noise_sd * z
    return Dataset(design=design, observations=y, theta_true=theta_star, seed=int(seed))


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write ``time,replicate,value`` CSV plus a JSON metadata sidecar."""
    path = Path(path)
    lines = ["time,replicate,value"]
    for i, t in enumerate(dataset.design.time_points):
        for r in range(dataset.design.replicates):
            lines.append(f"{fmt(t)},{r},{fmt(dataset.observations[i, r])}")
    path.write_text("\n".join(lines) + "\n")
    meta = {
        "time_points": [float(t) for t in dataset.design.time_points],
        "noise_sd": dataset.design.noise_sd,
        "replicates": dataset.design.replicates,
        "seed": dataset.seed,
        "theta_true": None if dataset.theta_true is None else [float(v) for v in dataset.theta_true],
    }
    path.with_suffix(path.suffix + ".meta.json").write_text(json.dumps(meta, indent=2) + "\n")


def load_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".meta.json").read_text())
    design = Design(
        np.asarray(meta["time_points"], dtype=float),
        float(meta["noise_sd"]),
        int(meta["replicates"]),
    )
    obs = np.full((design.size, design.replicates), np.nan)
    times = design.time_points
    with path.open() as fh:
        header = fh.readline().strip()
        if header != "time,replicate,value":
            raise ValueError(f"unexpected dataset header: {header!r}")
        for line in fh:
            t_str, r_str, v_str = line.strip().split(",")
            i = int(np.argmin(np.abs(times - float(t_str))))
            obs[i, int(r_str)] = float(v_str)
    if not np.all(np.isfinite(obs)):
        raise ValueError("dataset file is missing observations")
    theta = meta.get("theta_true")
    return Dataset(
        design=design,
        observations=obs,
        theta_true=None if theta is None else np.asarray(theta, dtype=float),
        seed=meta.get("seed"),
    )


# ---------------------------------------------------------------------------
# built-in registry
# ---------------------------------------------------------------------------

GLOBALLY_IDENTIFIABLE = "globally-identifiable"
LOCALLY_NOT_GLOBALLY = "locally-not-globally"
STRUCTURALLY_UNIDENTIFIABLE = "structurally-unidentifiable"


def linear_model(design_matrix=None, bounds: tuple[float, float] = (-10.0, 10.0)) -> Model:
    """y = X theta.  Design times index the rows of X (t_i = i).

    The default X is a two-column intercept/slope matrix on four points, so
    the registry entry is usable without constants.
    """
    if design_matrix is None:
        t = np.arange(4.0)
        design_matrix = np.column_stack([np.ones_like(t), t])
    X = np.asarray(design_matrix, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("design matrix must be 2-D with at least one row")
    n, p = X.shape
    lo, hi = bounds
    space = ParameterSpace(np.full(p, lo), np.full(p, hi),
                           names=tuple(f"coef{i + 1}" for i in range(p)))

    def _rows(times, theta):
        idx = np.asarray(np.rint(times), dtype=int)
        if np.any(idx < 0) or np.any(idx >= n):
            raise EvaluationError(f"linear model defined for t in 0..{n - 1}")
        return X[idx] @ theta

    return Model(
        name="linear",
        space=space,
        evaluator=lambda t, theta: float(_rows(np.array([t]), theta)[0]),
        evaluate_times=_rows,
        jacobian=lambda times, theta: X[np.asarray(np.rint(times), dtype=int)],
        identifiability=GLOBALLY_IDENTIFIABLE if np.linalg.matrix_rank(X) == p else STRUCTURALLY_UNIDENTIFIABLE,
    )


def _swap_align(theta_ref: np.ndarray, theta: np.ndarray) -> np.ndarray:
    swapped = theta_ref[::-1]
    if np.linalg.norm(swapped - theta) < np.linalg.norm(theta_ref - theta):
        return swapped.copy()
    return theta_ref


def biexponential_model(bounds: tuple[float, float] = (0.01, 10.0), ordered: bool = False) -> Model:
    """f(t) = exp(-rate1 t) + exp(-rate2 t).

    Swapping the two rates leaves the output unchanged, so the model is only
    locally identifiable unless the space is restricted to rate1 > rate2.
    """
    lo, hi = bounds
    space = ParameterSpace(
        np.array([lo, lo]), np.array([hi, hi]),
        orderings=((0, 1),) if ordered else (),
        names=("rate1", "rate2"),
    )

    def _f(times, theta):
        return np.exp(-theta[0] * times) + np.exp(-theta[1] * times)

    def _jac(times, theta):
        return np.column_stack([-times * np.exp(-theta[0] * times),
                                -times * np.exp(-theta[1] * times)])

    return Model(
        name="biexponential",
        space=space,
        evaluator=lambda t, theta: float(np.exp(-theta[0] * t) + np.exp(-theta[1] * t)),
        evaluate_times=_f,
        jacobian=_jac,
        identifiability=GLOBALLY_IDENTIFIABLE if ordered else LOCALLY_NOT_GLOBALLY,
        align_symmetry=None if ordered else _swap_align,
    )


def _scaling_align(theta_ref: np.ndarray, theta: np.ndarray) -> np.ndarray:
    # Orbit: (a, b, c) -> (a e^s, b, c - s).  Choose s to match the amplitude.
    if theta[0] <= 0 or theta_ref[0] <= 0:
        return theta_ref
    s = np.log(theta[0] / theta_ref[0])
    return np.array([theta_ref[0] * np.exp(s), theta_ref[1], theta_ref[2] - s])


def redundant_exponential_model(
    amplitude_bounds: tuple[float, float] = (0.1, 10.0),
    rate_bounds: tuple[float, float] = (-1.0, 1.0),
    offset_bounds: tuple[float, float] = (-5.0, 5.0),
) -> Model:
    """f(x) = amplitude * exp(rate * x + offset), with x the design time.

    The amplitude and offset act through the single product
    amplitude * exp(offset), so the model carries one redundant parameter and
    is structurally unidentifiable.
    """
    space = ParameterSpace(
        np.array([amplitude_bounds[0], rate_bounds[0], offset_bounds[0]]),
        np.array([amplitude_bounds[1], rate_bounds[1], offset_bounds[1]]),
        names=("amplitude", "rate", "offset"),
    )

    def _f(times, theta):
        return theta[0] * np.exp(theta[1] * times + theta[2])

    def _jac(times, theta):
        e = np.exp(theta[1] * times + theta[2])
        return np.column_stack([e, theta[0] * times * e, theta[0] * e])

    return Model(
        name="redundant-exponential",
        space=space,
        evaluator=lambda t, theta: float(theta[0] * np.exp(theta[1] * t + theta[2])),
        evaluate_times=_f,
        jacobian=_jac,
        identifiability=STRUCTURALLY_UNIDENTIFIABLE,
        align_symmetry=_scaling_align,
    )


def reciprocal_model(bounds: tuple[float, float] = (0.01, 1000.0)) -> Model:
    """f(theta) = 1 + 1/theta, constant in t.

    Globally identifiable everywhere, but the sensitivity 1/theta^2 collapses
    as theta grows, so practical identifiability is lost at large theta.
    """
    space = ParameterSpace(np.array([bounds[0]]), np.array([bounds[1]]), names=("theta",))

    def _f(times, theta):
        return np.full_like(np.asarray(times, dtype=float), 1.0 + 1.0 / theta[0])

    return Model(
        name="reciprocal",
        space=space,
        evaluator=lambda t, theta: float(1.0 + 1.0 / theta[0]),
        evaluate_times=_f,
        jacobian=lambda times, theta: np.full((len(times), 1), -1.0 / theta[0] ** 2),
        identifiability=GLOBALLY_IDENTIFIABLE,
    )


def logistic_model(
    rate_bounds: tuple[float, float] = (0.1, 5.0),
    capacity_bounds: tuple[float, float] = (0.2, 5.0),
    initial_bounds: tuple[float, float] = (0.01, 2.0),
    rtol: float = 1e-11,
    atol: float = 1e-13,
) -> Model:
    """Logistic growth x' = r x (1 - x/K), x(0) = x0, solved numerically.

    Parameters are (r, K, x0); the observed output is the state itself.
    Integration tolerances must stay several orders below the central
    finite-difference step (~6e-6), otherwise solver noise divided by the
    step masquerades as sensitivity.
    """
    space = ParameterSpace(
        np.array([rate_bounds[0], capacity_bounds[0], initial_bounds[0]]),
        np.array([rate_bounds[1], capacity_bounds[1], initial_bounds[1]]),
        names=("growth_rate", "capacity", "initial_state"),
    )

    ode = OdeSystem(
        rhs=lambda t, x, theta: np.array([theta[0] * x[0] * (1.0 - x[0] / theta[1])]),
        jac_state=lambda t, x, theta: np.array([[theta[0] * (1.0 - 2.0 * x[0] / theta[1])]]),
        jac_params=lambda t, x, theta: np.array([[
            x[0] * (1.0 - x[0] / theta[1]),
            theta[0] * x[0] ** 2 / theta[1] ** 2,
            0.0,
        ]]),
        initial=lambda theta: np.array([theta[2]]),
        initial_jac=lambda theta: np.array([[0.0, 0.0, 1.0]]),
        rtol=rtol,
        atol=atol,
        method="DOP853",
    )

    def _solve(times, theta):
        times = np.asarray(times, dtype=float)
        if times[-1] == 0.0:
            return np.full_like(times, theta[2])
        sol = solve_ivp(
            ode.rhs, (0.0, times[-1]), ode.initial(theta), t_eval=times,
            args=(theta,), method=ode.method, rtol=ode.rtol, atol=ode.atol,
        )
        if not sol.success:
            raise EvaluationError(f"logistic integration failed: {sol.message}")
        return sol.y[0]

    return Model(
        name="logistic",
        space=space,
        evaluator=lambda t, theta: float(_solve(np.array([0.0, t]) if t > 0 else np.array([0.0]), theta)[-1]),
        evaluate_times=_solve,
        ode=ode,
        identifiability=GLOBALLY_IDENTIFIABLE,
    )


_FACTORIES: dict[str, Callable[..., Model]] = {
    "linear": linear_model,
    "biexponential": biexponential_model,
    "redundant-exponential": redundant_exponential_model,
    "reciprocal": reciprocal_model,
    "logistic": logistic_model,
}


def builtin_registry() -> list[Model]:
    """All built-in models instantiated with default constants."""
    return [factory() for factory in _FACTORIES.values()]


def get_model(name: str, **constants) -> Model:
    """Instantiate a built-in by name, passing constants to its factory."""
    try:
        factory = _FACTORIES[name]
    except KeyError:
        known = ", ".join(sorted(_FACTORIES))
        raise UnknownModelError(f"unknown model {name!r}; registry has: {known}") from None
    return factory(**constants)

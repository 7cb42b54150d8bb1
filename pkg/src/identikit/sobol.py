"""Variance-based global sensitivity: first-order and total-order indices.

Pick-freeze Monte Carlo on the noiseless model output: two independent sample
matrices A and B plus single-column substitutions A_B^(i).  First-order
indices use the variance-of-conditional estimator, total-order indices the
Jansen estimator.  Indices are computed per design time and aggregated by a
variance-weighted mean; negative estimates are reported raw together with
bootstrap standard errors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import Design, EvaluationError, Model, ParameterSpace, evaluate

UNIFORM = "uniform"
LOG_UNIFORM = "log-uniform"

MIN_SAMPLES = 1 << 10
MAX_RESAMPLE_ROUNDS = 100


@dataclass(frozen=True)
class Prior:
    """Independent per-parameter distributions, uniform or log-uniform."""

    kinds: tuple[str, ...]
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if not (len(self.kinds) == lower.size == upper.size):
            raise ValueError("kinds and bounds must have equal length")
        if not np.all(lower < upper):
            raise ValueError("prior lower bounds must lie below upper bounds")
        for kind, lo in zip(self.kinds, lower):
            if kind not in (UNIFORM, LOG_UNIFORM):
                raise ValueError(f"unknown prior kind {kind!r}")
            if kind == LOG_UNIFORM and lo <= 0:
                raise ValueError("log-uniform bounds must be positive")
        object.__setattr__(self, "kinds", tuple(self.kinds))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def uniform_box(cls, space: ParameterSpace) -> "Prior":
        return cls((UNIFORM,) * space.dimension, space.lower.copy(), space.upper.copy())

    @property
    def dimension(self) -> int:
        return self.lower.size

    def contained_in(self, space: ParameterSpace) -> bool:
        return (
            self.dimension == space.dimension
            and bool(np.all(self.lower >= space.lower))
            and bool(np.all(self.upper <= space.upper))
        )

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        u = rng.random((n, self.dimension))
        out = np.empty_like(u)
        for j, kind in enumerate(self.kinds):
            if kind == UNIFORM:
                out[:, j] = self.lower[j] + u[:, j] * (self.upper[j] - self.lower[j])
            else:
                log_lo, log_hi = np.log(self.lower[j]), np.log(self.upper[j])
                out[:, j] = np.exp(log_lo + u[:, j] * (log_hi - log_lo))
        return out


@dataclass(frozen=True)
class SobolReport:
    first: np.ndarray             # aggregate S_i per parameter
    total: np.ndarray             # aggregate S_Ti per parameter
    first_se: np.ndarray
    total_se: np.ndarray
    variance: np.ndarray          # output variance per design time
    variance_total: float
    per_time_first: np.ndarray    # (n_times, p)
    per_time_total: np.ndarray
    n_samples: int
    degenerate: bool
    resampled: int

    def to_dict(self) -> dict:
        return {
            "first_order": self.first.tolist(),
            "total_order": self.total.tolist(),
            "first_order_se": self.first_se.tolist(),
            "total_order_se": self.total_se.tolist(),
            "variance_per_time": self.variance.tolist(),
            "variance_total": self.variance_total,
            "per_time_first": self.per_time_first.tolist(),
            "per_time_total": self.per_time_total.tolist(),
            "n_samples": self.n_samples,
            "degenerate": self.degenerate,
            "resampled": self.resampled,
        }


def _pick_freeze_estimates(fA, fB, fAB):
    """Per-time indices and aggregation weights from evaluated sample blocks.

    Outputs are centred on the pooled sample mean first; that removes the
    mean-leakage term from the first-order estimator and makes both indices
    exactly invariant to affine output rescaling under a shared seed.
    """
    var_t = np.var(fA, axis=0, ddof=1)          # (n,)
    center = 0.5 * (np.mean(fA, axis=0) + np.mean(fB, axis=0))
    fAc = fA - center
    fBc = fB - center
    p = fAB.shape[0]
    n = fA.shape[1]
    first = np.zeros((n, p))
    total = np.zeros((n, p))
    live = var_t > 0
    for i in range(p):
        num_first = np.mean(fBc * ((fAB[i] - center) - fAc), axis=0)
        num_total = np.mean((fAc - (fAB[i] - center)) ** 2, axis=0) / 2.0
        first[live, i] = num_first[live] / var_t[live]
        total[live, i] = num_total[live] / var_t[live]
    return first, total, var_t


def _aggregate(per_time, var_t):
    weight_sum = float(np.sum(var_t))
    if weight_sum <= 0:
        return np.zeros(per_time.shape[1])
    return per_time.T @ (var_t / weight_sum)


def sobol_indices(
    model: Model,
    design: Design,
    prior: Prior,
    n_samples: int,
    seed: int = 0,
    bootstrap: int = 200,
    aggregation: str = "variance-weighted",
) -> SobolReport:
    """Monte-Carlo Sobol indices of the noiseless output under the prior.

    ``n_samples`` must be a power of two of at least 2^10.  Sample points
    where the model fails to evaluate are redrawn from the prior (the count is
    reported).  The whole computation, bootstrap included, is deterministic in
    ``seed``; accumulation uses numpy's pairwise summation so results do not
    depend on threading.
    """
    if aggregation != "variance-weighted":
        raise ValueError("only variance-weighted aggregation is supported")
    n = int(n_samples)
    if n < MIN_SAMPLES or n & (n - 1):
        raise ValueError(f"n_samples must be a power of two >= {MIN_SAMPLES}")
    if not prior.contained_in(model.space):
        raise ValueError("prior support must be contained in the parameter box")

    p = prior.dimension
    n_times = design.size
    ss = np.random.SeedSequence(seed)
    rng_samples, rng_boot = (np.random.default_rng(c) for c in ss.spawn(2))

    A = prior.sample(n, rng_samples)
    B = prior.sample(n, rng_samples)
    fA = np.empty((n, n_times))
    fB = np.empty((n, n_times))
    fAB = np.empty((p, n, n_times))

    def try_row(k) -> bool:
        try:
            fa = evaluate(model, design, A[k], check_bounds=False)
            fb = evaluate(model, design, B[k], check_bounds=False)
            crosses = []
            for i in range(p):
                cross = A[k].copy()
                cross[i] = B[k, i]
                crosses.append(evaluate(model, design, cross, check_bounds=False))
        except EvaluationError:
            return False
        fA[k], fB[k] = fa, fb
        for i in range(p):
            fAB[i, k] = crosses[i]
        return True

    pending = [k for k in range(n) if not try_row(k)]
    resampled = 0
    rounds = 0
    while pending:
        rounds += 1
        if rounds > MAX_RESAMPLE_ROUNDS:
            raise EvaluationError(f"{len(pending)} sample points keep failing to evaluate")
        still = []
        for k in pending:
            A[k] = prior.sample(1, rng_samples)[0]
            B[k] = prior.sample(1, rng_samples)[0]
            resampled += 1
            if not try_row(k):
                still.append(k)
        pending = still

    per_first, per_total, var_t = _pick_freeze_estimates(fA, fB, fAB)
    variance_total = float(np.sum(var_t))
    degenerate = variance_total <= 0
    first = _aggregate(per_first, var_t)
    total = _aggregate(per_total, var_t)

    first_se = np.zeros(p)
    total_se = np.zeros(p)
    if bootstrap > 0 and not degenerate:
        boot_first = np.empty((bootstrap, p))
        boot_total = np.empty((bootstrap, p))
        for b in range(bootstrap):
            idx = rng_boot.integers(0, n, size=n)
            bf, bt, bv = _pick_freeze_estimates(fA[idx], fB[idx], fAB[:, idx])
            boot_first[b] = _aggregate(bf, bv)
            boot_total[b] = _aggregate(bt, bv)
        first_se = np.std(boot_first, axis=0, ddof=1)
        total_se = np.std(boot_total, axis=0, ddof=1)

    return SobolReport(
        first=first, total=total, first_se=first_se, total_se=total_se,
        variance=var_t, variance_total=variance_total,
        per_time_first=per_first, per_time_total=per_total,
        n_samples=n, degenerate=degenerate, resampled=resampled,
    )


def screen_unidentifiable(report: SobolReport, threshold: float = 0.01) -> list[int]:
    """Parameters whose first and total indices both fall at or below threshold.

    Such parameters barely move the output anywhere in the prior range, so
    reliable estimation is unlikely.  The converse does not hold: nonzero
    indices suggest, but never guarantee, identifiability.
    """
    flagged = (report.first <= threshold) & (report.total <= threshold)
    return [int(i) for i in np.flatnonzero(flagged)]

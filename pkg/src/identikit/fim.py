"""Fisher information analysis: assembly, eigen-structure, identifiability
classification, sloppiness detection, variance queries, and design scoring.

The information matrix is sigma^-2 V^T V for a sensitivity matrix V; replicated
observations enter as an exact integer multiplier so that doubling replicates
doubles the information bitwise.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .models import Design, Model
from .sensitivity import SensitivityMatrix, sensitivity_matrix

DEFAULT_RANK_TOL = 1e-10

IDENTIFIABLE = "identifiable"
RANK_DEFICIENT = "rank-deficient"


class RankDeficientFimWarning(UserWarning):
    """A query on a rank-deficient information matrix used the pseudo-inverse."""


@dataclass(frozen=True)
class SloppinessStats:
    """Least-squares fit of log10 eigenvalues against their index.

    ``sloppy`` requires the spectrum to span at least three decades and to be
    close to linear on the log scale (R^2 >= 0.9).  Both raw statistics are
    reported so users can re-threshold.
    """

    spread_decades: float
    slope: float
    intercept: float
    r_squared: float
    residual_ss: float
    sloppy: bool

    SPREAD_DECADES_MIN = 3.0
    R_SQUARED_MIN = 0.9


@dataclass(frozen=True)
class FimReport:
    """Information matrix with its eigen-expansion and classification."""

    fim: np.ndarray
    sigma: float
    replicates: int
    eigenvalues: np.ndarray       # descending
    eigenvectors: np.ndarray      # orthonormal columns, matching order
    rank: int
    classification: str
    rank_tolerance: float
    sloppiness: SloppinessStats | None

    @property
    def dimension(self) -> int:
        return self.fim.shape[0]

    def to_dict(self) -> dict:
        payload = {
            "sigma": self.sigma,
            "replicates": self.replicates,
            "fim": self.fim.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "eigenvectors": self.eigenvectors.tolist(),
            "rank": self.rank,
            "classification": self.classification,
            "rank_tolerance": self.rank_tolerance,
            "sloppiness": None,
        }
        if self.sloppiness is not None:
            s = self.sloppiness
            payload["sloppiness"] = {
                "spread_decades": s.spread_decades,
                "slope": s.slope,
                "intercept": s.intercept,
                "r_squared": s.r_squared,
                "residual_ss": s.residual_ss,
                "sloppy": s.sloppy,
            }
        return payload


def _log_linear_fit(eigenvalues: np.ndarray) -> SloppinessStats:
    logs = np.log10(eigenvalues)
    spread = float(logs[0] - logs[-1])
    idx = np.arange(logs.size, dtype=float)
    if logs.size < 2:
        slope, intercept = 0.0, float(logs[0])
        residual_ss, r_squared = 0.0, 1.0
    else:
        slope, intercept = np.polyfit(idx, logs, 1)
        fitted = slope * idx + intercept
        residual_ss = float(np.sum((logs - fitted) ** 2))
        total_ss = float(np.sum((logs - logs.mean()) ** 2))
        r_squared = 1.0 if total_ss == 0.0 else 1.0 - residual_ss / total_ss
    sloppy = (
        spread >= SloppinessStats.SPREAD_DECADES_MIN
        and r_squared >= SloppinessStats.R_SQUARED_MIN
    )
    return SloppinessStats(spread, float(slope), float(intercept), float(r_squared),
                           float(residual_ss), bool(sloppy))


def assemble_fim(
    sensitivity: SensitivityMatrix | np.ndarray,
    sigma: float,
    replicates: int = 1,
    rank_tolerance: float = DEFAULT_RANK_TOL,
) -> FimReport:
    """I = replicates * sigma^-2 V^T V, with eigen-decomposition and rank.

    Accepts either a :class:`SensitivityMatrix` or a plain array with one row
    per unique design time.
    """
    V = sensitivity.values if isinstance(sensitivity, SensitivityMatrix) else np.asarray(sensitivity, dtype=float)
    if not np.all(np.isfinite(V)):
        raise ValueError("sensitivity matrix has non-finite entries")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    fim = (replicates / sigma**2) * (V.T @ V)
    fim = 0.5 * (fim + fim.T)  # suppress rounding asymmetry before the symmetric solver
    lam, vecs = np.linalg.eigh(fim)
    order = np.argsort(lam)[::-1]
    lam = lam[order]
    vecs = vecs[:, order]
    rank = _numerical_rank(lam, rank_tolerance)
    classification = IDENTIFIABLE if rank == lam.size else RANK_DEFICIENT
    sloppiness = _log_linear_fit(lam) if np.all(lam > 0) else None
    return FimReport(
        fim=fim,
        sigma=float(sigma),
        replicates=int(replicates),
        eigenvalues=lam,
        eigenvectors=vecs,
        rank=rank,
        classification=classification,
        rank_tolerance=float(rank_tolerance),
        sloppiness=sloppiness,
    )


def fim_report(
    model: Model,
    design: Design,
    theta,
    sigma: float | None = None,
    method: str = "auto",
    rank_tolerance: float = DEFAULT_RANK_TOL,
) -> FimReport:
    """Assemble the information matrix of a design at theta.

    sigma defaults to the design's noise level; replicates enter as the exact
    multiplier on V^T V.
    """
    V = sensitivity_matrix(model, design, theta, method=method)
    return assemble_fim(V, design.noise_sd if sigma is None else sigma,
                        replicates=design.replicates, rank_tolerance=rank_tolerance)


def _numerical_rank(eigenvalues: np.ndarray, tolerance: float) -> int:
    lam_max = eigenvalues[0]
    if lam_max <= 0:
        return 0
    return int(np.sum(eigenvalues >= tolerance * lam_max))


@dataclass(frozen=True)
class LocalClassification:
    classification: str
    rank: int
    null_directions: np.ndarray  # (p, p - rank), empty when identifiable


def classify_local_identifiability(
    report: FimReport, tolerance: float = DEFAULT_RANK_TOL
) -> LocalClassification:
    """Rank-deficient iff lambda_min / lambda_max < tolerance (or lambda_max = 0).

    Near-null eigenvector directions are returned for the rank-deficient case;
    they are the parameter combinations the data carry no information about.
    """
    rank = _numerical_rank(report.eigenvalues, tolerance)
    p = report.dimension
    if rank == p:
        return LocalClassification(IDENTIFIABLE, rank, np.empty((p, 0)))
    return LocalClassification(RANK_DEFICIENT, rank, report.eigenvectors[:, rank:].copy())


def detect_sloppiness(report: FimReport) -> SloppinessStats:
    """Log-linear eigenvalue-spacing statistics; undefined for singular spectra."""
    if np.any(report.eigenvalues <= 0):
        raise ValueError(
            "sloppiness is undefined with non-positive eigenvalues; "
            "the matrix is rank-deficient"
        )
    return _log_linear_fit(report.eigenvalues)


def combination_variance(report: FimReport, a) -> float:
    """Asymptotic variance a^T I^{-1} a of the linear combination a . theta_hat.

    On a rank-deficient matrix the variance is infinite whenever ``a`` has a
    component in the null space; otherwise the pseudo-inverse value is
    returned under a :class:`RankDeficientFimWarning`.
    """
    a = np.asarray(a, dtype=float)
    if a.shape != (report.dimension,) or not np.any(a):
        raise ValueError("direction must be a nonzero vector of length p")
    coeffs = report.eigenvectors.T @ a
    lam = report.eigenvalues
    rank = report.rank
    if rank < lam.size:
        null_mass = np.linalg.norm(coeffs[rank:])
        if null_mass > report.rank_tolerance * np.linalg.norm(a):
            return float("inf")
        warnings.warn(
            "direction lies in the row space of a rank-deficient information "
            "matrix; returning the pseudo-inverse variance",
            RankDeficientFimWarning,
            stacklevel=2,
        )
    return float(np.sum(coeffs[:rank] ** 2 / lam[:rank]))


@dataclass(frozen=True)
class Ellipsoid:
    """Confidence region: center, orthonormal axes, and semi-axis lengths."""

    center: np.ndarray
    axes: np.ndarray              # columns are the eigenvector directions
    semi_axis_lengths: np.ndarray
    level: float


def confidence_ellipsoid(report: FimReport, theta_hat, level: float) -> Ellipsoid:
    """Chi-square-calibrated ellipsoid: semi-axes sqrt(chi2_p(level) / lambda_i)."""
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    if report.classification != IDENTIFIABLE:
        raise ValueError("confidence ellipsoid requires a full-rank information matrix")
    q = chi2.ppf(level, df=report.dimension)
    lengths = np.sqrt(q / report.eigenvalues)
    return Ellipsoid(
        center=np.asarray(theta_hat, dtype=float),
        axes=report.eigenvectors.copy(),
        semi_axis_lengths=lengths,
        level=float(level),
    )


DESIGN_CRITERIA = ("D", "A", "E")


def design_score(
    model: Model,
    design: Design,
    theta,
    criterion: str,
    sigma: float | None = None,
    method: str = "auto",
) -> float:
    """Scalar design quality at theta.

    D: det(I), larger is better.  A: trace(I^-1), lower is better (infinite on
    a rank-deficient matrix).  E: smallest eigenvalue, larger is better.
    """
    if criterion not in DESIGN_CRITERIA:
        raise ValueError(f"criterion must be one of {DESIGN_CRITERIA}")
    report = fim_report(model, design, theta, sigma=sigma, method=method)
    if criterion == "D":
        # eigenvalue product == determinant for the symmetrized matrix, and it
        # scales exactly under replicate doubling
        return float(np.prod(report.eigenvalues))
    if criterion == "E":
        return float(report.eigenvalues[-1])
    if report.classification != IDENTIFIABLE:
        return float("inf")
    return float(np.sum(1.0 / report.eigenvalues))

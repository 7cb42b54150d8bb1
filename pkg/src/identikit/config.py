"""Run configuration: a single JSON document with one section per analysis.

Sections mirror the analysis modules: ``model``, ``design``, ``data``, then
``fit``, ``fim``, ``design_score``, ``profile``, ``sobol``, ``recover``.
``validate_config`` returns diagnostics that name the offending field;
``build_config`` constructs the typed configuration from a validated document.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fim import DEFAULT_RANK_TOL, DESIGN_CRITERIA
from .models import MIN_NOISE_SD, Design, Model, UnknownModelError, get_model
from .profile import DEFAULT_GRID_POINTS, DEFAULT_SPAN_SD, FLATNESS_TOL
from .recovery import DEFAULT_STARTS, DEFAULT_TOLERANCE
from .sobol import MIN_SAMPLES, Prior

ANALYSIS_SECTIONS = ("fim", "design_score", "profile", "sobol", "recover")


@dataclass(frozen=True)
class Diagnostic:
    field: str
    message: str

    def __str__(self):
        return f"{self.field}: {self.message}"


@dataclass
class DataSection:
    theta_true: np.ndarray | None = None
    path: str | None = None
    seed: int | None = None


@dataclass
class FitSection:
    starts: int = DEFAULT_STARTS


@dataclass
class FimSection:
    theta: np.ndarray | None = None
    rank_tolerance: float = DEFAULT_RANK_TOL
    level: float = 0.95


@dataclass
class DesignScoreSection:
    criterion: str = "D"
    theta: np.ndarray | None = None


@dataclass
class ProfileSection:
    parameters: list[int] | None = None
    points: int = DEFAULT_GRID_POINTS
    span_sd: float = DEFAULT_SPAN_SD
    level: float = 0.95
    flatness_tol: float = FLATNESS_TOL
    multistart: int = 0
    grid: np.ndarray | None = None


@dataclass
class SobolSection:
    n_samples: int = 4096
    bootstrap: int = 200
    prior: Prior | None = None


@dataclass
class RecoverSection:
    k_trials: int = 20
    n_starts: int = DEFAULT_STARTS
    tolerance: float = DEFAULT_TOLERANCE
    prior: Prior | None = None


@dataclass
class RunConfig:
    model: Model
    design: Design
    seed: int = 0
    data: DataSection | None = None
    fit: FitSection = field(default_factory=FitSection)
    fim: FimSection | None = None
    design_score: DesignScoreSection | None = None
    profile: ProfileSection | None = None
    sobol: SobolSection | None = None
    recover: RecoverSection | None = None
    raw: dict = field(default_factory=dict)

    def sections_present(self) -> list[str]:
        return [name for name in ANALYSIS_SECTIONS if getattr(self, name) is not None]


def load_raw(path: str | Path) -> tuple[dict | None, list[Diagnostic]]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        return None, [Diagnostic("config", f"cannot read {path}: {exc}")]
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        return None, [Diagnostic("config", f"invalid JSON: {exc}")]
    if not isinstance(raw, dict):
        return None, [Diagnostic("config", "document must be a JSON object")]
    return raw, []


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _check_theta(diags, space, value, field_name):
    if not isinstance(value, list) or not all(_is_number(v) for v in value):
        diags.append(Diagnostic(field_name, "must be a list of numbers"))
        return
    if len(value) != space.dimension:
        diags.append(Diagnostic(field_name, f"must have length {space.dimension}"))
        return
    if not space.contains(np.asarray(value, dtype=float)):
        diags.append(Diagnostic(field_name, "lies outside the admissible parameter set"))


def _check_prior(diags, space, value, field_name):
    if not isinstance(value, list) or len(value) != space.dimension:
        diags.append(Diagnostic(field_name, f"must list {space.dimension} per-parameter entries"))
        return None
    kinds, lower, upper = [], [], []
    for k, entry in enumerate(value):
        if not isinstance(entry, dict) or not {"kind", "lower", "upper"} <= set(entry):
            diags.append(Diagnostic(f"{field_name}[{k}]", "needs kind, lower, upper"))
            return None
        kinds.append(entry["kind"])
        lower.append(entry["lower"])
        upper.append(entry["upper"])
    try:
        prior = Prior(tuple(kinds), np.asarray(lower, dtype=float), np.asarray(upper, dtype=float))
    except ValueError as exc:
        diags.append(Diagnostic(field_name, str(exc)))
        return None
    if not prior.contained_in(space):
        diags.append(Diagnostic(field_name, "support is not contained in the parameter box"))
        return None
    return prior


def validate_config(raw: dict) -> list[Diagnostic]:
    """Field-by-field checks; an empty return means the document is runnable."""
    diags: list[Diagnostic] = []

    model_section = raw.get("model")
    model = None
    if not isinstance(model_section, dict) or "name" not in model_section:
        diags.append(Diagnostic("model.name", "model section with a name is required"))
    else:
        constants = model_section.get("constants", {})
        if not isinstance(constants, dict):
            diags.append(Diagnostic("model.constants", "must be an object"))
            constants = {}
        try:
            model = get_model(str(model_section["name"]), **constants)
        except UnknownModelError as exc:
            diags.append(Diagnostic("model.name", str(exc)))
        except (TypeError, ValueError) as exc:
            diags.append(Diagnostic("model.constants", str(exc)))

    design_section = raw.get("design")
    if not isinstance(design_section, dict):
        diags.append(Diagnostic("design", "design section is required"))
    else:
        times = design_section.get("times")
        if not isinstance(times, list) or not times or not all(_is_number(t) for t in times):
            diags.append(Diagnostic("design.times", "must be a non-empty list of numbers"))
        elif len(times) > 1 and not all(b > a for a, b in zip(times, times[1:])):
            diags.append(Diagnostic("design.times", "must be strictly increasing"))
        sigma = design_section.get("noise_sd")
        if not _is_number(sigma) or sigma < MIN_NOISE_SD:
            diags.append(Diagnostic("design.noise_sd", f"must be a number >= {MIN_NOISE_SD:g}"))
        replicates = design_section.get("replicates", 1)
        if not isinstance(replicates, int) or replicates < 1:
            diags.append(Diagnostic("design.replicates", "must be a positive integer"))

    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        diags.append(Diagnostic("seed", "must be an integer"))

    data = raw.get("data")
    if data is not None:
        if not isinstance(data, dict):
            diags.append(Diagnostic("data", "must be an object"))
        else:
            has_theta = "theta_true" in data
            has_path = "path" in data
            if has_theta == has_path:
                diags.append(Diagnostic("data", "give exactly one of theta_true or path"))
            if has_theta and model is not None:
                _check_theta(diags, model.space, data["theta_true"], "data.theta_true")
            if "seed" in data and not isinstance(data["seed"], int):
                diags.append(Diagnostic("data.seed", "must be an integer"))

    fit_section = raw.get("fit", {})
    if not isinstance(fit_section, dict):
        diags.append(Diagnostic("fit", "must be an object"))
    elif "starts" in fit_section and (not isinstance(fit_section["starts"], int) or fit_section["starts"] < 1):
        diags.append(Diagnostic("fit.starts", "must be a positive integer"))

    fim_section = raw.get("fim")
    if fim_section is not None:
        if not isinstance(fim_section, dict):
            diags.append(Diagnostic("fim", "must be an object"))
        else:
            if "theta" in fim_section and model is not None:
                _check_theta(diags, model.space, fim_section["theta"], "fim.theta")
            if "theta" not in fim_section and data is None:
                diags.append(Diagnostic("fim.theta", "required when no data section provides a fit"))
            tol = fim_section.get("rank_tolerance", DEFAULT_RANK_TOL)
            if not _is_number(tol) or not 0 < tol < 1:
                diags.append(Diagnostic("fim.rank_tolerance", "must be in (0, 1)"))
            level = fim_section.get("level", 0.95)
            if not _is_number(level) or not 0 < level < 1:
                diags.append(Diagnostic("fim.level", "must be in (0, 1)"))

    ds_section = raw.get("design_score")
    if ds_section is not None:
        if not isinstance(ds_section, dict):
            diags.append(Diagnostic("design_score", "must be an object"))
        else:
            criterion = ds_section.get("criterion", "D")
            if criterion not in DESIGN_CRITERIA:
                diags.append(Diagnostic("design_score.criterion", f"must be one of {DESIGN_CRITERIA}"))
            if "theta" in ds_section and model is not None:
                _check_theta(diags, model.space, ds_section["theta"], "design_score.theta")
            if "theta" not in ds_section and data is None:
                diags.append(Diagnostic("design_score.theta", "required when no data section provides a fit"))

    profile_section = raw.get("profile")
    if profile_section is not None:
        if not isinstance(profile_section, dict):
            diags.append(Diagnostic("profile", "must be an object"))
        else:
            if data is None:
                diags.append(Diagnostic("profile", "requires a data section"))
            params = profile_section.get("parameters")
            if params is not None:
                if not isinstance(params, list) or not all(isinstance(i, int) for i in params):
                    diags.append(Diagnostic("profile.parameters", "must be a list of indices"))
                elif model is not None and any(not 0 <= i < model.space.dimension for i in params):
                    diags.append(Diagnostic("profile.parameters", "index out of range"))
            points = profile_section.get("points", DEFAULT_GRID_POINTS)
            if not isinstance(points, int) or points < 3:
                diags.append(Diagnostic("profile.points", "must be an integer >= 3"))
            grid = profile_section.get("grid")
            if grid is not None:
                if not isinstance(grid, list) or len(grid) < 3 or not all(_is_number(g) for g in grid):
                    diags.append(Diagnostic("profile.grid", "must be a list of at least 3 numbers"))
                elif model is not None:
                    arr = np.asarray(grid, dtype=float)
                    indices = params if isinstance(params, list) else range(model.space.dimension)
                    for i in indices:
                        if not isinstance(i, int) or not 0 <= i < model.space.dimension:
                            continue
                        lo, hi = model.space.lower[i], model.space.upper[i]
                        if arr.min() < lo or arr.max() > hi:
                            diags.append(Diagnostic(
                                "profile.grid",
                                f"exits the admissible slice [{lo:g}, {hi:g}] of parameter {i}",
                            ))
                            break
            level = profile_section.get("level", 0.95)
            if not _is_number(level) or not 0 < level < 1:
                diags.append(Diagnostic("profile.level", "must be in (0, 1)"))

    sobol_section = raw.get("sobol")
    if sobol_section is not None:
        if not isinstance(sobol_section, dict):
            diags.append(Diagnostic("sobol", "must be an object"))
        else:
            n = sobol_section.get("n_samples", 4096)
            if not isinstance(n, int) or n < MIN_SAMPLES or n & (n - 1):
                diags.append(Diagnostic("sobol.n_samples", f"must be a power of two >= {MIN_SAMPLES}"))
            if "prior" in sobol_section and model is not None:
                _check_prior(diags, model.space, sobol_section["prior"], "sobol.prior")
            bootstrap = sobol_section.get("bootstrap", 200)
            if not isinstance(bootstrap, int) or bootstrap < 0:
                diags.append(Diagnostic("sobol.bootstrap", "must be a non-negative integer"))

    recover_section = raw.get("recover")
    if recover_section is not None:
        if not isinstance(recover_section, dict):
            diags.append(Diagnostic("recover", "must be an object"))
        else:
            k = recover_section.get("k_trials", 20)
            if not isinstance(k, int) or k < 1:
                diags.append(Diagnostic("recover.k_trials", "must be an integer >= 1"))
            n_starts = recover_section.get("n_starts", DEFAULT_STARTS)
            if not isinstance(n_starts, int) or n_starts < 1:
                diags.append(Diagnostic("recover.n_starts", "must be an integer >= 1"))
            tolerance = recover_section.get("tolerance", DEFAULT_TOLERANCE)
            if not _is_number(tolerance) or tolerance <= 0:
                diags.append(Diagnostic("recover.tolerance", "must be a positive number"))
            if "prior" in recover_section and model is not None:
                _check_prior(diags, model.space, recover_section["prior"], "recover.prior")

    return diags


def build_config(raw: dict) -> RunConfig:
    """Typed configuration from a document that passed :func:`validate_config`."""
    model = get_model(str(raw["model"]["name"]), **raw["model"].get("constants", {}))
    dsec = raw["design"]
    design = Design(
        np.asarray(dsec["times"], dtype=float),
        float(dsec["noise_sd"]),
        int(dsec.get("replicates", 1)),
    )
    seed = int(raw.get("seed", 0))

    data = None
    if raw.get("data") is not None:
        d = raw["data"]
        data = DataSection(
            theta_true=None if "theta_true" not in d else np.asarray(d["theta_true"], dtype=float),
            path=d.get("path"),
            seed=d.get("seed"),
        )

    fit = FitSection(starts=int(raw.get("fit", {}).get("starts", DEFAULT_STARTS)))

    fim = None
    if raw.get("fim") is not None:
        f = raw["fim"]
        fim = FimSection(
            theta=None if "theta" not in f else np.asarray(f["theta"], dtype=float),
            rank_tolerance=float(f.get("rank_tolerance", DEFAULT_RANK_TOL)),
            level=float(f.get("level", 0.95)),
        )

    design_score = None
    if raw.get("design_score") is not None:
        d = raw["design_score"]
        design_score = DesignScoreSection(
            criterion=str(d.get("criterion", "D")),
            theta=None if "theta" not in d else np.asarray(d["theta"], dtype=float),
        )

    profile = None
    if raw.get("profile") is not None:
        p = raw["profile"]
        profile = ProfileSection(
            parameters=p.get("parameters"),
            points=int(p.get("points", DEFAULT_GRID_POINTS)),
            span_sd=float(p.get("span_sd", DEFAULT_SPAN_SD)),
            level=float(p.get("level", 0.95)),
            flatness_tol=float(p.get("flatness_tol", FLATNESS_TOL)),
            multistart=int(p.get("multistart", 0)),
            grid=None if p.get("grid") is None else np.asarray(p["grid"], dtype=float),
        )

    sobol = None
    if raw.get("sobol") is not None:
        s = raw["sobol"]
        prior = None
        if "prior" in s:
            prior = _check_prior([], model.space, s["prior"], "sobol.prior")
        sobol = SobolSection(
            n_samples=int(s.get("n_samples", 4096)),
            bootstrap=int(s.get("bootstrap", 200)),
            prior=prior,
        )

    recover = None
    if raw.get("recover") is not None:
        r = raw["recover"]
        prior = None
        if "prior" in r:
            prior = _check_prior([], model.space, r["prior"], "recover.prior")
        recover = RecoverSection(
            k_trials=int(r.get("k_trials", 20)),
            n_starts=int(r.get("n_starts", DEFAULT_STARTS)),
            tolerance=float(r.get("tolerance", DEFAULT_TOLERANCE)),
            prior=prior,
        )

    return RunConfig(
        model=model, design=design, seed=seed, data=data, fit=fit,
        fim=fim, design_score=design_score, profile=profile,
        sobol=sobol, recover=recover, raw=raw,
    )

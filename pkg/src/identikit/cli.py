"""Command-line entry point: dispatch analyses from a JSON run configuration.

Usage::

    identikit <fim|profile|sobol|recover|design-score|all>
              --config run.json --out results/ [--threads N] [--seed S]
    identikit --list-models

Analyses run in dependency order (data, then fit, then the requested
reports); outputs are one ``summary.json`` plus per-analysis CSVs.  Exit
codes: 0 success, 2 configuration/validation error, 3 analysis failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .config import Diagnostic, RunConfig, build_config, load_raw, validate_config
from .estimation import estimates_csv, multi_start_fit
from .fim import IDENTIFIABLE, confidence_ellipsoid, design_score, fim_report
from .models import builtin_registry, generate_data, load_dataset, save_dataset
from .profile import profile_parameter
from .recovery import global_recovery
from .serialize import write_csv, write_json
from .sobol import Prior, sobol_indices

SUBCOMMANDS = ("fim", "profile", "sobol", "recover", "design-score", "all")
_SECTION_FOR = {"design-score": "design_score"}


def _section_name(subcommand: str) -> str:
    return _SECTION_FOR.get(subcommand, subcommand)


def list_models() -> str:
    lines = ["name                     p  identifiability"]
    for model in builtin_registry():
        label = model.identifiability or "-"
        lines.append(f"{model.name:<22} {model.space.dimension:>3}  {label}")
    return "\n".join(lines)


def _finite_or_none(x: float):
    return float(x) if math.isfinite(x) else None


def _estimate_payload(result) -> dict:
    return {
        "theta": result.theta.tolist(),
        "objective": result.objective,
        "sigma2": result.sigma2,
        "converged": result.converged,
        "iterations": result.iterations,
        "reason": result.reason,
        "start": result.start.tolist(),
        "failure": result.failure,
    }


def run_analyses(config: RunConfig, selection: list[str], out_dir: Path, threads: int = 1) -> dict:
    """Execute the selected analyses and write their report files."""
    model = config.model
    design = config.design
    names = model.space.parameter_names()
    results: dict = {}

    dataset = None
    if config.data is not None:
        if config.data.path is not None:
            dataset = load_dataset(config.data.path)
        else:
            data_seed = config.seed if config.data.seed is None else config.data.seed
            dataset = generate_data(model, design, config.data.theta_true, data_seed)
        save_dataset(dataset, out_dir / "dataset.csv")

    needs_fit = ("profile" in selection and config.profile is not None) or (
        "fim" in selection and config.fim is not None and config.fim.theta is None
    ) or (
        "design_score" in selection
        and config.design_score is not None
        and config.design_score.theta is None
    )
    best = None
    if needs_fit:
        if dataset is None:
            raise ValueError("fit requested but no data section is configured")
        fits = multi_start_fit(model, dataset, config.fit.starts, config.seed, threads=threads)
        best = next((r for r in fits if r.converged), fits[0])
        header, rows = estimates_csv(fits, names)
        write_csv(out_dir / "fit.csv", header, rows)
        results["fit"] = {
            "starts": config.fit.starts,
            "best": _estimate_payload(best),
            "estimates": [_estimate_payload(r) for r in fits],
        }

    if "fim" in selection and config.fim is not None:
        theta = config.fim.theta if config.fim.theta is not None else best.theta
        report = fim_report(model, design, theta, rank_tolerance=config.fim.rank_tolerance)
        block = {"theta": np.asarray(theta, dtype=float).tolist(), **report.to_dict()}
        block["scores"] = {
            "D": float(np.prod(report.eigenvalues)),
            "A": _finite_or_none(
                float(np.sum(1.0 / report.eigenvalues))
                if report.classification == IDENTIFIABLE else float("inf")
            ),
            "E": float(report.eigenvalues[-1]),
        }
        if report.classification == IDENTIFIABLE:
            ellipsoid = confidence_ellipsoid(report, theta, config.fim.level)
            block["ellipsoid"] = {
                "level": ellipsoid.level,
                "center": ellipsoid.center.tolist(),
                "axes": ellipsoid.axes.tolist(),
                "semi_axis_lengths": ellipsoid.semi_axis_lengths.tolist(),
            }
        results["fim"] = block

    if "design_score" in selection and config.design_score is not None:
        theta = config.design_score.theta if config.design_score.theta is not None else best.theta
        score = design_score(model, design, theta, config.design_score.criterion)
        results["design_score"] = {
            "criterion": config.design_score.criterion,
            "theta": np.asarray(theta, dtype=float).tolist(),
            "score": _finite_or_none(score),
        }

    if "profile" in selection and config.profile is not None:
        psec = config.profile
        indices = psec.parameters if psec.parameters is not None else list(range(model.space.dimension))

        def one_profile(i):
            return profile_parameter(
                model, dataset, best, i,
                grid=psec.grid, points=psec.points, span_sd=psec.span_sd,
                level=psec.level, flatness_tol=psec.flatness_tol,
                multistart=psec.multistart, seed=config.seed,
            )

        if threads > 1 and len(indices) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                curves = list(pool.map(one_profile, indices))
        else:
            curves = [one_profile(i) for i in indices]
        block = {}
        for curve in curves:
            write_csv(
                out_dir / f"profile_{curve.index}.csv",
                ["theta_i", "profile_loglik", "converged"],
                curve.csv_rows(),
            )
            block[str(curve.index)] = {
                "parameter": names[curve.index],
                "grid": curve.grid.tolist(),
                "profile_loglik": curve.values.tolist(),
                "converged": curve.converged.tolist(),
                "loglik_hat": curve.loglik_hat,
                "level": curve.level,
                "interval": {
                    "lower": curve.interval.lower,
                    "upper": curve.interval.upper,
                    "lower_open": curve.interval.lower_open,
                    "upper_open": curve.interval.upper_open,
                },
                "classification": curve.classification,
                "total_variation": curve.total_variation,
                "truncated": curve.truncated,
            }
        results["profile"] = block

    if "sobol" in selection and config.sobol is not None:
        ssec = config.sobol
        prior = ssec.prior or Prior.uniform_box(model.space)
        report = sobol_indices(
            model, design, prior, ssec.n_samples,
            seed=config.seed, bootstrap=ssec.bootstrap,
        )
        write_csv(
            out_dir / "sobol.csv",
            ["parameter", "S_first", "S_first_se", "S_total", "S_total_se"],
            [
                [names[i], float(report.first[i]), float(report.first_se[i]),
                 float(report.total[i]), float(report.total_se[i])]
                for i in range(model.space.dimension)
            ],
        )
        results["sobol"] = {"parameters": list(names), **report.to_dict()}

    if "recover" in selection and config.recover is not None:
        rsec = config.recover
        report = global_recovery(
            model, design, rsec.k_trials, prior=rsec.prior, seed=config.seed,
            n_starts=rsec.n_starts, tolerance=rsec.tolerance, threads=threads,
        )
        write_csv(out_dir / "recovery.csv", report.csv_header(names), report.csv_rows())
        results["recovery"] = {
            "k_trials": rsec.k_trials,
            "tolerance": report.tolerance,
            "success_rate": report.success_rate,
            "symmetry_success_rate": report.symmetry_success_rate,
            "error_p50": report.error_p50.tolist(),
            "error_p90": report.error_p90.tolist(),
            "error_max": report.error_max.tolist(),
            "verdict": report.verdict,
            "trials": [
                {
                    "seed": t.seed,
                    "theta_true": t.theta_true.tolist(),
                    "theta_hat": t.theta_hat.tolist(),
                    "objective": t.objective,
                    "rel_errors": t.rel_errors.tolist(),
                    "success": t.success,
                    "success_symmetry": t.success_symmetry,
                    "converged": t.converged,
                }
                for t in report.trials
            ],
        }

    return results


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    if "--list-models" in argv:
        print(list_models())
        return 0

    parser = argparse.ArgumentParser(
        prog="identikit",
        description="Parameter identifiability analyses for deterministic time-series models.",
    )
    parser.add_argument("--list-models", action="store_true", help="print the built-in model registry")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sub = subparsers.add_parser(name)
        sub.add_argument("--config", required=True, help="run configuration (JSON)")
        sub.add_argument("--out", required=True, help="output directory")
        sub.add_argument("--threads", type=int, default=1, help="worker cap; results are thread-count invariant")
        sub.add_argument("--seed", type=int, default=None, help="override the configured seed")
    args = parser.parse_args(argv)

    raw, diags = load_raw(args.config)
    if raw is not None:
        diags = validate_config(raw)
    if raw is not None and not diags:
        if args.subcommand == "all":
            if not any(raw.get(s) is not None for s in
                       ("fim", "design_score", "profile", "sobol", "recover")):
                diags.append(Diagnostic("config", "no analysis sections present"))
        else:
            section = _section_name(args.subcommand)
            if raw.get(section) is None:
                diags.append(Diagnostic(section, "section missing for requested analysis"))
    if diags:
        for d in diags:
            print(f"config error - {d}", file=sys.stderr)
        return 2

    config = build_config(raw)
    if args.seed is not None:
        config.seed = args.seed
        config.raw = {**config.raw, "seed": args.seed}
    selection = (
        config.sections_present() if args.subcommand == "all" else [_section_name(args.subcommand)]
    )

    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        results = run_analyses(config, selection, out_dir, threads=args.threads)
        summary = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "seed": config.seed,
            "model": config.model.name,
            "analyses": selection,
            "config": config.raw,
            "results": results,
        }
        write_json(out_dir / "summary.json", summary)
    except Exception as exc:  # analysis failure, not a config problem
        print(f"analysis failed: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""Command-line interface.

    summarycorr estimate --input studies.csv [--alpha 0.05] [--group-by center] [--sd] [--out report.json]
    summarycorr simulate (--grid main|large_n | --scenarios cells.json) --out-dir DIR [--seed S] [--threads T]
    summarycorr compare --input studies.csv --rho-true 0.7

Reports are JSON.  Failures print a JSON error object on stderr and exit
with a code identifying the failure class.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from . import __version__
from .baselines import delta_metric, naive_pearson, weighted_pearson
from .errors import (
    DegenerateInputError,
    DomainError,
    InputFormatError,
    NumericalError,
    ValidationError,
)
from .estimator import Interval, estimate_full
from .simulation import (
    DEFAULT_SEED,
    Scenario,
    _cell_seed,
    paper_scenario_grid,
    run_grid,
    write_aggregate_csv,
    write_metadata,
    write_replicate_csv,
)
from .tables import read_summary_table

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_NUMERICAL = 5
EXIT_IO = 6

SEED_ENV = "SUMMARY_CORR_SEED"


class CliError(Exception):
    def __init__(self, kind, code, message, **extra):
        super().__init__(message)
        self.kind, self.code, self.extra = kind, code, extra


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _interval(ci: Interval | None):
    if ci is None:
        return None
    return {"lo": ci.lo, "hi": ci.hi, "lo_truncated": ci.lo_truncated, "hi_truncated": ci.hi_truncated}


def _baseline(fn, studies):
    try:
        return fn(studies)
    except DegenerateInputError:
        return None


def estimate_report(studies, alpha: float) -> dict:
    """JSON-ready estimation report for one list of studies."""
    params, est = estimate_full(studies, alpha)
    return {
        "k": len(studies),
        "total_n": sum(s.n for s in studies),
        "mu_x": params.mu_x,
        "mu_y": params.mu_y,
        "sigma_x": params.sigma_x,
        "sigma_y": params.sigma_y,
        "rho_hat": est.rho_hat,
        "se": est.se,
        "information": est.information,
        "ci_wald": _interval(est.ci_wald),
        "ci_lrt": _interval(est.ci_lrt),
        "loglik_at_max": _clean(est.loglik_at_max),
        "grid_start": est.grid_start,
        "converged": est.converged,
        "at_boundary": est.at_boundary,
        "warnings": list(est.warnings),
        "baselines": {
            "naive_pearson": _baseline(naive_pearson, studies),
            "weighted_pearson": _baseline(weighted_pearson, studies),
        },
    }


def _load_table(args, group_by=None):
    try:
        return read_summary_table(args.input, group_by=group_by, sd=args.sd)
    except OSError as exc:
        raise CliError("io", EXIT_IO, f"cannot read {args.input}: {exc}") from None
    except InputFormatError as exc:
        raise CliError("parse", EXIT_PARSE, str(exc), row=exc.row, column=exc.column) from None
    except ValidationError as exc:
        raise CliError("validation", EXIT_VALIDATION, str(exc), row=exc.row, column=exc.column) from None


def _emit(payload: dict, out: str | None):
    text = json.dumps(payload, indent=2, allow_nan=False) + "\n"
    if out:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise CliError("io", EXIT_IO, f"cannot write {out}: {exc}") from None
    else:
        sys.stdout.write(text)


def cmd_estimate(args) -> int:
    table = _load_table(args, group_by=args.group_by)
    groups = []
    failed = False
    for name, studies in table.groups().items():
        entry = {"group": name}
        try:
            entry.update(estimate_report(studies, args.alpha))
        except NumericalError as exc:
            failed = True
            entry["error"] = {"type": "numerical", "message": str(exc), "diagnostics": exc.diagnostics}
        groups.append(entry)
    payload = {
        "ok": not failed,
        "version": __version__,
        "input": str(args.input),
        "alpha": args.alpha,
        "group_by": args.group_by,
        "groups": groups,
    }
    _emit(payload, args.out)
    return EXIT_NUMERICAL if failed else EXIT_OK


def cmd_compare(args) -> int:
    table = _load_table(args)
    studies = table.studies()
    _, est = estimate_full(studies)
    try:
        naive = naive_pearson(studies)
        weighted = weighted_pearson(studies)
    except DegenerateInputError as exc:
        raise CliError("validation", EXIT_VALIDATION, str(exc)) from None
    payload = {
        "ok": True,
        "rho_true": args.rho_true,
        "rho_hat": est.rho_hat,
        "rho_naive": naive,
        "rho_weighted": weighted,
        "delta_naive": delta_metric(est.rho_hat, naive, args.rho_true),
        "delta_weighted": delta_metric(est.rho_hat, weighted, args.rho_true),
    }
    _emit(payload, args.out)
    return EXIT_OK


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise CliError("usage", EXIT_USAGE, f"{SEED_ENV} must be an integer, got {env!r}") from None
    return DEFAULT_SEED


def load_scenarios(path, seed: int) -> list[Scenario]:
    """Read custom cells from JSON: a list of objects or ``{"scenarios": [...]}``.

    Cells without ``base_seed`` get one derived from ``seed`` and their position.
    """
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise CliError("io", EXIT_IO, f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise CliError("parse", EXIT_PARSE, f"invalid scenario JSON: {exc}") from None
    if isinstance(data, dict):
        data = data.get("scenarios")
    if not isinstance(data, list) or not data:
        raise CliError("validation", EXIT_VALIDATION, "scenario JSON must hold a non-empty list of cells")
    cells = []
    for i, item in enumerate(data):
        if not isinstance(item, dict):
            raise CliError("validation", EXIT_VALIDATION, f"scenario {i} is not an object")
        item = {"base_seed": _cell_seed(seed, i), **item}
        try:
            cells.append(Scenario.from_dict(item))
        except (DomainError, TypeError) as exc:
            raise CliError("validation", EXIT_VALIDATION, f"scenario {i}: {exc}") from None
    return cells


def cmd_simulate(args) -> int:
    seed = _resolve_seed(args)
    if args.scenarios:
        cells = load_scenarios(args.scenarios, seed)
        if args.replicates:
            cells = [Scenario.from_dict(c.to_dict() | {"replicates": args.replicates}) for c in cells]
        grid_name = "custom"
    else:
        cells = paper_scenario_grid(args.grid, seed=seed, replicates=args.replicates or 1000)
        grid_name = args.grid
    out = Path(args.out_dir)
    try:
        (out / "replicates").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError("io", EXIT_IO, f"cannot create {out}: {exc}") from None

    results = run_grid(cells, workers=max(1, args.threads))
    try:
        for res in results:
            write_replicate_csv(out / "replicates" / f"{res.scenario.scenario_id}.csv", res.records)
        write_aggregate_csv(out / "aggregate.csv", results)
        write_metadata(
            out / "metadata.json",
            cells,
            seed,
            grid=grid_name,
            excluded_replicates={r.scenario.scenario_id: r.excluded_replicates for r in results},
        )
    except OSError as exc:
        raise CliError("io", EXIT_IO, f"cannot write results to {out}: {exc}") from None
    summary = {
        "ok": True,
        "grid": grid_name,
        "seed": seed,
        "out_dir": str(out),
        "scenarios": len(results),
        "excluded_replicates": sum(r.excluded_replicates for r in results),
    }
    sys.stdout.write(json.dumps(summary) + "\n")
    return EXIT_OK


def _probability(text):
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return value


def _correlation(text):
    value = float(text)
    if not -1.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [-1, 1], got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="summarycorr",
        description="Estimate a bivariate normal correlation from study-level marginal summaries.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate parameters from a summary CSV")
    p.add_argument("--input", required=True, help="CSV with study_id,n,mean_x,mean_y,var_x,var_y")
    p.add_argument("--alpha", type=_probability, default=0.05)
    p.add_argument("--group-by", default=None, help="column defining independent groups")
    p.add_argument("--sd", action="store_true", help="spread columns are sd_x,sd_y (squared on input)")
    p.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", help="run a simulation grid")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--grid", choices=("main", "large_n"))
    src.add_argument("--scenarios", help="JSON file with custom scenario cells")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None, help=f"default ${SEED_ENV} or {DEFAULT_SEED}")
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.add_argument("--replicates", type=int, default=None, help="override replicates per cell")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="compare the MLE with the mean-based baselines")
    p.add_argument("--input", required=True)
    p.add_argument("--rho-true", type=_correlation, required=True)
    p.add_argument("--sd", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        error, code = {"type": exc.kind, "message": str(exc), **exc.extra}, exc.code
    except NumericalError as exc:
        error = {"type": "numerical", "message": str(exc), "diagnostics": exc.diagnostics}
        code = EXIT_NUMERICAL
    except (DomainError, DegenerateInputError) as exc:
        error, code = {"type": "validation", "message": str(exc)}, EXIT_VALIDATION
    sys.stderr.write(json.dumps({"ok": False, "error": error}, default=str) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())

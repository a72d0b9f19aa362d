"""Command line front end: fit, combine, experiment, ingest-experiment, synth.

Artifacts are JSON for configuration and metadata, CSV for tables.  Exit
codes: 0 success, 1 usage or configuration problem, 2 statistical failure
(a likelihood without a maximizer, or an aborted experiment).  The
LOGSPLIT_SEED environment variable overrides any configured seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from .bspline import KnotSequence
from .consensus import (
    InterpolationGrid,
    ProductEstimator,
    build_interpolant,
    choose_dx,
    interpolant_eval,
    negative_lobe_mass,
    normalized_eval,
)
from .errors import (
    DegenerateProduct,
    DegreeTooHigh,
    EmptySubset,
    ExperimentAborted,
    GridTooCoarse,
    InvalidSupport,
    LogsplitError,
    NoMaximizer,
    NonConvergence,
    ParseError,
    SupportMismatch,
)
from .logspline import (
    LogsplineFit,
    LogsplineModel,
    SampleSet,
    choose_knots,
    density_table,
    fit,
)
from .mise_lab import (
    ExperimentConfig,
    combine_subsets,
    ingest_subsets,
    parse_target,
    run_experiment,
    synthesize_subsets,
    _read_sample_file,
)

USAGE_ERROR = 1
STATISTICAL_ERROR = 2

_CONFIG_ERRORS = (
    ValueError,
    KeyError,
    InvalidSupport,
    EmptySubset,
    ParseError,
    SupportMismatch,
    DegreeTooHigh,
    GridTooCoarse,
    OSError,
    json.JSONDecodeError,
)
_STATISTICAL_ERRORS = (NoMaximizer, NonConvergence, DegenerateProduct, ExperimentAborted)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_csv(path: Path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(",".join(header) + "\n")
        for row in rows:
            handle.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path: Path, payload: dict):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _resolve_seed(configured):
    env = os.environ.get("LOGSPLIT_SEED")
    if env is not None:
        return int(env)
    return configured


def _fit_payload(result: LogsplineFit, beta: float, j: int, seed) -> dict:
    return {
        "schema": "logsplit-fit-v1",
        "support": list(result.model.support),
        "order": result.model.knots.order,
        "knots": [float(t) for t in result.model.knots.knots],
        "coefficients": [float(c) for c in result.coefficients],
        "log_normalizer": result.log_normalizer,
        "sample_count": result.sample_count,
        "converged": result.converged,
        "beta": beta,
        "j": j,
        "seed": seed,
    }


def _load_fit(path) -> tuple[LogsplineFit, dict]:
    with open(path, "r", encoding="utf-8") as handle:
        payload = json.load(handle)
    if payload.get("schema") != "logsplit-fit-v1":
        raise ValueError(f"{path}: not a logsplit fit file")
    model = LogsplineModel(
        KnotSequence(np.asarray(payload["knots"], dtype=float), int(payload["order"]))
    )
    result = LogsplineFit(
        model,
        np.asarray(payload["coefficients"], dtype=float),
        float(payload["log_normalizer"]),
        int(payload["sample_count"]),
        bool(payload["converged"]),
    )
    return result, payload


def cmd_fit(args) -> int:
    values = _read_sample_file(args.samples)
    if args.support is not None:
        samples = SampleSet(values, tuple(args.support))
    else:
        samples = SampleSet.from_values(values)
    knots = choose_knots(samples.sample_count, samples.support,
                         beta=args.beta, j=args.j, k=args.k)
    result = fit(LogsplineModel(knots), samples)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = _resolve_seed(None)
    _write_json(out / "fit.json", _fit_payload(result, args.beta, args.j, seed))
    grid, dens = density_table(result, points=args.grid_points)
    _write_csv(out / "density.csv", ["x", "density"], zip(grid, dens))
    print(f"fit: n={result.sample_count} dim={result.model.dimension} "
          f"support=[{samples.support[0]:.6g}, {samples.support[1]:.6g}] -> {out}")
    return 0


def cmd_combine(args) -> int:
    loaded = [_load_fit(p) for p in args.fits]
    fits = [f for f, _ in loaded]
    payloads = [p for _, p in loaded]
    orders = {p["order"] for p in payloads}
    if len(orders) != 1:
        raise ValueError(f"fits use different spline orders {sorted(orders)}")
    pe = ProductEstimator(tuple(fits))
    betas = {p["beta"] for p in payloads}
    js = {p["j"] for p in payloads}
    if len(betas) != 1 or len(js) != 1:
        raise ValueError("fits were produced with different beta/j settings")
    beta, j = betas.pop(), js.pop()
    counts = np.array([p["sample_count"] for p in payloads], dtype=float)
    dx = choose_dx(float(np.linalg.norm(counts)), beta, args.l, int(j),
                   args.dx_constant, support=pe.support)
    grid = InterpolationGrid.from_node_spacing(pe.support, args.l, dx)
    interpolant = build_interpolant(pe, grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_combined(out, pe, interpolant, dx_constant=args.dx_constant,
                    seed=_resolve_seed(None))
    print(f"combine: M={pe.subset_count} pieces={grid.num_pieces} "
          f"dx={grid.dx:.6g} lambda={interpolant.lambda_tilde:.8g} -> {out}")
    return 0


def _write_combined(out: Path, pe, interpolant, dx_constant, seed):
    grid = interpolant.grid
    xs = grid.nodes
    p_hat = interpolant.node_values
    p_tilde = interpolant_eval(interpolant, xs)
    p_norm = normalized_eval(interpolant, xs)
    _write_csv(
        out / "combined.csv",
        ["x", "p_hat_star", "p_tilde", "p_tilde_normalized"],
        zip(xs, p_hat, p_tilde, p_norm),
    )
    _write_json(
        out / "meta.json",
        {
            "schema": "logsplit-combined-v1",
            "support": list(grid.support),
            "degree": grid.degree,
            "num_pieces": grid.num_pieces,
            "dx": grid.dx,
            "dx_constant": dx_constant,
            "lambda_tilde": interpolant.lambda_tilde,
            "negative_lobe_mass": negative_lobe_mass(interpolant),
            "subset_count": pe.subset_count,
            "sample_counts": [f.sample_count for f in pe.fits],
            "seed": seed,
        },
    )


def _validate_experiment_config(raw: dict) -> ExperimentConfig:
    def need(field, kind):
        if field not in raw:
            raise ValueError(f"{field}: required field missing")
        value = raw[field]
        try:
            return kind(value)
        except (TypeError, ValueError):
            raise ValueError(f"{field}: expected {kind.__name__}, got {value!r}") from None

    target = parse_target(need("target", dict))
    n_grid = raw.get("n_grid")
    if not isinstance(n_grid, (list, tuple)):
        raise ValueError("n_grid: expected a list of integers")
    cfg = ExperimentConfig(
        subsets=need("M", int),
        n_grid=tuple(int(n) for n in n_grid),
        target=target,
        replications=int(raw.get("replications", 100)),
        beta=float(raw.get("beta", 0.5)),
        j=int(raw.get("j", 1)),
        k=int(raw.get("k", 4)),
        l=int(raw.get("l", 1)),
        seed=int(raw.get("seed", 0)),
        dx_constant=float(raw.get("dx_constant", 1.0)),
        support_padding=float(raw.get("support_padding", 0.01)),
        support_trim=int(raw.get("support_trim", 10)),
        jobs=int(raw.get("jobs", 1)),
    )
    return cfg


def cmd_experiment(args) -> int:
    with open(args.config, "r", encoding="utf-8") as handle:
        raw = json.load(handle)
    raw["seed"] = _resolve_seed(raw.get("seed", 0))
    if args.jobs is not None:
        raw["jobs"] = args.jobs
    cfg = _validate_experiment_config(raw)
    report = run_experiment(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "results.csv", ["n", "mean_ise", "std_ise", "bound_value"],
               report.rows())
    _write_json(
        out / "report.json",
        {
            "schema": "logsplit-report-v1",
            "config": {
                "M": cfg.subsets,
                "n_grid": list(cfg.n_grid),
                "replications": cfg.replications,
                "beta": cfg.beta,
                "j": cfg.j,
                "k": cfg.k,
                "l": cfg.l,
                "target": cfg.target.as_dict(),
                "seed": cfg.seed,
                "dx_constant": cfg.dx_constant,
                "support_padding": cfg.support_padding,
                "support_trim": cfg.support_trim,
                "jobs": cfg.jobs,
            },
            "slope": report.slope,
            "intercept": report.intercept,
            "theoretical_slope": report.theoretical_slope,
            "bound_constant": report.bound_constant,
            "failed_replications": {str(n): c for n, c in report.failed.items()},
            "seed": cfg.seed,
        },
    )
    print(f"experiment: slope={report.slope:.4f} theoretical={report.theoretical_slope} "
          f"-> {out}")
    return 0


def cmd_ingest_experiment(args) -> int:
    sets = ingest_subsets(args.subsets)
    fits, interpolant = combine_subsets(
        sets, beta=args.beta, j=args.j, k=args.k, l=args.l,
        dx_constant=args.dx_constant,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = _resolve_seed(None)
    for m, result in enumerate(fits, start=1):
        _write_json(out / f"fit_{m:02d}.json",
                    _fit_payload(result, args.beta, args.j, seed))
        grid, dens = density_table(result, points=args.grid_points)
        _write_csv(out / f"density_{m:02d}.csv", ["x", "density"], zip(grid, dens))
    pe = ProductEstimator(tuple(fits))
    _write_combined(out, pe, interpolant, dx_constant=args.dx_constant, seed=seed)
    print(f"ingest-experiment: M={len(fits)} "
          f"n={[s.sample_count for s in sets]} -> {out}")
    return 0


def cmd_synth(args) -> int:
    target = parse_target(json.loads(args.target))
    seed = _resolve_seed(args.seed)
    paths = synthesize_subsets(target, args.m, args.rows, seed, args.out)
    _write_json(
        Path(args.out) / "manifest.json",
        {
            "schema": "logsplit-synth-v1",
            "target": target.as_dict(),
            "subsets": args.m,
            "rows": args.rows,
            "seed": seed,
            "files": [p.name for p in paths],
        },
    )
    print(f"synth: wrote {len(paths)} files of {args.rows} rows to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="logsplit",
                     description="Subset-posterior density estimation pipelines")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit one subset's samples")
    p_fit.add_argument("samples", help="CSV of samples, one value per line")
    p_fit.add_argument("--support", nargs=2, type=float, metavar=("A", "B"))
    p_fit.add_argument("--beta", type=float, default=0.5)
    p_fit.add_argument("--j", type=int, default=1)
    p_fit.add_argument("--k", type=int, default=4)
    p_fit.add_argument("--grid-points", type=int, default=1000)
    p_fit.add_argument("--out", required=True)
    p_fit.set_defaults(func=cmd_fit)

    p_comb = sub.add_parser("combine", help="combine fitted subsets")
    p_comb.add_argument("fits", nargs="+", help="fit.json files")
    p_comb.add_argument("--l", type=int, default=1)
    p_comb.add_argument("--dx-constant", type=float, default=1.0)
    p_comb.add_argument("--out", required=True)
    p_comb.set_defaults(func=cmd_combine)

    p_exp = sub.add_parser("experiment", help="run a convergence-rate experiment")
    p_exp.add_argument("config", help="experiment config JSON")
    p_exp.add_argument("--jobs", type=int, default=None,
                       help="cap on concurrent replications")
    p_exp.add_argument("--out", required=True)
    p_exp.set_defaults(func=cmd_experiment)

    p_ing = sub.add_parser("ingest-experiment",
                           help="fit and combine externally generated samples")
    p_ing.add_argument("subsets", nargs="+", help="subset CSV files")
    p_ing.add_argument("--beta", type=float, default=0.5)
    p_ing.add_argument("--j", type=int, default=1)
    p_ing.add_argument("--k", type=int, default=4)
    p_ing.add_argument("--l", type=int, default=1)
    p_ing.add_argument("--dx-constant", type=float, default=1.0)
    p_ing.add_argument("--grid-points", type=int, default=1000)
    p_ing.add_argument("--out", required=True)
    p_ing.set_defaults(func=cmd_ingest_experiment)

    p_syn = sub.add_parser("synth", help="generate synthetic subset CSVs")
    p_syn.add_argument("--target", default='{"name": "beta", "shape_a": 4.0, '
                       '"shape_b": 4.0, "lo": 1.2, "hi": 2.8}',
                       help="target JSON (same schema as experiment configs)")
    p_syn.add_argument("--m", type=int, default=5)
    p_syn.add_argument("--rows", type=int, default=2420)
    p_syn.add_argument("--seed", type=int, default=0)
    p_syn.add_argument("--out", required=True)
    p_syn.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        try:
            return args.func(args)
        except _STATISTICAL_ERRORS as exc:
            print(f"logsplit: {exc}", file=sys.stderr)
            return STATISTICAL_ERROR
        except _CONFIG_ERRORS as exc:
            print(f"logsplit: {exc}", file=sys.stderr)
            return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())

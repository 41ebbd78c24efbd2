"""Command-line entry point.

Subcommands: simulate, fit, predict, evaluate, sweep, repro-table1. Every
command is deterministic given its --seed; output files carry no timestamps,
so reruns are byte-identical. FAIRADJUST_OUT_DIR sets the directory that
relative --out paths resolve against.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import FairadjustError
from .estimators import components_to_dict, fit_components
from .ingest import (
    default_group_pairs,
    load_schema_config,
    load_train_test,
    write_csv,
    write_jsonl,
)
from .metrics import (
    MetricReport,
    aa_metric,
    eo_metric,
    evaluate_predictor,
    format_metric_table,
    predictive_score,
    reports_to_json,
)
from .predictors import (
    AA,
    EO,
    KINDS,
    ML,
    build_aa,
    build_all,
    build_eo,
    build_ml,
    predictor_from_dict,
)
from .simulate import ScmParams, SimSpec, admissions_schema, simulate, sweep_specs

# holdout applicants of the worked admissions example and the decision
# probabilities each predictor should reproduce for them
TABLE1_APPLICANTS = {"A": ("f", 0.85), "B": ("m", 0.85), "C": ("f", 0.65)}
TABLE1_REFERENCE = {
    "A": {"ml": 0.67, "eo": 0.77, "aa": 0.78},
    "B": {"ml": 0.84, "eo": 0.77, "aa": 0.76},
    "C": {"ml": 0.57, "eo": 0.69, "aa": 0.70},
}


def true_components(params: ScmParams):
    """Generator-truth components: no fitting, exact group means and prior."""
    from .estimators import (
        AttributeRegression,
        FittedComponents,
        LinearModel,
        LogisticModel,
        SensitiveDistribution,
    )
    from .tabular import build_encoding

    schema = admissions_schema()
    encoding = build_encoding(schema)
    f_ml = LogisticModel(
        encoding.feature_names,
        np.array([params.beta_s, params.beta_a]),
        params.intercept,
    )
    p_s = SensitiveDistribution(
        (("f",), ("m",)), np.array([1.0 - params.p_male, params.p_male])
    )
    table = np.array(
        [[params.group_score_mean(False)], [params.group_score_mean(True)]]
    )
    g_model = LinearModel(
        ("s=m",), ("score",), table[1:] - table[0], table[0]
    )
    g = AttributeRegression(("score",), (("f",), ("m",)), table, g_model)
    return FittedComponents(schema, encoding, f_ml, p_s, g)


def _out_path(arg: str | None, default: str) -> Path:
    base = Path(os.environ.get("FAIRADJUST_OUT_DIR", "."))
    target = Path(arg) if arg else Path(default)
    return target if target.is_absolute() else base / target


def _add_sim_params(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--beta-a", type=float, default=2.0,
                        help="score coefficient in the decision logit")
    parser.add_argument("--beta-s", type=float, default=1.0,
                        help="male-indicator coefficient in the decision logit")
    parser.add_argument("--lam", type=float, default=0.02, metavar="SHIFT",
                        help="male group score advantage, normalized units in [0, 1]")
    parser.add_argument("--intercept", type=float, default=-1.0)
    parser.add_argument("--p-male", type=float, default=0.5)


def _params(args) -> ScmParams:
    return ScmParams(
        beta_a=args.beta_a,
        beta_s=args.beta_s,
        shift=args.lam,
        intercept=args.intercept,
        p_male=args.p_male,
    )


def cmd_simulate(args) -> int:
    spec = SimSpec(_params(args), args.n, args.seed)
    data = simulate(spec)
    out = _out_path(args.out, "simulated.csv" if args.emit == "csv" else "simulated.jsonl")
    if args.emit == "csv":
        write_csv(data, out)
    else:
        write_jsonl(data, out)
    print(f"wrote {data.n_rows} rows to {out}")
    return 0


def cmd_fit(args) -> int:
    config = load_schema_config(args.config)
    from .ingest import load

    data = load(config, args.data)
    components = fit_components(data)
    doc = components_to_dict(components)
    from .predictors import build_fairlearning, build_ftu

    doc["baselines"] = {
        "ftu": build_ftu(data).to_dict(),
        "fairlearning": build_fairlearning(data, components.g).to_dict(),
    }
    out = _out_path(args.out, "models.json")
    out.write_text(json.dumps(doc, indent=2, sort_keys=True))
    print(f"wrote fitted models to {out}")
    return 0


def cmd_predict(args) -> int:
    doc = json.loads(Path(args.models).read_text())
    if args.kind in (ML, EO, AA):
        from .estimators import components_from_dict

        components = components_from_dict(doc)
        predictor = {ML: build_ml, EO: build_eo, AA: build_aa}[args.kind](components)
    else:
        predictor = predictor_from_dict(doc["baselines"][args.kind])
    config = load_schema_config(args.config)
    from .ingest import load

    data = load(config, args.data)
    scores = predictor.score_batch(data)
    out = _out_path(args.out, "scores.csv")
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "score"])
        for i, s in enumerate(scores):
            writer.writerow([i, repr(float(s))])
    print(f"wrote {len(scores)} scores to {out}")
    return 0


def cmd_evaluate(args) -> int:
    config = load_schema_config(args.config)
    train, test = load_train_test(config, args.train_fraction, args.seed, args.data)
    predictors = build_all(train)
    g = predictors[AA].components.g
    pairs = config.group_pairs or default_group_pairs(train.schema)
    lower = train.schema.decision.kind != "binary"
    all_reports: dict[str, list[MetricReport]] = {}
    blocks = []
    for pair in pairs:
        reports = [
            evaluate_predictor(predictors[kind], test, pair, g, bins=args.bins)
            for kind in KINDS
        ]
        key = f"{pair.column}:{pair.advantaged}/{pair.disadvantaged}"
        all_reports[key] = reports
        title = (f"Metrics (x10^2), {pair.column} "
                 f"adv={pair.advantaged} dis={pair.disadvantaged}")
        blocks.append(format_metric_table(reports, title, lower_is_better=lower))
    text = "\n\n".join(blocks)
    if args.emit == "json":
        text = reports_to_json(all_reports)
    if args.out:
        out = _out_path(args.out, "evaluation.txt")
        out.write_text(text + "\n")
        print(f"wrote evaluation to {out}")
    else:
        print(text)
    return 0


SWEEP_METRICS = ("predictive_score", "eo_metric", "aa_metric")


def _sweep_cell(payload):
    """Evaluate one (grid value, replicate) cell. Top level for pickling."""
    spec, test_n, value = payload
    full = simulate(replace(spec, n=spec.n + test_n))
    idx = np.arange(full.n_rows)
    train, test = full.subset(idx[: spec.n]), full.subset(idx[spec.n :])
    try:
        predictors = build_all(train)
        g = predictors[AA].components.g
        pair = default_group_pairs(train.schema)[0]
        results = {}
        for kind, predictor in predictors.items():
            results[kind] = {
                "predictive_score": predictive_score(predictor, test),
                "eo_metric": eo_metric(predictor, test, pair),
                "aa_metric": aa_metric(predictor, test, pair, g),
            }
    except FairadjustError as exc:
        return value, None, str(exc)
    return value, results, None


def run_sweep(
    base: ScmParams,
    vary: str,
    grid: list[float],
    replicates: int,
    seed: int,
    n: int = 5000,
    test_n: int = 10000,
    jobs: int = 1,
):
    """Simulate, fit, and evaluate every sweep cell; aggregate mean/sd.

    Returns (records, failures): records are dicts with keys varied_param,
    value, predictor, metric, mean, sd; failures list (value, replicate,
    message) for cells whose fit failed.
    """
    specs = sweep_specs(base, vary, grid, replicates, seed, n=n)
    payloads = [
        (spec, test_n, grid[i // replicates]) for i, spec in enumerate(specs)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_sweep_cell, payloads))
    else:
        outcomes = [_sweep_cell(p) for p in payloads]

    by_value: dict[float, list[dict]] = {v: [] for v in grid}
    failures = []
    for i, (value, results, error) in enumerate(outcomes):
        if error is not None:
            failures.append((value, i % replicates, error))
        else:
            by_value[value].append(results)
    records = []
    for value in grid:
        cells = by_value[value]
        for kind in KINDS:
            for metric in SWEEP_METRICS:
                samples = [c[kind][metric] for c in cells]
                records.append(
                    {
                        "varied_param": vary,
                        "value": value,
                        "predictor": kind,
                        "metric": metric,
                        "mean": float(np.mean(samples)) if samples else float("nan"),
                        "sd": float(np.std(samples)) if samples else float("nan"),
                    }
                )
    return records, failures


def cmd_sweep(args) -> int:
    grid = [float(v) for v in args.grid.split(",") if v.strip()]
    if not grid:
        print("error: empty sweep grid", file=sys.stderr)
        return 2
    records, failures = run_sweep(
        _params(args),
        args.vary,
        grid,
        args.replicates,
        args.seed,
        n=args.n,
        test_n=args.test_n,
        jobs=args.jobs,
    )
    out = _out_path(args.out, "sweep.csv")
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["varied_param", "value", "predictor", "metric", "mean", "sd"])
        for r in records:
            mean = "" if np.isnan(r["mean"]) else repr(r["mean"])
            sd = "" if np.isnan(r["sd"]) else repr(r["sd"])
            writer.writerow(
                [r["varied_param"], repr(r["value"]), r["predictor"], r["metric"], mean, sd]
            )
    for value, rep, message in failures:
        print(f"warning: fit failed at {args.vary}={value} replicate {rep}: {message}",
              file=sys.stderr)
    print(f"wrote {len(records)} sweep records to {out}"
          + (f" ({len(failures)} failed cells)" if failures else ""))
    return 0


def repro_table1(seed: int, n: int = 5000, use_true_params: bool = False):
    """Score the three holdout applicants with the ml, eo, and aa predictors.

    Returns {applicant: {kind: score}}. With use_true_params the generator's
    own coefficients are used instead of fitting, which isolates the
    adjustment arithmetic from estimation error.
    """
    params = ScmParams()
    if use_true_params:
        components = true_components(params)
    else:
        data = simulate(SimSpec(params, n, seed))
        from .estimators import fit_components as _fit

        components = _fit(data)
    scorers = {
        "ml": build_ml(components),
        "eo": build_eo(components),
        "aa": build_aa(components),
    }
    table = {}
    for name, (sex, score) in TABLE1_APPLICANTS.items():
        row = {"sex": sex, "score": score}
        table[name] = {kind: scorers[kind].score_row(row) for kind in ("ml", "eo", "aa")}
    return table


def cmd_repro_table1(args) -> int:
    table = repro_table1(args.seed, args.n, args.true_params)
    mode = "generator coefficients" if args.true_params else f"fit on n={args.n}"
    lines = [f"Holdout applicants ({mode}, seed={args.seed})"]
    lines.append(f"{'':<4}{'sex':>4}{'score':>7}  "
                 f"{'ml':>7}{'eo':>7}{'aa':>7}   {'|dev| vs reference':>20}")
    worst = 0.0
    for name, (sex, score) in TABLE1_APPLICANTS.items():
        got = table[name]
        devs = {k: abs(got[k] - TABLE1_REFERENCE[name][k]) for k in got}
        worst = max(worst, *devs.values())
        lines.append(
            f"{name:<4}{sex:>4}{score:>7.2f}  "
            f"{got['ml']:>7.3f}{got['eo']:>7.3f}{got['aa']:>7.3f}   "
            f"{devs['ml']:>7.3f}{devs['eo']:>6.3f}{devs['aa']:>6.3f}"
        )
    lines.append(f"worst |deviation| = {worst:.3f}")
    text = "\n".join(lines)
    if args.emit == "json":
        text = json.dumps(table, indent=2, sort_keys=True)
    if args.out:
        out = _out_path(args.out, "table1.txt")
        out.write_text(text + "\n")
        print(f"wrote table to {out}")
    else:
        print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairadjust",
        description="Fit decision predictors and adjust them into "
                    "opportunity-equal and counterfactually corrected variants.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a synthetic admissions dataset")
    _add_sim_params(p)
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--emit", choices=["csv", "json"], default="csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit all models on a dataset and save them")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="score a dataset with saved models")
    p.add_argument("--models", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--kind", choices=list(KINDS), default=EO)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="fit on a train split, report metrics on test")
    p.add_argument("--data", default=None)
    p.add_argument("--config", required=True)
    p.add_argument("--train-fraction", type=float, default=0.75)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--out", default=None)
    p.add_argument("--emit", choices=["text", "json"], default="text")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="vary one generator parameter over a grid")
    _add_sim_params(p)
    p.add_argument("--vary", choices=["beta_s", "lambda"], required=True)
    p.add_argument("--grid", required=True, help="comma-separated values")
    p.add_argument("--replicates", type=int, default=10)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--test-n", type=int, default=10000)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser(
        "repro-table1",
        help="score the worked example's holdout applicants and compare "
             "against the reference values",
    )
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--true-params", action="store_true")
    p.add_argument("--out", default=None)
    p.add_argument("--emit", choices=["text", "json"], default="text")
    p.set_defaults(func=cmd_repro_table1)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FairadjustError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

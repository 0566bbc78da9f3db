"""Command line: ``sugarspec {synth,run,compare,anova,schema}``.

Exit codes: 0 when the requested artifact was written, 1 on data or
fitting failures, 2 on usage errors (argparse convention).
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from ._backend import thread_cap
from .anova import similarity_report, tercile_thresholds
from .dataset import PROFILES, DatasetError, dataset_stats, kfold_split, load_csv, profile, save_csv, synthesize
from .nn.model import TrainConfig
from .preprocess import StrategyParseError, parse_strategy
from .schemas import SCHEMAS
from .validation import RunOptions, cross_validate


class CliFailure(Exception):
    """Runtime failure that should end the command with exit code 1."""


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _folds(text: str) -> int:
    value = int(text)
    if value < 2:
        raise argparse.ArgumentTypeError(f"folds must be >= 2, got {value}")
    return value


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("widths must be >= 1")
    return values


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8", newline="\n")


def _fmt(v) -> str:
    return "nan" if v is None or not np.isfinite(v) else f"{v:.3f}"


def format_table(header: list[str], rows: list[list[str]]) -> str:
    """First column left-aligned, the rest right-aligned."""
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
    lines = []
    for r in [header, *rows]:
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Options shared by run and compare
# --------------------------------------------------------------------------
def _add_model_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="CSV with header id,w0,...,sugar")
    p.add_argument("--folds", type=_folds, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--max-components", type=_positive_int, default=15)
    p.add_argument("--inner-folds", type=_folds, default=5, help="folds for choosing the PLS component count")
    p.add_argument("--n-components", type=_positive_int, help="fix the PLS component count")
    p.add_argument("--epochs", type=_positive_int, default=5000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--optimizer", choices=("gd", "adam"), default="gd")
    p.add_argument("--mlp-widths", type=_int_list)
    p.add_argument("--conv-channels", type=_int_list)
    p.add_argument("--ga-generations", type=_positive_int)
    p.add_argument("--ga-population", type=_positive_int)


def _run_options(args) -> RunOptions:
    arch = {}
    if args.mlp_widths:
        arch["mlp_widths"] = args.mlp_widths
    if args.conv_channels:
        if len(args.conv_channels) != 4:
            raise CliFailure("--conv-channels needs four values")
        arch["conv_channels"] = args.conv_channels
    ga = {}
    if args.ga_generations:
        ga["generations"] = args.ga_generations
    if args.ga_population:
        ga["population"] = args.ga_population
    return RunOptions(
        max_components=args.max_components,
        inner_folds=args.inner_folds,
        n_components=args.n_components,
        ga=ga,
        train=TrainConfig(epochs=args.epochs, learning_rate=args.lr, optimizer=args.optimizer),
        arch=arch,
    )


def _load(path: str):
    try:
        return load_csv(path)
    except FileNotFoundError:
        raise CliFailure(f"data file not found: {path}") from None
    except DatasetError as exc:
        raise CliFailure(f"{path}: {exc}") from None


def _parse_or_usage(parser: argparse.ArgumentParser, text: str):
    try:
        return parse_strategy(text)
    except StrategyParseError as exc:
        parser.error(f"invalid strategy {text!r}: {exc}")


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------
def cmd_synth(args, parser) -> int:
    if args.n < 1:
        parser.error("--n must be >= 1")
    try:
        config = profile(args.profile, n_samples=args.n, dim=args.dim, seed=args.seed)
    except DatasetError as exc:
        parser.error(str(exc))
    data = synthesize(config)
    save_csv(data, args.out)
    s = dataset_stats(data)
    print(f"synthetic {args.profile} data: n={data.n} dim={data.dim} seed={args.seed} -> {args.out}")
    print(f"sugar mean={s.mean:.3f} std={s.std:.3f} min={s.min:.3f} max={s.max:.3f}")
    return 0


def cmd_run(args, parser) -> int:
    strategy = _parse_or_usage(parser, args.strategy)
    data = _load(args.data)
    if args.folds > data.n:
        parser.error(f"--folds {args.folds} exceeds the {data.n} samples")
    report = cross_validate(strategy, data, args.folds, args.seed, options=_run_options(args))
    if args.format == "json":
        text = _dump_json(report.to_json())
    else:
        text = format_table(
            ["strategy", "RMSECV", "R2", "STD", "Closeness%"],
            [[report.strategy, _fmt(report.rmsecv), _fmt(report.r2_mean), _fmt(report.std),
              _fmt(report.closeness_pct)]],
        )
    _emit(text, args.out)
    return 0


def compare_rows(strategies, data, folds, seed, options, threads=None) -> list[dict]:
    """One CV per strategy over a shared fold split; failures land in the row."""
    split = kfold_split(data.n, folds, seed)

    def one(text):
        try:
            r = cross_validate(text, data, folds, seed, options=options, folds=split)
        except Exception as exc:  # recorded in the row; the other rows still run
            return {"strategy": text, "rmsecv": None, "r2_mean": None, "closeness_pct": None,
                    "error": f"{type(exc).__name__}: {exc}"}
        j = r.to_json()
        return {"strategy": r.strategy, "rmsecv": j["rmsecv"], "r2_mean": j["r2_mean"],
                "closeness_pct": j["closeness_pct"], "error": None}

    workers = min(threads or thread_cap(), len(strategies))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, strategies))
    return [one(s) for s in strategies]


def cmd_compare(args, parser) -> int:
    for s in args.strategy:
        _parse_or_usage(parser, s)
    data = _load(args.data)
    if args.folds > data.n:
        parser.error(f"--folds {args.folds} exceeds the {data.n} samples")
    rows = compare_rows(args.strategy, data, args.folds, args.seed, _run_options(args))
    if args.format == "json":
        text = _dump_json({"folds": args.folds, "seed": args.seed, "rows": rows})
    else:
        body = []
        for r in rows:
            if r["error"] is None:
                body.append([r["strategy"], _fmt(r["rmsecv"]), _fmt(r["r2_mean"]), _fmt(r["closeness_pct"])])
            else:
                body.append([r["strategy"], "failed", "-", "-"])
        text = format_table(["strategy", "RMSECV", "R2", "Closeness%"], body)
        failed = [r for r in rows if r["error"] is not None]
        text += "".join(f"# {r['strategy']}: {r['error']}\n" for r in failed)
    _emit(text, args.out)
    return 0 if all(r["error"] is None for r in rows) else 1


def cmd_anova(args, parser) -> int:
    data = _load(args.data)
    t1, t2 = args.t1, args.t2
    if t1 is None or t2 is None:
        auto1, auto2 = tercile_thresholds(data.sugar)
        t1 = auto1 if t1 is None else t1
        t2 = auto2 if t2 is None else t2
    if not t1 < t2:
        parser.error(f"need --t1 < --t2, got {t1} and {t2}")
    report = similarity_report(data, t1, t2, repeats=args.repeats, seed=args.seed,
                               draw_size=args.draw_size, n_subgroups=args.subgroups)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    _emit(_dump_json(report.to_json()), args.out)
    return 0


def cmd_schema(args, parser) -> int:
    _emit(_dump_json(SCHEMAS[args.name]), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sugarspec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic labelled spectra CSV")
    p.add_argument("--profile", choices=PROFILES, default="pear")
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--dim", type=_positive_int, default=1600)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth, parser=p)

    p = sub.add_parser("run", help="cross-validate one strategy")
    _add_model_options(p)
    p.add_argument("--strategy", required=True, help='e.g. "SG>MSC>SNV>WD(400)>GA(100)>PLS"')
    p.add_argument("--format", choices=("json", "table"), default="json")
    p.set_defaults(func=cmd_run, parser=p)

    p = sub.add_parser("compare", help="cross-validate several strategies on one fold split")
    _add_model_options(p)
    p.add_argument("--strategy", action="append", required=True, help="repeat for each row")
    p.add_argument("--format", choices=("json", "table"), default="table")
    p.set_defaults(func=cmd_compare, parser=p)

    p = sub.add_parser("anova", help="group similarity report")
    p.add_argument("--data", required=True)
    p.add_argument("--t1", type=float, help="low/mid threshold (default: lower tercile)")
    p.add_argument("--t2", type=float, help="mid/high threshold (default: upper tercile)")
    p.add_argument("--repeats", type=_positive_int, default=30)
    p.add_argument("--draw-size", type=_positive_int, default=15)
    p.add_argument("--subgroups", type=_positive_int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_anova, parser=p)

    p = sub.add_parser("schema", help="print the JSON Schema of an output document")
    p.add_argument("name", choices=sorted(SCHEMAS))
    p.add_argument("--out")
    p.set_defaults(func=cmd_schema, parser=p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, args.parser)
    except CliFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # fold, chain and training errors carry their own context
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

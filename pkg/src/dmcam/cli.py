"""Command-line entry point.

Subcommands cover the whole pipeline: dm (build/print a matrix), compile
(solve for the minimal cell and emit an encoding), verify (check an encoding
against a matrix), oracle (brute-force feasibility), simulate (searches on a
programmed array), mc (Monte-Carlo accuracy under variation) and bench
(KNN/HDC dataset pipelines).

Exit codes: 0 success, 2 infeasible or failed verification (a valid answer),
3 bad usage, 4 unreadable input file, 5 enumeration budget exceeded,
1 any other error. All randomness is seeded; rerunning a command with the
same flags reproduces its data outputs byte for byte.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import apps, datasets
from .compiler import compile_dm
from .crossbar import Crossbar, monte_carlo
from .device import VariationParams
from .encoder import (
    DEFAULT_LADDER,
    VoltageLadder,
    derive_encoding,
    encoding_table_csv,
    export_encoding,
    load_encoding,
    verify_encoding,
)
from .metric import DistanceSpec, MetricKind, build_dm, dm_to_csv, load_custom_dm
from .solver import (
    DEFAULT_NODE_BUDGET,
    BudgetExceededError,
    CurrentRange,
    brute_force_feasible,
    solve_fixed_k,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_USAGE = 3
EXIT_IO = 4
EXIT_BUDGET = 5


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit 2, which we reserve
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_metric_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--metric", choices=[m.value for m in MetricKind if m is not MetricKind.CUSTOM])
    p.add_argument("--bits", type=int, default=2)
    p.add_argument("--custom", help="CSV file with a custom distance matrix")


def _add_variation_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sigma-vth", type=float, default=0.0, help="threshold sigma in volts")
    p.add_argument("--sigma-r", type=float, default=0.0, help="relative resistance sigma")


def _add_ladder_flags(p: argparse.ArgumentParser) -> None:
    d = DEFAULT_LADDER
    p.add_argument("--vgs-base", type=float, default=d.vgs_base)
    p.add_argument("--vth-base", type=float, default=d.vth_base)
    p.add_argument("--step", type=float, default=d.step)
    p.add_argument("--unit-vds", type=float, default=d.unit_vds)
    p.add_argument("--resistance", type=float, default=d.resistance)


def build_parser(defaults: dict | None = None) -> _Parser:
    parser = _Parser(prog="dmcam", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file of flag defaults for the subcommand")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get("DMCAM_THREADS", "1")),
        help="worker cap for parallelizable stages",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_command(name, help_text):
        return sub.add_parser(name, help=help_text, parents=[common])

    p = add_command("dm", "build or load a distance matrix and print it as CSV")
    _add_metric_flags(p)
    p.add_argument("--out")

    p = add_command("compile", "solve for the minimal cell and emit an encoding")
    _add_metric_flags(p)
    p.add_argument("--levels", default="auto", help="current multiples, e.g. 0,1,2 (auto = 0..max entry)")
    p.add_argument("--k", type=int, help="force a fixed cell size instead of searching")
    p.add_argument("--k-max", type=int, default=8)
    p.add_argument("--budget", type=int, default=DEFAULT_NODE_BUDGET)
    p.add_argument("--out", help="encoding JSON path")
    p.add_argument("--report", help="feasibility report JSON path")
    p.add_argument("--table", help="human-readable encoding table CSV path")

    p = add_command("verify", "check an encoding JSON against a distance matrix")
    _add_metric_flags(p)
    p.add_argument("--encoding", required=True)
    p.add_argument("--out", help="report JSON path")

    p = add_command("oracle", "brute-force feasibility verdict for a fixed cell size")
    _add_metric_flags(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--levels", default="auto")
    p.add_argument("--dump", action="store_true", help="print a witness decomposition when feasible")
    p.add_argument("--out", help="verdict JSON path")

    p = add_command("simulate", "program an array and run query searches")
    p.add_argument("--encoding", required=True)
    p.add_argument("--stored", required=True, help="CSV of stored symbol vectors")
    p.add_argument("--queries", required=True, help="CSV of query symbol vectors")
    _add_variation_flags(p)
    _add_ladder_flags(p)
    p.add_argument("--out", help="results CSV path")

    p = add_command("mc", "Monte-Carlo winner accuracy under device variation")
    p.add_argument("--encoding", required=True)
    p.add_argument("--stored", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--expected", help="CSV of expected winner rows (default: ideal winners)")
    p.add_argument("--runs", type=int, default=100)
    _add_variation_flags(p)
    _add_ladder_flags(p)
    p.add_argument("--out", help="per-run outcome CSV path")
    p.add_argument("--report", help="summary JSON path")

    p = add_command("bench", "KNN or HDC pipeline on a dataset")
    p.add_argument("--pipeline", choices=["knn", "hdc"], required=True)
    p.add_argument("--dataset", choices=["synthetic", "mnist", "csv"], default="synthetic")
    p.add_argument("--data-root", help="directory with MNIST IDX files")
    p.add_argument("--train-csv")
    p.add_argument("--test-csv")
    p.add_argument("--train-size", type=int, default=1000)
    p.add_argument("--test-size", type=int, default=200)
    _add_metric_flags(p)
    p.add_argument("--levels", default="auto")
    p.add_argument("--k-max", type=int, default=8)
    p.add_argument("--kq", type=int, default=1)
    p.add_argument("--dimension", type=int, default=1024)
    p.add_argument("--epochs", type=int, default=0)
    _add_variation_flags(p)
    _add_ladder_flags(p)
    p.add_argument("--out", help="summary JSON path")
    p.add_argument("--predictions", help="per-query prediction CSV path")

    if defaults:
        for action in sub.choices.values():
            known = {a.dest for a in action._actions}
            action.set_defaults(**{k: v for k, v in defaults.items() if k in known})
        known = {a.dest for a in parser._actions}
        parser.set_defaults(**{k: v for k, v in defaults.items() if k in known})
    return parser


def _config_dict(args: argparse.Namespace) -> dict:
    """Full flag set of this run, embedded in every report."""
    return {k: v for k, v in sorted(vars(args).items()) if k != "config"}


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dm_from_args(args: argparse.Namespace):
    if args.custom:
        return load_custom_dm(args.custom)
    if not args.metric:
        raise SystemExit2("one of --metric or --custom is required")
    return build_dm(DistanceSpec(MetricKind(args.metric), args.bits))


class SystemExit2(Exception):
    """Usage-level problem detected after parsing."""


def _levels_from_args(args: argparse.Namespace, dm) -> CurrentRange:
    if args.levels == "auto":
        return CurrentRange.covering(dm.max_entry)
    return CurrentRange.parse(args.levels)


def _variation_from_args(args: argparse.Namespace) -> VariationParams | None:
    if args.sigma_vth == 0 and args.sigma_r == 0:
        return None
    return VariationParams(args.sigma_vth, args.sigma_r, args.seed)


def _ladder_from_args(args: argparse.Namespace) -> VoltageLadder:
    return VoltageLadder(
        vgs_base=args.vgs_base,
        vth_base=args.vth_base,
        step=args.step,
        unit_vds=args.unit_vds,
        resistance=args.resistance,
    )


def _load_symbol_csv(path: str) -> list[list[int]]:
    rows = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        rows.append([int(c) for c in line.split(",")])
    if not rows:
        raise ValueError(f"{path}: no symbol rows")
    return rows


def _json_dump(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def cmd_dm(args) -> int:
    _write_or_print(dm_to_csv(_dm_from_args(args)), args.out)
    return EXIT_OK


def cmd_compile(args) -> int:
    dm = _dm_from_args(args)
    cr = _levels_from_args(args, dm)
    t0 = time.perf_counter()
    if args.k:
        # Forced cell size: probe exactly that k.
        outcome = solve_fixed_k(dm, args.k, cr, args.budget)
        probes = [outcome]
        feasible = outcome.feasible
        encoding = derive_encoding(outcome.assignment) if feasible else None
    else:
        result = compile_dm(dm, cr, k_max=args.k_max, budget=args.budget)
        probes = list(result.probes)
        feasible = result.feasible
        encoding = result.encoding
    elapsed = time.perf_counter() - t0

    report = {
        "config": _config_dict(args),
        "levels": list(cr.multiples),
        "probes": [
            {
                "k": p.k,
                "status": p.status,
                "feasible": p.feasible,
                "domain_sizes": list(p.domain_sizes),
                "pruned_domain_sizes": list(p.pruned_sizes),
            }
            for p in probes
        ],
        "min_k": probes[-1].k if feasible else None,
        "feasible": feasible,
    }
    if encoding is not None:
        verify = verify_encoding(encoding, dm)
        report["verify"] = verify.to_dict()
        if args.out:
            Path(args.out).write_text(export_encoding(encoding))
        else:
            sys.stdout.write(export_encoding(encoding))
        if args.table:
            bits = args.bits if not args.custom else None
            Path(args.table).write_text(encoding_table_csv(encoding, bits))
    if args.report:
        Path(args.report).write_text(_json_dump(report))
    print(f"# {'feasible' if feasible else 'infeasible'} "
          f"(k={report['min_k']}) in {elapsed:.3f}s", file=sys.stderr)
    return EXIT_OK if feasible else EXIT_INFEASIBLE


def cmd_verify(args) -> int:
    dm = _dm_from_args(args)
    encoding = load_encoding(args.encoding)
    report = verify_encoding(encoding, dm)
    payload = {"config": _config_dict(args), **report.to_dict()}
    _write_or_print(_json_dump(payload), args.out)
    return EXIT_OK if report.passed else EXIT_INFEASIBLE


def cmd_oracle(args) -> int:
    dm = _dm_from_args(args)
    cr = _levels_from_args(args, dm)
    feasible, witness = brute_force_feasible(dm, args.k, cr, return_witness=True)
    payload = {
        "config": _config_dict(args),
        "feasible": feasible,
        "levels": list(cr.multiples),
    }
    if args.dump and witness is not None:
        payload["witness"] = [[list(row) for row in mat] for mat in witness]
    _write_or_print(_json_dump(payload), args.out)
    return EXIT_OK if feasible else EXIT_INFEASIBLE


def cmd_simulate(args) -> int:
    encoding = load_encoding(args.encoding)
    stored = _load_symbol_csv(args.stored)
    queries = _load_symbol_csv(args.queries)
    ladder = _ladder_from_args(args)
    cb = Crossbar(encoding, stored, ladder, variation=_variation_from_args(args))
    lines = [
        "# config: " + json.dumps(_config_dict(args), sort_keys=True, default=str),
        "query,row,current_a,current_units,winner",
    ]
    for qi, query in enumerate(queries):
        result = cb.search(query)
        for row, current in enumerate(result.row_currents):
            units = current / ladder.unit_current
            lines.append(
                f"{qi},{row},{current:.12e},{units:.6f},{int(row == result.winner)}"
            )
    _write_or_print("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_mc(args) -> int:
    encoding = load_encoding(args.encoding)
    stored = _load_symbol_csv(args.stored)
    queries = _load_symbol_csv(args.queries)
    ladder = _ladder_from_args(args)
    if args.expected:
        expected = [row[0] for row in _load_symbol_csv(args.expected)]
    else:
        ideal = Crossbar(encoding, stored, ladder)
        expected = [ideal.search(q).winner for q in queries]
    params = VariationParams(args.sigma_vth, args.sigma_r, args.seed)
    result = monte_carlo(
        encoding, stored, queries, expected, params, args.runs,
        ladder=ladder, workers=max(args.threads, 1),
    )
    if args.out:
        config_line = "# config: " + json.dumps(_config_dict(args), sort_keys=True, default=str)
        Path(args.out).write_text(config_line + "\n" + result.to_csv())
    report = {
        "config": _config_dict(args),
        "accuracy": result.accuracy,
        "runs": result.runs,
        "queries": len(queries),
    }
    _write_or_print(_json_dump(report), args.report)
    return EXIT_OK


def _load_bench_dataset(args) -> datasets.Dataset:
    if args.dataset == "mnist":
        if not args.data_root:
            raise SystemExit2("--data-root is required for --dataset mnist")
        return datasets.load_mnist(args.data_root, args.train_size, args.test_size, args.seed)
    if args.dataset == "csv":
        if not (args.train_csv and args.test_csv):
            raise SystemExit2("--train-csv and --test-csv are required for --dataset csv")
        return datasets.load_csv_dataset(args.train_csv, args.test_csv)
    return datasets.synthetic_digits(args.train_size, args.test_size, seed=args.seed)


def cmd_bench(args) -> int:
    if not args.metric:
        raise SystemExit2("--metric is required for bench")
    ds = _load_bench_dataset(args)
    dm = build_dm(DistanceSpec(MetricKind(args.metric), args.bits))
    cr = _levels_from_args(args, dm)
    compiled = compile_dm(dm, cr, k_max=args.k_max)
    if not compiled.feasible:
        print("# compilation infeasible", file=sys.stderr)
        return EXIT_INFEASIBLE
    ladder = _ladder_from_args(args)
    variation = _variation_from_args(args)
    summary = {
        "config": _config_dict(args),
        "dataset": ds.name,
        "train_size": len(ds.train_x),
        "test_size": len(ds.test_x),
        "min_k": compiled.k,
    }
    predictions = None
    if args.pipeline == "knn":
        report = apps.knn_classify(
            ds.train_x, ds.train_y, ds.test_x, ds.test_y,
            dm=dm, encoding=compiled.encoding, bits=args.bits, kq=args.kq,
            ladder=ladder, variation=variation,
        )
        summary.update(report.to_dict())
        predictions = zip(report.predictions_hw, report.predictions_sw, ds.test_y)
    else:
        model = apps.hdc_train(ds, args.dimension, args.bits, args.epochs, args.seed)
        cb = apps.hdc_class_crossbar(model, compiled.encoding, ladder, variation)
        report = apps.hdc_evaluate(model, ds.test_x, ds.test_y, cb, dm)
        summary.update(report.to_dict())
        predictions = zip(
            (apps.hdc_infer(model, x, cb) for x in ds.test_x),
            (apps.hdc_infer_software(model, x, dm) for x in ds.test_x),
            ds.test_y,
        )
    if args.predictions:
        lines = ["query,predicted_hw,predicted_sw,label"]
        lines += [f"{i},{hw},{sw},{label}" for i, (hw, sw, label) in enumerate(predictions)]
        Path(args.predictions).write_text("\n".join(lines) + "\n")
    _write_or_print(_json_dump(summary), args.out)
    return EXIT_OK


_COMMANDS = {
    "dm": cmd_dm,
    "compile": cmd_compile,
    "verify": cmd_verify,
    "oracle": cmd_oracle,
    "simulate": cmd_simulate,
    "mc": cmd_mc,
    "bench": cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            defaults = json.loads(Path(args.config).read_text())
            if not isinstance(defaults, dict):
                raise SystemExit2("config file must hold a JSON object of flag defaults")
            args = build_parser(defaults).parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit as exc:  # argparse exits (usage errors, --help)
        return int(exc.code) if exc.code is not None else 0
    except SystemExit2 as exc:
        print(f"dmcam: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceededError as exc:
        print(f"dmcam: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except FileNotFoundError as exc:
        print(f"dmcam: cannot read file: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"dmcam: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"dmcam: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

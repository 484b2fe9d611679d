"""``windcast`` command line.

Subcommands: ingest, adf, decompose, train, evaluate, benchmark, selftest.
Exit status is 0 on success, 1 on usage errors and 2 on runtime errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, PipelineConfig, load_config
from .ingest import IngestError, load_clean, write_csv
from .pipeline import PipelineError, emit_report, evaluate_fitted, prepare, run_matrix, save_fitted
from .stats import adf_test
from .wavelet import daubechies_filters, decompose, leaf_frequency_band

log = logging.getLogger("windcast")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="pipeline config file (key = value)")
    common.add_argument("--seed", type=int, help="master seed; overrides the config")
    common.add_argument("--out", help="output directory")
    common.add_argument("--mode", choices=("segment", "causal"), help="test-segment evaluation mode")
    common.add_argument("--quiet", action="store_true", help="only print errors")

    parser = _Parser(prog="windcast", description="Hybrid WPD / seasonal / BiLSTM wind speed forecasting.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, text, has_data in (
        ("ingest", "clean and fill a CSV, print the cleaning report", True),
        ("adf", "augmented Dickey-Fuller test on the cleaned series", True),
        ("decompose", "write wavelet subseries CSVs and a manifest", True),
        ("train", "fit and save every configured model", False),
        ("evaluate", "score models saved by 'train'", False),
        ("benchmark", "fit and score the model matrix, write reports", False),
        ("selftest", "run the built-in property checks", False),
    ):
        p = sub.add_parser(name, help=text, parents=[common])
        if has_data:
            p.add_argument("data", nargs="?", help="CSV file; defaults to data.path from --config")
    return parser


def _config(args, required: bool) -> PipelineConfig:
    if args.config:
        cfg = load_config(args.config)
    elif required:
        raise UsageError(f"{args.command} requires --config")
    else:
        cfg = PipelineConfig()
    if getattr(args, "data", None):
        cfg = replace(cfg, data_path=args.data)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.mode is not None:
        cfg = replace(cfg, causal_mode=args.mode == "causal")
    if not cfg.data_path and args.command != "selftest":
        raise UsageError(f"{args.command} needs a data file (positional argument or data.path in --config)")
    return cfg


def _out_dir(args, default: str | None = None) -> Path | None:
    out = args.out or default
    if out is None:
        return None
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _emit(args, text: str) -> None:
    if not args.quiet:
        print(text)


def cmd_ingest(args) -> int:
    cfg = _config(args, required=False)
    series, report = load_clean(cfg.data_path, sentinel=cfg.sentinel, k_sigma=cfg.k_sigma)
    out = _out_dir(args)
    if out is not None:
        write_csv(series, out / "cleaned.csv")
        (out / "clean_report.json").write_text(report.to_json() + "\n")
    _emit(args, report.to_json())
    return EXIT_OK


def cmd_adf(args) -> int:
    cfg = _config(args, required=False)
    series, _ = load_clean(cfg.data_path, sentinel=cfg.sentinel, k_sigma=cfg.k_sigma)
    result = adf_test(series.values, max_lag=cfg.adf_max_lag)
    out = _out_dir(args)
    if out is not None:
        (out / "adf.json").write_text(result.to_json() + "\n")
    _emit(args, result.to_json())
    return EXIT_OK


def cmd_decompose(args) -> int:
    cfg = _config(args, required=False)
    out = _out_dir(args, "decomposition")
    series, _ = load_clean(cfg.data_path, sentinel=cfg.sentinel, k_sigma=cfg.k_sigma)
    filters = daubechies_filters(cfg.wavelet_order)
    subs = decompose(series.values, "wpd", cfg.wpd_level, filters, cfg.boundary)
    files = []
    stamps = [t.isoformat(sep=" ") for t in series.timestamps()]
    for k, (label, comp) in enumerate(zip(subs.labels, subs.subseries)):
        name = f"leaf_{k}.csv"
        with (out / name).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["timestamp", "value"])
            w.writerows(zip(stamps, (f"{v:.10f}" for v in comp)))
        files.append({"file": name, "label": label, "frequency_band": leaf_frequency_band(k, cfg.wpd_level)})
    manifest = {
        "method": "wpd",
        "wavelet": filters.name,
        "level": cfg.wpd_level,
        "boundary": cfg.boundary,
        "ordering": subs.ordering,
        "length": len(series),
        "leaves": files,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    _emit(args, f"wrote {len(files)} subseries to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args, required=True)
    out = _out_dir(args, "run")
    artifacts = run_matrix(cfg)
    path = save_fitted(artifacts, out)
    emit_report(artifacts, out)
    _emit(args, f"saved models to {path.parent}")
    return EXIT_OK if not artifacts.report.errors else EXIT_RUNTIME


def cmd_evaluate(args) -> int:
    cfg = _config(args, required=True)
    out = _out_dir(args, "run")
    artifacts = evaluate_fitted(cfg, out)
    emit_report(artifacts, out)
    _emit(args, artifacts.report.to_csv().rstrip())
    return EXIT_OK


def cmd_benchmark(args) -> int:
    cfg = _config(args, required=True)
    out = _out_dir(args, "run")
    artifacts = run_matrix(cfg)
    emit_report(artifacts, out)
    _emit(args, artifacts.report.to_csv().rstrip())
    for name, err in artifacts.report.errors.items():
        log.error("%s failed: %s", name, err)
    return EXIT_OK if not artifacts.report.errors else EXIT_RUNTIME


def cmd_selftest(args) -> int:
    from .selftest import run_all

    results = run_all()
    for name, ok, detail, secs in results:
        _emit(args, f"{'PASS' if ok else 'FAIL'}  {name:<15} {secs:6.2f}s  {detail}")
    return EXIT_OK if all(r[1] for r in results) else EXIT_RUNTIME


COMMANDS = {
    "ingest": cmd_ingest,
    "adf": cmd_adf,
    "decompose": cmd_decompose,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "benchmark": cmd_benchmark,
    "selftest": cmd_selftest,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        logging.basicConfig(
            level=logging.ERROR if args.quiet else logging.INFO,
            format="%(levelname)s %(name)s: %(message)s",
        )
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"windcast: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PipelineError, IngestError, ValueError, OSError) as exc:
        print(f"windcast: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

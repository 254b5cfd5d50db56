"""Command-line entry point: ``singbal run|list|defaults``."""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ConfigError, load_config
from .experiments import EXIT_ERROR, SCHEMAS, defaults_text, execute, write_outputs

WORKERS_ENV = "SINGBAL_WORKERS"


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None or raw.strip() == "":
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV}: expected a positive integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError(f"{WORKERS_ENV}: expected a positive integer, got {raw!r}")
    return value


def _run_one(path: str, output: str | None, workers: int) -> tuple[str, int, str]:
    try:
        cfg = load_config(path)
    except (ConfigError, OSError) as exc:
        return path, EXIT_ERROR, f"config error: {exc}"
    if output is not None:
        cfg.output = Path(output)
    start = time.perf_counter()
    code, summary, result = execute(cfg)
    write_outputs(cfg, summary, result, time.perf_counter() - start, workers)
    msg = f"{cfg.experiment} -> {cfg.output}"
    if "error" in summary:
        msg += f" ({summary['error']})"
    elif code:
        failed = [r["check"] for r in summary["rows"] if not r["passed"]]
        msg += f" (failed: {', '.join(failed)})"
    return path, code, msg


def cmd_run(args) -> int:
    try:
        workers = worker_count()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.output is not None and len(args.configs) > 1:
        print("error: --output needs a single config file", file=sys.stderr)
        return EXIT_ERROR
    jobs = [(p, args.output) for p in args.configs]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_run_one, *zip(*jobs), [workers] * len(jobs)))
    else:
        results = [_run_one(p, o, workers) for p, o in jobs]
    worst = 0
    labels = {0: "pass", 1: "VIOLATION", 2: "ERROR"}
    for path, code, msg in results:
        print(f"[{labels.get(code, code)}] {path}: {msg}")
        worst = max(worst, code)
    return worst


def cmd_list(args) -> int:
    for name in sorted(SCHEMAS):
        print(name)
        if args.verbose:
            for key, p in SCHEMAS[name].items():
                print(f"    {key}: {p.describe()}")
    return 0


def cmd_defaults(args) -> int:
    if args.experiment not in SCHEMAS:
        print(f"error: unknown experiment {args.experiment!r}", file=sys.stderr)
        return EXIT_ERROR
    sys.stdout.write(defaults_text(args.experiment))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="singbal", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run one or more experiment config files")
    p.add_argument("configs", nargs="+", help="key = value config files")
    p.add_argument("-o", "--output", help="override the output directory (single config only)")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("list", help="list experiments")
    p.add_argument("-v", "--verbose", action="store_true", help="also print each schema")
    p.set_defaults(func=cmd_list)
    p = sub.add_parser("defaults", help="print the default config of an experiment")
    p.add_argument("experiment")
    p.set_defaults(func=cmd_defaults)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

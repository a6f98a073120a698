"""Command line entry point: ``clschrod run|sweep|presets``."""

from __future__ import annotations

import argparse
import glob
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from ..errors import ConfigValidationError, ParseError
from . import presets
from .config import load_config
from .runner import EXIT_CODES, run, with_overrides

PRESET_PREFIX = "preset:"


def _load(source: str):
    if source.startswith(PRESET_PREFIX):
        return presets.load_preset(source[len(PRESET_PREFIX):]), None
    return load_config(source), os.path.dirname(os.path.abspath(source))


def _run_one(source: str, out: str | None, seed: int | None, quiet: bool = False) -> int:
    try:
        cfg, base_dir = _load(source)
    except (ConfigValidationError, ParseError, KeyError) as exc:
        print(f"{source}: config error", file=sys.stderr)
        for path, msg in getattr(exc, "errors", [("", str(exc))]):
            print(f"  {path}: {msg}" if path else f"  {msg}", file=sys.stderr)
        return EXIT_CODES["config-error"]
    except OSError as exc:
        print(f"{source}: {exc}", file=sys.stderr)
        return EXIT_CODES["io-error"]
    cfg = with_overrides(cfg, out, seed)
    manifest = run(cfg, base_dir)
    if not quiet:
        print(f"{cfg.scenario}: {manifest.status} -> {cfg.output}")
        if manifest.message:
            print(f"  {manifest.message}")
        probes = os.path.join(cfg.output, "probes.csv")
        if os.path.exists(probes):
            _summarize(probes)
    return manifest.exit_code


def _summarize(path: str):
    verdicts: dict[str, str] = {}
    with open(path) as fh:
        next(fh)
        for line in fh:
            name, *_, verdict = line.rstrip("\n").split(",")
            verdicts[name] = verdict
    for name, verdict in verdicts.items():
        print(f"  {name:<28s}{verdict}")


def _sweep_job(args):
    source, out = args
    return source, _run_one(source, out, None, quiet=True)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="clschrod", description="Run linear vs classical Schrödinger experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one config file or preset:NAME")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="output directory (overrides the config)")
    p_run.add_argument("--seed", type=int, default=None, help="trajectory / sampling seed")
    p_sweep = sub.add_parser("sweep", help="run every config matching a glob, in parallel")
    p_sweep.add_argument("pattern")
    p_sweep.add_argument("--workers", type=int, default=None)
    p_sweep.add_argument("--out", default=None,
                         help="parent directory; each config gets its own subdirectory")
    p_pre = sub.add_parser("presets", help="list the built-in presets")
    p_pre.add_argument("action", choices=["list"])
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        for name in presets.names():
            print(name)
        return 0
    if args.command == "run":
        return _run_one(args.config, args.out, args.seed)
    sources = sorted(glob.glob(args.pattern))
    if not sources:
        print(f"no config matches {args.pattern!r}", file=sys.stderr)
        return EXIT_CODES["config-error"]
    jobs = []
    for src in sources:
        stem = os.path.splitext(os.path.basename(src))[0]
        jobs.append((src, os.path.join(args.out, stem) if args.out else None))
    worst = 0
    with ProcessPoolExecutor(max_workers=args.workers) as pool:
        for source, code in pool.map(_sweep_job, jobs):
            print(f"{source}: exit {code}")
            worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())

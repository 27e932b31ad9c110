"""Command line entry point: ``aggrekit run <config> [--out DIR] [--seed N] [--threads N]``.

Writes ``series.csv``, ``snapshots/t_<time>.csv``, ``report.txt`` and
``config.echo`` into the output directory.  Exit status is 0 when the run
completes or the probe passes, 1 when a probe fails, 2 on errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .evolution import COLUMNS
from .experiments import run_mode
from .snapshots import ensure_dir, snapshot_name, write_series, write_snapshot

log = logging.getLogger("aggrekit")


def output_dir(config_path: str, out: str | None) -> Path:
    if out:
        return Path(out)
    root = os.environ.get("AGGREKIT_OUT", "out")
    return Path(root) / Path(config_path).stem


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def write_outputs(out: Path, cfg, outcome, problem) -> None:
    ensure_dir(out)
    (out / "config.echo").write_text(cfgmod.echo(cfg))
    tr = outcome.trajectory
    if tr is not None:
        write_series(out / "series.csv", tr.rows, COLUMNS)
        snap_dir = Path(ensure_dir(out / "snapshots"))
        for t, u in sorted(tr.snapshots.items()):
            write_snapshot(snap_dir / snapshot_name(t), problem.grid, u, t)
    for k, extra in enumerate(outcome.members, 1):
        member_dir = Path(ensure_dir(out / "members"))
        write_series(member_dir / f"series_{k}.csv", extra.rows, COLUMNS)
    for name, text in outcome.files.items():
        (out / name).write_text(text)
    lines = [f"mode: {cfg.experiment.mode}", f"result: {'PASS' if outcome.passed else 'FAIL'}"]
    for k, v in outcome.report.items():
        lines.append(f"{k}: {_fmt(v)}")
    (out / "report.txt").write_text("\n".join(lines) + "\n")


def cmd_run(args) -> int:
    try:
        cfg = cfgmod.parse_config(args.config)
        if args.seed is not None:
            cfg = cfgmod.replace(cfg, init__seed=args.seed)
    except (OSError, cfgmod.ConfigError) as exc:
        print(f"aggrekit: {exc}", file=sys.stderr)
        return 2
    out = output_dir(args.config, args.out)
    try:
        outcome, problem = run_mode(cfg, workers=args.threads, log=log.info)
        write_outputs(out, cfg, outcome, problem)
    except Exception as exc:  # report any compute or I/O failure with its reason
        print(f"aggrekit: {cfg.experiment.mode} failed: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 2
    if not outcome.passed:
        print(f"aggrekit: {cfg.experiment.mode} FAIL (see {out / 'report.txt'})", file=sys.stderr)
        return 1
    log.info("wrote %s", out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aggrekit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment from a config file")
    r.add_argument("config", help="path to a section.key = value config file")
    r.add_argument("--out", help="output directory (default $AGGREKIT_OUT/<config stem>)")
    r.add_argument("--seed", type=int, help="override init.seed")
    r.add_argument("--threads", type=int, default=None, help="FFT worker threads")
    r.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    if getattr(args, "threads", None) is not None and args.threads < 1:
        print("aggrekit: --threads must be >= 1", file=sys.stderr)
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

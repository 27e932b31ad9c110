"""Run the 1D reference configuration to t=50 and compare with the steady solver.

Writes the usual run directory (series.csv, snapshots, report.txt,
config.echo) and prints the distance between the evolution endpoint and the
computed equilibrium, plus the Lojasiewicz fit on the decaying part.

    python scripts/reference_run.py [--out out/reference]
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from aggrekit.cli import main as cli_main
from aggrekit.config import parse_config
from aggrekit.domain import dual_norm, mean
from aggrekit.experiments import build_problem, initial_data
from aggrekit.snapshots import read_snapshot
from aggrekit.steady import solve_stationary

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/reference")
    args = ap.parse_args(argv)
    start = time.perf_counter()
    status = cli_main(["run", str(CONFIGS / "reference.cfg"), "--out", args.out])
    if status != 0:
        return status
    cfg = parse_config(CONFIGS / "reference.cfg")
    problem = build_problem(cfg)
    u_end, _ = read_snapshot(Path(args.out) / "snapshots" / f"t_{cfg.time.t_end!r}.csv")
    sol = solve_stationary(problem.op, problem.law, mean(problem.grid, initial_data(cfg, problem.grid)))
    print(f"evolution to t={cfg.time.t_end}: {time.perf_counter() - start:.1f} s")
    print(f"steady residual {sol.residual:.3e}, gamma {sol.gamma!r}")
    print(f"dual-norm gap endpoint vs steady {dual_norm(problem.grid, u_end - sol.u_star):.3e}")
    ls_out = Path(args.out).with_name(Path(args.out).name + "_ls")
    cli_main(["run", str(CONFIGS / "ls.cfg"), "--out", str(ls_out)])
    for line in (ls_out / "report.txt").read_text().splitlines():
        if line.startswith(("result", "measured.theta", "decay.")):
            print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())

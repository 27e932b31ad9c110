"""Locate the Keller-Segel blow-up mass at two resolutions and compare.

The coarse scan bisects the configured bracket.  The fine scan starts from
a bracket of +-5% around the coarse threshold, so it only succeeds when the
fine grid agrees with the coarse one to that tolerance.

    python scripts/critical_mass.py [configs/critical_mass.cfg] [--fine 192]
"""

from __future__ import annotations

import argparse
import sys
import time

from aggrekit.config import parse_config
from aggrekit.experiments import critical_mass_crosscheck

TOLERANCE = 0.05


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config", nargs="?", default="configs/critical_mass.cfg")
    ap.add_argument("--fine", type=int, default=192)
    args = ap.parse_args(argv)
    cfg = parse_config(args.config)
    start = time.perf_counter()
    coarse, fine, _, _ = critical_mass_crosscheck(cfg, args.fine, TOLERANCE,
                                                  log=lambda msg: print(" ", msg, flush=True))
    print(f"coarse threshold (nx={cfg.domain.nx}) {coarse!r}")
    print(f"fine threshold   (nx={args.fine}) {fine!r}")
    print(f"wall time {time.perf_counter() - start:.1f} s")
    if fine is None:
        return 1
    rel = abs(fine - coarse) / coarse
    print(f"relative difference {rel:.4f} (tolerance {TOLERANCE})")
    return 0 if rel <= TOLERANCE else 1


if __name__ == "__main__":
    sys.exit(main())

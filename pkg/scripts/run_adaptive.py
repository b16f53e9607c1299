#!/usr/bin/env python3
"""Rank-adaptive runs: a tolerance sweep plus the rank-over-time telemetry."""

import sys

from lorapar.cli import main

BASE = ["run", "adaptive", "--n", "100", "--T", "2.0", "--slices", "20",
        "--q", "4", "--seed", "7"]


def run(outdir: str) -> int:
    rc = main([*BASE, "--kmax", "10", "--sweep-tau", "1e-5,1e-7,1e-9",
               "--output", f"{outdir}/adaptive_tolerances"])
    rc = rc or main([*BASE, "--kmax", "6", "--tau", "1e-9",
                     "--output", f"{outdir}/adaptive_ranks"])
    return rc


if __name__ == "__main__":
    sys.exit(run(sys.argv[1] if len(sys.argv) > 1 else "results"))

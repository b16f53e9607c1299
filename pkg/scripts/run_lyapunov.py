#!/usr/bin/env python3
"""Heat-equation convergence data: coarse-rank and fine-rank sweeps."""

import sys

from lorapar.cli import main

BASE = ["run", "lyapunov", "--n", "100", "--T", "2.0", "--slices", "20",
        "--kmax", "15", "--seed", "7"]


def run(outdir: str) -> int:
    rc = main([*BASE, "--r", "16", "--sweep-q", "2,4,6,8",
               "--output", f"{outdir}/lyapunov_coarse_ranks"])
    rc = rc or main([*BASE, "--q", "4", "--sweep-r", "8,12,16",
                     "--output", f"{outdir}/lyapunov_fine_ranks"])
    return rc


if __name__ == "__main__":
    sys.exit(run(sys.argv[1] if len(sys.argv) > 1 else "results"))

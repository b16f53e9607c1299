#!/usr/bin/env python3
"""Heat-equation convergence for several slice lengths h (fixed T = 2)."""

import sys

from lorapar.cli import main


def run(outdir: str) -> int:
    return main(["run", "lyapunov", "--n", "100", "--T", "2.0", "--slices", "20",
                 "--q", "4", "--r", "16", "--kmax", "12", "--seed", "7",
                 "--sweep-h", "0.2,0.1,0.05", "--output", f"{outdir}/lyapunov_stepsizes"])


if __name__ == "__main__":
    sys.exit(run(sys.argv[1] if len(sys.argv) > 1 else "results"))

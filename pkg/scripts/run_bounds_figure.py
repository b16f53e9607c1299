#!/usr/bin/env python3
"""Bound-comparison curves for four representative (alpha, beta) pairs."""

import sys

from lorapar.cli import main

PAIRS = [(0.2, 0.2), (0.2, 0.7), (0.7, 0.2), (0.49, 0.49)]


def run(outdir: str) -> int:
    rc = 0
    for alpha, beta in PAIRS:
        rc = rc or main(["run", "bounds-figure", "--alpha", str(alpha), "--beta", str(beta),
                         "--gamma", "1", "--kappa", "1e-15", "--n", "30",
                         "--output", f"{outdir}/bounds_a{alpha}_b{beta}"])
    return rc


if __name__ == "__main__":
    sys.exit(run(sys.argv[1] if len(sys.argv) > 1 else "results"))

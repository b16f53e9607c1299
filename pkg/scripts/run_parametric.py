#!/usr/bin/env python3
"""Parametric-heat (synthetic cookie) and Riccati convergence data.

Both problems use the explicit substep integrator, so expect runtimes of a
few minutes each at the default sizes.
"""

import sys

from lorapar.cli import main


def run(outdir: str) -> int:
    rc = main(["run", "cookie", "--seed", "7", "--sweep-q", "2,4,6",
               "--output", f"{outdir}/cookie_coarse_ranks"])
    rc = rc or main(["run", "riccati", "--seed", "7", "--sweep-q", "4,6,8",
                     "--output", f"{outdir}/riccati_coarse_ranks"])
    return rc


if __name__ == "__main__":
    sys.exit(run(sys.argv[1] if len(sys.argv) > 1 else "results"))

"""Experiment runner.

``lorapar run <experiment>`` executes one experiment (optionally sweeping a
single parameter) and writes four artifacts into the output directory:

* convergence.csv  - experiment_id, sweep_value, k, n, error, rank
* spectra.csv      - time, index, sigma (solution snapshots at 0, T/2, T)
* bounds.csv       - kind, n, k, value (when the constants are estimable)
* manifest.json    - the fully resolved configuration and seeds

``lorapar validate`` resolves and prints the manifest without running.
Numbers are serialized with 17 significant digits so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import bounds as bounds_mod
from . import lowrank
from .integrators import (
    AccuracyError,
    DegenerateRankError,
    FlowOptions,
    SingularOperatorError,
    calibrate_substeps,
    exact_flow_lyapunov,
    reference_flow,
)
from .parareal import PararealConfig, run_adaptive_parareal, run_lowrank_parareal
from .problems import (
    SpectrumSpec,
    build_cookie_synthetic,
    build_laplacian_1d,
    build_riccati_C,
    build_riccati_diffusion,
    lyapunov_field,
    random_with_spectrum,
    riccati_field,
    warm_start,
)

EXPERIMENTS = ("lyapunov", "cookie", "riccati", "adaptive", "bounds-figure")
SWEEPABLE = ("q", "r", "h", "tau", "n")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the offending field."""


@dataclass
class ExperimentSpec:
    """Resolved experiment configuration (one sweep parameter at most)."""

    experiment: str
    n: int = 100  # grid size; recursion horizon for bounds-figure
    p: int = 11
    k: int = 9
    T: float = 2.0
    slices: int = 20
    q: int = 4
    r: int = 16
    tau: float = 1e-9
    K_max: int | None = None
    seed: int = 7
    threads: int = 1
    perturbation_scale: float = 1e-10
    substeps: int | None = None  # None: calibrate per run
    sweep_param: str | None = None
    sweep_values: list[float] = field(default_factory=list)
    alpha: float = 0.2
    beta: float = 0.2
    gamma: float = 1.0
    kappa: float = 1e-15
    output: str = "."

    def resolved_k_max(self) -> int:
        return self.slices if self.K_max is None else self.K_max

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.experiment == "bounds-figure":
            if self.n < 1:
                raise ConfigError(f"n (recursion horizon) must be >= 1, got {self.n}")
            if self.alpha < 0 or self.beta < 0:
                raise ConfigError("alpha and beta must be >= 0")
            if self.alpha + self.beta >= 1:
                raise ConfigError(
                    f"alpha + beta must be < 1, got {self.alpha} + {self.beta}"
                )
            return
        if self.n < 4:
            raise ConfigError(f"n (grid size) must be >= 4, got {self.n}")
        if self.T <= 0:
            raise ConfigError(f"T must be > 0, got {self.T}")
        if self.slices < 1:
            raise ConfigError(f"slices must be >= 1, got {self.slices}")
        if self.resolved_k_max() < 0:
            raise ConfigError(f"kmax must be >= 0, got {self.K_max}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if self.q < 1:
            raise ConfigError(f"q must be >= 1, got {self.q}")
        if self.experiment == "adaptive":
            if self.tau <= 0:
                raise ConfigError(f"tau must be > 0, got {self.tau}")
        elif not self.q < self.r:
            raise ConfigError(f"q < r required in fixed-rank mode, got q={self.q}, r={self.r}")
        if self.experiment == "cookie" and self.p < 1:
            raise ConfigError(f"p must be >= 1, got {self.p}")
        if self.experiment == "riccati" and self.k % 2 == 0:
            raise ConfigError(f"k must be odd, got {self.k}")
        if self.sweep_param is not None:
            if self.sweep_param not in SWEEPABLE:
                raise ConfigError(f"sweep parameter must be one of {SWEEPABLE}")
            if not self.sweep_values:
                raise ConfigError("sweep list must not be empty")
            if len(set(self.sweep_values)) != len(self.sweep_values):
                raise ConfigError(f"sweep values must be distinct, got {self.sweep_values}")
            if self.sweep_param == "h":
                for h in self.sweep_values:
                    N = round(self.T / h)
                    if N < 1 or abs(N * h - self.T) > 1e-9 * self.T:
                        raise ConfigError(f"sweep-h value {h} does not divide T={self.T}")

    def manifest(self) -> dict:
        doc = asdict(self)
        doc["h"] = self.T / self.slices if self.experiment != "bounds-figure" else None
        doc["K_max_resolved"] = self.resolved_k_max()
        doc["seeds"] = {
            "source": self.seed,
            "field": self.seed + 1,
            "initial_value": self.seed + 2,
            "perturbation": self.seed + 3,
        }
        return doc


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def _write_csv(path: str, header: list[str], rows: list[tuple]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


# ---------------------------------------------------------------------------
# Problem set-up


def _build_problem(spec: ExperimentSpec, n: int):
    """Field and warm-started initial value for one experiment instance."""
    if spec.experiment in ("lyapunov", "adaptive"):
        A = build_laplacian_1d(n, (-1.0, 1.0))
        kc = min(5, n)
        C = random_with_spectrum(SpectrumSpec(decay=5.0, length=kc, seed=spec.seed + 1), n, kc)
        F = lyapunov_field(A, C)
        X_pre = random_with_spectrum(SpectrumSpec(decay=1.0, length=n, seed=spec.seed + 2), n)
        X0 = warm_start(F, X_pre, 0.01)
    elif spec.experiment == "cookie":
        F = build_cookie_synthetic(n, spec.p)
        X0 = warm_start(F, np.zeros(F.shape), 0.01)
    elif spec.experiment == "riccati":
        A = build_riccati_diffusion(n, 1.0)
        F = riccati_field(A, build_riccati_C(n, spec.k))
        X0 = warm_start(F, np.zeros(F.shape), 0.01)
    else:
        raise ConfigError(f"experiment {spec.experiment!r} has no matrix problem")
    return F, X0


def _reference_trajectory(F, X0, N: int, h: float) -> list[np.ndarray]:
    if F.kind == "lyapunov":
        return [exact_flow_lyapunov(F, X0, n * h) for n in range(N + 1)]
    out = [np.asarray(X0, dtype=float)]
    for _ in range(N):
        out.append(reference_flow(F, out[-1], h))
    return out


def _snapshot(F, X0, t: float) -> np.ndarray:
    if t == 0:
        return np.asarray(X0, dtype=float)
    return reference_flow(F, X0, t)


def _flow_options(substeps: int) -> FlowOptions:
    return FlowOptions(substeps=substeps)


def _single_run(spec: ExperimentSpec, param: str, value: float, calibrated: dict):
    """Run one sweep point; returns (rows, extras) for the CSV writers."""
    n, q, r, tau = spec.n, spec.q, spec.r, spec.tau
    N, T = spec.slices, spec.T
    if param == "q":
        q = int(value)
    elif param == "r":
        r = int(value)
    elif param == "tau":
        tau = float(value)
    elif param == "n":
        n = int(value)
    elif param == "h":
        N = round(T / value)
    h = T / N

    F, X0 = _build_problem(spec, n)
    adaptive = spec.experiment == "adaptive"
    if not adaptive and not q < r <= min(F.shape):
        raise ConfigError(f"q < r <= min(m, p) required, got q={q}, r={r}, state shape {F.shape}")
    if not adaptive and r + 2 * q > min(F.shape):
        raise ConfigError(f"r + 2q = {r + 2 * q} exceeds the smallest state dimension {min(F.shape)}")
    reference = _reference_trajectory(F, X0, N, h)
    Y_full = lowrank.from_dense(X0)
    Y0 = lowrank.truncate_tol(Y_full, tau) if adaptive else lowrank.truncate(Y_full, r)

    # Substep calibration: the fine solver must be "exact" (refining it must
    # not move the output); the coarse solver is capped since its residual
    # error cancels inside the correction difference.
    fine_key = (n, N, "fine", Y0.rank)
    coarse_key = (n, N, "coarse", q)
    if spec.substeps is not None:
        calibrated.setdefault(fine_key, spec.substeps)
        calibrated.setdefault(coarse_key, spec.substeps)
    fine_cap = 2048 if F.kind == "lyapunov" else 512  # generic substeps cost far more
    if fine_key not in calibrated:
        calibrated[fine_key] = calibrate_substeps(
            F, Y0, h, Y0.rank, FlowOptions(substeps=4), target=1e-11, max_substeps=fine_cap
        )
    if coarse_key not in calibrated:
        calibrated[coarse_key] = calibrate_substeps(
            F, lowrank.truncate(Y0, q), h, q, FlowOptions(substeps=4), target=1e-11, max_substeps=64
        )

    cfg = PararealConfig(
        N=N,
        h=h,
        q=q,
        r=None if adaptive else r,
        tau=tau if adaptive else None,
        K_max=spec.resolved_k_max(),
        perturbation_scale=spec.perturbation_scale,
        seed=spec.seed + 3,
        threads=spec.threads,
        coarse_opts=_flow_options(calibrated[coarse_key]),
        fine_opts=_flow_options(calibrated[fine_key]),
    )
    runner = run_adaptive_parareal if adaptive else run_lowrank_parareal
    result = runner(F, Y0, cfg, reference=reference)

    rows = []
    rec = result.record
    for k in range(rec.ranks.shape[0]):
        for slice_n in range(rec.ranks.shape[1]):
            err = rec.errors[k, slice_n] if rec.errors is not None else float("nan")
            rows.append((spec.experiment, value, k, slice_n, err, rec.ranks[k, slice_n]))
    return rows, F, X0, reference, result, (q, r, h, N)


def cmd_run(spec: ExperimentSpec) -> int:
    spec.validate()
    os.makedirs(spec.output, exist_ok=True)
    manifest = spec.manifest()

    if spec.experiment == "bounds-figure":
        params = bounds_mod.BoundParams.from_constants(spec.alpha, spec.beta, spec.gamma, spec.kappa)
        rows = []
        for kind in bounds_mod.BoundKind:
            for k in range(spec.n + 1):
                rows.append((kind.value, spec.n, k, bounds_mod.bound(kind, params, spec.n, k)))
        _write_csv(os.path.join(spec.output, "bounds.csv"), ["kind", "n", "k", "value"], rows)
        with open(os.path.join(spec.output, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return EXIT_OK

    sweep_param = spec.sweep_param or ("tau" if spec.experiment == "adaptive" else "q")
    if spec.sweep_values:
        sweep_values = spec.sweep_values
    elif sweep_param == "h":
        sweep_values = [spec.T / spec.slices]
    else:
        sweep_values = [getattr(spec, sweep_param)]

    conv_rows = []
    calibrated: dict = {}
    base = None
    for value in sweep_values:
        rows, F, X0, reference, result, resolved = _single_run(spec, sweep_param, value, calibrated)
        conv_rows.extend(rows)
        if base is None:
            base = (F, X0, reference, result, resolved)
    _write_csv(
        os.path.join(spec.output, "convergence.csv"),
        ["experiment_id", "sweep_value", "k", "n", "error", "rank"],
        conv_rows,
    )

    # Spectra of the reference solution at 0, T/2, T.
    F, X0, reference, result, resolved = base
    spec_rows = []
    for t in (0.0, spec.T / 2.0, spec.T):
        sigma = np.linalg.svd(_snapshot(F, X0, t), compute_uv=False)
        for idx, s in enumerate(sigma, start=1):
            spec_rows.append((t, idx, s))
    _write_csv(os.path.join(spec.output, "spectra.csv"), ["time", "index", "sigma"], spec_rows)

    # Bound curves for the base configuration, when the constants allow it.
    q, r, h, N = resolved
    bounds_note = "not estimable"
    if F.is_affine and spec.experiment != "adaptive":
        try:
            params = bounds_mod.estimate_params(
                F, reference, q, r, h, initial_errors=result.record.errors[0]
            )
            if params.converging:
                rows = []
                for kind in bounds_mod.BoundKind:
                    for k in range(spec.resolved_k_max() + 1):
                        rows.append((kind.value, N, k, bounds_mod.bound(kind, params, N, k)))
                _write_csv(os.path.join(spec.output, "bounds.csv"), ["kind", "n", "k", "value"], rows)
                bounds_note = "written"
            else:
                bounds_note = f"alpha + beta = {params.alpha + params.beta:.3g} >= 1"
        except bounds_mod.GapDegenerateError as exc:
            bounds_note = f"gap degenerate: {exc}"
    manifest["bounds_csv"] = bounds_note
    manifest["calibrated_substeps"] = {str(k): v for k, v in sorted(calibrated.items())}
    manifest["sweep_param_resolved"] = sweep_param
    manifest["sweep_values_resolved"] = list(sweep_values)

    with open(os.path.join(spec.output, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


def cmd_validate(spec: ExperimentSpec) -> int:
    spec.validate()
    if not os.path.isdir(spec.output):
        raise ConfigError(f"output directory {spec.output!r} does not exist")
    print(json.dumps(spec.manifest(), indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing


def _parse_sweep(text: str) -> list[float]:
    try:
        return [float(w) for w in text.split(",") if w.strip()]
    except ValueError as exc:
        raise ConfigError(f"sweep list {text!r} is not comma-separated numbers") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lorapar", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "validate"):
        p = sub.add_parser(name)
        p.add_argument("experiment", nargs="?", choices=EXPERIMENTS)
        p.add_argument("--n", type=int, help="grid size (recursion horizon for bounds-figure)")
        p.add_argument("--p", type=int, help="parameter count (cookie)")
        p.add_argument("--k", type=int, help="observation rows (riccati, odd)")
        p.add_argument("--T", type=float, help="time horizon")
        p.add_argument("--slices", type=int, help="number of time slices N")
        p.add_argument("--q", type=int, help="coarse rank")
        p.add_argument("--r", type=int, help="fine rank")
        p.add_argument("--tau", type=float, help="fine tolerance (adaptive)")
        p.add_argument("--kmax", type=int, help="iteration count (default: slices)")
        p.add_argument("--seed", type=int, help="base seed")
        p.add_argument("--threads", type=int, help="fine-sweep worker cap")
        p.add_argument("--substeps", type=int, help="fixed substep count (default: calibrate)")
        p.add_argument("--perturbation-scale", type=float, dest="perturbation_scale")
        p.add_argument("--alpha", type=float, help="bounds-figure alpha")
        p.add_argument("--beta", type=float, help="bounds-figure beta")
        p.add_argument("--gamma", type=float, help="bounds-figure gamma")
        p.add_argument("--kappa", type=float, help="bounds-figure kappa")
        p.add_argument("--output", type=str, help="output directory")
        p.add_argument("--from-manifest", type=str, dest="from_manifest", help="load spec from a manifest.json")
        for s in SWEEPABLE:
            p.add_argument(f"--sweep-{s}", type=str, dest=f"sweep_{s}")
    return parser


_DEFAULTS = {
    "lyapunov": dict(n=100, T=2.0, slices=20, q=4, r=16),
    "adaptive": dict(n=100, T=2.0, slices=20, q=4, tau=1e-9),
    "cookie": dict(n=60, p=31, T=0.1, slices=10, q=4, r=16),
    "riccati": dict(n=48, k=9, T=0.1, slices=10, q=6, r=18),
    "bounds-figure": dict(n=30, alpha=0.2, beta=0.7, gamma=1.0, kappa=1e-15),
}


def spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    if args.from_manifest:
        with open(args.from_manifest) as fh:
            doc = json.load(fh)
        fields = {f for f in ExperimentSpec.__dataclass_fields__}
        spec = ExperimentSpec(**{k: v for k, v in doc.items() if k in fields})
        if args.output:
            spec = replace(spec, output=args.output)
        return spec
    if args.experiment is None:
        raise ConfigError("experiment is required (or use --from-manifest)")
    spec = ExperimentSpec(experiment=args.experiment)
    spec = replace(spec, **_DEFAULTS.get(args.experiment, {}))
    overrides = {}
    for name in ("n", "p", "k", "T", "slices", "q", "r", "tau", "seed", "threads",
                 "substeps", "perturbation_scale", "alpha", "beta", "gamma", "kappa", "output"):
        val = getattr(args, name, None)
        if val is not None:
            overrides[name] = val
    if args.kmax is not None:
        overrides["K_max"] = args.kmax
    sweeps = [(s, getattr(args, f"sweep_{s}")) for s in SWEEPABLE if getattr(args, f"sweep_{s}", None)]
    if len(sweeps) > 1:
        raise ConfigError(f"at most one sweep parameter, got {[s for s, _ in sweeps]}")
    if sweeps:
        overrides["sweep_param"] = sweeps[0][0]
        overrides["sweep_values"] = _parse_sweep(sweeps[0][1])
    return replace(spec, **overrides)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = spec_from_args(args)
        if args.command == "run":
            return cmd_run(spec)
        return cmd_validate(spec)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AccuracyError, DegenerateRankError, SingularOperatorError,
            bounds_mod.DivergenceRegimeError, bounds_mod.GapDegenerateError) as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

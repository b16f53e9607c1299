"""Time propagators.

* ``exact_flow_lyapunov``: closed-form flow of the stiff Lyapunov field via
  the eigendecomposition of A.
* ``reference_flow``: dense ground truth; dispatches to the closed form when
  available, otherwise a fixed-step 4th-order method refined until two
  successive step halvings agree.
* ``dlra_flow``: rank-r dynamical low-rank flow by the second-order
  (symmetrized) projector-splitting integrator. The K/S/L substep ODEs are
  solved either in closed form (affine Lyapunov substeps are small Sylvester
  ODEs, solved exactly in the eigenbasis of A) or by an explicit 4th-order
  method with a configurable number of inner steps.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as la

from . import lowrank
from .lowrank import LowRankMatrix
from .problems import VectorField, eval_field


class SingularOperatorError(ArithmeticError):
    """The Lyapunov operator has a zero eigenvalue pair and cannot be inverted."""


class AccuracyError(RuntimeError):
    """Step refinement hit its ceiling before reaching the requested accuracy."""

    def __init__(self, msg: str, residual: float):
        super().__init__(f"{msg} (achieved residual {residual:.3e})")
        self.residual = residual


class DegenerateRankError(RuntimeError):
    """A factor lost rank (non-finite entries) during re-orthonormalization."""


@dataclass
class FlowOptions:
    """Accuracy knobs shared by the propagators.

    substeps: projector-splitting steps per flow call (or the starting step
    count of the dense reference). inner_steps: RK4 steps per K/S/L substep
    ODE on the generic path. method selects the propagator variant;
    substep_solver selects how the splitting substeps are integrated.
    """

    substeps: int = 1
    inner_steps: int = 4
    rtol: float = 1e-10
    atol: float = 1e-14
    method: str = "auto"  # auto | closed_form | projector_splitting_2 | dense_reference
    substep_solver: str = "auto"  # auto | closed_form | rk4
    max_refinements: int = 18

    def __post_init__(self):
        if self.substeps < 1:
            raise ValueError(f"substeps must be >= 1, got {self.substeps}")
        if self.inner_steps < 1:
            raise ValueError(f"inner_steps must be >= 1, got {self.inner_steps}")
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be > 0")


def _phi1(z: np.ndarray) -> np.ndarray:
    """(e^z - 1)/z with a series guard near z = 0."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < 1e-8
    zs = z[small]
    out[small] = 1.0 + zs / 2.0 + zs**2 / 6.0
    zb = z[~small]
    out[~small] = np.expm1(zb) / zb
    return out


def exact_flow_lyapunov(F: VectorField, X0: np.ndarray, t: float) -> np.ndarray:
    """Closed-form solution of dX/dt = A X + X A + C C^T at time t.

    Works in the eigenbasis of A, where the flow acts entrywise with rates
    lambda_i + lambda_j; the operator is inverted entrywise by the same
    rates.
    """
    if F.kind != "lyapunov":
        raise ValueError(f"closed form needs a lyapunov field, got {F.kind!r}")
    if t < 0:
        raise ValueError("time must be >= 0")
    X0 = np.asarray(X0, dtype=float)
    if X0.shape != F.shape:
        raise ValueError(f"initial value shape {X0.shape} does not match {F.shape}")
    if t == 0:
        return X0.copy()
    w, Q = F.sym_eig()
    rates = w[:, None] + w[None, :]
    if np.any(rates == 0):
        raise SingularOperatorError("eigenvalue pair sums to zero; operator not invertible")
    E = np.exp(t * rates)
    Xh = Q.T @ X0 @ Q
    Gh = Q.T @ F.source_gram() @ Q
    Xt = E * Xh + (E - 1.0) / rates * Gh
    return Q @ Xt @ Q.T


def _rk4_dense(F: VectorField, X0: np.ndarray, t: float, steps: int) -> np.ndarray:
    X = X0
    dt = t / steps
    for _ in range(steps):
        k1 = eval_field(F, X)
        k2 = eval_field(F, X + 0.5 * dt * k1)
        k3 = eval_field(F, X + 0.5 * dt * k2)
        k4 = eval_field(F, X + dt * k3)
        X = X + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return X


def reference_flow(F: VectorField, X0: np.ndarray, t: float, opts: FlowOptions | None = None) -> np.ndarray:
    """High-accuracy dense flow, used as ground truth for error measurement.

    Lyapunov fields use the closed form. Everything else is integrated with
    classical RK4, halving the step until two successive refinements agree
    to 10*rtol (relative, Frobenius).
    """
    opts = opts or FlowOptions()
    X0 = np.asarray(X0, dtype=float)
    if t < 0:
        raise ValueError("time must be >= 0")
    if t == 0:
        return X0.copy()
    if F.kind == "lyapunov" and opts.method in ("auto", "closed_form"):
        return exact_flow_lyapunov(F, X0, t)
    if opts.method == "closed_form":
        raise ValueError(f"no closed form for field kind {F.kind!r}")

    steps = max(1, opts.substeps)
    with np.errstate(over="ignore", invalid="ignore"):
        prev = _rk4_dense(F, X0, t, steps)
        residual = np.inf
        for _ in range(opts.max_refinements):
            steps *= 2
            cur = _rk4_dense(F, X0, t, steps)
            ncur = float(la.norm(cur)) if np.all(np.isfinite(cur)) else np.inf
            if np.isfinite(ncur):
                residual = float(la.norm(cur - prev)) if np.all(np.isfinite(prev)) else np.inf
                if residual <= 10.0 * (opts.rtol * ncur + opts.atol):
                    return cur
            prev = cur
    raise AccuracyError(f"reference flow did not converge within {steps} steps", residual)


# ---------------------------------------------------------------------------
# Sylvester substep solvers (closed form)


def _sylv_diag_flow(w: np.ndarray, B: np.ndarray, G: np.ndarray, M0: np.ndarray, t: float) -> np.ndarray:
    """Exact flow of M' = diag(w) M + M B + G for symmetric B."""
    wb, Qb = la.eigh(B)
    rates = w[:, None] + wb[None, :]
    with np.errstate(over="ignore", invalid="ignore"):
        E = np.exp(t * rates)
        Mh = M0 @ Qb
        Gh = G @ Qb
        Mt = E * Mh + (t * _phi1(t * rates)) * Gh
        return Mt @ Qb.T


def _sylv_dense_flow(A: np.ndarray, B: np.ndarray, G: np.ndarray, M0: np.ndarray, t: float) -> np.ndarray:
    """Exact flow of M' = A M + M B + G for small symmetric A, B.

    Integrating the substep with a negated dissipative operator amplifies by
    e^{|rates| t}; callers keep t small enough for this to stay harmless
    (the substep calibration treats overflow as "refine further").
    """
    wa, Qa = la.eigh(A)
    wb, Qb = la.eigh(B)
    rates = wa[:, None] + wb[None, :]
    with np.errstate(over="ignore", invalid="ignore"):
        E = np.exp(t * rates)
        Mh = Qa.T @ M0 @ Qb
        Gh = Qa.T @ G @ Qb
        Mt = E * Mh + (t * _phi1(t * rates)) * Gh
        return Qa @ Mt @ Qb.T


def _qr_step(M: np.ndarray, name: str) -> tuple[np.ndarray, np.ndarray]:
    if not np.all(np.isfinite(M)):
        raise DegenerateRankError(f"non-finite factor entering the {name} re-orthonormalization")
    Q, R = la.qr(M, mode="economic")
    return Q, R


def _ksl2_lyapunov_hat(w: np.ndarray, Ch: np.ndarray, U, S, V, dt: float):
    """One symmetrized K-S-L step in the eigenbasis of A (diagonal operator).

    The substep ODEs are Sylvester ODEs solved exactly; the S substeps run
    with the negated field per the splitting construction.
    """
    half = dt / 2.0

    def gram_times(W):  # (C C^T) @ W without forming the gram
        return Ch @ (Ch.T @ W)

    def small(P, W):  # P^T A W for diagonal A
        return P.T @ (w[:, None] * W)

    K = _sylv_diag_flow(w, small(V, V), gram_times(V), U @ S, half)
    U1, S1 = _qr_step(K, "K-step")
    S2 = _sylv_dense_flow(-small(U1, U1), -small(V, V), -(U1.T @ gram_times(V)), S1, half)
    L = _sylv_diag_flow(w, small(U1, U1), gram_times(U1), V @ S2.T, dt)
    V1, SLt = _qr_step(L, "L-step")
    S3 = _sylv_dense_flow(-small(U1, U1), -small(V1, V1), -(U1.T @ gram_times(V1)), SLt.T, half)
    K = _sylv_diag_flow(w, small(V1, V1), gram_times(V1), U1 @ S3, half)
    U2, S4 = _qr_step(K, "K-step")
    return U2, S4, V1


def _rk4_mat(rhs, M0: np.ndarray, t: float, steps: int) -> np.ndarray:
    M = M0
    dt = t / steps
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(steps):
            k1 = rhs(M)
            k2 = rhs(M + 0.5 * dt * k1)
            k3 = rhs(M + 0.5 * dt * k2)
            k4 = rhs(M + dt * k3)
            M = M + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return M


def _ksl2_generic(F: VectorField, U, S, V, dt: float, inner: int):
    """One symmetrized K-S-L step with RK4-integrated substep ODEs."""
    half = dt / 2.0

    def k_rhs_for(Vf):
        return lambda K: eval_field(F, K @ Vf.T) @ Vf

    def s_rhs_for(Uf, Vf):
        return lambda S_: -(Uf.T @ eval_field(F, Uf @ S_ @ Vf.T) @ Vf)

    def l_rhs_for(Uf):
        return lambda L: eval_field(F, Uf @ L.T).T @ Uf

    K = _rk4_mat(k_rhs_for(V), U @ S, half, inner)
    U1, S1 = _qr_step(K, "K-step")
    S2 = _rk4_mat(s_rhs_for(U1, V), S1, half, inner)
    L = _rk4_mat(l_rhs_for(U1), V @ S2.T, dt, inner)
    V1, SLt = _qr_step(L, "L-step")
    S3 = _rk4_mat(s_rhs_for(U1, V1), SLt.T, half, inner)
    K = _rk4_mat(k_rhs_for(V1), U1 @ S3, half, inner)
    U2, S4 = _qr_step(K, "K-step")
    return U2, S4, V1


def dlra_flow(F: VectorField, Y0: LowRankMatrix, h: float, r: int, opts: FlowOptions | None = None) -> LowRankMatrix:
    """Rank-r dynamical low-rank flow over one step of length h.

    Y0 must already have rank bound r (truncate first). The step is split
    into opts.substeps symmetrized K-S-L sweeps; with substeps tightened the
    result converges to the continuous rank-r flow.
    """
    opts = opts or FlowOptions()
    if h <= 0:
        raise ValueError(f"step must be > 0, got {h}")
    if Y0.rank != r:
        raise ValueError(f"initial value has rank bound {Y0.rank}, expected {r}; truncate first")
    if Y0.shape != F.shape:
        raise ValueError(f"state shape {Y0.shape} does not match field {F.shape}")

    solver = opts.substep_solver
    if solver == "auto":
        solver = "closed_form" if F.kind == "lyapunov" else "rk4"
    if solver == "closed_form" and F.kind != "lyapunov":
        raise ValueError(f"closed-form substeps need a lyapunov field, got {F.kind!r}")

    dt = h / opts.substeps
    if solver == "closed_form":
        w, Q = F.sym_eig()
        Ch = Q.T @ F.C
        U, S, V = Q.T @ Y0.U, Y0.S, Q.T @ Y0.V
        for _ in range(opts.substeps):
            U, S, V = _ksl2_lyapunov_hat(w, Ch, U, S, V, dt)
        return lowrank.from_factors(Q @ U, S, Q @ V)
    U, S, V = Y0.U, Y0.S, Y0.V
    for _ in range(opts.substeps):
        U, S, V = _ksl2_generic(F, U, S, V, dt, opts.inner_steps)
    return lowrank.from_factors(U, S, V)


def measure_epsilon(F: VectorField, trajectory: list[np.ndarray], r: int) -> float:
    """Worst distance of the field from the rank-r tangent space along a path.

    For each snapshot X_n the field is evaluated at Y_n = truncate(X_n, r)
    and compared against its tangent-space projection at Y_n.
    """
    if len(trajectory) == 0:
        raise ValueError("trajectory must not be empty")
    worst = 0.0
    for X in trajectory:
        Y = lowrank.truncate(lowrank.from_dense(X), r)
        FY = eval_field(F, Y.dense())
        worst = max(worst, float(la.norm(FY - lowrank.tangent_project(Y, FY))))
    return worst


def calibrate_substeps(
    F: VectorField,
    Y0: LowRankMatrix,
    h: float,
    r: int,
    opts: FlowOptions | None = None,
    target: float = 1e-11,
    max_substeps: int = 4096,
) -> int:
    """Smallest substep count whose doubling changes the flow by < target.

    Operationalizes "the solvers can be considered exact": run once per
    experiment configuration and reuse the calibrated count.
    """
    opts = opts or FlowOptions()
    Yr = lowrank.truncate(Y0, r)

    def attempt(count: int) -> LowRankMatrix | None:
        try:
            Y = dlra_flow(F, Yr, h, Yr.rank, replace(opts, substeps=count))
        except DegenerateRankError:  # backward substep overflowed; refine
            return None
        return Y if np.isfinite(Y.norm()) else None

    s = opts.substeps
    prev = attempt(s)
    finest = s if prev is not None else None
    while s <= max_substeps:
        cur = attempt(2 * s)
        if cur is not None:
            finest = 2 * s
            if prev is not None:
                diff = lowrank.add(cur, prev, 1.0, -1.0).norm()
                if diff < target * max(cur.norm(), 1e-300):
                    return s
        prev = cur
        s *= 2
    # Target unreachable within the cap (the low-rank splitting error can
    # decay slowly on stiff problems); fall back to the finest stable count.
    if finest is None:
        raise AccuracyError(f"no stable substep count up to {s}", float("inf"))
    return finest

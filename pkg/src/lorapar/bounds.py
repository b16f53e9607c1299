"""Convergence theory made computable.

The double iteration e_{n+1}^{k+1} = alpha e_n^k + beta e_n^{k+1} + kappa
(with e_n^0 = gamma, e_0^k = 0) has the closed-form solution

    e_n^k = kappa * sum_{j<k} sum_{i<=n-j-1} C(i+j, i) alpha^j beta^i
            + gamma * alpha^k * sum_{i<=n-k-1} C(i+k-1, i) beta^i,

the second term vanishing for n <= k. Three practical upper bounds (one
superlinear, two linear in k) are evaluated alongside it, plus the one-step
modeling-error bound for the rank-constrained flow and a low-rank
approximability bound for the Lyapunov solution driven by the singular-value
decay factor 4 exp(-pi^2 rho / log(4 kappa_A)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg as la

from .integrators import measure_epsilon
from .problems import VectorField


class GapDegenerateError(ArithmeticError):
    """Equal singular values at a truncation cut make the constants blow up."""


class DivergenceRegimeError(ArithmeticError):
    """Bounds are only valid when alpha + beta < 1."""


class BoundKind(Enum):
    LINEAR = "linear"
    SECOND_LINEAR = "second_linear"
    SUPERLINEAR = "superlinear"
    EXACT_RECURSION = "exact_recursion"


@dataclass(frozen=True)
class BoundParams:
    """Constants of the error recursion.

    alpha = e^{ell h} C_rq and beta = e^{ell h} C_q couple consecutive
    iterates; kappa collects the truncation floor and modeling errors; gamma
    is the worst initial-sweep error.
    """

    alpha: float
    beta: float
    gamma: float
    kappa: float
    ell: float = 0.0
    eps_q: float = 0.0
    eps_r: float = 0.0
    C_q: float = 0.0
    C_rq: float = 0.0
    h: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "kappa", "eps_q", "eps_r", "C_q", "C_rq"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def converging(self) -> bool:
        return self.alpha + self.beta < 1.0

    @classmethod
    def from_constants(cls, alpha: float, beta: float, gamma: float, kappa: float) -> "BoundParams":
        """Directly prescribed constants (C_rq = alpha, C_q = beta, ell = h = 0)."""
        return cls(alpha, beta, gamma, kappa, ell=0.0, C_q=beta, C_rq=alpha)


def growth_integral(ell: float, t: float) -> float:
    """int_0^t e^{ell s} ds = (e^{ell t} - 1)/ell, series-guarded near ell = 0."""
    z = ell * t
    if abs(z) < 1e-8:
        return t * (1.0 + z / 2.0 + z * z / 6.0)
    return math.expm1(z) / ell


def _gap_factor(sigma: np.ndarray, q: int, n: int) -> float:
    """sigma_q / (sigma_q - sigma_{q+1}) with 1-based q; degenerate gaps raise."""
    s_q = sigma[q - 1] if q - 1 < sigma.size else 0.0
    s_q1 = sigma[q] if q < sigma.size else 0.0
    if s_q == s_q1:
        raise GapDegenerateError(f"singular gap at rank {q} vanishes at slice {n}")
    return float(s_q / (s_q - s_q1))


def estimate_params(
    F: VectorField,
    trajectory: list[np.ndarray],
    q: int,
    r: int,
    h: float,
    initial_errors: np.ndarray | None = None,
) -> BoundParams:
    """Measure the recursion constants on a reference trajectory.

    ell comes from the operator spectrum (2 max eig(A) for the Lyapunov
    field, half the largest symmetric-part eigenvalue of the vectorized
    operator otherwise); the truncation Lipschitz constants use the
    first-order gap factors maximized over the trajectory spectra; the
    modeling errors are measured directly. gamma is the worst error of a
    supplied initial sweep (NaN when not supplied).
    """
    if not F.is_affine:
        raise ValueError("constants are only defined for affine fields")
    if len(trajectory) == 0:
        raise ValueError("trajectory must not be empty")

    if F.kind == "lyapunov":
        w, _ = F.sym_eig()
        ell = 2.0 * float(w[-1])
    else:
        p = F.c1.size
        M = -np.kron(np.eye(p), F.A0) - np.kron(np.diag(F.c1), F.A1)
        ell = float(la.eigh(0.5 * (M + M.T), eigvals_only=True)[-1])

    eps_q = measure_epsilon(F, trajectory, q)
    eps_r = measure_epsilon(F, trajectory, r)

    C_q = 0.0
    C_rq = 0.0
    tail_r = 0.0
    for n, X in enumerate(trajectory):
        sigma = la.svd(X, compute_uv=False)
        gq = _gap_factor(sigma, q, n)
        gr = _gap_factor(sigma, r, n)
        C_q = max(C_q, gq)
        C_rq = max(C_rq, gq + gr)
        tail_r = max(tail_r, float(np.sqrt(np.sum(sigma[r:] ** 2))))

    decay = math.exp(ell * h)
    kappa = decay * tail_r + (2.0 * eps_q + eps_r) * growth_integral(ell, h)
    gamma = float(np.max(initial_errors)) if initial_errors is not None else float("nan")
    return BoundParams(
        alpha=decay * C_rq,
        beta=decay * C_q,
        gamma=gamma,
        kappa=kappa,
        ell=ell,
        eps_q=eps_q,
        eps_r=eps_r,
        C_q=C_q,
        C_rq=C_rq,
        h=h,
    )


def exact_recursion(params: BoundParams, n: int, k: int) -> float:
    """Closed-form solution of the error recursion at (n, k).

    Binomial terms are accumulated by iterative ratio updates (inner index
    ascending), so no factorial of a large argument is ever formed.
    """
    if not (params.alpha < 1 and params.beta < 1):
        raise DivergenceRegimeError(f"need alpha < 1 and beta < 1, got {params.alpha}, {params.beta}")
    if n < 0 or k < 0:
        raise ValueError("n and k must be >= 0")
    alpha, beta = params.alpha, params.beta

    total = 0.0
    if params.kappa > 0 and k > 0 and n > 0:
        acc = 0.0
        alpha_j = 1.0
        for j in range(min(k, n)):  # terms with j >= n have empty inner sums
            term = 1.0  # C(i+j, i) beta^i at i = 0
            inner = term
            for i in range(n - j - 1):
                term *= beta * (i + j + 1) / (i + 1)
                inner += term
            acc += alpha_j * inner
            alpha_j *= alpha
        total += params.kappa * acc
    if n >= k + 1 and params.gamma != 0.0:
        term = 1.0  # C(i+k-1, i) beta^i at i = 0
        inner = term
        for i in range(n - k - 1):
            term *= beta * (i + k) / (i + 1)
            inner += term
        total += params.gamma * alpha**k * inner
    return total


def _superlinear_factor(alpha: float, beta: float, n: int, k: int) -> float:
    """alpha^k / (k-1)! * prod_{j=2}^k (n - j) / (1 - beta), in log space.

    The initial-error sum behind this factor is empty for n <= k, so the
    factor is 0 there (for 2 <= n <= k the product shows this itself via the
    j = n factor).
    """
    if n <= k or alpha == 0.0:
        return 0.0
    log_mag = k * math.log(alpha) - math.lgamma(k) - math.log1p(-beta)
    for j in range(2, k + 1):
        log_mag += math.log(n - j)  # n >= k + 1 keeps every factor positive
    return math.exp(log_mag)


def bound(kind: BoundKind, params: BoundParams, n: int, k: int) -> float:
    """Evaluate one of the convergence bounds at (n, k).

    Returns B_{n,k} * gamma + kappa/(1 - alpha - beta); k = 0 gives
    gamma + kappa/(1 - alpha - beta) for every kind.
    """
    if params.alpha + params.beta >= 1.0:
        raise DivergenceRegimeError(
            f"alpha + beta = {params.alpha + params.beta:.3g} >= 1: no convergence guarantee"
        )
    floor = params.kappa / (1.0 - params.alpha - params.beta)
    if k == 0:
        return params.gamma + floor
    if kind == BoundKind.EXACT_RECURSION:
        return exact_recursion(params, n, k)
    if kind == BoundKind.LINEAR:
        B = (params.alpha / (1.0 - params.beta)) ** k
    elif kind == BoundKind.SECOND_LINEAR:
        B = params.alpha**k * (1.0 + params.beta) ** (n - 1)
    elif kind == BoundKind.SUPERLINEAR:
        B = _superlinear_factor(params.alpha, params.beta, n, k)
    else:
        raise ValueError(f"unknown bound kind {kind!r}")
    return B * params.gamma + floor


def dlra_error_bound(ell: float, eps_r: float, initial_gap: float, t: float) -> float:
    """One-step error bound of the rank-constrained flow:
    e^{ell t} * ||Y0 - X0|| + eps_r * int_0^t e^{ell s} ds."""
    if t < 0:
        raise ValueError("time must be >= 0")
    return math.exp(ell * t) * initial_gap + eps_r * growth_integral(ell, t)


def singular_decay_factor(kappa_A: float, rho: int) -> float:
    """Relative singular-value decay 4 exp(-pi^2 rho / log(4 kappa_A))."""
    if kappa_A < 1:
        raise ValueError(f"condition number must be >= 1, got {kappa_A}")
    if rho < 0:
        raise ValueError(f"rho must be >= 0, got {rho}")
    return 4.0 * math.exp(-(math.pi**2) * rho / math.log(4.0 * kappa_A))


def lyapunov_rank_bound(
    A: np.ndarray,
    X0_spectrum: np.ndarray,
    C_spectrum: np.ndarray,
    t: float,
    r0: int,
    r: int,
    rho: int,
) -> tuple[int, float]:
    """Low-rank approximability of the Lyapunov solution.

    Returns (rank bound r0 + 2 r rho, error bound). X0_spectrum holds the
    singular values of the initial value and C_spectrum those of the source
    gram C C^T; spectral-norm error bound

        e^{ell t} sigma_{r0+1}(X0)
        + ((e^{ell t} - 1)/ell) (decay_factor * ||CC^T||_2 + sigma_{r+1}(CC^T)).
    """
    A = np.asarray(A, dtype=float)
    w = la.eigh(A, eigvals_only=True)
    if w[-1] >= 0:
        raise ValueError("A must be negative definite")
    ell = 2.0 * float(w[-1])
    kappa_A = float(np.max(np.abs(w)) / np.min(np.abs(w)))

    sx = np.asarray(X0_spectrum, dtype=float)
    sc = np.asarray(C_spectrum, dtype=float)
    sig_x = float(sx[r0]) if r0 < sx.size else 0.0
    sig_c = float(sc[r]) if r < sc.size else 0.0
    top_c = float(sc[0]) if sc.size else 0.0
    err = math.exp(ell * t) * sig_x + growth_integral(ell, t) * (
        singular_decay_factor(kappa_A, rho) * top_c + sig_c
    )
    return r0 + 2 * r * rho, err

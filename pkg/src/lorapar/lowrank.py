"""Factored low-rank matrix arithmetic.

A matrix is stored as Y = U @ S @ V.T with column-orthonormal factors U, V
and a small square core S. Public constructors return a canonical form in
which S is diagonal with non-negative, non-increasing entries, so the
diagonal of S doubles as the singular values of Y. All operations keep the
factors orthonormal and cost O(m r^2 + r^3).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

# Module-wide tolerances; override before constructing objects if needed.
ORTHONORMALITY_TOL = 1e-10
ROUNDTRIP_RTOL = 1e-12


@dataclass(frozen=True)
class SingularSpectrum:
    """Non-increasing vector of singular values."""

    sigma: np.ndarray

    def __post_init__(self):
        sigma = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        if sigma.ndim != 1:
            raise ValueError("sigma must be a vector")
        if sigma.size and sigma[-1] < 0:
            raise ValueError("singular values must be non-negative")
        if np.any(np.diff(sigma) > 0):
            raise ValueError("singular values must be non-increasing")
        sigma = sigma.copy()
        sigma.flags.writeable = False
        object.__setattr__(self, "sigma", sigma)

    def __len__(self) -> int:
        return self.sigma.size

    def __getitem__(self, i):
        return self.sigma[i]

    def tail_norm(self, r: int) -> float:
        """Frobenius norm of the part discarded by a rank-r truncation."""
        return float(np.sqrt(np.sum(self.sigma[r:] ** 2)))


class LowRankMatrix:
    """Matrix in factored form U @ S @ V.T with orthonormal U and V.

    Instances are immutable: the factor arrays are marked read-only at
    construction and every operation returns a new object, so values can be
    shared freely between threads.

    Attributes
    ----------
    U : (m, r) ndarray
        Column-orthonormal left factor.
    S : (r, r) ndarray
        Small core; diagonal with sorted non-negative entries in canonical
        objects produced by the public constructors.
    V : (n, r) ndarray
        Column-orthonormal right factor.
    """

    __slots__ = ("U", "S", "V")

    def __init__(self, U: np.ndarray, S: np.ndarray, V: np.ndarray):
        U = np.array(U, dtype=float, copy=True)
        S = np.array(S, dtype=float, copy=True)
        V = np.array(V, dtype=float, copy=True)
        if U.ndim != 2 or S.ndim != 2 or V.ndim != 2:
            raise ValueError("factors must be 2-dimensional arrays")
        r = S.shape[0]
        if S.shape != (r, r):
            raise ValueError(f"core must be square, got {S.shape}")
        if U.shape[1] != r or V.shape[1] != r:
            raise ValueError(
                f"factor widths {U.shape[1]}, {V.shape[1]} do not match core size {r}"
            )
        if r > min(U.shape[0], V.shape[0]):
            raise ValueError(f"rank bound {r} exceeds dimensions {U.shape[0]}x{V.shape[0]}")
        for a in (U, S, V):
            a.flags.writeable = False
        self.U = U
        self.S = S
        self.V = V

    @property
    def rank(self) -> int:
        """Structural rank bound (number of stored modes)."""
        return self.S.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.U.shape[0], self.V.shape[0])

    def dense(self) -> np.ndarray:
        """Materialize U @ S @ V.T."""
        return self.U @ self.S @ self.V.T

    def norm(self) -> float:
        """Frobenius norm; equals ||S||_F thanks to orthonormal factors."""
        return float(la.norm(self.S))

    def sigma(self) -> np.ndarray:
        """Singular values, one per stored mode (non-increasing)."""
        if _is_canonical_core(self.S):
            return np.diag(self.S).copy()
        return la.svd(self.S, compute_uv=False)

    def orthonormality_defect(self) -> float:
        """max of ||U.T U - I||_F and ||V.T V - I||_F."""
        eye = np.eye(self.rank)
        return max(
            float(la.norm(self.U.T @ self.U - eye)),
            float(la.norm(self.V.T @ self.V - eye)),
        )

    def __repr__(self) -> str:
        return f"LowRankMatrix(shape={self.shape}, rank={self.rank})"


def _is_canonical_core(S: np.ndarray) -> bool:
    if S.size == 0:
        return True
    d = np.diag(S)
    if np.any(d < 0) or np.any(np.diff(d) > 0):
        return False
    return np.count_nonzero(S - np.diag(d)) == 0


def zero(m: int, n: int | None = None) -> LowRankMatrix:
    """Rank-0 representation of the zero matrix."""
    n = m if n is None else n
    return LowRankMatrix(np.zeros((m, 0)), np.zeros((0, 0)), np.zeros((n, 0)))


def from_dense(X: np.ndarray) -> LowRankMatrix:
    """Factor a dense matrix by full SVD, keeping all modes.

    The result reproduces X to machine precision (ROUNDTRIP_RTOL relative)
    and has rank bound min(X.shape).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("input must be a matrix")
    if not np.all(np.isfinite(X)):
        raise ValueError("input has non-finite entries")
    U, s, Vt = la.svd(X, full_matrices=False)
    return LowRankMatrix(U, np.diag(s), Vt.T)


def from_factors(U: np.ndarray, S: np.ndarray, V: np.ndarray) -> LowRankMatrix:
    """Canonicalize arbitrary factors U @ S @ V.T.

    Compact QR of each factor followed by an SVD of the small core; the
    result has orthonormal factors and a diagonal, sorted core.
    """
    Qu, Ru = la.qr(U, mode="economic")
    Qv, Rv = la.qr(V, mode="economic")
    # The stacked core can be rectangular when the combined width exceeds a
    # matrix dimension; the thin SVD trims the rank bound accordingly.
    Uc, s, Vct = la.svd(Ru @ S @ Rv.T, full_matrices=False)
    return LowRankMatrix(Qu @ Uc, np.diag(s), Qv @ Vct.T)


def truncate(Y: LowRankMatrix, r: int) -> LowRankMatrix:
    """Best Frobenius rank-r approximation (truncated SVD).

    The discarded error is sqrt(sum of the squared trailing singular
    values). If r is at least the current rank bound, Y is returned
    unchanged, which makes the operation exactly idempotent.
    """
    if r < 1:
        raise ValueError(f"rank must be >= 1, got {r}")
    if r >= Y.rank:
        return Y
    if _is_canonical_core(Y.S):
        return LowRankMatrix(Y.U[:, :r], Y.S[:r, :r], Y.V[:, :r])
    Uc, s, Vct = la.svd(Y.S)
    return LowRankMatrix(Y.U @ Uc[:, :r], np.diag(s[:r]), Y.V @ Vct.T[:, :r])


def truncate_tol(Y: LowRankMatrix, tau: float) -> LowRankMatrix:
    """Rank-by-threshold truncation.

    Keeps the smallest rank q such that the first discarded singular value
    is <= tau; keeps everything if no singular value is below the
    threshold. Never returns rank 0 (rank-adaptive flows are undefined at
    the zero matrix), so the minimum result rank is 1.
    """
    if tau <= 0:
        raise ValueError(f"tolerance must be > 0, got {tau}")
    s = Y.sigma()
    q = int(np.count_nonzero(s > tau))
    return truncate(Y, max(q, 1))


def combine(terms: list[tuple[float, LowRankMatrix]]) -> LowRankMatrix:
    """Linear combination sum(c_i * Y_i) without truncation.

    Factors are concatenated and re-orthonormalized (compact QR of the
    stacked factors, SVD of the combined core); the rank bound of the
    result is the sum of the input rank bounds.
    """
    if not terms:
        raise ValueError("need at least one term")
    shape = terms[0][1].shape
    for _, Y in terms:
        if Y.shape != shape:
            raise ValueError(f"shape mismatch: {Y.shape} vs {shape}")
    U = np.hstack([Y.U for _, Y in terms])
    V = np.hstack([Y.V for _, Y in terms])
    S = la.block_diag(*[c * Y.S for c, Y in terms])
    return from_factors(U, S, V)


def add(Y1: LowRankMatrix, Y2: LowRankMatrix, c1: float = 1.0, c2: float = 1.0) -> LowRankMatrix:
    """c1*Y1 + c2*Y2 in factored form; rank bound r1 + r2, no truncation."""
    return combine([(c1, Y1), (c2, Y2)])


def tangent_project(Y: LowRankMatrix, Z: np.ndarray) -> np.ndarray:
    """Orthogonal projection of Z onto the tangent space of the rank-r
    manifold at Y: U U^T Z + Z V V^T - U U^T Z V V^T."""
    Z = np.asarray(Z, dtype=float)
    if Z.shape != Y.shape:
        raise ValueError(f"shape mismatch: {Z.shape} vs {Y.shape}")
    UtZ = Y.U.T @ Z
    ZV = Z @ Y.V
    return Y.U @ UtZ + ZV @ Y.V.T - Y.U @ (UtZ @ Y.V) @ Y.V.T


def singular_values(Y: LowRankMatrix) -> SingularSpectrum:
    """Singular values of Y, one per stored mode."""
    return SingularSpectrum(Y.sigma())

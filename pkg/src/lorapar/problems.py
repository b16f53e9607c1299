"""Model vector fields and matrix builders.

Three field kinds are supported:

* ``lyapunov``: dX/dt = A X + X A + C C^T with symmetric negative definite A,
  the stiff model for 2D heat flow with a separable source.
* ``generalized_sylvester``: dX/dt = -A0 X - A1 X C1 + b 1^T with diagonal C1,
  a family of heat problems solved simultaneously for several conductivities.
* ``riccati``: dX/dt = A^T X + X A + C^T C - X X (quadratic, not affine).

Builders produce the standard discretizations used in the experiments and
seeded random matrices with prescribed singular values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as la

from .lowrank import LowRankMatrix
from .mmio import load_matrix_market, save_matrix_market  # noqa: F401  (re-export)

SYMMETRY_RTOL = 1e-12


class VectorField:
    """Structured right-hand side F of a matrix ODE dX/dt = F(X).

    Instances are immutable; operand arrays are stored read-only. The
    symmetric-eigendecomposition of the main operator is cached since the
    closed-form flows reuse it heavily.
    """

    def __init__(self, kind: str, **operands: np.ndarray):
        self.kind = kind
        for name, arr in operands.items():
            arr = np.array(arr, dtype=float)
            arr.flags.writeable = False
            setattr(self, name, arr)
        self._eig: tuple[np.ndarray, np.ndarray] | None = None
        self._gram: np.ndarray | None = None

    @property
    def is_affine(self) -> bool:
        return self.kind != "riccati"

    @property
    def shape(self) -> tuple[int, int]:
        """Shape of the state matrices this field acts on."""
        if self.kind == "generalized_sylvester":
            return (self.A0.shape[0], self.c1.size)
        return (self.A.shape[0], self.A.shape[0])

    def sym_eig(self) -> tuple[np.ndarray, np.ndarray]:
        """Cached eigendecomposition A = Q diag(w) Q^T of the main operator."""
        if self._eig is None:
            A = self.A0 if self.kind == "generalized_sylvester" else self.A
            w, Q = la.eigh(A)
            w.flags.writeable = False
            Q.flags.writeable = False
            self._eig = (w, Q)
        return self._eig

    def source_gram(self) -> np.ndarray:
        """Cached C C^T (Lyapunov) or C^T C (Riccati)."""
        if self._gram is None:
            G = self.C @ self.C.T if self.kind == "lyapunov" else self.C.T @ self.C
            G.flags.writeable = False
            self._gram = G
        return self._gram

    def __repr__(self) -> str:
        return f"VectorField(kind={self.kind!r}, shape={self.shape})"


def lyapunov_field(A: np.ndarray, C: np.ndarray) -> VectorField:
    """dX/dt = A X + X A + C C^T; A must be symmetric negative definite."""
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    if C.ndim != 2 or C.shape[0] != A.shape[0]:
        raise ValueError("C must have the same row count as A")
    if la.norm(A - A.T) > SYMMETRY_RTOL * max(la.norm(A), 1.0):
        raise ValueError("A must be symmetric")
    field = VectorField("lyapunov", A=A, C=C)
    w, _ = field.sym_eig()
    if w[-1] >= 0:
        raise ValueError(f"A must be negative definite, got max eigenvalue {w[-1]:.3e}")
    return field


def sylvester_field(A0: np.ndarray, A1: np.ndarray, c1: np.ndarray, b: np.ndarray) -> VectorField:
    """dX/dt = -A0 X - A1 X C1 + b 1^T with C1 = diag(c1)."""
    A0 = np.asarray(A0, dtype=float)
    A1 = np.asarray(A1, dtype=float)
    c1 = np.atleast_1d(np.asarray(c1, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    m = A0.shape[0]
    if A0.shape != (m, m) or A1.shape != (m, m):
        raise ValueError("A0 and A1 must be square with equal size")
    if b.shape != (m,):
        raise ValueError("b must be a vector matching A0")
    return VectorField("generalized_sylvester", A0=A0, A1=A1, c1=c1, b=b)


def riccati_field(A: np.ndarray, C: np.ndarray) -> VectorField:
    """dX/dt = A^T X + X A + C^T C - X X (the quadratic weight is identity)."""
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    if C.ndim != 2 or C.shape[1] != A.shape[0]:
        raise ValueError("C must have the same column count as A")
    return VectorField("riccati", A=A, C=C)


def eval_field(F: VectorField, X: np.ndarray | LowRankMatrix) -> np.ndarray:
    """Evaluate the vector field at X (dense result)."""
    if isinstance(X, LowRankMatrix):
        X = X.dense()
    X = np.asarray(X, dtype=float)
    if X.shape != F.shape:
        raise ValueError(f"state shape {X.shape} does not match field {F.shape}")
    if F.kind == "lyapunov":
        return F.A @ X + X @ F.A + F.source_gram()
    if F.kind == "generalized_sylvester":
        return -F.A0 @ X - (F.A1 @ X) * F.c1[None, :] + np.outer(F.b, np.ones(F.c1.size))
    if F.kind == "riccati":
        return F.A.T @ X + X @ F.A + F.source_gram() - X @ X
    raise ValueError(f"unknown field kind {F.kind!r}")


def build_laplacian_1d(n: int, domain: tuple[float, float] = (-1.0, 1.0)) -> np.ndarray:
    """Centered-difference Laplacian with zero boundary values on `domain`.

    Tridiagonal (1, -2, 1) / dx^2 with dx = (b - a)/(n + 1); symmetric and
    negative definite.
    """
    if n < 2:
        raise ValueError(f"need at least 2 grid points, got {n}")
    a, b = domain
    dx = (b - a) / (n + 1)
    A = (np.diag(-2.0 * np.ones(n)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1))
    return A / dx**2


def build_riccati_diffusion(m: int, lam: float = 1.0, alpha=None) -> np.ndarray:
    """Finite-volume discretization of d/dx(alpha(x) d/dx .) - lam*I on [0, 1].

    Default alpha(x) = 2 + 2 cos(2 pi x), grid x_j = j/(m+1), face
    coefficients evaluated at the midpoints x_{j +/- 1/2}; zero boundary
    values. A constant alpha reproduces alpha * (standard Laplacian).
    """
    if m < 2:
        raise ValueError(f"need at least 2 grid points, got {m}")
    if alpha is None:
        alpha = lambda y: 2.0 + 2.0 * np.cos(2.0 * np.pi * y)
    dx = 1.0 / (m + 1)
    # faces x_{j+1/2} evaluated once so the matrix is exactly symmetric
    face = alpha((np.arange(m + 1) + 0.5) * dx) + np.zeros(m + 1)
    a_minus = face[:-1]
    a_plus = face[1:]
    D = np.diag(-(a_minus + a_plus)) + np.diag(a_plus[:-1], 1) + np.diag(a_minus[1:], -1)
    return D / dx**2 - lam * np.eye(m)


def build_riccati_C(m: int, k: int) -> np.ndarray:
    """k x m observation matrix: a constant row plus (k-1)/2 cosine/sine pairs.

    Row pair i samples sqrt(2) cos(2 pi i x) and sqrt(2) sin(2 pi i x) at the
    grid points x_j = j/(m+1); k must be odd.
    """
    if k % 2 == 0:
        raise ValueError(f"row count must be odd, got {k}")
    if k > m:
        raise ValueError(f"row count {k} exceeds grid size {m}")
    x = np.arange(1, m + 1) / (m + 1)
    rows = [np.ones(m)]
    for i in range(1, (k - 1) // 2 + 1):
        rows.append(np.sqrt(2.0) * np.cos(2.0 * np.pi * i * x))
    for i in range(1, (k - 1) // 2 + 1):
        rows.append(np.sqrt(2.0) * np.sin(2.0 * np.pi * i * x))
    return np.vstack(rows)


@dataclass(frozen=True)
class SpectrumSpec:
    """Prescription for a random matrix's singular values.

    Either an explicit list `sigma`, or the decay law sigma_i = 10^{-decay*(i-1)}
    for i = 1..length.
    """

    sigma: Sequence[float] | None = None
    decay: float | None = None
    length: int = 0
    seed: int = 0

    def values(self) -> np.ndarray:
        if self.sigma is not None:
            s = np.asarray(self.sigma, dtype=float)
        elif self.decay is not None:
            if self.length < 1:
                raise ValueError("length must be >= 1 for a decay law")
            s = 10.0 ** (-self.decay * np.arange(self.length))
        else:
            raise ValueError("spectrum needs either explicit values or a decay law")
        if np.any(np.diff(s) > 0) or np.any(s < 0):
            raise ValueError("prescribed singular values must be non-increasing and >= 0")
        return s


def haar_orthonormal(m: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """m x k matrix with orthonormal columns, Haar-distributed.

    QR of a standard-normal draw with the sign of diag(R) fixed, which makes
    the result deterministic for a fixed generator algorithm.
    """
    Q, R = la.qr(rng.standard_normal((m, k)), mode="economic")
    return Q * np.sign(np.diag(R))[None, :]


def random_with_spectrum(spec: SpectrumSpec, m: int, n: int | None = None) -> np.ndarray:
    """Seeded random m x n matrix with exactly the prescribed singular values."""
    n = m if n is None else n
    s = spec.values()
    if s.size > min(m, n):
        raise ValueError(f"{s.size} singular values do not fit a {m}x{n} matrix")
    rng = np.random.default_rng(spec.seed)
    Q1 = haar_orthonormal(m, s.size, rng)
    Q2 = haar_orthonormal(n, s.size, rng)
    return (Q1 * s[None, :]) @ Q2.T


def warm_start(F: VectorField, X_init: np.ndarray, t_warm: float, opts=None) -> np.ndarray:
    """Propagate X_init by the reference flow for a short burn-in time."""
    if t_warm < 0:
        raise ValueError("warm-start time must be >= 0")
    if t_warm == 0:
        return np.array(X_init, dtype=float)
    from .integrators import reference_flow

    return reference_flow(F, X_init, t_warm, opts)


def build_cookie_synthetic(m: int, p: int) -> VectorField:
    """Desk-scale analog of the parametric heat problem.

    A0 is the (positive definite) negated Laplacian on [0, 1]; A1 is an
    indicator of the middle third of the grid scaled like the stencil, acting
    as a subdomain whose conductivity is swept through c = 0..p-1; the source
    is a constant load on every column.
    """
    if m < 4:
        raise ValueError(f"grid size must be >= 4, got {m}")
    if p < 1:
        raise ValueError(f"need at least one parameter, got {p}")
    A0 = -build_laplacian_1d(m, (0.0, 1.0))
    a1 = np.zeros(m)
    a1[m // 3 : (2 * m) // 3] = (m + 1) ** 2
    return sylvester_field(A0, np.diag(a1), np.arange(p, dtype=float), np.ones(m))

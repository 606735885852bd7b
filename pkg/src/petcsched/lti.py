"""Linear-system numerics for sample-and-hold PETC loops.

Everything here is a pure function over small dense matrices (n <= 10 or
so). The matrix exponential, the CARE solver and the Lyapunov solver are
implemented directly on top of numpy so that the pipeline has no hidden
dependency on a particular scipy version.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .errors import DesignError, InputError, NumericError

SYM_TOL = 1e-9

# Pade(13) numerator coefficients and the 1-norm bound below which no
# scaling is needed (Higham, 2005).
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


def symmetrize(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return 0.5 * (X + X.T)


def as_fraction(value: Union[str, float, int, Fraction]) -> Fraction:
    """Convert a period to an exact rational, reading floats by their repr."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise InputError("matrix has non-finite entries")


def is_hurwitz(A: np.ndarray) -> bool:
    return bool(np.all(np.linalg.eigvals(A).real < 0))


def matrix_exponential(A, t: float = 1.0) -> np.ndarray:
    """Return ``exp(A t)`` by scaling and squaring with a degree-13 Pade approximant."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError("matrix_exponential expects a square matrix")
    if not np.isfinite(t):
        raise InputError("t must be finite")
    _check_finite(A)
    n = A.shape[0]
    X = A * t
    ident = np.eye(n)
    norm1 = np.linalg.norm(X, 1)
    if norm1 == 0.0:
        return ident
    s = max(0, int(np.ceil(np.log2(norm1 / _THETA13))))
    X = X / (2.0 ** s)

    b = _PADE13
    X2 = X @ X
    X4 = X2 @ X2
    X6 = X4 @ X2
    U = X @ (X6 @ (b[13] * X6 + b[11] * X4 + b[9] * X2)
             + b[7] * X6 + b[5] * X4 + b[3] * X2 + b[1] * ident)
    V = (X6 @ (b[12] * X6 + b[10] * X4 + b[8] * X2)
         + b[6] * X6 + b[4] * X4 + b[2] * X2 + b[0] * ident)
    E = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        E = E @ E
    return E


@dataclass(frozen=True, eq=False)
class PlantLoop:
    """One PETC loop: ``dx/dt = A x + B K xhat`` checked every ``h`` time units.

    ``Q_trig`` is the 2n x 2n triggering form evaluated on ``[xi; xhat]``;
    a communication happens at the first check where it is positive, or
    after ``k_bar`` checks.
    """

    A: np.ndarray
    B: np.ndarray
    K: np.ndarray
    h: Fraction
    k_bar: int
    Q_trig: np.ndarray
    name: str = ""

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        K = np.atleast_2d(np.asarray(self.K, dtype=float))
        Q = np.atleast_2d(np.asarray(self.Q_trig, dtype=float))
        _check_finite(A, B, K, Q)
        n = A.shape[0]
        if A.shape != (n, n):
            raise InputError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise InputError(f"B has {B.shape[0]} rows, expected {n}")
        m = B.shape[1]
        if K.shape != (m, n):
            raise InputError(f"K must be {m}x{n}, got {K.shape}")
        if Q.shape != (2 * n, 2 * n):
            raise InputError(f"Q_trig must be {2 * n}x{2 * n}, got {Q.shape}")
        if np.max(np.abs(Q - Q.T)) > SYM_TOL * max(1.0, np.max(np.abs(Q))):
            raise InputError("Q_trig is not symmetric")
        h = as_fraction(self.h)
        if h <= 0:
            raise InputError("checking period h must be positive")
        if int(self.k_bar) != self.k_bar or self.k_bar < 1:
            raise InputError("k_bar must be a positive integer")
        if not is_hurwitz(A + B @ K):
            raise DesignError("A + B K is not Hurwitz")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "Q_trig", symmetrize(Q))
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "k_bar", int(self.k_bar))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def hf(self) -> float:
        return float(self.h)

    def augmented(self) -> np.ndarray:
        """Generator ``[[A, B K], [0, 0]]`` of the sample-and-hold flow on ``[xi; xhat]``."""
        n = self.n
        Z = np.zeros((2 * n, 2 * n))
        Z[:n, :n] = self.A
        Z[:n, n:] = self.B @ self.K
        return Z


def flow(loop: PlantLoop, t: float) -> np.ndarray:
    """Matrix mapping the held state to ``xi(t)`` when ``xi(0) = xhat``."""
    if t < 0:
        raise InputError("t must be non-negative")
    n = loop.n
    E = matrix_exponential(loop.augmented(), t)
    return E[:n, :n] + E[:n, n:]


def hold_transition(loop: PlantLoop, k: int) -> np.ndarray:
    """M(k): state after ``k`` checking periods with the input held constant."""
    if int(k) != k or not 1 <= k <= loop.k_bar:
        raise InputError(f"k={k} outside 1..{loop.k_bar}")
    return flow(loop, int(k) * loop.hf)


def quadratic_form(M: np.ndarray, Q_trig: np.ndarray) -> np.ndarray:
    """``[M; I]^T Q [M; I]`` symmetrized."""
    n = M.shape[0]
    MI = np.vstack([M, np.eye(n)])
    return symmetrize(MI.T @ Q_trig @ MI)


@dataclass(frozen=True, eq=False)
class TimingTables:
    """M(k) and N(k) for k = 1..k_bar, stored 0-based in stacked arrays."""

    M_stack: np.ndarray
    N_stack: np.ndarray

    @property
    def k_bar(self) -> int:
        return self.M_stack.shape[0]

    @property
    def n(self) -> int:
        return self.M_stack.shape[1]

    def M(self, k: int) -> np.ndarray:
        if not 1 <= k <= self.k_bar:
            raise InputError(f"k={k} outside 1..{self.k_bar}")
        return self.M_stack[k - 1]

    def N(self, k: int) -> np.ndarray:
        if not 1 <= k <= self.k_bar:
            raise InputError(f"k={k} outside 1..{self.k_bar}")
        return self.N_stack[k - 1]


def timing_tables(loop: PlantLoop) -> TimingTables:
    Ms = np.stack([hold_transition(loop, k) for k in range(1, loop.k_bar + 1)])
    Ns = np.stack([quadratic_form(M, loop.Q_trig) for M in Ms])
    return TimingTables(Ms, Ns)


def solve_lyapunov(Acl, Q) -> np.ndarray:
    """Solve ``Acl^T P + P Acl = -Q`` through its Kronecker-product form."""
    Acl = np.asarray(Acl, dtype=float)
    Q = symmetrize(Q)
    _check_finite(Acl, Q)
    if not is_hurwitz(Acl):
        raise DesignError("closed-loop matrix is not Hurwitz")
    n = Acl.shape[0]
    ident = np.eye(n)
    # column-major vec: vec(A^T P) = (I kron A^T) vec P, vec(P A) = (A^T kron I) vec P
    L = np.kron(ident, Acl.T) + np.kron(Acl.T, ident)
    p = np.linalg.solve(L, -Q.reshape(-1, order="F"))
    return symmetrize(p.reshape(n, n, order="F"))


def _matrix_sign(Z: np.ndarray, max_iter: int = 100, tol: float = 1e-13) -> np.ndarray:
    for _ in range(max_iter):
        Zn = 0.5 * (Z + np.linalg.inv(Z))
        if np.linalg.norm(Zn - Z, 1) <= tol * np.linalg.norm(Zn, 1):
            return Zn
        Z = Zn
    raise NumericError("matrix sign iteration did not converge in %d steps" % max_iter)


def lqr_gain(A, B, Q_lqr, R):
    """Continuous-time LQR via the matrix sign function of the Hamiltonian.

    Returns ``(K, P)`` with ``u = -K x`` optimal, i.e. ``A - B K`` Hurwitz.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float)
    if B.ndim < 2:
        B = B.reshape(A.shape[0], -1)
    Q_lqr = symmetrize(np.atleast_2d(Q_lqr))
    R = symmetrize(np.atleast_2d(R))
    _check_finite(A, B, Q_lqr, R)
    n = A.shape[0]
    Rinv = np.linalg.inv(R)
    H = np.block([[A, -B @ Rinv @ B.T], [-Q_lqr, -A.T]])
    W = _matrix_sign(H)
    W11, W12 = W[:n, :n], W[:n, n:]
    W21, W22 = W[n:, :n], W[n:, n:]
    lhs = np.vstack([W12, W22 + np.eye(n)])
    rhs = -np.vstack([W11 + np.eye(n), W21])
    P, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    P = symmetrize(P)
    K = Rinv @ B.T @ P
    if not is_hurwitz(A - B @ K):
        raise DesignError("LQR closed loop is not Hurwitz; is (A, B) stabilizable?")
    return K, P


def care_residual(A, B, Q_lqr, R, P) -> float:
    """Relative residual of ``A^T P + P A - P B R^-1 B^T P + Q = 0``."""
    A, B, Q_lqr, R, P = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (A, B, Q_lqr, R, P))
    res = A.T @ P + P @ A - P @ B @ np.linalg.solve(R, B.T @ P) + Q_lqr
    scale = max(np.linalg.norm(Q_lqr), np.linalg.norm(A.T @ P), 1e-300)
    return float(np.linalg.norm(res) / scale)


def lyapunov_triggering_matrix(A, B, K, P, rho: float, Q_lyap) -> np.ndarray:
    """Triggering form enforcing ``dV/dt <= -rho x^T Q_lyap x`` for ``V = x^T P x``.

    ``K`` follows the loop convention ``u = K xhat``.
    """
    if not 0.0 < rho < 1.0:
        raise InputError("rho must lie in (0, 1)")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    K = np.atleast_2d(np.asarray(K, dtype=float))
    P = symmetrize(P)
    Q_lyap = symmetrize(Q_lyap)
    n = A.shape[0]
    top_left = A.T @ P + P @ A + rho * Q_lyap
    off = P @ B @ K
    Q = np.block([[top_left, off], [off.T, np.zeros((n, n))]])
    return symmetrize(Q)


@dataclass
class LyapunovDesign:
    """Everything produced when a loop is designed from LQR weights."""

    K: np.ndarray
    P: np.ndarray
    Q_lyap: np.ndarray
    Q_trig: np.ndarray
    care_P: Optional[np.ndarray] = field(default=None)


def design_lqr_lyapunov(A, B, Q_lqr, R, rho: float) -> LyapunovDesign:
    """LQR gain, LQ-cost Lyapunov matrix and the matching triggering form."""
    K_lqr, P_care = lqr_gain(A, B, Q_lqr, R)
    K = -K_lqr
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    R = np.atleast_2d(np.asarray(R, dtype=float))
    Q_lyap = symmetrize(np.atleast_2d(Q_lqr) + K.T @ R @ K)
    P = solve_lyapunov(A + B @ K, Q_lyap)
    Q_trig = lyapunov_triggering_matrix(A, B, K, P, rho, Q_lyap)
    return LyapunovDesign(K=K, P=P, Q_lyap=Q_lyap, Q_trig=Q_trig, care_P=P_care)

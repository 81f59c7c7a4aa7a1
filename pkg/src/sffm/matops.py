"""Dense small-matrix kernels: matrix exponential, linear solves, minimal
nonnegative Riccati solutions, and zero-eigenvalue limit projections.

Everything here operates on small dense arrays (n up to a few dozen) and is
pure: no global state, safe for concurrent use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError

# Degree-13 Pade numerator coefficients and the corresponding 1-norm scaling
# threshold (Higham 2005, alg. 2.3).
_PADE13_COEFF = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_PADE13_THETA = 5.371920351148152


def expm(A: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with a degree-13 Pade
    approximant and 1-norm based scaling."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NumericalError("expm: non-finite entries")

    norm = np.linalg.norm(A, 1)
    if norm == 0.0:
        return np.eye(A.shape[0])
    squarings = 0
    if norm > _PADE13_THETA:
        squarings = int(np.ceil(np.log2(norm / _PADE13_THETA)))
        A = A / (2.0**squarings)

    n = A.shape[0]
    I = np.eye(n)
    b = _PADE13_COEFF
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A2 @ A4
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I)
    F = np.linalg.solve(V - U, V + U)
    for _ in range(squarings):
        F = F @ F
    return F


@dataclass(frozen=True)
class RiccatiProblem:
    """Quadratic matrix equation B + A X + X D + X C X = 0 for X (p x q).

    B (p x q) and C (q x p) must be entrywise nonnegative; A and D carry
    negative diagonals strong enough that the diagonal-shift fixed point is
    well defined (checked at solve time).
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        C = np.asarray(self.C, dtype=float)
        D = np.asarray(self.D, dtype=float)
        p, q = B.shape
        if A.shape != (p, p) or D.shape != (q, q) or C.shape != (q, p):
            raise ValueError(
                f"inconsistent Riccati dimensions: A {A.shape}, B {B.shape}, "
                f"C {C.shape}, D {D.shape}"
            )
        if np.any(B < 0) or np.any(C < 0):
            raise ValueError("B and C must be entrywise nonnegative")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    def residual(self, X: np.ndarray) -> float:
        R = self.B + self.A @ X + X @ self.D + X @ self.C @ X
        return float(np.max(np.abs(R)))


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    residual: float
    converged: bool


def solve_riccati(
    problem: RiccatiProblem,
    tol: float = 1e-13,
    max_iter: int = 200_000,
    newton: bool = False,
    history: list | None = None,
) -> tuple[np.ndarray, SolveReport]:
    """Minimal nonnegative solution of ``problem`` by the diagonal-shift
    fixed-point iteration.

    Splitting the diagonals out of A and D turns the equation into
    ``a_i X_ij + X_ij d_j = rhs(X)_ij`` with nonnegative right-hand side, so
    iterates starting from zero increase monotonically to the minimal
    solution.  ``newton`` applies Newton corrections (Sylvester steps via a
    Kronecker solve) once the fixed point is within reach of its tolerance.
    If ``history`` is a list, every 100th iterate is appended to it.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A, B, C, D = problem.A, problem.B, problem.C, problem.D
    p, q = B.shape

    a = -np.diag(A)
    d = -np.diag(D)
    shift = a[:, None] + d[None, :]
    if np.any(shift <= 0):
        raise NumericalError(
            "diagonal shift is not positive; fixed-point iteration undefined"
        )
    A_off = A - np.diag(np.diag(A))
    D_off = D - np.diag(np.diag(D))

    X = np.zeros((p, q))
    converged = False
    iterations = 0
    for k in range(1, max_iter + 1):
        iterations = k
        X_new = (B + A_off @ X + X @ D_off + X @ C @ X) / shift
        if not np.all(np.isfinite(X_new)):
            raise NumericalError("iteration diverged")
        delta = float(np.max(np.abs(X_new - X)))
        X = X_new
        if history is not None and k % 100 == 0:
            history.append(X.copy())
        if delta <= 0.1 * tol:
            res = problem.residual(X)
            if res <= tol:
                converged = True
                break

    if newton:
        X, newton_ok = _newton_polish(problem, X, tol)
        converged = converged or newton_ok

    res = problem.residual(X)
    if res <= tol:
        converged = True
    return X, SolveReport(iterations=iterations, residual=res, converged=converged)


def _newton_polish(problem: RiccatiProblem, X: np.ndarray, tol: float):
    """A few Newton steps on the Riccati residual via Kronecker-vectorized
    Sylvester solves.  Cheap at these sizes and roughly squares the error."""
    A, B, C, D = problem.A, problem.B, problem.C, problem.D
    p, q = B.shape
    for _ in range(5):
        R = B + A @ X + X @ D + X @ C @ X
        res = float(np.max(np.abs(R)))
        if res <= 0.01 * tol:
            return X, True
        AL = A + X @ C
        DR = D + C @ X
        K = np.kron(np.eye(q), AL) + np.kron(DR.T, np.eye(p))
        try:
            delta = np.linalg.solve(K, -R.reshape(-1, order="F"))
        except np.linalg.LinAlgError:
            return X, problem.residual(X) <= tol
        X = X + delta.reshape((p, q), order="F")
        if not np.all(np.isfinite(X)):
            raise NumericalError("iteration diverged")
    return X, problem.residual(X) <= tol


@dataclass(frozen=True)
class SpectralLimit:
    """Outcome of a zero-eigenvalue limit projection.

    If ``exists``, ``projector`` P0 satisfies e^{Ay} -> P0 as y -> inf (the
    zero matrix when the spectrum lies strictly in the left half-plane).
    Otherwise ``reason`` names the failure (divergence or oscillation).
    """

    projector: np.ndarray | None
    exists: bool
    reason: str = ""


def zero_eigen_projection(A: np.ndarray, tol: float = 1e-9) -> SpectralLimit:
    """Spectral projector onto the zero eigenspace of ``A``, when the limit
    of e^{Ay} exists.

    Requires every eigenvalue either at zero (within ``tol``, semisimple) or
    with real part below ``-tol``.  The projector is assembled from a
    binormalized pair of right/left null bases.
    """
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise NumericalError("non-finite entries")
    n = A.shape[0]
    w, V = np.linalg.eig(A)
    near_zero = np.abs(w) <= tol
    rest = ~near_zero
    if np.any(w[rest].real > tol):
        return SpectralLimit(None, False, "limit diverges")
    if np.any(w[rest].real >= -tol):
        # neither decaying nor zero: purely imaginary (oscillatory) or too
        # close to the axis to classify
        return SpectralLimit(None, False, "oscillatory or defective spectrum")

    k = int(near_zero.sum())
    if k == 0:
        return SpectralLimit(np.zeros((n, n)), True)

    wl, W = np.linalg.eig(A.T)
    left_zero = np.abs(wl) <= tol
    if int(left_zero.sum()) != k:
        return SpectralLimit(None, False, "oscillatory or defective spectrum")
    Vz = V[:, near_zero]
    Wz = W[:, left_zero]
    G = Wz.T @ Vz
    if np.linalg.cond(G) > 1.0 / tol:
        # geometric multiplicity below algebraic: e^{Ay} grows polynomially
        return SpectralLimit(None, False, "limit diverges")
    P0 = Vz @ np.linalg.solve(G, Wz.T)
    if np.max(np.abs(P0.imag)) > 1e-8:
        return SpectralLimit(None, False, "oscillatory or defective spectrum")
    return SpectralLimit(np.ascontiguousarray(P0.real), True)


def linear_solve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve A X = B, refusing numerically singular systems.

    The error message carries a 1-norm condition estimate so callers can
    distinguish structural singularity from ill-conditioning.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    try:
        X = np.linalg.solve(A, B)
    except np.linalg.LinAlgError:
        raise NumericalError("singular linear system (exactly singular)") from None
    if not np.all(np.isfinite(X)):
        raise NumericalError("singular linear system (non-finite solution)")
    cond = np.linalg.cond(A, 1)
    if not np.isfinite(cond) or cond > 1e14:
        raise NumericalError(
            f"numerically singular linear system (condition estimate {cond:.3e})"
        )
    return X

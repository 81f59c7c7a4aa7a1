"""First-return operator layer: scaled generators, the return-probability
matrices psi/xi, their block assembly phi, and the expected-visits matrix m.

All block structure lives on the r-sign partition: psi maps starts in
r-positive phases to first returns in r-negative phases of the bounded
Y-fluid, xi is the mirror object for the unbounded fluid.  phi stacks both
anti-diagonally; m = phi (I - phi)^{-1} counts expected visits to level zero
over an infinite horizon.  Tilted variants (suffix ``_lam``) are the same
objects computed from T + lam*C in place of T; they encode the exponential
initial law of the X-level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .matops import RiccatiProblem, SolveReport, linear_solve, solve_riccati
from .model import SffmModel

RICCATI_TOL = 1e-13


@dataclass(frozen=True)
class FluidGenerator:
    """Rate-scaled generators ``q = |R|^{-1} T`` and
    ``q_lam = |R|^{-1}(T + lam C)`` in natural phase order."""

    model: SffmModel
    lam: float
    q: np.ndarray
    q_lam: np.ndarray

    def blocks(self, tilted: bool = False):
        """(q_pp, q_pm, q_mp, q_mm) under the r-sign partition."""
        part = self.model.partition
        plus, minus = part.s_plus_r, part.s_minus_r
        Q = self.q_lam if tilted else self.q
        return (
            Q[np.ix_(plus, plus)],
            Q[np.ix_(plus, minus)],
            Q[np.ix_(minus, plus)],
            Q[np.ix_(minus, minus)],
        )


def fluid_generator(model: SffmModel, lam: float = 0.0) -> FluidGenerator:
    """Build the scaled generator pair for ``model`` and tilt rate ``lam``."""
    model.require_valid()
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    inv_abs_r = 1.0 / model.abs_r()
    q = inv_abs_r[:, None] * model.T
    q_lam = inv_abs_r[:, None] * (model.T + lam * np.diag(model.c))
    return FluidGenerator(model=model, lam=lam, q=q, q_lam=q_lam)


def compute_psi(
    gen: FluidGenerator, tilted: bool = False, newton: bool = False
) -> tuple[np.ndarray, SolveReport]:
    """Return-probability matrix for starts in r-positive phases.

    Minimal nonnegative solution of
    ``q_pm + q_pp X + X q_mm + X q_mp X = 0`` over the r-sign blocks.
    Raises on solver non-convergence.
    """
    q_pp, q_pm, q_mp, q_mm = gen.blocks(tilted)
    return _solve_return_block(q_pp, q_pm, q_mp, q_mm, newton)


def compute_xi(
    gen: FluidGenerator, tilted: bool = False, newton: bool = False
) -> tuple[np.ndarray, SolveReport]:
    """Return-probability matrix for starts in r-negative phases (the
    unbounded fluid); same equation as :func:`compute_psi` with the roles of
    the sign blocks swapped."""
    q_pp, q_pm, q_mp, q_mm = gen.blocks(tilted)
    return _solve_return_block(q_mm, q_mp, q_pm, q_pp, newton)


def _solve_return_block(A, B, C, D, newton):
    if B.shape[0] == 0 or B.shape[1] == 0:
        return np.zeros(B.shape), SolveReport(0, 0.0, True)
    problem = RiccatiProblem(A=A, B=B, C=C, D=D)
    X, report = solve_riccati(problem, tol=RICCATI_TOL, newton=newton)
    if not report.converged:
        raise NumericalError(
            f"return-probability solve did not converge "
            f"(residual {report.residual:.3e} after {report.iterations} iterations)"
        )
    return X, report


@dataclass(frozen=True)
class ReturnOperators:
    """Assembled return operators in natural phase order.

    ``phi`` is block anti-diagonal over the r-sign partition with ``psi`` and
    ``xi`` off-diagonal blocks; ``m = phi (I - phi)^{-1}``.  The ``_lam``
    members are the tilted counterparts.  ``perm_r`` records the r-block
    print order (r-positive phases ascending, then r-negative).
    """

    model: SffmModel
    lam: float
    psi: np.ndarray
    xi: np.ndarray
    phi: np.ndarray
    m: np.ndarray
    psi_lam: np.ndarray
    xi_lam: np.ndarray
    phi_lam: np.ndarray
    m_lam: np.ndarray
    psi_report: SolveReport
    xi_report: SolveReport
    psi_lam_report: SolveReport
    xi_lam_report: SolveReport
    perm_r: tuple[int, ...]


def assemble_phi(model: SffmModel, psi: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Scatter the psi/xi blocks into an n x n matrix in natural order."""
    part = model.partition
    phi = np.zeros((model.n, model.n))
    phi[np.ix_(part.s_plus_r, part.s_minus_r)] = psi
    phi[np.ix_(part.s_minus_r, part.s_plus_r)] = xi
    return phi


def visits_from_phi(phi: np.ndarray) -> np.ndarray:
    """m = phi (I - phi)^{-1}; fails when returns are certain (null
    recurrent case), where the expected visit count is infinite."""
    n = phi.shape[0]
    try:
        return linear_solve((np.eye(n) - phi).T, phi.T).T
    except NumericalError:
        raise NumericalError("m undefined (null recurrent Y)") from None


def phi_from_visits(m: np.ndarray) -> np.ndarray:
    """Inverse identity phi = (I + m)^{-1} m, used as a cross-check."""
    n = m.shape[0]
    return linear_solve(np.eye(n) + m, m)


def assemble(model: SffmModel, lam: float, newton: bool = False) -> ReturnOperators:
    """Compute all return operators for ``model`` at tilt rate ``lam``.

    Both directions of the phi <-> m identities are verified; a mismatch
    beyond 1e-10 raises, as does a singular (I - phi).
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    gen = fluid_generator(model, lam)
    psi, psi_report = compute_psi(gen, tilted=False, newton=newton)
    xi, xi_report = compute_xi(gen, tilted=False, newton=newton)
    psi_lam, psi_lam_report = compute_psi(gen, tilted=True, newton=newton)
    xi_lam, xi_lam_report = compute_xi(gen, tilted=True, newton=newton)

    phi = assemble_phi(model, psi, xi)
    phi_lam = assemble_phi(model, psi_lam, xi_lam)
    m = visits_from_phi(phi)
    m_lam = visits_from_phi(phi_lam)

    for mat, inv in ((phi, m), (phi_lam, m_lam)):
        back = phi_from_visits(inv)
        if np.max(np.abs(back - mat)) > 1e-10:
            raise NumericalError("phi <-> m identity violated beyond 1e-10")

    return ReturnOperators(
        model=model,
        lam=lam,
        psi=psi,
        xi=xi,
        phi=phi,
        m=m,
        psi_lam=psi_lam,
        xi_lam=xi_lam,
        phi_lam=phi_lam,
        m_lam=m_lam,
        psi_report=psi_report,
        xi_report=xi_report,
        psi_lam_report=psi_lam_report,
        xi_lam_report=xi_lam_report,
        perm_r=model.partition.perm_r,
    )

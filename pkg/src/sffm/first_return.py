"""Joint law of (phase, X-level) when the unbounded Y-fluid first returns to
level zero.

With the return operators assembled, the measure on [0, v] is the two-term
closed form

    -exp(-lam v) (nu0/lam) phi_lam + (P + nu0/lam) phi,

whose components on r-negative phases come from down-crossing returns (psi
paths) and on r-positive phases from up-crossing returns (xi paths).  The
expected-visits expansion over powers of m and m_lam provides an alternating
series converging to the same measure when both spectral radii are below one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .model import InitialDistribution, SffmModel, NULL_RECURRENT, stability
from .return_ops import ReturnOperators, assemble
from .transient import _as_interval, require_boundary


@dataclass(frozen=True)
class FirstReturnMeasure:
    """First-return measure and its structural decompositions.

    ``values = const_part - decay_part``; ``psi_part`` is the restriction to
    r-negative phases (returns of paths started above), ``xi_part`` the
    restriction to r-positive phases.
    """

    values: np.ndarray
    psi_part: np.ndarray
    xi_part: np.ndarray
    const_part: np.ndarray
    decay_part: np.ndarray


def mu_phi(
    model: SffmModel,
    init: InitialDistribution,
    v,
    ops: ReturnOperators | None = None,
    boundary_order: int | None = None,
) -> FirstReturnMeasure:
    """P(phase at first Y-return = j, X at first Y-return <= v).

    Requires both fluids to be non-null-recurrent and the boundary
    conditions of the transient layer to hold.
    """
    interval = _as_interval(v)
    model.require_valid()
    init.check_against(model)
    report = stability(model)
    if NULL_RECURRENT in (report.class_x, report.class_y):
        raise NumericalError(
            "first-return measure undefined: null recurrent fluid "
            f"(X {report.class_x}, Y {report.class_y})"
        )
    require_boundary(model, init, boundary_order)
    if ops is None:
        ops = assemble(model, init.lam)

    decay = 0.0 if interval.whole_line else math.exp(-init.lam * interval.v)
    decay_part = decay * (init.nu0 / init.lam) @ ops.phi_lam
    const_part = init.mass_total() @ ops.phi
    values = const_part - decay_part
    part = model.partition
    return FirstReturnMeasure(
        values=values,
        psi_part=values[list(part.s_minus_r)],
        xi_part=values[list(part.s_plus_r)],
        const_part=const_part,
        decay_part=decay_part,
    )


def visit_measure(
    model: SffmModel,
    init: InitialDistribution,
    v,
    n: int,
    ops: ReturnOperators | None = None,
) -> np.ndarray:
    """Expected-visits measure of order n: the mass on [0, v] carried by the
    n-th power of the visit operator.

    Density part (1 - e^{-lam v})(nu0/lam) m_lam^n plus the atom part
    (nu0/lam) sum_k m_lam^k (m - m_lam) m^{n-1-k} + P m^n.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    interval = _as_interval(v)
    model.require_valid()
    init.check_against(model)
    if ops is None:
        ops = assemble(model, init.lam)

    m, m_lam = ops.m, ops.m_lam
    tail = init.nu0 / init.lam

    density = init.density_mass(interval.v) @ np.linalg.matrix_power(m_lam, n)
    diff = m - m_lam
    atom = init.point_mass @ np.linalg.matrix_power(m, n)
    for k in range(n):
        atom = atom + (
            tail
            @ np.linalg.matrix_power(m_lam, k)
            @ diff
            @ np.linalg.matrix_power(m, n - 1 - k)
        )
    return density + atom

"""Built-in benchmark models with independently known reference values.

Six small models exercise the full solver stack end to end; expected values
come from closed forms (exact rationals) or from published four-decimal
tables.  Examples 1-4 are members of the certified rate-proportional family
with symbolic references (stationary vectors, drifts, boundary orders);
examples 5 and 6 pin the return-operator and transient numerics, at 1e-9
(closed form) and 1e-4 (printed precision) respectively.

Vectors tagged "r-order" compare in the r-block print order (r-positive
phases ascending, then r-negative), which is how the four-phase references
are tabulated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    InitialDistribution,
    NULL_RECURRENT,
    STABLE,
    SffmModel,
    TandemParams,
    TRANSIENT,
    build_tandem_model,
    stability,
)
from .return_ops import assemble
from .transient import (
    check_boundary,
    limit_y_infinity,
    mu_exp_Dy,
    series_mu_exp_Dy,
)
from .first_return import mu_phi

EXAMPLE_IDS = (1, 2, 3, 4, 5, 6)

# numeric parameters shared by the two-phase examples
_P = 0.2
_B = 1.0
_BETA = 1.0


@dataclass(frozen=True)
class CheckRow:
    name: str
    expected: np.ndarray
    computed: np.ndarray
    diff: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.diff <= self.tol


@dataclass(frozen=True)
class ExampleReport:
    example: int
    rows: tuple[CheckRow, ...]

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)


def _row(name, expected, computed, tol) -> CheckRow:
    expected = np.atleast_1d(np.asarray(expected, dtype=float))
    computed = np.atleast_1d(np.asarray(computed, dtype=float))
    diff = float(np.max(np.abs(expected - computed))) if expected.size else 0.0
    return CheckRow(name=name, expected=expected, computed=computed, diff=diff, tol=tol)


def build_example(k: int) -> tuple[SffmModel, InitialDistribution]:
    """Model and initial distribution of benchmark k (1-6)."""
    if k == 1:
        params = TandemParams(
            b=_B, beta=_BETA, gamma=1.0,
            T_pm=[[_B + _BETA]], T_mp=[[_B]],
            abs_r=[1.0, 1.0], r_signs=[1, -1], c_signs=[1, -1],
            P_minus=[_P],
        )
        return build_tandem_model(params)
    if k == 2:
        params = TandemParams(
            b=_B, beta=_BETA, gamma=1.0,
            T_pm=[[_B + _BETA]], T_mp=[[_B]],
            abs_r=[1.0, 1.0], r_signs=[-1, 1], c_signs=[1, -1],
            P_minus=[_P],
        )
        return build_tandem_model(params)
    if k in (3, 4):
        r = 0.5 if k == 3 else 0.6
        half = (_B + _BETA) / 2.0
        params = TandemParams(
            b=_B, beta=_BETA, gamma=1.0,
            T_pm=[[half, half], [half, half]],
            T_mp=[[_B * (1 - r), _B * r], [_B * (1 - r), _B * r]],
            abs_r=[1.0] * 4, r_signs=[1, -1, -1, 1], c_signs=[1, 1, -1, -1],
            P_minus=[_P / 2, _P / 2],
        )
        return build_tandem_model(params)
    if k == 5:
        model = SffmModel(T=[[-2.0, 2.0], [1.0, -1.0]], c=[1.0, -1.0], r=[1.0, -1.0])
        init = InitialDistribution(lam=1.0, nu0=[0.2, 0.6], point_mass=[0.0, 0.2])
        return model, init
    if k == 6:
        model, init = build_example(4)
        return model, init
    raise ValueError(f"unknown example {k}")


def run_example(k: int) -> ExampleReport:
    if k not in EXAMPLE_IDS:
        raise ValueError(f"unknown example {k}")
    rows = _RUNNERS[k]()
    return ExampleReport(example=k, rows=tuple(rows))


def _boundary_rows(model, init, orders, tol=1e-9):
    checks = check_boundary(model, init, orders)
    residuals = [c.residual / c.scale for c in checks]
    return _row(f"boundary residual, orders 0..{orders}", np.zeros(orders + 1),
                residuals, tol)


def _example1():
    model, init = build_example(1)
    rows = [
        _row("density at zero", [_P * _B, _BETA * (1 - _P) - _P * _B], init.nu0, 1e-12),
        _row("point mass", [0.0, _P], init.point_mass, 1e-12),
        _row("decay rate", [_BETA], [init.lam], 1e-12),
    ]
    rep = stability(model)
    rows.append(_row("drifts (x, y)", [-1 / 3, -1 / 3], [rep.drift_x, rep.drift_y], 1e-10))
    rows.append(_row("both fluids stable", [1.0],
                     [float(rep.class_x == STABLE and rep.class_y == STABLE)], 0.0))
    rows.append(_boundary_rows(model, init, 10))
    a = mu_exp_Dy(model, init, 0.5, 1.0)
    b = series_mu_exp_Dy(model, init, 0.5, 1.0, 30)
    rows.append(_row("series vs closed form (y=0.5, v=1)", a.values, b.values, 1e-8))
    return rows


def _example2():
    model, init = build_example(2)
    ref_model, ref_init = build_example(1)
    rows = []
    # flipping the r-signs leaves every |r|-based quantity unchanged
    for y in (0.1, 1.0):
        for v in (0.5, 1.0, 2.0):
            rows.append(
                _row(
                    f"measure matches example 1 (y={y}, v={v})",
                    mu_exp_Dy(ref_model, ref_init, y, v).values,
                    mu_exp_Dy(model, init, y, v).values,
                    1e-12,
                )
            )
    rep = stability(model)
    rows.append(_row("drifts (x, y)", [-1 / 3, 1 / 3], [rep.drift_x, rep.drift_y], 1e-10))
    rows.append(_row("X stable, Y transient", [1.0],
                     [float(rep.class_x == STABLE and rep.class_y == TRANSIENT)], 0.0))
    return rows


def _example3():
    model, init = build_example(3)
    rep = stability(model)
    rows = [
        _row("stationary phase vector", [1 / 6, 1 / 6, 1 / 3, 1 / 3], rep.pi, 1e-10),
        _row("drifts (x, y)", [-1 / 3, 0.0], [rep.drift_x, rep.drift_y], 1e-10),
        _row("Y null recurrent", [1.0], [float(rep.class_y == NULL_RECURRENT)], 0.0),
    ]
    inv_abs_r = 1.0 / model.abs_r()
    eigs = np.sort(np.linalg.eigvals(inv_abs_r[:, None] * model.T).real)
    rows.append(_row("scaled-generator spectrum", [-3.0, -2.0, -1.0, 0.0], eigs, 1e-9))
    rows.append(_boundary_rows(model, init, 8))
    a = mu_exp_Dy(model, init, 0.5, 1.0)
    b = series_mu_exp_Dy(model, init, 0.5, 1.0, 30)
    rows.append(_row("series vs closed form (y=0.5, v=1)", a.values, b.values, 1e-8))
    return rows


def _example4():
    model, init = build_example(4)
    rep = stability(model)
    rows = [
        _row("stationary phase vector", [2 / 15, 3 / 15, 5 / 15, 5 / 15], rep.pi, 1e-10),
        _row("drifts (x, y)", [-1 / 3, -1 / 15], [rep.drift_x, rep.drift_y], 1e-10),
        _row("both fluids stable", [1.0],
             [float(rep.class_x == STABLE and rep.class_y == STABLE)], 0.0),
        _row("density at zero", [0.08, 0.12, 0.3, 0.3], init.nu0, 1e-12),
        _row("point mass", [0.0, 0.0, 0.1, 0.1], init.point_mass, 1e-12),
    ]
    rows.append(_boundary_rows(model, init, 8))
    return rows


def _example5():
    model, init = build_example(5)
    ops = assemble(model, init.lam)
    rows = [
        _row("phi", [[0.0, 1.0], [0.5, 0.0]], ops.phi, 1e-9),
        _row("tilted phi", [[0.0, 1.0], [0.5, 0.0]], ops.phi_lam, 1e-9),
        _row("visit matrix", [[1.0, 2.0], [1.0, 1.0]], ops.m, 1e-9),
        _row("phase-at-return vector", [0.4, 0.2], init.mass_total() @ ops.phi, 1e-9),
        _row("tilted decay vector", [0.3, 0.2], (init.nu0 / init.lam) @ ops.phi_lam, 1e-9),
    ]
    for v in (0.5, 1.0, 2.0):
        expected = np.array([0.4, 0.2]) - math.exp(-v) * np.array([0.3, 0.2])
        rows.append(_row(f"first-return measure (v={v})",
                         expected, mu_phi(model, init, v, ops=ops).values, 1e-9))
    for v, label in ((0.0, "0"), (1.0, "1"), (math.inf, "inf")):
        expected = np.array([1 / 3, 2 / 3]) - (
            0.0 if math.isinf(v) else math.exp(-v)
        ) * np.array([1 / 3, 1 / 3])
        rows.append(_row(f"stationary X-measure (v={label})",
                         expected, limit_y_infinity(model, init, v), 1e-9))
    rows.append(_row("stationary coefficients, 4-decimal",
                     [0.3333, 0.3333, 0.3333, 0.6667],
                     np.concatenate([
                         limit_y_infinity(model, init, math.inf)
                         - limit_y_infinity(model, init, 0.0),
                         limit_y_infinity(model, init, math.inf),
                     ]),
                     1e-4))
    return rows


def _example6():
    model, init = build_example(6)
    ops = assemble(model, init.lam)
    perm = list(ops.perm_r)
    rows = [
        _row("return block, up starts",
             [[0.2662, 0.7338], [0.4314, 0.5686]], ops.psi, 1e-4),
        _row("return block, down starts",
             [[0.1774, 0.7190], [0.2935, 0.5686]], ops.xi, 1e-4),
        _row("tilted return block, up starts",
             [[0.6354, 0.7292], [0.3962, 0.2077]], ops.psi_lam, 1e-4),
        _row("tilted return block, down starts",
             [[0.4236, 0.6603], [0.2917, 0.2077]], ops.xi_lam, 1e-4),
        _row("phase-at-return vector (r-order)",
             [0.1387, 0.3137, 0.1939, 0.2861],
             (init.mass_total() @ ops.phi)[perm], 1e-4),
        _row("tilted decay vector (r-order)",
             [0.1383, 0.1415, 0.1697, 0.1206],
             ((init.nu0 / init.lam) @ ops.phi_lam)[perm], 1e-4),
    ]
    lim_inf = limit_y_infinity(model, init, math.inf)
    lim_zero = limit_y_infinity(model, init, 0.0)
    rows.append(_row("stationary marginal coefficient (r-order)",
                     [0.1333, 0.3333, 0.2000, 0.3333], lim_inf[perm], 1e-4))
    rows.append(_row("stationary decay coefficient (r-order)",
                     [0.1333, 0.1667, 0.2000, 0.1667],
                     (lim_inf - lim_zero)[perm], 1e-4))
    return rows


_RUNNERS = {
    1: _example1,
    2: _example2,
    3: _example3,
    4: _example4,
    5: _example5,
    6: _example6,
}

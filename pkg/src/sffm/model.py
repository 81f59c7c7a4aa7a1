"""Model types for stochastic fluid-fluid models (SFFMs).

An SFFM couples an irreducible CTMC phase process (generator ``T``) with two
fluid levels: ``X`` moving at rate ``c[i]`` and ``Y`` moving at rate ``r[i]``
while the phase is ``i``.  Both levels are reflected at zero; all rates are
required to be nonzero.  This module defines the model and initial-condition
containers, diagnostic validation, censoring of zero-rate phases, the
rate-proportional "tandem" model family whose boundary conditions hold at
every derivative order, and drift-based stability classification.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError

ROW_SUM_TOL = 1e-12
DRIFT_ZERO_BAND = 1e-10

STABLE = "stable"
NULL_RECURRENT = "null_recurrent"
TRANSIENT = "transient"


def _frozen_array(a, dtype=float, ndim=None) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"expected {ndim}-dimensional array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PhasePartition:
    """Sign partitions of the phase space and the block-order permutations.

    ``s_plus_r``/``s_minus_r`` partition phases by the sign of the Y-rate r,
    ``s_plus_c``/``s_minus_c`` by the sign of the X-rate c.  ``perm_r`` lists
    phase indices in (r-positive, r-negative) block order, ascending within
    each block; ``perm_c`` likewise for c.  ``r_check`` is the 0/1 indicator
    of r > 0 (diagonal of the up-phase selector).
    """

    s_plus_r: tuple[int, ...]
    s_minus_r: tuple[int, ...]
    s_plus_c: tuple[int, ...]
    s_minus_c: tuple[int, ...]
    r_check: np.ndarray
    perm_r: tuple[int, ...]
    perm_c: tuple[int, ...]

    @staticmethod
    def from_rates(c: np.ndarray, r: np.ndarray) -> "PhasePartition":
        s_plus_r = tuple(int(i) for i in np.flatnonzero(r > 0))
        s_minus_r = tuple(int(i) for i in np.flatnonzero(r < 0))
        s_plus_c = tuple(int(i) for i in np.flatnonzero(c > 0))
        s_minus_c = tuple(int(i) for i in np.flatnonzero(c < 0))
        return PhasePartition(
            s_plus_r=s_plus_r,
            s_minus_r=s_minus_r,
            s_plus_c=s_plus_c,
            s_minus_c=s_minus_c,
            r_check=_frozen_array((r > 0).astype(float)),
            perm_r=s_plus_r + s_minus_r,
            perm_c=s_plus_c + s_minus_c,
        )

    def inverse_perm_r(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.argsort(self.perm_r))

    def inverse_perm_c(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.argsort(self.perm_c))


@dataclass(frozen=True)
class SffmModel:
    """An SFFM instance: phase generator ``T`` and rate vectors ``c``, ``r``.

    Immutable after construction; the sign partition is derived and cached.
    Construction only enforces shapes.  Semantic invariants (generator rows,
    irreducibility, nonzero rates) are reported by :func:`validate` and
    enforced by :meth:`require_valid`.
    """

    T: np.ndarray
    c: np.ndarray
    r: np.ndarray
    partition: PhasePartition = field(init=False)

    def __post_init__(self):
        T = _frozen_array(self.T, ndim=2)
        c = _frozen_array(self.c, ndim=1)
        r = _frozen_array(self.r, ndim=1)
        n = T.shape[0]
        if T.shape != (n, n) or c.shape != (n,) or r.shape != (n,):
            raise ValueError(
                f"inconsistent shapes: T {T.shape}, c {c.shape}, r {r.shape}"
            )
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "partition", PhasePartition.from_rates(c, r))

    @property
    def n(self) -> int:
        return self.T.shape[0]

    def abs_r(self) -> np.ndarray:
        return np.abs(self.r)

    def abs_c(self) -> np.ndarray:
        return np.abs(self.c)

    def require_valid(self) -> None:
        violations = validate(self)
        if violations:
            raise ValidationError("; ".join(violations))


@dataclass(frozen=True)
class InitialDistribution:
    """Initial law of X(0): exponential density plus a point mass at zero.

    The density in phase j is ``nu0[j] * exp(-lam * x)`` for x > 0 and the
    atom at zero is ``point_mass[j]``.  No atom is allowed in phases with
    c > 0 (mass cannot sit at level zero while being pushed up), and the
    total mass ``sum(nu0)/lam + sum(point_mass)`` must be one.

    ``boundary_certified`` marks distributions produced by
    :func:`build_tandem_model`, whose boundary conditions hold at every
    derivative order by construction; transient-analysis entry points then
    skip the finite-order numerical check.
    """

    lam: float
    nu0: np.ndarray
    point_mass: np.ndarray
    boundary_certified: bool = False

    def __post_init__(self):
        object.__setattr__(self, "nu0", _frozen_array(self.nu0, ndim=1))
        object.__setattr__(self, "point_mass", _frozen_array(self.point_mass, ndim=1))
        if self.lam <= 0:
            raise ValidationError(f"decay rate must be positive, got {self.lam}")
        if self.nu0.shape != self.point_mass.shape:
            raise ValidationError("nu0 and point_mass must have equal length")
        if np.any(self.nu0 < 0) or np.any(self.point_mass < 0):
            raise ValidationError("nu0 and point_mass must be nonnegative")
        mass = self.nu0.sum() / self.lam + self.point_mass.sum()
        if abs(mass - 1.0) > 1e-9:
            raise ValidationError(f"total mass is {mass!r}, expected 1")

    @property
    def n(self) -> int:
        return self.nu0.shape[0]

    def check_against(self, model: SffmModel) -> None:
        """Raise unless this distribution is compatible with ``model``."""
        if self.n != model.n:
            raise ValidationError(
                f"initial distribution has {self.n} phases, model has {model.n}"
            )
        bad = [j for j in model.partition.s_plus_c if self.point_mass[j] > 0]
        if bad:
            raise ValidationError(
                f"point mass in up-rate (c>0) phases {[j + 1 for j in bad]}"
            )

    def mass_total(self) -> np.ndarray:
        """Phase-wise total mass on [0, inf): P + nu0/lam."""
        return self.point_mass + self.nu0 / self.lam

    def density_mass(self, v: float) -> np.ndarray:
        """Phase-wise density mass on [0, v]: (1 - exp(-lam v)) nu0/lam."""
        if np.isinf(v):
            return self.nu0 / self.lam
        return -np.expm1(-self.lam * v) * self.nu0 / self.lam


@dataclass(frozen=True)
class TandemParams:
    """Parameters of the rate-proportional model family with certified
    boundary conditions.

    Phases are in natural order; ``c_signs`` determines the c-sign partition.
    ``T_pm`` is the (c-positive -> c-negative) block of ``|R|^{-1} T`` and must
    have constant row sums ``b + beta``; ``T_mp`` is the reverse block with
    constant row sums ``b``.  Diagonal blocks are ``-(b+beta) I`` and ``-b I``.
    Rates satisfy ``|c| = gamma |r|``; the initial distribution has decay rate
    ``beta / gamma``, atom ``P_minus`` on the c-negative phases, and the free
    density mass on c-negative phases split by ``nu_minus_weights`` (uniform
    by default).
    """

    b: float
    beta: float
    gamma: float
    T_pm: np.ndarray
    T_mp: np.ndarray
    abs_r: np.ndarray
    r_signs: np.ndarray
    c_signs: np.ndarray
    P_minus: np.ndarray
    nu_minus_weights: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "T_pm", _frozen_array(self.T_pm, ndim=2))
        object.__setattr__(self, "T_mp", _frozen_array(self.T_mp, ndim=2))
        object.__setattr__(self, "abs_r", _frozen_array(self.abs_r, ndim=1))
        object.__setattr__(self, "r_signs", _frozen_array(self.r_signs, ndim=1))
        object.__setattr__(self, "c_signs", _frozen_array(self.c_signs, ndim=1))
        object.__setattr__(self, "P_minus", _frozen_array(self.P_minus, ndim=1))
        if self.nu_minus_weights is not None:
            object.__setattr__(
                self, "nu_minus_weights", _frozen_array(self.nu_minus_weights, ndim=1)
            )

    @property
    def lam(self) -> float:
        return self.beta / self.gamma


def validate(model: SffmModel) -> list[str]:
    """Return descriptions of every violated model invariant (empty = valid).

    Checks: nonnegative off-diagonals and zero row sums of the generator,
    irreducibility of the phase process, and nonzero fluid rates.
    """
    violations: list[str] = []
    T, c, r, n = model.T, model.c, model.r, model.n

    if not np.all(np.isfinite(T)):
        violations.append("generator has non-finite entries")
        return violations

    for i in range(n):
        for j in range(n):
            if i != j and T[i, j] < 0:
                violations.append(
                    f"negative off-diagonal rate T[{i + 1},{j + 1}] = {T[i, j]:.6g}"
                )
    row_sums = T.sum(axis=1)
    for i in range(n):
        if abs(row_sums[i]) > ROW_SUM_TOL:
            violations.append(f"generator row {i + 1} sums to {row_sums[i]:.6g}")

    for i in range(n):
        if c[i] == 0.0:
            violations.append(f"zero c-rate at phase {i + 1}")
        if r[i] == 0.0:
            violations.append(f"zero r-rate at phase {i + 1}")

    if not _irreducible(T):
        violations.append("phase process is not irreducible")

    return violations


def _irreducible(T: np.ndarray) -> bool:
    # Strong connectivity of the nonzero off-diagonal pattern (exact, no numerics).
    n = T.shape[0]
    pattern = (T > 0) & ~np.eye(n, dtype=bool)
    return _all_reachable(pattern, 0) and _all_reachable(pattern.T, 0)


def _all_reachable(adj: np.ndarray, start: int) -> bool:
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[start] = True
    stack = [start]
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(adj[i]):
            if not seen[j]:
                seen[j] = True
                stack.append(int(j))
    return bool(seen.all())


def censor_zero_phases(T_bar: np.ndarray, zero_set: Sequence[int]) -> np.ndarray:
    """Eliminate zero-rate phases from a generator.

    Sojourns in ``zero_set`` are folded into effective transition rates
    between the remaining phases: ``T = A + B (-D)^{-1} C`` in the block
    decomposition of ``T_bar`` by (kept, censored) phases.  ``zero_set``
    holds 0-based indices.  The censored phases must be left eventually
    (``D`` nonsingular), otherwise the kept chain is never re-entered.
    """
    T_bar = np.asarray(T_bar, dtype=float)
    n_all = T_bar.shape[0]
    zero = sorted(set(int(i) for i in zero_set))
    if any(i < 0 or i >= n_all for i in zero):
        raise ValueError("zero_set index out of range")
    if not zero:
        return T_bar.copy()
    keep = [i for i in range(n_all) if i not in zero]
    if not keep:
        raise ValueError("cannot censor every phase")

    A = T_bar[np.ix_(keep, keep)]
    B = T_bar[np.ix_(keep, zero)]
    C = T_bar[np.ix_(zero, keep)]
    D = T_bar[np.ix_(zero, zero)]
    try:
        folded = B @ np.linalg.solve(-D, C)
    except np.linalg.LinAlgError:
        raise ValidationError("zero-rate class is absorbing") from None
    if not np.all(np.isfinite(folded)):
        raise ValidationError("zero-rate class is absorbing")
    return A + folded


def build_tandem_model(params: TandemParams) -> tuple[SffmModel, InitialDistribution]:
    """Construct the model and initial distribution for ``params``.

    The result satisfies the level-zero boundary conditions at every
    derivative order, so the returned initial distribution carries the
    ``boundary_certified`` flag.
    """
    b, beta, gamma = params.b, params.beta, params.gamma
    if b <= 0 or beta <= 0 or gamma <= 0:
        raise ValidationError("b, beta, gamma must be positive")
    abs_r = params.abs_r
    n = abs_r.shape[0]
    if np.any(abs_r <= 0):
        raise ValidationError("abs_r must be positive")
    if np.any(np.abs(params.r_signs) != 1) or np.any(np.abs(params.c_signs) != 1):
        raise ValidationError("r_signs and c_signs must be +/-1 vectors")

    s_plus = np.flatnonzero(params.c_signs > 0)
    s_minus = np.flatnonzero(params.c_signs < 0)
    p, m = len(s_plus), len(s_minus)
    if params.T_pm.shape != (p, m) or params.T_mp.shape != (m, p):
        raise ValidationError(
            f"block shapes {params.T_pm.shape}/{params.T_mp.shape} do not match "
            f"the c-sign partition ({p} up, {m} down)"
        )
    if np.any(params.T_pm < 0) or np.any(params.T_mp < 0):
        raise ValidationError("rate blocks must be nonnegative")
    if np.any(np.abs(params.T_pm.sum(axis=1) - (b + beta)) > 1e-10):
        raise ValidationError("T_pm row sums must all equal b + beta")
    if np.any(np.abs(params.T_mp.sum(axis=1) - b) > 1e-10):
        raise ValidationError("T_mp row sums must all equal b")

    # Scaled generator in c-block order, scattered back to natural order.
    Q = np.zeros((n, n))
    Q[np.ix_(s_plus, s_plus)] = -(b + beta) * np.eye(p)
    Q[np.ix_(s_plus, s_minus)] = params.T_pm
    Q[np.ix_(s_minus, s_plus)] = params.T_mp
    Q[np.ix_(s_minus, s_minus)] = -b * np.eye(m)
    T = np.diag(abs_r) @ Q

    c = params.c_signs * gamma * abs_r
    r = params.r_signs * abs_r
    model = SffmModel(T=T, c=c, r=r)

    lam = params.lam
    P_minus = params.P_minus
    if P_minus.shape != (m,):
        raise ValidationError("P_minus must have one entry per c-negative phase")
    if np.any(P_minus < 0):
        raise ValidationError("P_minus must be nonnegative")
    atom_bound = lam * gamma / (b + lam * gamma)
    atom_total = P_minus.sum()
    if atom_total > atom_bound + 1e-12:
        raise ValidationError(
            f"atom too large: sum {atom_total:.6g} exceeds {atom_bound:.6g}"
        )

    # nu_+(0) balances the atom outflow; |R_+|^{-1} C_+ = gamma I here.
    nu_plus = P_minus @ params.T_mp / gamma
    nu_minus_total = lam - (b + lam * gamma) / gamma * atom_total
    if nu_minus_total < -1e-12:
        raise ValidationError(
            f"atom too large: residual density mass {nu_minus_total:.6g} is negative"
        )
    nu_minus_total = max(nu_minus_total, 0.0)
    if params.nu_minus_weights is not None:
        w = params.nu_minus_weights
        if w.shape != (m,) or np.any(w < 0) or w.sum() <= 0:
            raise ValidationError("nu_minus_weights must be nonnegative with positive sum")
        w = w / w.sum()
    else:
        w = np.full(m, 1.0 / m)
    nu_minus = nu_minus_total * w

    nu0 = np.zeros(n)
    nu0[s_plus] = nu_plus
    nu0[s_minus] = nu_minus
    point_mass = np.zeros(n)
    point_mass[s_minus] = P_minus

    init = InitialDistribution(
        lam=lam, nu0=nu0, point_mass=point_mass, boundary_certified=True
    )
    return model, init


@dataclass(frozen=True)
class StabilityReport:
    """Stationary phase vector, mean drifts, and recurrence classes."""

    pi: np.ndarray
    drift_x: float
    drift_y: float
    class_x: str
    class_y: str


def stability(model: SffmModel) -> StabilityReport:
    """Classify both fluids by the sign of their stationary mean drift.

    pi solves pi T = 0, pi 1 = 1; drifts are pi.c and pi.r.  A drift within
    ``DRIFT_ZERO_BAND`` of zero classifies as null recurrent (model inputs
    are typically exact rationals, so true zeros are hit exactly).
    """
    model.require_valid()
    pi = stationary_distribution(model.T)
    drift_x = float(pi @ model.c)
    drift_y = float(pi @ model.r)
    return StabilityReport(
        pi=pi,
        drift_x=drift_x,
        drift_y=drift_y,
        class_x=_classify(drift_x),
        class_y=_classify(drift_y),
    )


def _classify(drift: float) -> str:
    if abs(drift) <= DRIFT_ZERO_BAND:
        return NULL_RECURRENT
    return STABLE if drift < 0 else TRANSIENT


def stationary_distribution(T: np.ndarray) -> np.ndarray:
    """Solve pi T = 0, pi 1 = 1 by a bordered linear solve."""
    n = T.shape[0]
    A = np.vstack([T.T, np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    return pi

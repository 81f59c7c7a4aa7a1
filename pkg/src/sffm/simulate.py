"""Event-driven Monte Carlo oracle for the coupled (phase, X, Y) dynamics.

Paths are simulated exactly: holding times are exponential draws, levels
move linearly inside holding intervals, and stopping levels are resolved by
closed-form division of the final interval, so estimators carry no
discretization bias.  Each replication consumes an independent RNG stream
spawned deterministically from (seed, replication index), which makes
results independent of scheduling and bit-reproducible.

Two stopping rules are provided: ``run_to_omega`` stops when the cumulative
in-out flow of the Y-fluid reaches a target, ``run_to_theta`` stops when the
unbounded Y-fluid first returns to level zero.  Paths whose Y-level escapes
beyond a configurable threshold in the direction of the mean drift are
declared non-returning early; an event cap bounds every path.
"""

from __future__ import annotations

from bisect import bisect_right
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import InitialDistribution, SffmModel, NULL_RECURRENT, stability

STOP_OK = 0
STOP_CAPPED = 1
STOP_ESCAPED = 2

STOP_NAMES = {STOP_OK: "ok", STOP_CAPPED: "capped", STOP_ESCAPED: "escaped"}


@dataclass(frozen=True)
class SimConfig:
    """Replication plan: seed, count, per-path event cap, and the escape
    level beyond which a drifting path is declared non-returning."""

    seed: int
    replications: int
    max_event_count: int = 1_000_000
    escape_level: float = 40.0

    def __post_init__(self):
        if self.replications < 1:
            raise ValidationError("replications must be >= 1")
        if self.max_event_count < 1:
            raise ValidationError("max_event_count must be >= 1")


@dataclass(frozen=True)
class SampleBatch:
    """Per-replication records at the stopping time.

    ``phase_at_stop`` is -1 for paths that did not stop regularly.
    ``inout_at_stop`` and ``upshift_at_stop`` hold the cumulative |r|-flow
    and its positive-rate part, accumulated in compensated summation.
    ``phase_counts`` counts regular stops by phase.
    """

    replications: int
    stop_reason: np.ndarray
    phase_at_stop: np.ndarray
    x_at_stop: np.ndarray
    path_time: np.ndarray
    start_phase: np.ndarray
    inout_at_stop: np.ndarray
    upshift_at_stop: np.ndarray
    phase_counts: np.ndarray
    notes: tuple[str, ...] = ()


class _PhaseTables:
    """Per-phase jump distributions and rates, precomputed for the kernels."""

    __slots__ = ("rates", "scales", "jump_cdfs", "jump_targets", "c", "r", "abs_r")

    def __init__(self, model: SffmModel):
        T = model.T
        n = model.n
        self.rates = [-float(T[i, i]) for i in range(n)]
        self.scales = [1.0 / rate for rate in self.rates]
        self.jump_cdfs = []
        self.jump_targets = []
        for i in range(n):
            targets = [j for j in range(n) if j != i and T[i, j] > 0]
            weights = [float(T[i, j]) for j in targets]
            total = sum(weights)
            acc, cdf = 0.0, []
            for w in weights:
                acc += w / total
                cdf.append(acc)
            cdf[-1] = 1.0 + 1e-15
            self.jump_cdfs.append(cdf)
            self.jump_targets.append(targets)
        self.c = [float(x) for x in model.c]
        self.r = [float(x) for x in model.r]
        self.abs_r = [abs(x) for x in model.r]


def _rep_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, rep]))


def sample_initial(
    init: InitialDistribution, rng: np.random.Generator
) -> tuple[int, float]:
    """Draw (phase, X(0)): density draws give an exponential level, atom
    draws start at zero.  Density categories are scanned before atoms."""
    dens = init.nu0 / init.lam
    u = rng.random()
    acc = 0.0
    for j, w in enumerate(dens):
        acc += w
        if u < acc:
            return j, float(rng.exponential(1.0 / init.lam))
    for j, w in enumerate(init.point_mass):
        acc += w
        if u < acc:
            return j, 0.0
    # roundoff fell through the cumulative scan; take the heaviest atom
    j = int(np.argmax(init.point_mass + dens))
    return (j, 0.0) if init.point_mass[j] >= dens[j] else (
        j,
        float(rng.exponential(1.0 / init.lam)),
    )


def _kahan(total: float, comp: float, term: float):
    y = term - comp
    s = total + y
    return s, (s - total) - y


def _advance_x(x: float, c: float, dt: float) -> float:
    if c >= 0.0:
        return x + c * dt
    x = x + c * dt
    return x if x > 0.0 else 0.0


def _omega_path(tables: _PhaseTables, phase: int, x: float, y: float, cap: int, rng):
    """One path to the in-out-flow stopping time.  Returns the record tuple
    (reason, phase, x, t, start_phase, inout, upshift)."""
    start = phase
    exponential = rng.exponential
    random = rng.random

    t = 0.0
    inout = inout_c = 0.0
    up = up_c = 0.0
    events = 0
    while True:
        events += 1
        if events > cap:
            return (STOP_CAPPED, -1, x, t, start, inout, up)
        ar = tables.abs_r[phase]
        c = tables.c[phase]
        tau = exponential(tables.scales[phase])
        remaining = y - inout
        if ar * tau >= remaining:
            dt = remaining / ar
            x = _advance_x(x, c, dt)
            t += dt
            inout, inout_c = _kahan(inout, inout_c, ar * dt)
            if tables.r[phase] > 0.0:
                up, up_c = _kahan(up, up_c, ar * dt)
            return (STOP_OK, phase, x, t, start, inout, up)
        x = _advance_x(x, c, tau)
        t += tau
        inout, inout_c = _kahan(inout, inout_c, ar * tau)
        if tables.r[phase] > 0.0:
            up, up_c = _kahan(up, up_c, ar * tau)
        phase = tables.jump_targets[phase][
            bisect_right(tables.jump_cdfs[phase], random())
        ]


def _theta_path(
    tables: _PhaseTables,
    phase: int,
    x: float,
    cap: int,
    escape: float,
    drift_sign: int,
    rng,
):
    """One path of the unbounded Y-fluid to its first return to level zero."""
    start = phase
    exponential = rng.exponential
    random = rng.random

    t = 0.0
    ytilde = 0.0
    inout = inout_c = 0.0
    up = up_c = 0.0
    events = 0
    while True:
        events += 1
        if events > cap:
            return (STOP_CAPPED, -1, x, t, start, inout, up)
        r = tables.r[phase]
        ar = tables.abs_r[phase]
        c = tables.c[phase]
        tau = exponential(tables.scales[phase])
        if ytilde != 0.0 and (ytilde > 0.0) != (r > 0.0):
            dt_cross = -ytilde / r
            if dt_cross <= tau:
                x = _advance_x(x, c, dt_cross)
                t += dt_cross
                inout, inout_c = _kahan(inout, inout_c, ar * dt_cross)
                if r > 0.0:
                    up, up_c = _kahan(up, up_c, ar * dt_cross)
                return (STOP_OK, phase, x, t, start, inout, up)
        ytilde += r * tau
        x = _advance_x(x, c, tau)
        t += tau
        inout, inout_c = _kahan(inout, inout_c, ar * tau)
        if r > 0.0:
            up, up_c = _kahan(up, up_c, ar * tau)
        if drift_sign != 0 and ytilde * drift_sign > escape:
            return (STOP_ESCAPED, -1, x, t, start, inout, up)
        phase = tables.jump_targets[phase][
            bisect_right(tables.jump_cdfs[phase], random())
        ]


def _drift_sign(model: SffmModel) -> int:
    drift_y = float(stability(model).pi @ model.r)
    if abs(drift_y) <= 1e-12:
        return 0
    return 1 if drift_y > 0 else -1


def _run_chunk(args):
    kind, model, init, fixed_start, y, config, rep_lo, rep_hi = args
    tables = _PhaseTables(model)
    drift_sign = _drift_sign(model) if kind == "theta" else 0
    rows = []
    for rep in range(rep_lo, rep_hi):
        rng = _rep_rng(config.seed, rep)
        if fixed_start is None:
            phase, x = sample_initial(init, rng)
        else:
            phase, x = fixed_start
        if kind == "omega":
            rows.append(
                _omega_path(tables, phase, x, y, config.max_event_count, rng)
            )
        else:
            rows.append(
                _theta_path(
                    tables,
                    phase,
                    x,
                    config.max_event_count,
                    config.escape_level,
                    drift_sign,
                    rng,
                )
            )
    return rows


def _collect(model: SffmModel, rows, notes=()) -> SampleBatch:
    phases = np.array([r[1] for r in rows], dtype=np.int64)
    counts = np.zeros(model.n, dtype=np.int64)
    for ph in phases:
        if ph >= 0:
            counts[ph] += 1
    return SampleBatch(
        replications=len(rows),
        stop_reason=np.array([r[0] for r in rows], dtype=np.int8),
        phase_at_stop=phases,
        x_at_stop=np.array([r[2] for r in rows]),
        path_time=np.array([r[3] for r in rows]),
        start_phase=np.array([r[4] for r in rows], dtype=np.int64),
        inout_at_stop=np.array([r[5] for r in rows]),
        upshift_at_stop=np.array([r[6] for r in rows]),
        phase_counts=counts,
        notes=tuple(notes),
    )


def _run(kind, model, init, fixed_start, y, config, workers) -> SampleBatch:
    model.require_valid()
    notes = []
    if init is not None:
        init.check_against(model)
    if kind == "theta" and stability(model).class_y == NULL_RECURRENT:
        notes.append("null_recurrent_y: return times may be heavy-tailed")

    n = config.replications
    if workers <= 1 or n < 2 * workers:
        rows = _run_chunk((kind, model, init, fixed_start, y, config, 0, n))
    else:
        bounds = np.linspace(0, n, workers + 1).astype(int)
        chunks = [
            (kind, model, init, fixed_start, y, config, int(lo), int(hi))
            for lo, hi in zip(bounds[:-1], bounds[1:])
            if hi > lo
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = [row for part in pool.map(_run_chunk, chunks) for row in part]
    return _collect(model, rows, notes)


def run_to_omega(
    model: SffmModel,
    init: InitialDistribution,
    y: float,
    config: SimConfig,
    workers: int = 1,
) -> SampleBatch:
    """Simulate to the time the cumulative in-out Y-flow reaches ``y``."""
    if y <= 0:
        raise ValidationError("y must be positive")
    return _run("omega", model, init, None, float(y), config, workers)


def run_to_theta(
    model: SffmModel,
    init: InitialDistribution,
    config: SimConfig,
    workers: int = 1,
) -> SampleBatch:
    """Simulate the unbounded Y-fluid to its first return to level zero."""
    return _run("theta", model, init, None, None, config, workers)


def run_to_theta_from(
    model: SffmModel,
    phase0: int,
    x0: float,
    config: SimConfig,
    workers: int = 1,
) -> SampleBatch:
    """As :func:`run_to_theta` but from a fixed start (phase0, x0); used to
    estimate single rows of the return-probability matrices."""
    if not 0 <= phase0 < model.n:
        raise ValidationError("phase0 out of range")
    if x0 < 0:
        raise ValidationError("x0 must be nonnegative")
    return _run("theta", model, None, (int(phase0), float(x0)), None, config, workers)


def dump_samples(batch: SampleBatch, target) -> None:
    """Write one record per replication: index, stop reason code, phase at
    stop, X at stop, path time; floats carry 17 significant digits."""
    close = False
    if isinstance(target, (str, bytes)) or hasattr(target, "__fspath__"):
        stream = open(target, "w")
        close = True
    else:
        stream = target
    try:
        for i in range(batch.replications):
            stream.write(
                f"{i},{int(batch.stop_reason[i])},{int(batch.phase_at_stop[i])},"
                f"{batch.x_at_stop[i]:.17g},{batch.path_time[i]:.17g}\n"
            )
    finally:
        if close:
            stream.close()


def empirical_measure(batch: SampleBatch, v: float):
    """Per-phase frequency of stopping in phase j with X <= v, with binomial
    standard errors.  Irregular stops count in the denominator only."""
    if batch.replications == 0:
        raise ValidationError("empty batch")
    n_phases = batch.phase_counts.shape[0]
    ok = batch.stop_reason == STOP_OK
    est = np.zeros(n_phases)
    for j in range(n_phases):
        hits = np.count_nonzero(
            ok & (batch.phase_at_stop == j) & (batch.x_at_stop <= v)
        )
        est[j] = hits / batch.replications
    se = np.sqrt(est * (1.0 - est) / batch.replications)
    return est, se

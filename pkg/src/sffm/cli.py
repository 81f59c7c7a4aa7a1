"""Batch command-line front-end.

Subcommands: ``validate`` (diagnostics), ``return-ops`` (first-return
operator matrices), ``transient`` (measure over a (y, v) grid plus mass
decomposition and large-y limits), ``first-return`` (first-return measure
over a v grid), ``simulate`` (Monte Carlo estimates next to analytic
values), and ``example`` (built-in benchmarks against reference values).

Exit codes: 0 success, 1 validation failure, 2 numerical failure, 3 usage
error.  ``SFFM_THREADS`` sets the default simulation worker count.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import __version__
from .benchmarks import EXAMPLE_IDS, run_example
from .errors import NumericalError, SffmError, ValidationError
from .first_return import mu_phi
from .model import validate
from .model_io import ResultTable, content_hash, parse_model_file
from .return_ops import assemble
from .simulate import (
    SimConfig,
    dump_samples,
    empirical_measure,
    run_to_omega,
    run_to_theta,
)
from .transient import limit_y_infinity, mass_decomposition, mu_exp_Dy

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_USAGE = 3

DEFAULT_Y_GRID = (0.1, 1.0)
DEFAULT_V_GRID = tuple(round(0.05 * i, 2) for i in range(101))  # 0..5 step 0.05


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _float_list(text: str) -> list[float]:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        out.append(math.inf if tok.lower() in ("inf", "infinity") else float(tok))
    if not out:
        raise _UsageError(f"empty list argument: {text!r}")
    return out


def _build_parser() -> _Parser:
    parser = _Parser(prog="sffm", description=__doc__)
    parser.add_argument("--version", action="version", version=f"sffm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, need_model=True):
        if need_model:
            p.add_argument("--model", required=True, help="model file (JSON)")
        p.add_argument("--order", choices=("natural", "paper"), default="natural",
                       help="phase print order: natural, or r-block order")
        p.add_argument("--out", help="write the result table to this CSV path")

    p = sub.add_parser("validate", help="check model invariants")
    p.add_argument("--model", required=True)

    p = sub.add_parser("return-ops", help="first-return operator matrices")
    add_common(p)
    p.add_argument("--lambda", dest="lam", type=float,
                   help="tilt/decay rate (defaults to the file's init rate)")

    p = sub.add_parser("transient", help="transient measure over a (y, v) grid")
    add_common(p)
    p.add_argument("--y", type=_float_list, help="comma list of y values")
    p.add_argument("--v", type=_float_list, help="comma list of v values ('inf' ok)")

    p = sub.add_parser("first-return", help="first-return measure over a v grid")
    add_common(p)
    p.add_argument("--v", type=_float_list)

    p = sub.add_parser("simulate", help="Monte Carlo estimates vs analytic values")
    add_common(p)
    p.add_argument("--target", choices=("omega", "theta"), required=True)
    p.add_argument("--y", type=float, help="in-out flow target (omega only)")
    p.add_argument("--v", type=_float_list)
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dump", help="write raw per-replication records to this path")

    p = sub.add_parser("example", help="run a built-in benchmark")
    p.add_argument("k", type=int, help=f"example id in {min(EXAMPLE_IDS)}..{max(EXAMPLE_IDS)}")
    return parser


def _load(path: str):
    mf = parse_model_file(path)
    model, init = mf.build()
    return mf, model, init


def _phase_columns(model, order: str):
    n = model.n
    idx = list(model.partition.perm_r) if order == "paper" else list(range(n))
    return idx, [f"phase{j + 1}" for j in idx]


def _emit(table: ResultTable, out: str | None) -> None:
    if out:
        table.write_csv(out)
        print(f"wrote {len(table.rows)} rows to {out}")
    else:
        sys.stdout.write(table.to_csv())


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("SFFM_THREADS", "1")))
    except ValueError:
        return 1


def _fmt_matrix(name: str, mat: np.ndarray, idx) -> str:
    sub = np.asarray(mat)
    if sub.ndim == 2 and sub.shape[0] == sub.shape[1] == len(idx):
        sub = sub[np.ix_(idx, idx)]
    lines = [f"{name}:"]
    for row in np.atleast_2d(sub):
        lines.append("  [" + "  ".join(f"{x: .6f}" for x in row) + "]")
    return "\n".join(lines)


def _cmd_validate(args) -> int:
    mf = parse_model_file(args.model)
    try:
        model, init = mf.build()
    except ValidationError as exc:
        print(f"invalid: {exc}")
        return EXIT_VALIDATION
    violations = validate(model)
    if init is not None:
        try:
            init.check_against(model)
        except ValidationError as exc:
            violations.append(str(exc))
    if violations:
        for v in violations:
            print(f"violation: {v}")
        return EXIT_VALIDATION
    print(f"valid: {model.n} phases, content hash {content_hash(mf)[:12]}")
    return EXIT_OK


def _cmd_return_ops(args) -> int:
    mf, model, init = _load(args.model)
    lam = args.lam if args.lam is not None else (init.lam if init else None)
    if lam is None:
        raise _UsageError("no --lambda given and the model file carries no init")
    ops = assemble(model, lam)
    idx, names = _phase_columns(model, args.order)

    blocks = [
        ("return probabilities, up starts", ops.psi),
        ("return probabilities, down starts", ops.xi),
        ("combined return operator", ops.phi),
        ("expected visits", ops.m),
        ("tilted return operator", ops.phi_lam),
        ("tilted expected visits", ops.m_lam),
    ]
    for name, mat in blocks:
        print(_fmt_matrix(name, mat, idx))
    # tilted rows are not necessarily substochastic; reported, never bounded
    for name, mat in (("return operator", ops.phi), ("tilted return operator", ops.phi_lam)):
        sums = "  ".join(f"{s:.6f}" for s in np.asarray(mat).sum(axis=1)[idx])
        print(f"row sums [{name}]: {sums}")
    for label, rep in (
        ("up", ops.psi_report),
        ("down", ops.xi_report),
        ("tilted up", ops.psi_lam_report),
        ("tilted down", ops.xi_lam_report),
    ):
        print(
            f"solve[{label}]: iterations={rep.iterations} "
            f"residual={rep.residual:.3e} converged={rep.converged}"
        )

    if args.out:
        table = ResultTable(
            columns=("matrix", "row", "col", "value"),
            rows=[],
            metadata=_meta(mf, "return-ops", order=args.order, **{"lambda": repr(lam)}),
        )
        for code, (name, mat) in enumerate(blocks):
            table.metadata[f"matrix_{code}"] = name
            mat = np.atleast_2d(mat)
            for i in range(mat.shape[0]):
                for j in range(mat.shape[1]):
                    table.add(code, i + 1, j + 1, mat[i, j])
        table.write_csv(args.out)
        print(f"wrote {len(table.rows)} rows to {args.out}")
    return EXIT_OK


def _require_init(init):
    if init is None:
        raise _UsageError("this command needs an initial distribution (init or tandem section)")
    return init


def _meta(mf, command, **extra) -> dict[str, str]:
    meta = {
        "command": command,
        "model_hash": content_hash(mf),
        "tool_version": __version__,
    }
    meta.update({k: str(v) for k, v in extra.items()})
    return meta


def _cmd_transient(args) -> int:
    mf, model, init = _load(args.model)
    init = _require_init(init)
    y_grid = args.y or list(mf.analysis.get("y", DEFAULT_Y_GRID))
    v_grid = args.v or list(mf.analysis.get("v", DEFAULT_V_GRID))
    idx, names = _phase_columns(model, args.order)

    cols = (
        ["y", "v"]
        + [f"measure_{c}" for c in names]
        + [f"at_zero_{c}" for c in names]
        + [f"above_zero_{c}" for c in names]
        + [f"marginal_{c}" for c in names]
        + [f"limit_y_inf_{c}" for c in names]
    )
    table = ResultTable(columns=tuple(cols), rows=[], metadata=_meta(mf, "transient", order=args.order))
    for y in y_grid:
        at_zero, above, marginal = mass_decomposition(model, init, y)
        for v in v_grid:
            measure = mu_exp_Dy(model, init, y, v).values
            limit = limit_y_infinity(model, init, v)
            table.add(
                y, v,
                *measure[idx], *at_zero[idx], *above[idx], *marginal[idx], *limit[idx],
            )
    _emit(table, args.out)
    return EXIT_OK


def _cmd_first_return(args) -> int:
    mf, model, init = _load(args.model)
    init = _require_init(init)
    v_grid = args.v or list(mf.analysis.get("v", DEFAULT_V_GRID))
    idx, names = _phase_columns(model, args.order)
    ops = assemble(model, init.lam)

    cols = (
        ["v"]
        + [f"measure_{c}" for c in names]
        + [f"const_{c}" for c in names]
        + [f"decay_{c}" for c in names]
    )
    table = ResultTable(columns=tuple(cols), rows=[], metadata=_meta(mf, "first-return", order=args.order))
    for v in v_grid:
        fr = mu_phi(model, init, v, ops=ops)
        table.add(v, *fr.values[idx], *fr.const_part[idx], *fr.decay_part[idx])
    _emit(table, args.out)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    mf, model, init = _load(args.model)
    init = _require_init(init)
    v_grid = args.v or [0.5, 1.0, 2.0]
    config = SimConfig(seed=args.seed, replications=args.reps)
    workers = _workers()

    if args.target == "omega":
        if args.y is None:
            raise _UsageError("--y is required for --target omega")
        batch = run_to_omega(model, init, args.y, config, workers=workers)
        analytic = {v: mu_exp_Dy(model, init, args.y, v).values for v in v_grid}
    else:
        batch = run_to_theta(model, init, config, workers=workers)
        ops = assemble(model, init.lam)
        analytic = {v: mu_phi(model, init, v, ops=ops).values for v in v_grid}
    if args.dump:
        dump_samples(batch, args.dump)
        print(f"dumped {batch.replications} records to {args.dump}")

    table = ResultTable(
        columns=("v", "phase", "estimate", "stderr", "analytic"),
        rows=[],
        metadata=_meta(
            mf, "simulate",
            target=args.target, seed=args.seed, reps=args.reps,
            y="" if args.y is None else args.y,
            regular_stops=int(np.sum(batch.stop_reason == 0)),
        ),
    )
    idx, _ = _phase_columns(model, args.order)
    for v in v_grid:
        est, se = empirical_measure(batch, v)
        for j in idx:
            table.add(v, j + 1, est[j], se[j], analytic[v][j])
    _emit(table, args.out)
    return EXIT_OK


def _cmd_example(args) -> int:
    if args.k not in EXAMPLE_IDS:
        print(f"unknown example {args.k}", file=sys.stderr)
        return EXIT_USAGE
    report = run_example(args.k)
    width = max(len(r.name) for r in report.rows)
    for r in report.rows:
        status = "ok  " if r.passed else "FAIL"
        print(
            f"[{status}] {r.name:<{width}}  max|diff|={r.diff:.3e}  tol={r.tol:.1e}"
        )
        if not r.passed:
            print(f"       expected: {np.array2string(r.expected, precision=6)}")
            print(f"       computed: {np.array2string(r.computed, precision=6)}")
    print(f"example {args.k}: {'PASS' if report.passed else 'FAIL'}")
    return EXIT_OK if report.passed else EXIT_NUMERICAL


_COMMANDS = {
    "validate": _cmd_validate,
    "return-ops": _cmd_return_ops,
    "transient": _cmd_transient,
    "first-return": _cmd_first_return,
    "simulate": _cmd_simulate,
    "example": _cmd_example,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, SffmError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FileNotFoundError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # argparse --version/--help paths
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Cross-validate the analytic layers against the Monte Carlo oracle.

Runs the flow-stopped and return-stopped simulations on the two benchmark
models and prints empirical estimates, closed-form values, and z-scores.
The flow-stopped comparison agrees everywhere.  The return-stopped
comparison shows the documented defect of the closed-form first-return
measure: its up-side components describe the X-level without its floor at
zero, so they deviate beyond Monte Carlo noise wherever the floor binds
(see the top-level README and the acceptance suite, criterion 7b).
"""

import argparse

import numpy as np

from sffm import (
    SimConfig,
    assemble,
    build_example,
    empirical_measure,
    mu_exp_Dy,
    mu_phi,
    run_to_omega,
    run_to_theta,
)


def compare(name, batch, analytic_by_v):
    print(f"--- {name} (regular stops: {int(np.sum(batch.stop_reason == 0))}"
          f"/{batch.replications})")
    for v, expected in analytic_by_v.items():
        est, se = empirical_measure(batch, v)
        z = (est - expected) / np.maximum(se, 1e-12)
        print(f"  v={v}:")
        for j in range(len(est)):
            print(
                f"    phase {j + 1}: estimate={est[j]:.4f}  analytic={expected[j]:.4f}"
                f"  z={z[j]:+.1f}"
            )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--reps", type=int, default=100_000)
    parser.add_argument("--seed", type=int, default=20240817)
    parser.add_argument("--y", type=float, default=1.0)
    args = parser.parse_args()
    config = SimConfig(seed=args.seed, replications=args.reps)
    v_grid = (0.5, 1.0, 2.0)

    model, init = build_example(1)
    batch = run_to_omega(model, init, args.y, config)
    compare(
        f"two-phase, flow-stopped at y={args.y}",
        batch,
        {v: mu_exp_Dy(model, init, args.y, v).values for v in v_grid},
    )

    for k in (1, 6):
        model, init = build_example(k)
        ops = assemble(model, init.lam)
        batch = run_to_theta(model, init, config)
        compare(
            f"benchmark {k}, return-stopped",
            batch,
            {v: mu_phi(model, init, v, ops=ops).values for v in v_grid},
        )


if __name__ == "__main__":
    main()

import numpy as np
import pytest

from sffm import (
    NumericalError,
    SffmModel,
    SimConfig,
    assemble,
    build_example,
    compute_psi,
    compute_xi,
    fluid_generator,
    run_to_theta_from,
)
from sffm.return_ops import phi_from_visits, visits_from_phi

from conftest import random_generator

EX6_PSI = np.array([[0.2662, 0.7338], [0.4314, 0.5686]])
EX6_XI = np.array([[0.1774, 0.7190], [0.2935, 0.5686]])
EX6_PSI_T = np.array([[0.6354, 0.7292], [0.3962, 0.2077]])
EX6_XI_T = np.array([[0.4236, 0.6603], [0.2917, 0.2077]])


class TestFluidGenerator:
    def test_two_phase(self, two_phase_model):
        gen = fluid_generator(two_phase_model, lam=1.0)
        assert np.allclose(gen.q, [[-2, 2], [1, -1]], atol=1e-14)
        assert np.allclose(gen.q_lam, [[-1, 2], [1, -2]], atol=1e-14)

    def test_zero_tilt_collapses(self, two_phase_model):
        gen = fluid_generator(two_phase_model, lam=0.0)
        assert np.array_equal(gen.q, gen.q_lam)

    def test_four_phase_block_order(self, four_phase):
        model, _ = four_phase
        gen = fluid_generator(model, lam=1.0)
        perm = list(model.partition.perm_r)
        r = 0.6
        expected = np.array(
            [
                [-2, 1, 0, 1],
                [1 - r, -1, r, 0],
                [0, 1, -2, 1],
                [1 - r, 0, r, -1],
            ]
        )
        assert np.allclose(gen.q[np.ix_(perm, perm)], expected, atol=1e-14)

    def test_row_sum_invariants(self, four_phase):
        model, init = four_phase
        gen = fluid_generator(model, init.lam)
        assert np.max(np.abs(gen.q.sum(axis=1))) <= 1e-12
        expected = init.lam * model.c / np.abs(model.r)
        assert np.max(np.abs(gen.q_lam.sum(axis=1) - expected)) <= 1e-12


class TestReturnBlocks:
    def test_two_phase_values(self, two_phase_model):
        gen = fluid_generator(two_phase_model, lam=1.0)
        psi, _ = compute_psi(gen)
        xi, _ = compute_xi(gen)
        psi_t, _ = compute_psi(gen, tilted=True)
        xi_t, _ = compute_xi(gen, tilted=True)
        assert abs(psi[0, 0] - 1.0) <= 1e-12
        assert abs(xi[0, 0] - 0.5) <= 1e-12
        assert abs(psi_t[0, 0] - 1.0) <= 1e-12
        assert abs(xi_t[0, 0] - 0.5) <= 1e-12

    def test_four_phase_values(self, four_phase):
        model, init = four_phase
        gen = fluid_generator(model, init.lam)
        psi, _ = compute_psi(gen)
        xi, _ = compute_xi(gen)
        psi_t, _ = compute_psi(gen, tilted=True)
        xi_t, _ = compute_xi(gen, tilted=True)
        assert np.max(np.abs(psi - EX6_PSI)) <= 1e-4
        assert np.max(np.abs(xi - EX6_XI)) <= 1e-4
        assert np.max(np.abs(psi_t - EX6_PSI_T)) <= 1e-4
        assert np.max(np.abs(xi_t - EX6_XI_T)) <= 1e-4

    def test_residuals_tiny(self, four_phase):
        model, init = four_phase
        ops = assemble(model, init.lam)
        for rep in (ops.psi_report, ops.xi_report, ops.psi_lam_report, ops.xi_lam_report):
            assert rep.converged and rep.residual <= 1e-12

    def test_stable_y_rows_sum_to_one(self, four_phase):
        model, init = four_phase
        ops = assemble(model, init.lam)
        assert np.max(np.abs(ops.psi.sum(axis=1) - 1.0)) <= 1e-8

    def test_transient_y_rows_below_one(self):
        model, init = build_example(2)
        ops = assemble(model, init.lam)
        assert np.all(ops.psi.sum(axis=1) < 1.0 - 1e-6)


class TestAssembly:
    def test_anti_diagonal_blocks(self, four_phase):
        model, init = four_phase
        ops = assemble(model, init.lam)
        plus = list(model.partition.s_plus_r)
        minus = list(model.partition.s_minus_r)
        for phi in (ops.phi, ops.phi_lam):
            assert np.array_equal(phi[np.ix_(plus, plus)], np.zeros((2, 2)))
            assert np.array_equal(phi[np.ix_(minus, minus)], np.zeros((2, 2)))

    def test_visit_matrix_two_phase(self, two_phase_model):
        ops = assemble(two_phase_model, lam=1.0)
        assert np.allclose(ops.m, [[1.0, 2.0], [1.0, 1.0]], atol=1e-12)

    def test_roundtrip_identities(self, four_phase):
        model, init = four_phase
        ops = assemble(model, init.lam)
        for phi, m in ((ops.phi, ops.m), (ops.phi_lam, ops.m_lam)):
            assert np.max(np.abs(phi_from_visits(m) - phi)) <= 1e-10
            assert np.max(np.abs(visits_from_phi(phi) - m)) <= 1e-10

    def test_zero_phi_gives_zero_m(self):
        assert np.array_equal(visits_from_phi(np.zeros((3, 3))), np.zeros((3, 3)))

    def test_null_recurrent_visits_undefined(self):
        stochastic_phi = np.array([[0.0, 1.0], [1.0, 0.0]])
        with pytest.raises(NumericalError, match="null recurrent"):
            visits_from_phi(stochastic_phi)

    def test_null_recurrent_model_assembly_fails(self):
        model, init = build_example(3)
        with pytest.raises(NumericalError):
            assemble(model, init.lam)


class TestSimulationOracle:
    @pytest.mark.parametrize(
        "seed,c,r,reps,sim_seed",
        [
            (11, [1.0, -1.0, 1.0], [1.0, -1.0, -1.0], 100_000, 99),
            (23, [1.0, 1.0, -1.0, -1.0], [-1.0, 1.0, 1.0, -1.0], 30_000, 7),
        ],
    )
    def test_psi_matches_first_return_frequencies(self, seed, c, r, reps, sim_seed):
        # random model, unit rates both fluids; start an r-positive phase at
        # the level floor and compare end-phase frequencies against psi rows
        model = SffmModel(T=random_generator(np.random.default_rng(seed), len(c)), c=c, r=r)
        gen = fluid_generator(model, lam=1.0)
        psi, _ = compute_psi(gen)
        minus = list(model.partition.s_minus_r)

        start_row = 0
        start = model.partition.s_plus_r[start_row]
        batch = run_to_theta_from(
            model, start, 0.0, SimConfig(seed=sim_seed, replications=reps)
        )
        for col, j in enumerate(minus):
            est = np.count_nonzero(batch.phase_at_stop == j) / reps
            se = max(np.sqrt(est * (1 - est) / reps), 1e-12)
            assert abs(est - psi[start_row, col]) <= 3 * se

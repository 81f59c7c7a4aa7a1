import math

import numpy as np
import pytest

from sffm import (
    InitialDistribution,
    SffmModel,
    SimConfig,
    ValidationError,
    build_example,
    empirical_measure,
    mu_exp_Dy,
    run_to_omega,
    run_to_theta,
    run_to_theta_from,
    sample_initial,
)
from sffm.simulate import STOP_CAPPED, STOP_ESCAPED, STOP_OK, SampleBatch, dump_samples


def ring_model(n=2, r=None, c=None):
    T = np.full((n, n), 1.0)
    np.fill_diagonal(T, 0.0)
    np.fill_diagonal(T, -T.sum(axis=1))
    return SffmModel(T=T, c=c or [1.0] * (n - 1) + [-1.0], r=r or [1.0] * (n - 1) + [-1.0])


class TestSampleInitial:
    def test_pure_atom(self):
        init = InitialDistribution(lam=1.0, nu0=[0.0, 0.0], point_mass=[0.0, 1.0])
        rng = np.random.default_rng(0)
        for _ in range(50):
            phase, x0 = sample_initial(init, rng)
            assert phase == 1 and x0 == 0.0

    def test_phase_frequencies(self, two_phase_init):
        rng = np.random.default_rng(123)
        draws = 100_000
        counts = np.zeros(2)
        for _ in range(draws):
            phase, _ = sample_initial(two_phase_init, rng)
            counts[phase] += 1
        freq = counts / draws
        expected = two_phase_init.mass_total()
        se = np.sqrt(expected * (1 - expected) / draws)
        assert np.all(np.abs(freq - expected) <= 3 * se)

    def test_density_draw_mean(self):
        init = InitialDistribution(lam=2.0, nu0=[2.0, 0.0], point_mass=[0.0, 0.0])
        rng = np.random.default_rng(7)
        draws = np.array([sample_initial(init, rng)[1] for _ in range(100_000)])
        se = 0.5 / math.sqrt(draws.size)  # exponential sd = mean = 1/lam
        assert abs(draws.mean() - 0.5) <= 3 * se


class TestOmega:
    def test_single_up_phase_deterministic_time(self):
        # one effective phase pair with r=1 everywhere: flow target = elapsed time
        model = ring_model(r=[1.0, 1.0], c=[1.0, -1.0])
        init = InitialDistribution(lam=1.0, nu0=[1.0, 0.0], point_mass=[0.0, 0.0])
        batch = run_to_omega(model, init, 2.5, SimConfig(seed=1, replications=200))
        assert np.max(np.abs(batch.path_time - 2.5)) <= 1e-12
        assert np.max(np.abs(batch.inout_at_stop - 2.5)) <= 1e-12
        assert np.all(batch.stop_reason == STOP_OK)

    def test_scaled_rate_bookkeeping(self):
        model = ring_model(r=[2.0, 2.0], c=[1.0, -1.0])
        init = InitialDistribution(lam=1.0, nu0=[1.0, 0.0], point_mass=[0.0, 0.0])
        batch = run_to_omega(model, init, 3.0, SimConfig(seed=5, replications=100))
        assert np.max(np.abs(batch.path_time - 1.5)) <= 1e-12
        assert np.max(np.abs(batch.inout_at_stop - 3.0)) <= 1e-12

    def test_bit_identical_reruns(self, two_phase_model, two_phase_init):
        cfg = SimConfig(seed=77, replications=500)
        a = run_to_omega(two_phase_model, two_phase_init, 1.0, cfg)
        b = run_to_omega(two_phase_model, two_phase_init, 1.0, cfg)
        assert np.array_equal(a.x_at_stop, b.x_at_stop)
        assert np.array_equal(a.phase_at_stop, b.phase_at_stop)
        assert np.array_equal(a.path_time, b.path_time)

    def test_level_never_negative(self, two_phase_model, two_phase_init):
        batch = run_to_omega(
            two_phase_model, two_phase_init, 5.0, SimConfig(seed=8, replications=2000)
        )
        assert np.min(batch.x_at_stop) >= 0.0

    def test_matches_transient_measure(self, two_phase_model, two_phase_init):
        batch = run_to_omega(
            two_phase_model, two_phase_init, 1.0, SimConfig(seed=41, replications=30_000)
        )
        for v in (0.5, 1.0, 2.0):
            est, se = empirical_measure(batch, v)
            expected = mu_exp_Dy(two_phase_model, two_phase_init, 1.0, v).values
            assert np.all(np.abs(est - expected) <= 3 * np.maximum(se, 1e-12))

    def test_long_run_phase_marginal(self, two_phase_model, two_phase_init):
        batch = run_to_omega(
            two_phase_model, two_phase_init, 50.0, SimConfig(seed=4, replications=20_000)
        )
        est = batch.phase_counts / batch.replications
        se = np.sqrt(est * (1 - est) / batch.replications)
        assert np.all(np.abs(est - [1 / 3, 2 / 3]) <= 3 * np.maximum(se, 1e-12))

    def test_rejects_nonpositive_target(self, two_phase_model, two_phase_init):
        with pytest.raises(ValidationError):
            run_to_omega(two_phase_model, two_phase_init, 0.0, SimConfig(seed=1, replications=1))


class TestTheta:
    def test_forced_alternation_returns_down_phase(self):
        model = SffmModel(T=[[-1.0, 1.0], [1.0, -1.0]], c=[1.0, -1.0], r=[1.0, -1.0])
        batch = run_to_theta_from(model, 0, 0.5, SimConfig(seed=3, replications=300))
        assert np.all(batch.stop_reason == STOP_OK)
        assert np.all(batch.phase_at_stop == 1)

    def test_upshift_is_half_inout_on_returns(self, two_phase_batch_small):
        batch = two_phase_batch_small
        ok = batch.stop_reason == STOP_OK
        assert np.max(
            np.abs(batch.upshift_at_stop[ok] - batch.inout_at_stop[ok] / 2.0)
        ) <= 1e-10

    def test_escapes_match_no_return_mass(self, two_phase_batch_small):
        batch = two_phase_batch_small
        frac = np.mean(batch.stop_reason == STOP_ESCAPED)
        # no-return probability is 1 - sum(mass @ phi) = 0.4 for this model
        assert abs(frac - 0.4) <= 3 * math.sqrt(0.4 * 0.6 / batch.replications)
        assert np.sum(batch.stop_reason == STOP_CAPPED) == 0

    def test_workers_do_not_change_results(self, two_phase_model, two_phase_init):
        cfg = SimConfig(seed=99, replications=400)
        serial = run_to_theta(two_phase_model, two_phase_init, cfg, workers=1)
        parallel = run_to_theta(two_phase_model, two_phase_init, cfg, workers=2)
        assert np.array_equal(serial.x_at_stop, parallel.x_at_stop)
        assert np.array_equal(serial.phase_at_stop, parallel.phase_at_stop)
        assert np.array_equal(serial.stop_reason, parallel.stop_reason)

    def test_null_recurrent_flagged(self):
        model, init = build_example(3)
        batch = run_to_theta(
            model, init, SimConfig(seed=2, replications=50, max_event_count=5_000)
        )
        assert any("null_recurrent" in note for note in batch.notes)

    def test_event_cap_records_capped(self, two_phase_model, two_phase_init):
        batch = run_to_theta(
            two_phase_model,
            two_phase_init,
            SimConfig(seed=11, replications=300, max_event_count=3, escape_level=1e9),
        )
        capped = batch.stop_reason == STOP_CAPPED
        assert np.any(capped)
        assert np.all(batch.phase_at_stop[capped] == -1)


@pytest.fixture(scope="module")
def two_phase_batch_small():
    model, init = build_example(5)
    return run_to_theta(model, init, SimConfig(seed=31337, replications=4_000))


class TestFloorBehaviour:
    def test_level_pinned_at_zero_under_all_down_rates(self):
        # every c is negative: once drained the level sits at exactly 0.0
        model = SffmModel(T=[[-1.0, 1.0], [1.0, -1.0]], c=[-1.0, -2.0], r=[1.0, -1.0])
        init = InitialDistribution(lam=1.0, nu0=[0.0, 0.0], point_mass=[0.5, 0.5])
        batch = run_to_omega(model, init, 25.0, SimConfig(seed=13, replications=500))
        assert np.all(batch.x_at_stop == 0.0)


class TestDump:
    def test_record_format(self, tmp_path, two_phase_model, two_phase_init):
        batch = run_to_omega(
            two_phase_model, two_phase_init, 1.0, SimConfig(seed=21, replications=50)
        )
        path = tmp_path / "samples.csv"
        dump_samples(batch, str(path))
        lines = path.read_text().splitlines()
        assert len(lines) == 50
        first = lines[0].split(",")
        assert first[0] == "0"
        assert int(first[1]) == STOP_OK
        assert int(first[2]) == batch.phase_at_stop[0]
        assert float(first[3]) == batch.x_at_stop[0]  # 17 digits round-trips
        assert float(first[4]) == batch.path_time[0]


class TestEmpiricalMeasure:
    def test_point_batch(self):
        batch = SampleBatch(
            replications=4,
            stop_reason=np.zeros(4, dtype=np.int8),
            phase_at_stop=np.zeros(4, dtype=np.int64),
            x_at_stop=np.zeros(4),
            path_time=np.ones(4),
            start_phase=np.zeros(4, dtype=np.int64),
            inout_at_stop=np.ones(4),
            upshift_at_stop=np.full(4, 0.5),
            phase_counts=np.array([4, 0]),
        )
        est, se = empirical_measure(batch, 1.0)
        assert np.array_equal(est, [1.0, 0.0])
        assert np.array_equal(se, [0.0, 0.0])

    def test_v_zero_counts_floor_only(self):
        batch = SampleBatch(
            replications=2,
            stop_reason=np.zeros(2, dtype=np.int8),
            phase_at_stop=np.array([0, 0]),
            x_at_stop=np.array([0.0, 0.7]),
            path_time=np.ones(2),
            start_phase=np.zeros(2, dtype=np.int64),
            inout_at_stop=np.ones(2),
            upshift_at_stop=np.full(2, 0.5),
            phase_counts=np.array([2, 0]),
        )
        est, _ = empirical_measure(batch, 0.0)
        assert np.array_equal(est, [0.5, 0.0])

    def test_empty_batch_rejected(self):
        batch = SampleBatch(
            replications=0,
            stop_reason=np.zeros(0, dtype=np.int8),
            phase_at_stop=np.zeros(0, dtype=np.int64),
            x_at_stop=np.zeros(0),
            path_time=np.zeros(0),
            start_phase=np.zeros(0, dtype=np.int64),
            inout_at_stop=np.zeros(0),
            upshift_at_stop=np.zeros(0),
            phase_counts=np.array([0, 0]),
        )
        with pytest.raises(ValidationError):
            empirical_measure(batch, 1.0)

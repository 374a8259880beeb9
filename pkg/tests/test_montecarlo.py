"""Tests for the Monte Carlo trials and their aggregation."""
import math
from unittest import TestCase

from sparsepm import montecarlo
from sparsepm.bounds import compute_bounds
from sparsepm.codec import Protocol
from sparsepm.model import make_channel, solve_p_for_capacity
from sparsepm.montecarlo import Runner, TrialRecord, aggregate, run_trial
from sparsepm.types_ import Phase
from tests import slow

SYS, COMM, CONF = Phase.SYSTEMATIC, Phase.COMMUNICATION, Phase.CONFIRMATION


def record(index, d_list, phases, error=False, comm_time=None, wall=1000):
    tau = sum(d_list)
    return TrialRecord(
        index=index,
        tau=tau,
        eta=len(d_list),
        d_list=d_list,
        block_phases=phases,
        error=error,
        comm_time=tau if comm_time is None else comm_time,
        wall_time_ns=wall,
    )


class RunTrialTest(TestCase):
    def setUp(self):
        self.protocol = Protocol(K=8, channel=make_channel(0.2))

    def test_deterministic(self):
        a = run_trial(self.protocol, 7, 3)
        b = run_trial(self.protocol, 7, 3)
        self.assertEqual((a.tau, a.eta, a.d_list, a.error), (b.tau, b.eta, b.d_list, b.error))

    def test_record_invariants(self):
        for index in range(10):
            r = run_trial(self.protocol, 0, index)
            self.assertEqual(r.index, index)
            self.assertEqual(r.d_list[0], 8)
            self.assertEqual(sum(r.d_list), r.tau)
            self.assertEqual(len(r.d_list), r.eta)
            self.assertEqual(len(r.block_phases), r.eta)
            self.assertIs(r.block_phases[0], SYS)
            self.assertTrue(8 <= r.comm_time <= r.tau)
            self.assertEqual(r.conf_time, r.tau - r.comm_time)
            self.assertGreater(r.wall_time_ns, 0)
            for d in r.d_list[1:]:
                self.assertTrue(1 <= d <= self.protocol.d_max)

    def test_dense_feedback_counts_confirmation_blocks(self):
        protocol = Protocol(K=6, channel=make_channel(0.15), feedback_mode="dense")
        for index in range(10):
            r = run_trial(protocol, 1, index)
            self.assertEqual(r.d_list[1:], (1,) * (r.eta - 1))
            self.assertEqual(r.conf_time, sum(phase is CONF for phase in r.block_phases))

    def test_records_frame(self):
        records = [run_trial(self.protocol, 2, index) for index in range(4)]
        frame = montecarlo.records_frame(records)
        self.assertEqual(frame["index"].tolist(), [0, 1, 2, 3])
        self.assertEqual(frame["tau"].tolist(), [r.tau for r in records])
        self.assertTrue((frame["comm_time"] + frame["conf_time"] == frame["tau"]).all())

    def test_trace(self):
        trace = []
        r = run_trial(self.protocol, 0, 0, trace=trace)
        self.assertEqual(len(trace), 2 * r.eta)
        self.assertTrue(trace[0].startswith("1 fwd "))
        self.assertTrue(trace[-1].endswith(" stop"))


class AggregateTest(TestCase):
    def test_block_means(self):
        records = [
            record(0, (4, 3, 1, 1), (SYS, COMM, COMM, CONF)),
            record(1, (4, 2, 1), (SYS, COMM, CONF)),
        ]
        stats = aggregate(records, K=4)
        self.assertAlmostEqual(stats.meanD_all, 16 / 7)
        self.assertAlmostEqual(stats.meanD_exsys, 8 / 5)
        self.assertAlmostEqual(stats.meanD_comm, 2.0)
        self.assertAlmostEqual(stats.mean_tau, 8.0)
        self.assertAlmostEqual(stats.mean_eta, 3.5)
        self.assertAlmostEqual(stats.rate, 0.5)
        self.assertAlmostEqual(stats.ns_per_1000_symbols, 1000 * 2000 / 16)

    def test_confidence_intervals(self):
        records = [record(0, (4, 6), (SYS, COMM)), record(1, (4, 16), (SYS, COMM), error=True)]
        stats = aggregate(records, K=4)
        self.assertAlmostEqual(stats.mean_tau, 15.0)
        half = 1.96 * math.sqrt(50) / math.sqrt(2)
        self.assertAlmostEqual(stats.tau_ci95, half)
        self.assertAlmostEqual(stats.rate_ci95, 4 * half / 15**2)
        self.assertAlmostEqual(stats.fer, 0.5)

    def test_single_trial(self):
        with self.assertLogs(montecarlo.LOGGER, level="WARNING"):
            stats = aggregate([record(0, (4, 1), (SYS, CONF))], K=4)
        self.assertIsNone(stats.tau_ci95)
        self.assertIsNone(stats.rate_ci95)
        self.assertEqual(stats.trials, 1)
        self.assertTrue(math.isnan(stats.meanD_comm))

    def test_order_does_not_matter(self):
        a = record(0, (4, 3), (SYS, COMM), wall=10)
        b = record(1, (4, 5, 1), (SYS, COMM, CONF), wall=30)
        self.assertEqual(aggregate([a, b], K=4), aggregate([b, a], K=4))

    def test_empty(self):
        with self.assertRaises(ValueError):
            aggregate([], K=4)

    def test_summary_row(self):
        protocol = Protocol(K=4, channel=make_channel(0.11))
        stats = aggregate([record(0, (4, 3), (SYS, COMM)), record(1, (4, 5), (SYS, COMM))], K=4)
        row = montecarlo.summary_row(protocol, stats, compute_bounds(4, protocol.channel, protocol.epsilon))
        self.assertEqual(tuple(row), montecarlo.SUMMARY_COLUMNS)
        self.assertEqual(row["trials"], 2)
        self.assertAlmostEqual(row["rate"], 0.5)
        self.assertEqual(row["rule"], "wmad-lookahead")


class RunnerTest(TestCase):
    def test_threads_do_not_change_results(self):
        protocol = Protocol(K=6, channel=make_channel(0.2))
        one = Runner(protocol, trials=12, master_seed=4, max_workers=1)
        four = Runner(protocol, trials=12, master_seed=4, max_workers=4)
        try:
            a, b = one.run(), four.run()
        finally:
            one.shutdown()
            four.shutdown()
        self.assertEqual([r.index for r in a], list(range(12)))
        strip = [(r.tau, r.d_list, r.error, r.comm_time) for r in a]
        self.assertEqual(strip, [(r.tau, r.d_list, r.error, r.comm_time) for r in b])

    def test_error_rate_is_small(self):
        protocol = Protocol(K=6, channel=make_channel(0.11), epsilon=1e-3)
        runner = Runner(protocol, trials=200, master_seed=0, max_workers=2)
        try:
            stats = aggregate(runner.run(), K=6)
        finally:
            runner.shutdown()
        self.assertLessEqual(stats.fer, 0.02)
        self.assertLess(stats.rate, protocol.channel.C)
        self.assertGreaterEqual(stats.meanD_exsys, 1.0)

    def test_rejects_zero_trials(self):
        with self.assertRaises(ValueError):
            Runner(Protocol(K=2, channel=make_channel(0.1)), trials=0)


def run_point(protocol, trials, master_seed=0):
    runner = Runner(protocol, trials=trials, master_seed=master_seed, max_workers=2)
    try:
        return aggregate(runner.run(), K=protocol.K)
    finally:
        runner.shutdown()


def fer_limit(eps, trials):
    return eps + 3 * math.sqrt(eps * (1 - eps) / trials)


class AcceptanceTest(TestCase):
    def test_stopping_time_within_the_bound(self):
        channel = make_channel(solve_p_for_capacity(0.5))
        protocol = Protocol(K=8, channel=channel, epsilon=1e-3)
        stats = run_point(protocol, trials=200)
        bound = compute_bounds(8, channel, 1e-3).tau_B
        self.assertLessEqual(stats.mean_tau, bound + 2 * stats.tau_ci95 / 1.96)

    def test_frame_errors_within_epsilon(self):
        protocol = Protocol(K=8, channel=make_channel(solve_p_for_capacity(0.5)), epsilon=1e-2)
        stats = run_point(protocol, trials=300, master_seed=5)
        self.assertLessEqual(stats.fer, fer_limit(1e-2, 300))


class FullSizeAcceptanceTest(TestCase):
    @slow
    def test_rate_bound_and_errors(self):
        for K in (16, 32, 64):
            for C in (0.5, 0.75):
                with self.subTest(K=K, C=C):
                    channel = make_channel(solve_p_for_capacity(C))
                    stats = run_point(Protocol(K=K, channel=channel), trials=100)
                    bound = compute_bounds(K, channel, 1e-3).tau_B
                    self.assertLessEqual(stats.mean_tau, bound + 2 * stats.tau_ci95 / 1.96)
                    self.assertLessEqual(stats.fer, fer_limit(1e-3, 100))

    @slow
    def test_blocks_grow_with_message_size(self):
        channel = make_channel(solve_p_for_capacity(0.5))
        sizes = [run_point(Protocol(K=K, channel=channel), trials=50).meanD_comm for K in (16, 32, 64)]
        for smaller, larger in zip(sizes, sizes[1:]):
            self.assertLessEqual(smaller, larger + 0.05)

    @slow
    def test_sparse_rate_keeps_up_with_dense(self):
        channel = make_channel(solve_p_for_capacity(0.5))
        for K in (16, 32):
            with self.subTest(K=K):
                sparse = run_point(Protocol(K=K, channel=channel), trials=100)
                dense = run_point(Protocol(K=K, channel=channel, rule="sead", feedback_mode="dense"), trials=100)
                self.assertGreaterEqual(sparse.rate, 0.98 * dense.rate)

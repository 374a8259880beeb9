"""Tests for the encoder and decoder sessions."""
import math
from unittest import TestCase

import attrs
import numpy as np

from sparsepm import exceptions, utils
from sparsepm.codec import (
    Decoder,
    Encoder,
    Protocol,
    parse_trace_line,
    phase_of,
    replay,
    trace_line,
)
from sparsepm.lookahead import PartitionPlan
from sparsepm.model import make_channel
from sparsepm.montecarlo import run_trial
from sparsepm.partition import BinaryPartition
from sparsepm.posterior import GroupedPosterior, Slice
from sparsepm.types_ import FeedbackPacket, ForwardBlock, Phase
from tests import oracles

CH = make_channel(0.1)


def noiseless_session(protocol, theta):
    """Run a session whose channel never flips a bit."""
    encoder, decoder = Encoder(protocol, theta), Decoder(protocol)
    while not decoder.stopped:
        block = encoder.next_block()
        encoder.absorb(decoder.absorb(block.start_time, block.bits))
    return encoder, decoder


class PhaseTest(TestCase):
    def test_phases(self):
        self.assertIs(phase_of(None), Phase.SYSTEMATIC)
        self.assertIs(phase_of(GroupedPosterior.from_groups(2, CH, [(1.0, 4)])), Phase.COMMUNICATION)
        self.assertIs(phase_of(GroupedPosterior.from_groups(1, CH, [(0.6, 1), (0.4, 1)])), Phase.CONFIRMATION)

    def test_half_is_confirmation(self):
        state = GroupedPosterior.from_groups(2, CH, [(0.5, 1), (0.25, 2), (0.0, 1)])
        self.assertEqual(state.top_value, 0.5)
        self.assertIs(phase_of(state), Phase.CONFIRMATION)


class ProtocolTest(TestCase):
    def test_defaults(self):
        protocol = Protocol(K=8, channel=CH)
        self.assertEqual(protocol.epsilon, 1e-3)
        self.assertEqual(protocol.rule, "wmad-lookahead")
        self.assertAlmostEqual(protocol.threshold, 0.999)
        self.assertEqual(protocol.effective_dmax, 12)

    def test_effective_dmax(self):
        self.assertEqual(Protocol(K=8, channel=CH, feedback_mode="dense").effective_dmax, 1)
        self.assertEqual(Protocol(K=8, channel=CH, rule="sead").effective_dmax, 1)
        self.assertEqual(Protocol(K=8, channel=CH, d_max=3).effective_dmax, 3)

    def test_rejects_bad_settings(self):
        for eps in (0.0, 0.6, -1e-3):
            with self.assertRaises(exceptions.ConfigError):
                Protocol(K=4, channel=CH, epsilon=eps)
        with self.assertRaises(exceptions.ConfigError):
            Protocol(K=4, channel=CH, rule="nope")
        with self.assertRaises(ValueError):
            Protocol(K=4, channel=CH, feedback_mode="bursty")
        with self.assertRaises(ValueError):
            Protocol(K=4, channel=CH, d_max=0)
        with self.assertRaises(ValueError):
            Protocol(K=0, channel=CH)

    def test_confirmation_plan_is_singleton(self):
        protocol = Protocol(K=2, channel=CH)
        state = GroupedPosterior.from_groups(2, CH, [(0.7, 1), (0.1, 3)])
        plan = protocol.next_plan(state)
        self.assertEqual(plan.D, 1)
        self.assertEqual(plan.bin_mass[0], state.top_value)

    def test_realized_wmad_is_asserted(self):
        # Delta = -1/2 on four equal members, where WMAD allows Delta^2 <= 0.1
        state = GroupedPosterior.from_groups(2, CH, [(1.0, 4)])
        lopsided = BinaryPartition.from_slices(state, [Slice(0, 0, 1)], [Slice(0, 1, 3)])
        plan = PartitionPlan.from_partition(state, lopsided)
        with self.assertRaises(exceptions.ContractError):
            Protocol(K=2, channel=CH).absorb(state, plan, [0])
        unchecked = Protocol(K=2, channel=CH, check_realized=False)
        _, used, stopped, comm_steps = unchecked.absorb(state, plan, [0])
        self.assertEqual((used, stopped, comm_steps), (1, False, 1))
        _, used, _, _ = Protocol(K=2, channel=CH, rule="sead").absorb(state, plan, [0])
        self.assertEqual(used, 1)


class SessionTest(TestCase):
    def test_half_epsilon_stops_after_systematic_bit(self):
        protocol = Protocol(K=1, channel=CH, epsilon=0.5)
        decoder = Decoder(protocol)
        packet = decoder.absorb(1, [0])
        self.assertTrue(packet.stop)
        self.assertEqual(decoder.tau, 1)
        self.assertEqual(decoder.estimate(), (0,))
        self.assertIsNone(decoder.plan)

    def test_half_epsilon_tie_takes_the_first_member(self):
        decoder = Decoder(Protocol(K=2, channel=CH, epsilon=0.5))
        tied = GroupedPosterior.from_groups(2, CH, [(1.0, 2), (0.0, 2)])
        decoder.posterior = attrs.evolve(tied, y_sys=(1, 0))
        decoder.tau = 2
        self.assertEqual(decoder.posterior.groups[0].count, 2)
        with self.assertLogs("sparsepm.codec", level="WARNING"):
            self.assertEqual(decoder.estimate(), (1, 0))

    def test_noiseless_sessions_decode(self):
        rng = np.random.default_rng(1)
        for rule, mode in (("wmad-lookahead", "sparse"), ("sead", "dense"), ("sed", "dense")):
            protocol = Protocol(K=6, channel=make_channel(0.2), rule=rule, feedback_mode=mode)
            for _ in range(5):
                theta = utils.Cast.to_bits(rng.integers(0, 2, 6).tolist())
                encoder, decoder = noiseless_session(protocol, theta)
                self.assertEqual(decoder.estimate(), theta)
                self.assertTrue(encoder.stopped)

    def test_noiseless_confirmation_time(self):
        # singleton steps raise the leader's log-likelihood ratio by C2 each
        channel = make_channel(0.1)
        protocol = Protocol(K=5, channel=channel, rule="sead", feedback_mode="dense")
        limit = math.ceil(math.log2(0.999 / 1e-3) / channel.C2)
        for theta in ((0, 0, 0, 0, 0), (1, 0, 1, 1, 0), (1, 1, 1, 1, 1)):
            _, decoder = noiseless_session(protocol, theta)
            self.assertLessEqual(decoder.tau - decoder.comm_time, limit)

    def test_encoder_and_decoder_stay_in_lockstep(self):
        rng = np.random.default_rng(4)
        protocol = Protocol(K=7, channel=make_channel(0.2))
        encoder = Encoder(protocol, rng.integers(0, 2, 7).tolist())
        decoder = Decoder(protocol)
        while not decoder.stopped:
            block = encoder.next_block()
            self.assertEqual(block.D, decoder.block_size)
            received = [b ^ int(f) for b, f in zip(block.bits, rng.random(block.D) < 0.2)]
            encoder.absorb(decoder.absorb(block.start_time, received))
            self.assertEqual(encoder.posterior.digest(), decoder.posterior.digest())
            self.assertEqual(encoder.plan, decoder.plan)
            self.assertEqual(encoder.t, decoder.t)
        self.assertEqual(sum(len(p.bits) for p in decoder.packets), decoder.tau)

    def test_posterior_matches_dense_oracle(self):
        rng = np.random.default_rng(9)
        for mode in ("dense", "sparse"):
            channel = make_channel(0.2)
            protocol = Protocol(K=6, channel=channel, feedback_mode=mode)
            encoder = Encoder(protocol, rng.integers(0, 2, 6).tolist())
            decoder = Decoder(protocol)
            dense = None
            while not decoder.stopped:
                block = encoder.next_block()
                received = [b ^ int(f) for b, f in zip(block.bits, rng.random(block.D) < channel.p)]
                state, plan = decoder.posterior, decoder.plan
                packet = decoder.absorb(block.start_time, received)
                encoder.absorb(packet)
                if state is None:
                    dense = oracles.dense_systematic(6, channel.p, packet.bits)
                else:
                    owner = np.zeros(2**6, dtype=int)
                    for k, slices in enumerate(plan.bins):
                        for m in oracles.members(state, slices):
                            owner[m] = k
                    for j, y in enumerate(packet.bits):
                        sent = (owner >> (plan.D - 1 - j)) & 1
                        dense = oracles.dense_observe(dense, sent, y, channel.p)
                oracles.assert_dense_close(self, decoder.posterior, dense)

    def test_single_symbol_lookahead_matches_dense_feedback(self):
        sparse = Protocol(K=6, channel=make_channel(0.15), d_max=1)
        dense = Protocol(K=6, channel=make_channel(0.15), feedback_mode="dense")
        for index in range(10):
            a, b = run_trial(sparse, 3, index), run_trial(dense, 3, index)
            self.assertEqual((a.tau, a.d_list, a.error), (b.tau, b.d_list, b.error))


class ProtocolErrorTest(TestCase):
    def setUp(self):
        self.protocol = Protocol(K=4, channel=make_channel(0.2))

    def test_decoder_checks_blocks(self):
        decoder = Decoder(self.protocol)
        with self.assertRaises(exceptions.ProtocolError):
            decoder.absorb(2, [0, 0, 0, 0])
        with self.assertRaises(exceptions.ProtocolError):
            decoder.absorb(1, [0, 0, 0])
        with self.assertRaises(exceptions.ContractError):
            decoder.estimate()
        decoder.absorb(1, [0, 1, 0, 0])
        with self.assertRaises(exceptions.ProtocolError):
            decoder.absorb(5, [0] * (decoder.block_size + 1))

    def test_decoder_rejects_blocks_after_stop(self):
        decoder = Decoder(Protocol(K=1, channel=CH, epsilon=0.5))
        decoder.absorb(1, [1])
        with self.assertRaises(exceptions.ProtocolError):
            decoder.absorb(2, [1])

    def test_encoder_waits_for_feedback(self):
        encoder = Encoder(self.protocol, [1, 0, 0, 1])
        block = encoder.next_block()
        self.assertEqual(block, ForwardBlock(start_time=1, bits=(1, 0, 0, 1)))
        with self.assertRaises(exceptions.ProtocolError):
            encoder.next_block()
        with self.assertRaises(exceptions.ProtocolError):
            encoder.absorb(FeedbackPacket(start_time=2, bits=(1, 0, 0, 1)))
        with self.assertRaises(exceptions.ProtocolError):
            encoder.absorb(FeedbackPacket(start_time=1, bits=(1, 0)))

    def test_encoder_checks_the_stop_flag(self):
        encoder = Encoder(Protocol(K=1, channel=CH, epsilon=0.5), [0])
        encoder.next_block()
        with self.assertRaises(exceptions.ConsistencyError):
            encoder.absorb(FeedbackPacket(start_time=1, bits=(0,), stop=False))

    def test_encoder_stops(self):
        encoder = Encoder(Protocol(K=1, channel=CH, epsilon=0.5), [0])
        encoder.next_block()
        encoder.absorb(FeedbackPacket(start_time=1, bits=(0,), stop=True))
        self.assertTrue(encoder.stopped)
        with self.assertRaises(exceptions.ProtocolError):
            encoder.next_block()

    def test_message_size(self):
        with self.assertRaises(ValueError):
            Encoder(self.protocol, [0, 1])


class TraceTest(TestCase):
    def test_render_and_parse(self):
        block = ForwardBlock(start_time=9, bits=(1, 0, 1))
        packet = FeedbackPacket(start_time=9, bits=(1, 0), stop=True)
        self.assertEqual(trace_line(block), "9 fwd 101")
        self.assertEqual(trace_line(packet), "9 fb 10 stop")
        self.assertEqual(trace_line(FeedbackPacket(start_time=1, bits=(0,))), "1 fb 0")
        self.assertEqual(parse_trace_line("9 fwd 101"), block)
        self.assertEqual(parse_trace_line("9 fb 10 stop"), packet)
        self.assertEqual(packet.end_time, 10)

    def test_rejects_malformed_lines(self):
        for line in ("", "x fwd 1", "3 fwd 101 stop", "3 fb 10 go", "3 zz 1", "3 fb 12"):
            with self.assertRaises(ValueError):
                parse_trace_line(line)

    def test_replay_reproduces_a_trial(self):
        protocol = Protocol(K=8, channel=make_channel(0.2))
        trace = []
        record = run_trial(protocol, master_seed=5, index=2, trace=trace)
        self.assertEqual(len(trace), 2 * record.eta)
        decoder = replay(trace, protocol)
        self.assertEqual(decoder.tau, record.tau)
        self.assertEqual(len(decoder.packets), record.eta)
        self.assertEqual(decoder.comm_time, record.comm_time)

    def test_replay_rejects_an_early_stop(self):
        protocol = Protocol(K=8, channel=make_channel(0.2))
        trace = []
        run_trial(protocol, master_seed=5, index=2, trace=trace)
        trace[1] += " stop"
        with self.assertRaises(exceptions.ProtocolError):
            replay(trace, protocol)

    def test_replay_detects_a_missing_stop(self):
        protocol = Protocol(K=1, channel=CH, epsilon=0.5)
        with self.assertRaises(exceptions.ConsistencyError):
            replay(["1 fwd 0", "1 fb 0"], protocol)

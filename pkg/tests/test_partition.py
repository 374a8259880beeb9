"""Tests for the single-symbol partition rules and builders."""
import math
from unittest import TestCase

from hypothesis import assume, given, settings
from hypothesis import strategies as st

from sparsepm import exceptions
from sparsepm.model import make_channel
from sparsepm.partition import (
    BinaryPartition,
    build_sead_partition,
    build_sed_partition,
    check_sead,
    check_sed,
    check_wmad,
    singleton_partition,
)
from sparsepm.posterior import GroupedPosterior, Slice, u_of

CH = make_channel(0.1)

# min S0 value 0.05 when S0 is group 0
TWO_LEVEL = GroupedPosterior.from_groups(5, CH, [(0.05, 16), (0.0125, 16)])


def with_delta(Delta, state=TWO_LEVEL):
    """Partition with S0 = group 0 and an arbitrary stored Delta."""
    S0 = (state.whole(0),)
    S1 = tuple(state.whole(g) for g in range(1, len(state.groups)))
    return BinaryPartition(S0=S0, S1=S1, P0=(1 + Delta) / 2, P1=(1 - Delta) / 2, Delta=Delta)


@st.composite
def communication_states(draw):
    K = draw(st.integers(min_value=2, max_value=5))
    weights = draw(st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=2**K, max_size=2**K))
    state = GroupedPosterior.from_groups(K, CH, [(w, 1) for w in weights])
    assume(state.top_value < 0.5)
    return state


class RuleTest(TestCase):
    def test_sed(self):
        self.assertEqual(TWO_LEVEL.groups[0].value, 0.05)
        self.assertTrue(check_sed(TWO_LEVEL, with_delta(0.0)))
        self.assertFalse(check_sed(TWO_LEVEL, with_delta(0.10)))
        self.assertTrue(check_sed(TWO_LEVEL, with_delta(0.03)))
        self.assertFalse(check_sed(TWO_LEVEL, with_delta(-0.01)))

    def test_sead(self):
        self.assertTrue(check_sead(TWO_LEVEL, with_delta(-0.04)))
        self.assertFalse(check_sed(TWO_LEVEL, with_delta(-0.04)))
        self.assertTrue(check_sead(TWO_LEVEL, with_delta(0.05)))
        self.assertFalse(check_sead(TWO_LEVEL, with_delta(-0.05)))

    def test_wmad(self):
        uniform = GroupedPosterior.from_groups(2, CH, [(1.0, 4)])
        self.assertAlmostEqual(uniform.median_value()[0], 0.25)
        self.assertTrue(check_wmad(uniform, with_delta(0.3, uniform)))
        self.assertFalse(check_wmad(uniform, with_delta(0.4, uniform)))
        self.assertTrue(check_wmad(uniform, with_delta(0.0, uniform)))

    @given(communication_states())
    @settings(deadline=None, max_examples=60)
    def test_sed_implies_sead(self, state):
        partition = build_sed_partition(state)
        if check_sed(state, partition):
            self.assertTrue(check_sead(state, partition))

    def test_masses_consistent(self):
        state = GroupedPosterior.systematic_init(4, make_channel(0.3), [0, 1, 0, 1])
        partition = build_sead_partition(state)
        self.assertAlmostEqual(partition.P0 + partition.P1, 1.0, delta=1e-12)
        self.assertAlmostEqual(partition.P0, (1 + partition.Delta) / 2, delta=1e-12)
        self.assertAlmostEqual(state.mass_of(partition.S0) - state.mass_of(partition.S1), partition.Delta, delta=1e-12)


class SeadBuilderTest(TestCase):
    def test_two_messages(self):
        state = GroupedPosterior.from_groups(1, CH, [(1.0, 2)])
        partition = build_sead_partition(state)
        self.assertEqual(partition.S0, (Slice(0, 0, 1),))
        self.assertEqual(partition.Delta, 0.0)

    def test_heavy_leader(self):
        # one 0.4 member, two 0.3 members and an empty one
        state = GroupedPosterior.from_groups(2, CH, [(0.4, 1), (0.3, 2), (0.0, 1)])
        partition = build_sead_partition(state)
        self.assertTrue(check_sead(state, partition))
        self.assertTrue(check_wmad(state, partition))
        self.assertEqual(partition.S0, (Slice(0, 0, 1),))
        self.assertAlmostEqual(partition.Delta, -0.2)

    def test_binomial(self):
        state = GroupedPosterior.systematic_init(3, make_channel(0.3), [1, 1, 0])
        partition = build_sead_partition(state)
        self.assertTrue(check_sead(state, partition))

    @given(communication_states())
    @settings(deadline=None, max_examples=100)
    def test_sead_and_wmad_hold(self, state):
        partition = build_sead_partition(state)
        self.assertTrue(check_sead(state, partition))
        self.assertTrue(check_wmad(state, partition))

    def test_splits_lowest_positions_first(self):
        state = GroupedPosterior.from_groups(3, CH, [(1.0, 8)])
        partition = build_sead_partition(state)
        self.assertEqual(partition.S0, (Slice(0, 0, 4),))
        self.assertEqual(partition.S1, (Slice(0, 4, 4),))


class SedBuilderTest(TestCase):
    @given(communication_states())
    @settings(deadline=None, max_examples=100)
    def test_non_negative_and_sead(self, state):
        partition = build_sed_partition(state)
        self.assertTrue(check_sead(state, partition))
        self.assertGreaterEqual(partition.Delta, -1e-15)

    def test_three_equal_members_miss_strict_sed(self):
        # 3 equal members and a zero: the best split leaves Delta equal to the smallest S0 value
        state = GroupedPosterior.from_groups(2, CH, [(1.0, 3), (0.0, 1)])
        partition = build_sed_partition(state)
        self.assertTrue(check_sead(state, partition))
        self.assertFalse(check_sed(state, partition))
        self.assertAlmostEqual(partition.Delta, 1 / 3)


class SingletonTest(TestCase):
    def test_two_messages(self):
        state = GroupedPosterior.from_groups(1, CH, [(1.0, 2)])
        partition = singleton_partition(state)
        self.assertEqual(partition.S0, (Slice(0, 0, 1),))

    def test_confirming_step_adds_c2(self):
        state = GroupedPosterior.from_groups(1, CH, [(0.9, 1), (0.1, 1)])
        partition = singleton_partition(state)
        after = state.update_sequential(partition, 0)
        self.assertAlmostEqual(u_of(after.top_value), math.log2(81), places=9)

    @given(st.floats(min_value=0.5, max_value=0.99), st.floats(min_value=0.02, max_value=0.45))
    @settings(deadline=None, max_examples=50)
    def test_increment_is_c2_both_ways(self, top, p):
        channel = make_channel(p)
        state = GroupedPosterior.from_groups(3, channel, [(top, 1), ((1 - top) / 7, 7)])
        partition = singleton_partition(state)
        before = u_of(state.groups[0].value)
        loc = state.groups[0].segments[0]
        for y, sign in ((0, 1), (1, -1)):
            after = state.update_sequential(partition, y)
            value = next(g.value for g in after.groups if any(s.h == loc.h and s.lo <= loc.lo < s.hi for s in g.segments))
            self.assertAlmostEqual(u_of(value) - before, sign * channel.C2, delta=1e-9)

    def test_needs_a_leader(self):
        with self.assertRaises(exceptions.ContractError):
            singleton_partition(GroupedPosterior.from_groups(2, CH, [(1.0, 4)]))

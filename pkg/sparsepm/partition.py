# -*- coding: UTF-8 -*-
"""Single-symbol partitions of the message set and the rules that judge them.

.. autosummary::

    BinaryPartition
    build_sead_partition
    build_sed_partition
    check_sead
    check_sed
    check_wmad
    singleton_partition

----
"""
import logging
import math
from typing import Iterable

import attrs

from . import exceptions
from .posterior import GroupedPosterior, Slice, _check_cover

LOGGER = logging.getLogger(__name__)

WMAD_FACTOR = 0.4
"""Weight of the median posterior in the WMAD bound Delta^2 <= 0.4 rho_om."""


@attrs.define(frozen=True)
class BinaryPartition:
    """Split of the message set into S0 (sent as 0) and S1 (sent as 1).

    Use :meth:`BinaryPartition.from_slices` to build one so that the masses are consistent.

    ----
    """

    S0: tuple[Slice, ...] = attrs.field(converter=tuple)
    """Slices sent as 0."""
    S1: tuple[Slice, ...] = attrs.field(converter=tuple)
    """Slices sent as 1."""
    P0: float = attrs.field()
    """Posterior mass of S0."""
    P1: float = attrs.field()
    """Posterior mass of S1."""
    Delta: float = attrs.field()
    """P0 - P1."""

    @classmethod
    def from_slices(
        cls, state: GroupedPosterior, S0: Iterable[Slice], S1: Iterable[Slice]
    ) -> "BinaryPartition":
        """Build a partition of `state` and compute its masses.

        Raises:
            PartitionError:
                If S0 and S1 together do not cover every member exactly once.
        """
        S0, S1 = tuple(S0), tuple(S1)
        _check_cover(state.groups, (S0, S1))
        P0, P1 = state.mass_of(S0), state.mass_of(S1)
        return cls(S0=S0, S1=S1, P0=P0, P1=P1, Delta=P0 - P1)


def min_value(state: GroupedPosterior, slices: Iterable[Slice]) -> float:
    """Smallest member value among `slices`, 0 when there are none."""
    return min((state.value_of(sl) for sl in slices), default=0.0)


def check_sed(state: GroupedPosterior, partition: BinaryPartition) -> bool:
    """Small-enough-difference rule: 0 <= Delta < smallest value in S0."""
    return 0 <= partition.Delta < min_value(state, partition.S0)


def check_sead(state: GroupedPosterior, partition: BinaryPartition) -> bool:
    """Small-enough-absolute-difference rule: -m < Delta <= m, m the smallest value in S0."""
    m = min_value(state, partition.S0)
    return -m < partition.Delta <= m


def check_wmad(state: GroupedPosterior, partition: BinaryPartition) -> bool:
    """Weighted-median-absolute-difference rule: Delta^2 <= 0.4 rho_om.

    The bound only depends on the median posterior, not on which members sit in S0.
    """
    rho_om, _ = state.median_value()
    return partition.Delta**2 <= WMAD_FACTOR * rho_om


def _prefix(state: GroupedPosterior, g: int, n: int) -> tuple[list[Slice], list[Slice]]:
    """Split after the first `n` members of group `g` in the descending order."""
    head = [state.whole(i) for i in range(g)]
    tail = [state.whole(i) for i in range(g + 1, len(state.groups))]
    count = state.groups[g].count
    if n > 0:
        head.append(Slice(g, 0, n))
    if n < count:
        tail.insert(0, Slice(g, n, count - n))
    return head, tail


def build_sead_partition(state: GroupedPosterior) -> BinaryPartition:
    """Greedy SEAD partition.

    S0 is filled largest-first until its mass reaches 1/2, which ends on the median member. If that
    overshoots by more than the median value, the median member moves to S1. Either way
    -rho_om < Delta <= rho_om <= min S0.

    Raises:
        ContractError:
            If the result fails SEAD or WMAD (only possible outside the communication phase).
    """
    g, n, cum = state.median_position()
    x = state.groups[g].value
    first = n if 2.0 * cum - 1.0 <= x else n - 1
    for taken in dict.fromkeys((first, n, n - 1)):
        partition = BinaryPartition.from_slices(state, *_prefix(state, g, taken))
        if check_sead(state, partition):
            break
    else:
        raise exceptions.ContractError(f"no SEAD split found around the median (t={state.t})")
    if not check_wmad(state, partition):
        raise exceptions.ContractError(f"SEAD partition violates WMAD (Delta={partition.Delta})")
    return partition


def _lpt_two(state: GroupedPosterior) -> list[tuple[int, int]]:
    """Largest-first greedy over two sets: each member goes to the lighter set, ties to set 0.

    Returns:
        list[tuple[int, int]]:
            Members of each group given to set 0 and to set 1.
    """
    fills = [0.0, 0.0]
    split = []
    for group in state.groups:
        w, c = group.value, group.count
        a = [0, 0]
        light = 0 if fills[0] <= fills[1] else 1
        gap = fills[1 - light] - fills[light]
        if w > 0 and gap > 0:
            closing = min(c, math.ceil(gap / w))
            a[light] += closing
            c -= closing
            fills[light] += closing * w
        if c:
            # alternate, starting with the lighter set; ties go to set 0
            first = 0 if fills[0] <= fills[1] else 1
            a[first] += c - c // 2
            a[1 - first] += c // 2
            fills[first] += (c - c // 2) * w
            fills[1 - first] += (c // 2) * w
        split.append((a[0], a[1]))
    return split


def build_sed_partition(state: GroupedPosterior) -> BinaryPartition:
    """Greedy SED partition, S0 being the heavier set of a largest-first two-way split.

    The greedy gives 0 <= Delta <= min S0. Strict SED may be unattainable (three equal members), in
    which case the result still satisfies SEAD.
    """
    sets: tuple[list[Slice], list[Slice]] = ([], [])
    for g, (a0, a1) in enumerate(_lpt_two(state)):
        if a0:
            sets[0].append(Slice(g, 0, a0))
        if a1:
            sets[1].append(Slice(g, a0, a1))
    partition = BinaryPartition.from_slices(state, sets[0], sets[1])
    if partition.Delta < 0:
        partition = BinaryPartition.from_slices(state, sets[1], sets[0])
    if not check_sead(state, partition):
        LOGGER.debug(f"greedy two-way split missed SEAD by rounding (t={state.t}); using SEAD builder")
        return build_sead_partition(state)
    return partition


def singleton_partition(state: GroupedPosterior) -> BinaryPartition:
    """Confirmation-phase partition: S0 holds only the leading message.

    Raises:
        ContractError:
            If no member has posterior >= 0.5.
    """
    if state.top_value < 0.5:
        raise exceptions.ContractError(
            f"singleton partition needs a member with posterior >= 0.5, top is {state.top_value}"
        )
    S0, S1 = _prefix(state, 0, 1)
    return BinaryPartition.from_slices(state, S0, S1)

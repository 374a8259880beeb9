# -*- coding: UTF-8 -*-
"""The grouped posterior over the 2^K message space.

Messages that share a posterior value are kept together as one :class:`Group`. Each group remembers
which messages it holds through its lineage: a list of :class:`Segment` records, each an ordinal
range ``[lo, hi)`` inside one systematic root class ``h`` (the messages at Hamming distance ``h``
from the systematic feedback, ranked in lexicographic order).

.. autosummary::

    GroupedPosterior
    Group
    MessageLocator
    Segment
    Slice
    locate_message
    unrank
    u_of

----
"""
import bisect
import hashlib
import logging
import math
from collections import defaultdict
from typing import TYPE_CHECKING, Iterable, NamedTuple, Sequence

import attrs

from . import exceptions, utils
from .model import ChannelParams

if TYPE_CHECKING:
    from .lookahead import PartitionPlan
    from .partition import BinaryPartition

LOGGER = logging.getLogger(__name__)


# ---- lineage ---- #
class Segment(NamedTuple):
    """Ordinal range ``[lo, hi)`` of root class ``h``. Orders as the tuple (h, lo, hi)."""

    h: int
    lo: int
    hi: int

    @property
    def size(self) -> int:
        return self.hi - self.lo


def _coalesce(segments: Iterable[Segment]) -> tuple[Segment, ...]:
    """Sort segments by (h, lo) and join touching neighbours."""
    merged: list[Segment] = []
    for seg in sorted(segments):
        if merged and merged[-1].h == seg.h and merged[-1].hi == seg.lo:
            merged[-1] = Segment(seg.h, merged[-1].lo, seg.hi)
        else:
            merged.append(seg)
    return tuple(merged)


@attrs.define(frozen=True)
class Group:
    """Messages sharing one posterior value.

    Members are ordered by lineage: segments in (h, lo) order, ordinals ascending within a segment.
    Slices address members by their position in this order.
    """

    value: float = attrs.field()
    """Posterior probability of each member."""
    segments: tuple[Segment, ...] = attrs.field(converter=_coalesce)
    """Lineage of the members."""
    count: int = attrs.field(init=False)
    """Number of members."""
    offsets: tuple[int, ...] = attrs.field(init=False, repr=False, eq=False)
    """Lineage position of the first member of each segment."""

    def __attrs_post_init__(self) -> None:
        offsets, pos = [], 0
        for seg in self.segments:
            offsets.append(pos)
            pos += seg.size
        object.__setattr__(self, "offsets", tuple(offsets))
        object.__setattr__(self, "count", pos)

    @property
    def mass(self) -> float:
        return self.value * self.count

    def take(self, start: int, count: int) -> tuple[Segment, ...]:
        """Lineage of the members at positions ``[start, start + count)``."""
        out, stop = [], start + count
        i = max(0, bisect.bisect_right(self.offsets, start) - 1)
        while i < len(self.segments) and self.offsets[i] < stop:
            seg, pos = self.segments[i], self.offsets[i]
            lo, hi = max(start, pos), min(stop, pos + seg.size)
            if lo < hi:
                out.append(Segment(seg.h, seg.lo + lo - pos, seg.lo + hi - pos))
            i += 1
        return tuple(out)

    def position(self, h: int, ordinal: int) -> int | None:
        """Lineage position of message (h, ordinal) in this group, or None if it is not a member."""
        i = bisect.bisect_right(self.segments, (h, ordinal, math.inf)) - 1
        if i >= 0:
            seg = self.segments[i]
            if seg.h == h and seg.lo <= ordinal < seg.hi:
                return self.offsets[i] + ordinal - seg.lo
        return None


class Slice(NamedTuple):
    """Members ``[start, start + count)`` of group number ``group`` of one posterior."""

    group: int
    start: int
    count: int

    @property
    def stop(self) -> int:
        return self.start + self.count


# ---- ranking ---- #
@attrs.define(frozen=True)
class MessageLocator:
    """Coordinates of one message inside the grouped posterior.

    Use :func:`locate_message` to build one and :meth:`GroupedPosterior.locate` to fill
    `current_group`.
    """

    root_class: int = attrs.field()
    """Hamming distance between the message and the systematic feedback."""
    ordinal: int = attrs.field()
    """Lexicographic rank of the message among the words at that distance."""
    current_group: int | None = attrs.field(default=None)
    """Index of the group that currently holds the message."""


def _rank(word: int, h: int) -> int:
    rank, i, pos = 0, 0, 0
    while word:
        if word & 1:
            i += 1
            rank += math.comb(pos, i)
        word >>= 1
        pos += 1
    if i != h:
        raise exceptions.ConsistencyError(f"word has weight {i}, expected {h}")
    return rank


def _unrank(ordinal: int, h: int, K: int) -> int:
    if not 0 <= h <= K or not 0 <= ordinal < math.comb(K, h):
        raise exceptions.ConsistencyError(f"ordinal {ordinal} out of range for K={K}, h={h}")
    word, c, rest = 0, K, ordinal
    for i in range(h, 0, -1):
        c -= 1
        while math.comb(c, i) > rest:
            c -= 1
        word |= 1 << c
        rest -= math.comb(c, i)
    return word


def locate_message(theta: Sequence[int], y_sys: Sequence[int]) -> MessageLocator:
    """Locate `theta` relative to the systematic feedback `y_sys`.

    The root class is the Hamming distance between the two words and the ordinal is the rank of
    ``theta XOR y_sys`` among the words of that weight in lexicographic order (combinatorial number
    system).
    """
    if len(theta) != len(y_sys):
        raise ValueError(f"length mismatch: {len(theta)} != {len(y_sys)}")
    word = utils.Cast.bits_to_int(theta) ^ utils.Cast.bits_to_int(y_sys)
    h = utils.hamming(theta, y_sys)
    return MessageLocator(root_class=h, ordinal=_rank(word, h))


def unrank(locator: MessageLocator, y_sys: Sequence[int]) -> utils.Bits:
    """Inverse of :func:`locate_message`.

    Raises:
        ConsistencyError:
            If the ordinal is out of range for its root class.
    """
    K = len(y_sys)
    word = _unrank(locator.ordinal, locator.root_class, K)
    return utils.Cast.int_to_bits(word ^ utils.Cast.bits_to_int(y_sys), K)


def u_of(value: float) -> float:
    """Log-likelihood ratio log2(value / (1 - value)) in bits.

    Values of 0 and 1 map to -inf and +inf.
    """
    if value <= 0:
        return -math.inf
    if value >= 1:
        return math.inf
    return math.log2(value) - math.log2(1.0 - value)


def _crossing(pairs: Iterable[tuple[float, int]], threshold: float) -> tuple[int, int, float]:
    """Find where a descending cumulative sum over (value, count) pairs first reaches `threshold`.

    Returns:
        tuple:
            (pair index, number of members taken from that pair, cumulative sum there). If rounding
            keeps the total below the threshold, the last nonzero pair is returned whole.
    """
    cum = 0.0
    last = None
    for idx, (value, count) in enumerate(pairs):
        if value <= 0:
            break
        mass = value * count
        if cum + mass >= threshold:
            n = min(count, max(1, math.ceil((threshold - cum) / value)))
            # exact integer fix-up; beyond 2**52 members a unit step is below float resolution
            if n < 2**52:
                while n > 1 and cum + (n - 1) * value >= threshold:
                    n -= 1
                while n < count and cum + n * value < threshold:
                    n += 1
            return idx, n, cum + n * value
        cum += mass
        last = (idx, count, cum)
    if last is None:
        raise exceptions.ConsistencyError("posterior holds no mass")
    return last


def _check_cover(groups: Sequence[Group], slice_sets: Iterable[Iterable[Slice]]) -> None:
    """Raise PartitionError unless the slices cover every member of every group exactly once."""
    spans = defaultdict(list)
    for slices in slice_sets:
        for sl in slices:
            if not 0 <= sl.group < len(groups) or sl.count < 1:
                raise exceptions.PartitionError(f"invalid slice {sl}")
            spans[sl.group].append((sl.start, sl.stop))
    for g, group in enumerate(groups):
        pos = 0
        for start, stop in sorted(spans.get(g, ())):
            if start != pos:
                raise exceptions.PartitionError(
                    f"group {g}: members from {pos} covered {'twice' if start < pos else 'never'}"
                )
            pos = stop
        if pos != group.count:
            raise exceptions.PartitionError(f"group {g}: covered {pos} of {group.count} members")


@attrs.define(frozen=True)
class GroupedPosterior:
    """Posterior over the 2^K messages, stored as equal-value groups sorted by value, descending.

    Instances are immutable. Updates return a new posterior. Use :meth:`systematic_init` for the
    state after the systematic block, or :meth:`from_groups` for an arbitrary state.

    ----
    """

    K: int = attrs.field()
    """Message size in bits."""
    channel: ChannelParams = attrs.field()
    """Channel the observations came through."""
    groups: tuple[Group, ...] = attrs.field(converter=tuple)
    """Groups, values strictly decreasing."""
    t: int = attrs.field(default=0)
    """Symbol time."""
    y_sys: utils.Bits | None = attrs.field(default=None)
    """Systematic feedback the root classes are measured from. None means the all-zero word."""

    # ---- constructors ---- #
    @classmethod
    def systematic_init(
        cls, K: int, channel: ChannelParams, y_sys: Sequence[int]
    ) -> "GroupedPosterior":
        """Posterior after the K systematic transmissions were received as `y_sys`.

        Class h (messages at distance h from `y_sys`) has value p^h q^(K-h) and binom(K, h) members.
        """
        if K < 1:
            raise ValueError(f"K must be >= 1, got {K}")
        y_sys = utils.Cast.to_bits(y_sys)
        if len(y_sys) != K:
            raise ValueError(f"expected {K} systematic bits, got {len(y_sys)}")
        p, q = channel.p, channel.q
        pieces = [(p**h * q ** (K - h), (Segment(h, 0, math.comb(K, h)),)) for h in range(K + 1)]
        return cls(K=K, channel=channel, groups=_merge(pieces), t=K, y_sys=y_sys)

    @classmethod
    def from_groups(
        cls,
        K: int,
        channel: ChannelParams,
        pairs: Iterable[tuple[float, int]],
        t: int = 0,
    ) -> "GroupedPosterior":
        """Posterior with the given (value, count) pairs, renormalized.

        Lineage is assigned by walking the root classes h = 0..K in order, so a pair may span several
        classes. Counts must add up to 2^K.
        """
        pairs = sorted(pairs, key=lambda vc: -vc[0])
        if sum(count for _, count in pairs) != 2**K:
            raise exceptions.PartitionError(f"counts must sum to 2^{K}")
        pieces, h, used = [], 0, 0
        for value, count in pairs:
            if count < 1 or value < 0:
                raise ValueError(f"invalid group ({value}, {count})")
            segments = []
            while count:
                take = min(count, math.comb(K, h) - used)
                segments.append(Segment(h, used, used + take))
                used, count = used + take, count - take
                if used == math.comb(K, h):
                    h, used = h + 1, 0
            pieces.append((float(value), tuple(segments)))
        return cls._normalized(K, channel, pieces, t=t)

    @classmethod
    def _normalized(cls, K, channel, pieces, t, y_sys=None) -> "GroupedPosterior":
        total = math.fsum(value * sum(seg.size for seg in segs) for value, segs in pieces)
        if not total > 0:
            raise exceptions.ConsistencyError("posterior holds no mass")
        normalized = [(value / total, segs) for value, segs in pieces]
        return cls(K=K, channel=channel, groups=_merge(normalized), t=t, y_sys=y_sys)

    def _rebuild(self, pieces: list[tuple[float, tuple[Segment, ...]]], steps: int):
        return self._normalized(self.K, self.channel, pieces, t=self.t + steps, y_sys=self.y_sys)

    # ---- queries ---- #
    @property
    def size(self) -> int:
        """Number of messages, 2^K."""
        return sum(g.count for g in self.groups)

    @property
    def total_mass(self) -> float:
        return math.fsum(g.mass for g in self.groups)

    @property
    def top_value(self) -> float:
        return self.groups[0].value

    def slice(self, group: int, start: int, count: int) -> Slice:
        """Slice of `count` members of group `group`, starting at lineage position `start`."""
        if not (0 <= group < len(self.groups) and 0 <= start and 1 <= count):
            raise exceptions.PartitionError(f"invalid slice ({group}, {start}, {count})")
        if start + count > self.groups[group].count:
            raise exceptions.PartitionError(f"slice ({group}, {start}, {count}) overruns the group")
        return Slice(group, start, count)

    def whole(self, group: int) -> Slice:
        return Slice(group, 0, self.groups[group].count)

    def value_of(self, sl: Slice) -> float:
        return self.groups[sl.group].value

    def mass_of(self, slices: Iterable[Slice]) -> float:
        return math.fsum(self.groups[sl.group].value * sl.count for sl in slices)

    def lineage_of(self, slices: Iterable[Slice]) -> tuple[Segment, ...]:
        """Lineage of the members addressed by `slices`, for re-resolving on a later posterior."""
        segs = [seg for sl in slices for seg in self.groups[sl.group].take(sl.start, sl.count)]
        return _coalesce(segs)

    def resolve(self, lineages: Sequence[Sequence[Segment]]) -> list[list[Slice]]:
        """Map lineage sets onto this posterior's groups.

        Returns:
            list[list[Slice]]:
                For each lineage set, the slices of this posterior holding exactly those members.
        """
        index = defaultdict(list)  # h -> sorted [(lo, hi, set number)]
        for n, segs in enumerate(lineages):
            for seg in segs:
                index[seg.h].append((seg.lo, seg.hi, n))
        for entries in index.values():
            entries.sort()
        starts = {h: [lo for lo, _, _ in entries] for h, entries in index.items()}

        out: list[list[Slice]] = [[] for _ in lineages]
        for g, group in enumerate(self.groups):
            pos = 0
            for seg in group.segments:
                entries = index.get(seg.h, [])
                i = max(0, bisect.bisect_right(starts.get(seg.h, []), seg.lo) - 1)
                while i < len(entries) and entries[i][0] < seg.hi:
                    lo, hi, n = entries[i]
                    a, b = max(lo, seg.lo), min(hi, seg.hi)
                    if a < b:
                        start = pos + a - seg.lo
                        prev = out[n][-1] if out[n] else None
                        if prev is not None and prev.group == g and prev.stop == start:
                            out[n][-1] = Slice(g, prev.start, prev.count + b - a)
                        else:
                            out[n].append(Slice(g, start, b - a))
                    i += 1
                pos += seg.size
        _check_cover(self.groups, out)
        return out

    def locate(self, locator: MessageLocator) -> MessageLocator:
        """Return `locator` with `current_group` set to the group now holding the message.

        Raises:
            ConsistencyError:
                If no group holds the message.
        """
        for g, group in enumerate(self.groups):
            if group.position(locator.root_class, locator.ordinal) is not None:
                return attrs.evolve(locator, current_group=g)
        raise exceptions.ConsistencyError(f"no group holds {locator}")

    def value_at(self, locator: MessageLocator) -> float:
        """Posterior value of the located message."""
        return self.groups[self.locate(locator).current_group].value

    def median_value(self) -> tuple[float, float]:
        """Median posterior value and its offset.

        Returns:
            tuple[float, float]:
                (rho_om, delta): the value of the member at which the descending cumulative sum first
                reaches 1/2, and delta = 2 * (cumulative sum there) - 1.
        """
        g, _, cum = _crossing(((gr.value, gr.count) for gr in self.groups), 0.5)
        return self.groups[g].value, 2.0 * cum - 1.0

    def median_position(self) -> tuple[int, int, float]:
        """(group index, members taken from it, cumulative sum) where the median is reached."""
        return _crossing(((gr.value, gr.count) for gr in self.groups), 0.5)

    def quantile_value(self, gamma: float) -> float:
        """Value of the member at which the descending cumulative sum first reaches `gamma`."""
        if not 0 < gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
        g, _, _ = _crossing(((gr.value, gr.count) for gr in self.groups), gamma)
        return self.groups[g].value

    def digest(self) -> str:
        """Hash of the exact state, for lockstep comparisons."""
        text = repr(
            (self.K, self.t, [(g.value.hex(), [tuple(s) for s in g.segments]) for g in self.groups])
        )
        return hashlib.sha256(text.encode()).hexdigest()

    # ---- updates ---- #
    def update_sequential(self, partition: "BinaryPartition", y: int) -> "GroupedPosterior":
        """Bayes update for one received bit `y` sent with `partition`.

        Members of S_y are scaled by 2q and the others by 2p, both over 1 ± Delta (q - p).

        Raises:
            PartitionError:
                If the partition's slices do not cover every member exactly once.
        """
        _check_cover(self.groups, (partition.S0, partition.S1))
        p, q = self.channel.p, self.channel.q
        d = partition.Delta * (q - p)
        if y == 0:
            f0, f1 = 2 * q / (1 + d), 2 * p / (1 + d)
        elif y == 1:
            f0, f1 = 2 * p / (1 - d), 2 * q / (1 - d)
        else:
            raise ValueError(f"received bit must be 0 or 1, got {y}")
        pieces = [self._piece(sl, f0) for sl in partition.S0]
        pieces += [self._piece(sl, f1) for sl in partition.S1]
        return self._rebuild(pieces, steps=1)

    def update_block(self, plan: "PartitionPlan", y_block: Sequence[int]) -> "GroupedPosterior":
        """Bayes update for the first ``j = len(y_block)`` bits of a block sent with `plan`.

        Bin k is scaled by q^(j - z) p^z, z being the Hamming distance between `y_block` and the first
        j bits of the bin's label.

        Raises:
            ProtocolError:
                If `y_block` is empty or longer than the plan's block.
        """
        y_block = utils.Cast.to_bits(y_block)
        j = len(y_block)
        if not 1 <= j <= plan.D:
            raise exceptions.ProtocolError(f"block of {j} bits does not fit a D={plan.D} plan")
        _check_cover(self.groups, plan.bins)
        p, q = self.channel.p, self.channel.q
        pieces = []
        for label, slices in enumerate(plan.bins):
            z = sum(y_block[i] != utils.label_bit(label, i, plan.D) for i in range(j))
            coef = q ** (j - z) * p**z
            pieces += [self._piece(sl, coef) for sl in slices]
        return self._rebuild(pieces, steps=j)

    def _piece(self, sl: Slice, factor: float) -> tuple[float, tuple[Segment, ...]]:
        group = self.groups[sl.group]
        return group.value * factor, group.take(sl.start, sl.count)


def _merge(pieces: Iterable[tuple[float, tuple[Segment, ...]]]) -> tuple[Group, ...]:
    """Sort pieces by value, descending, ties by lineage, and merge exactly equal values."""
    ordered = sorted(
        (piece for piece in pieces if piece[1]),
        key=lambda piece: (-piece[0], piece[1][0].h, piece[1][0].lo),
    )
    groups: list[tuple[float, list[Segment]]] = []
    for value, segs in ordered:
        if groups and groups[-1][0] == value:
            groups[-1][1].extend(segs)
        else:
            groups.append((value, list(segs)))
    return tuple(Group(value=value, segments=segs) for value, segs in groups)

# -*- coding: UTF-8 -*-
"""Look-ahead planning of multi-symbol blocks.

A plan splits the messages into 2^D bins of nearly equal mass. The transmitter sends the D-bit label
of the bin holding its message, and no feedback is needed until the block ends. The budgets are
chosen so that every one of the D single-symbol partitions the block induces (bit j of the label)
satisfies the WMAD rule for every possible received prefix.

.. autosummary::

    Allocation
    GammaSearch
    PartitionPlan
    allocate_bins
    enumerate_realized_delta
    plan_block
    search_gamma_h

----
"""
import itertools
import logging
import math
from typing import Sequence

import attrs
import numpy as np

from . import exceptions, utils
from .model import ChannelParams
from .partition import WMAD_FACTOR, BinaryPartition, build_sead_partition
from .posterior import GroupedPosterior, MessageLocator, Segment, Slice, _check_cover, _crossing
from .registry import Defaults

LOGGER = logging.getLogger(__name__)

DEFAULT_DMAX = Defaults.get("d_max")
DEFAULT_ENUMERATION_CAP = Defaults.get("enumeration_cap")

# budgets are shrunk by this factor so realized values stay strictly inside them
_MARGIN = 1e-9
_TOL = 1e-12


@attrs.define(frozen=True)
class PartitionPlan:
    """A planned block of D transmissions.

    Bin k is labelled with the D-bit word of k. Bit j of the label is sent at step j.

    ----
    """

    D: int = attrs.field()
    """Block size in symbols."""
    bins: tuple[tuple[Slice, ...], ...] = attrs.field()
    """Slices of the planning posterior in each bin."""
    lineages: tuple[tuple[Segment, ...], ...] = attrs.field()
    """Lineage of each bin, for re-resolving the bins on later posteriors."""
    bin_mass: tuple[float, ...] = attrs.field()
    """Posterior mass P_Ek of each bin."""
    delta_k: tuple[float, ...] = attrs.field()
    """Offset of each bin mass from 2^-D."""
    t: int = attrs.field(default=0)
    """Symbol time of the planning posterior."""
    gamma: float | None = attrs.field(default=None)
    """Mass threshold of the bin-internal crossing (D >= 2 only)."""
    rho_gamma_planned: float | None = attrs.field(default=None)
    """Smallest bin-internal gamma-crossing value over the bins (D >= 2 only)."""
    h: tuple[int, ...] = attrs.field(default=())
    """Largest tolerated prefix distance h_j for j = 1..D-1."""
    rho_min_schedule: tuple[float, ...] = attrs.field(default=())
    """Lower bounds of the median posterior after j = 0..D-1 steps of the block."""
    Delta_max: float = attrs.field(default=0.0)
    """Budget of the summed bin offsets."""
    delta_max: float = attrs.field(default=0.0)
    """Per-bin budget, Delta_max * 2^-D."""

    # ---- constructors ---- #
    @classmethod
    def from_bins(
        cls, state: GroupedPosterior, bins: Sequence[Sequence[Slice]], **budgets
    ) -> "PartitionPlan":
        """Plan over explicit bins. D is log2 of the number of bins.

        Raises:
            PartitionError:
                If the bins do not cover every member exactly once.
        """
        D = len(bins).bit_length() - 1
        if D < 1 or len(bins) != 2**D:
            raise exceptions.PartitionError(f"need 2^D bins with D >= 1, got {len(bins)}")
        bins = tuple(tuple(b) for b in bins)
        lineages = tuple(state.lineage_of(b) for b in bins)  # also validates slices
        masses = tuple(state.mass_of(b) for b in bins)
        _check_cover(state.groups, bins)
        return cls(
            D=D,
            bins=bins,
            lineages=lineages,
            bin_mass=masses,
            delta_k=tuple(m - 2.0**-D for m in masses),
            t=state.t,
            **budgets,
        )

    @classmethod
    def from_partition(cls, state: GroupedPosterior, partition: BinaryPartition) -> "PartitionPlan":
        """Single-symbol plan sending `partition` (bin 0 is S0)."""
        offset = max(abs(partition.P0 - 0.5), abs(partition.P1 - 0.5))
        rho_om, _ = state.median_value()
        return cls.from_bins(
            state,
            (partition.S0, partition.S1),
            rho_min_schedule=(rho_om,),
            Delta_max=2 * offset,
            delta_max=offset,
        )

    # ---- queries ---- #
    def label(self, k: int) -> utils.Bits:
        """D-bit label of bin `k`."""
        return utils.Cast.int_to_bits(k, self.D)

    def bin_of(self, locator: MessageLocator) -> int:
        """Index of the bin holding the located message.

        Raises:
            ConsistencyError:
                If no bin holds the message.
        """
        h, ordinal = locator.root_class, locator.ordinal
        for k, segs in enumerate(self.lineages):
            if any(seg.h == h and seg.lo <= ordinal < seg.hi for seg in segs):
                return k
        raise exceptions.ConsistencyError(f"no bin holds {locator}")

    def bit_partition(self, state: GroupedPosterior, j: int) -> BinaryPartition:
        """Single-symbol partition of `state` induced by bit `j` of the labels.

        `state` is the planning posterior updated with the first `j` received bits of the block.
        """
        if not 0 <= j < self.D:
            raise exceptions.ProtocolError(f"step {j} outside a D={self.D} block")
        resolved = state.resolve(self.lineages)
        S0 = [sl for k, sls in enumerate(resolved) if not utils.label_bit(k, j, self.D) for sl in sls]
        S1 = [sl for k, sls in enumerate(resolved) if utils.label_bit(k, j, self.D) for sl in sls]
        return BinaryPartition.from_slices(state, S0, S1)

    def validate(self) -> None:
        """Check the budget invariants of a planner-emitted plan.

        Raises:
            ContractError:
                If any invariant fails.
        """
        if abs(math.fsum(self.bin_mass) - 1.0) > _TOL:
            raise exceptions.ContractError(f"bin masses sum to {math.fsum(self.bin_mass)}")
        for k, d in enumerate(self.delta_k):
            if abs(d) > self.delta_max + _TOL:
                raise exceptions.ContractError(f"bin {k}: |delta_k|={abs(d)} > {self.delta_max}")
        for j, rho in enumerate(self.rho_min_schedule):
            if self.Delta_max**2 > WMAD_FACTOR * rho * (1 + _TOL):
                raise exceptions.ContractError(f"step {j}: Delta_max^2 exceeds 0.4 * {rho}")
        if self.D >= 2 and not (self.gamma is not None and self.gamma > 0.5):
            raise exceptions.ContractError(f"gamma={self.gamma} must exceed 1/2")


@attrs.define(frozen=True)
class GammaSearch:
    """Outcome of :func:`search_gamma_h`."""

    gamma: float = attrs.field()
    """Mass threshold, > 1/2."""
    rho_gamma: float = attrs.field()
    """Candidate value whose cumulative mass defines gamma."""
    h: tuple[int, ...] = attrs.field()
    """Smallest h_j for j = 1..D-1."""
    Delta_max: float = attrs.field()
    """Tentative budget Delta'_max."""
    rho_min: tuple[float, ...] = attrs.field()
    """Candidate bounds rho^min(j) for j = 1..D-1."""


@attrs.define(frozen=True)
class Allocation:
    """Outcome of :func:`allocate_bins`."""

    bins: tuple[tuple[Slice, ...], ...] = attrs.field()
    masses: tuple[float, ...] = attrs.field()
    crossings: tuple[float, ...] = attrs.field()
    """Value at which each bin's descending cumulative sum reaches gamma 2^-D."""


def _smallest_h(j: int, gamma: float, Delta: float, channel: ChannelParams) -> int:
    """Smallest h with gamma * P(Binomial(j, p) <= h) >= (1 + Delta) / 2, or j if rounding prevents it."""
    target = (1.0 + Delta) / 2.0
    terms = []
    for h in range(j + 1):
        terms.append(math.comb(j, h) * channel.q ** (j - h) * channel.p**h)
        if gamma * math.fsum(terms) >= target:
            return h
    return j


def _rho_min(j: int, h: int, rho_gamma: float, Delta: float, channel: ChannelParams) -> float:
    return 2.0**j * channel.q ** (j - h) * channel.p**h * rho_gamma / (1.0 + Delta)


def search_gamma_h(state: GroupedPosterior, D: int, channel: ChannelParams) -> GammaSearch:
    """Choose the crossing threshold gamma and the prefix-distance schedule h for a D-symbol block.

    Candidates are the distinct group values v from the median downward. Any gamma inside v's
    cumulative-mass interval puts the gamma-crossing at v. The candidate takes the gamma in that
    interval closest to the largest gamma that keeps the tentative budget
    Delta' = min(sqrt(0.4 rho_om), 1 - gamma, 2 gamma - 1) at its WMAD cap. Then for each step j it
    finds the smallest h_j with gamma * sum_{z <= h_j} binom(j, z) q^(j-z) p^z >= (1 + Delta') / 2.
    The search keeps the candidate with the largest min_j rho^min(j) and stops at the first decrease.

    Raises:
        PlanningError:
            If no candidate leaves a positive budget.
    """
    if D < 2:
        raise ValueError(f"look-ahead search needs D >= 2, got {D}")
    rho_om, _ = state.median_value()
    g_med, _, _ = state.median_position()
    wmad = math.sqrt(WMAD_FACTOR * rho_om)
    target = 1.0 - wmad if wmad <= 1.0 / 3.0 else 2.0 / 3.0
    cum = math.fsum(g.mass for g in state.groups[:g_med])

    best, best_score = None, -math.inf
    for group in state.groups[g_med:]:
        v = group.value
        if v <= 0:
            break
        lo, cum = max(cum, 0.5), min(cum + group.mass, 1.0)
        gamma = min(cum, max(target, lo))
        Delta = min(wmad, 1.0 - gamma, 2.0 * gamma - 1.0)
        if Delta <= 0:
            if lo >= 1.0:
                break
            continue
        h = tuple(_smallest_h(j, gamma, Delta, channel) for j in range(1, D))
        rho_min = tuple(_rho_min(j, hj, v, Delta, channel) for j, hj in enumerate(h, start=1))
        score = min(rho_min)
        if score > best_score:
            best, best_score = GammaSearch(gamma, v, h, Delta, rho_min), score
        elif score < best_score:
            break

    if best is None:
        raise exceptions.PlanningError(D, "no threshold candidate leaves a positive budget")
    return best


def _budgets(
    rho_om: float, search: GammaSearch, rho_gamma: float, channel: ChannelParams
) -> tuple[tuple[float, ...], float]:
    """rho^min schedule (j = 0..D-1) and the rigorous Delta_max for crossing value `rho_gamma`.

    Within a block the bit-j partition can drift to |Delta| <= Delta_max / (1 - Delta_max), so each
    step j >= 1 needs Delta_max <= s / (1 + s) with s = sqrt(0.4 rho^min(j)).
    """
    schedule = (rho_om,) + tuple(
        _rho_min(j, hj, rho_gamma, search.Delta_max, channel)
        for j, hj in enumerate(search.h, start=1)
    )
    limits = [search.Delta_max, math.sqrt(WMAD_FACTOR * rho_om)]
    for rho in schedule[1:]:
        s = math.sqrt(WMAD_FACTOR * rho)
        limits.append(s / (1.0 + s))
    return schedule, min(limits) * (1.0 - _MARGIN)


def _water_fill(fills: np.ndarray, w: float, c: int) -> list[int]:
    """Give `c` members of value `w` to the least-filled bins, one at a time.

    Computed in closed form: the c smallest keys fills[k] + n w over all bins and n >= 0.
    """
    B = len(fills)
    order = np.argsort(fills, kind="stable")
    counts = [0] * B
    if w <= 0:
        per, extra = divmod(c, B)
        for rank, k in enumerate(order):
            counts[k] = per + (rank < extra)
        return counts

    ranked = fills[order]
    levels = (np.cumsum(ranked) + c * w) / np.arange(1, B + 1)
    nxt = np.append(ranked[1:], np.inf)
    k = int(np.argmax(levels <= nxt)) + 1
    level = levels[k - 1]
    low = order[:k]
    for b, n in zip(low, np.floor((level - fills[low]) / w)):
        counts[b] = max(0, int(n))

    short = c - sum(counts)
    if short > 0:
        per, extra = divmod(short, k)
        for rank, b in enumerate(sorted(low, key=lambda b: (fills[b] + counts[b] * w, b))):
            counts[b] += per + (rank < extra)
    elif short < 0:
        # rounding overshoot; take members back from the fullest bins
        excess = -short
        fullest = sorted(low, key=lambda b: (-(fills[b] + counts[b] * w), -b))
        while excess:
            share = -(-excess // len(fullest))
            for b in fullest:
                take = min(counts[b], share, excess)
                counts[b] -= take
                excess -= take
    return counts


def allocate_bins(
    state: GroupedPosterior, D: int, gamma: float, delta_max: float
) -> Allocation:
    """Greedy descending allocation of the members into 2^D bins.

    Members are taken largest first and each goes to the least-filled bin. Below the gamma 2^-D
    threshold this is the even spread (a bin crosses the threshold only when the member fits under
    it nowhere else); above it this fills least-filled-first toward 2^-D. Groups are split into
    slices as needed, lowest lineage positions going to the lowest bin index.

    Raises:
        PlanningError:
            If the top member alone overflows a bin, a bin ends up empty, or a bin mass misses
            2^-D by more than `delta_max`.
    """
    B = 2**D
    if state.top_value > 1.0 / B + delta_max:
        raise exceptions.PlanningError(D, f"top member {state.top_value} overflows a bin", bin=0)

    fills = np.zeros(B)
    contents: list[list[Slice]] = [[] for _ in range(B)]
    for g, group in enumerate(state.groups):
        counts = _water_fill(fills, group.value, group.count)
        start = 0
        for k, n in enumerate(counts):
            if n:
                contents[k].append(Slice(g, start, n))
                start += n
        fills += np.array([float(n) for n in counts]) * group.value

    masses = tuple(state.mass_of(c) for c in contents)
    for k, mass in enumerate(masses):
        if not contents[k] or mass <= 0:
            raise exceptions.PlanningError(D, "empty bin", bin=k)
        if abs(mass - 1.0 / B) > delta_max:
            raise exceptions.PlanningError(
                D, f"|delta_k|={abs(mass - 1.0 / B):.3g} exceeds {delta_max:.3g}", bin=k
            )

    threshold = gamma / B
    crossings = []
    for slices in contents:
        g, _, _ = _crossing(((state.value_of(sl), sl.count) for sl in slices), threshold)
        crossings.append(state.value_of(slices[g]))
    return Allocation(tuple(tuple(c) for c in contents), masses, tuple(crossings))


def _attempt(state: GroupedPosterior, D: int, channel: ChannelParams) -> PartitionPlan:
    if 2**D > state.size:
        raise exceptions.PlanningError(D, "more bins than messages")
    rho_om, _ = state.median_value()
    search = search_gamma_h(state, D, channel)
    schedule, Delta_max = _budgets(rho_om, search, search.rho_gamma, channel)
    allocation = allocate_bins(state, D, search.gamma, Delta_max / 2**D)

    # bins that crossed below the candidate value lower the guaranteed median; re-derive the budget
    rho_gamma = min(allocation.crossings)
    if rho_gamma < search.rho_gamma:
        schedule, Delta_max = _budgets(rho_om, search, rho_gamma, channel)
        for k, mass in enumerate(allocation.masses):
            if abs(mass - 2.0**-D) > Delta_max / 2**D:
                raise exceptions.PlanningError(D, "budget broken after crossing re-check", bin=k)

    plan = PartitionPlan.from_bins(
        state,
        allocation.bins,
        gamma=search.gamma,
        rho_gamma_planned=rho_gamma,
        h=search.h,
        rho_min_schedule=schedule,
        Delta_max=Delta_max,
        delta_max=Delta_max / 2**D,
    )
    plan.validate()
    return plan


def plan_block(state: GroupedPosterior, channel: ChannelParams, Dmax: int = DEFAULT_DMAX) -> PartitionPlan:
    """Plan the next block, trying D = Dmax, Dmax - 1, ..., 2 once each.

    Falls back to the single-symbol SEAD plan, which is always feasible.
    """
    for D in range(Dmax, 1, -1):
        try:
            plan = _attempt(state, D, channel)
        except exceptions.PlanningError as exc:
            LOGGER.debug(f"look-ahead attempt failed at t={state.t}: {exc}")
            continue
        LOGGER.debug(f"planned D={D} at t={state.t} (Delta_max={plan.Delta_max:.3g})")
        return plan
    plan = PartitionPlan.from_partition(state, build_sead_partition(state))
    plan.validate()
    return plan


def enumerate_realized_delta(
    plan: PartitionPlan,
    state: GroupedPosterior,
    channel: ChannelParams,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> float:
    """Worst WMAD slack Delta^2 - 0.4 rho_om over every step and received prefix of the block.

    For each j = 0..D-1 and each of the 2^j prefixes, the posterior is updated with the prefix and
    the bit-j partition is measured on it. A value <= 0 means the block never breaks WMAD.
    """
    if plan.D > cap:
        raise ValueError(f"enumeration capped at D={cap}, plan has D={plan.D}")
    if channel != state.channel:
        raise ValueError("channel does not match the posterior's channel")
    worst = -math.inf
    for j in range(plan.D):
        for prefix in itertools.product((0, 1), repeat=j):
            current = state.update_block(plan, prefix) if j else state
            partition = plan.bit_partition(current, j)
            rho_om, _ = current.median_value()
            worst = max(worst, partition.Delta**2 - WMAD_FACTOR * rho_om)
    return worst

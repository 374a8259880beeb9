# -*- coding: UTF-8 -*-
"""Numerical checks of the drift inequalities and of the block update.

Each ``check_*`` function draws its instances from per-instance random streams, so a result only
depends on (trials, seed). It returns the worst value found; :func:`run_check` compares that value
with the tolerance registered in :class:`sparsepm.registry.Checks`.

Throughout, iota is +1 for members of S0 and -1 for members of S1, and
x = (iota Delta - rho) / (1 - rho).

.. autosummary::

    CheckResult
    DriftReport
    check_block_identity
    check_constraint_11
    check_jensen_gap
    check_planner_safety
    check_singleton_identities
    check_step_bound
    check_wmad_implies_C
    exact_drift
    f_jensen
    grid_check_f
    jensen_drift_bound
    message_drift
    run_check

----
"""
import inspect
import logging
import math

import attrs
import numpy as np

from . import exceptions, utils
from .lookahead import PartitionPlan, enumerate_realized_delta, plan_block
from .model import ChannelParams, make_channel
from .partition import WMAD_FACTOR, BinaryPartition
from .posterior import GroupedPosterior, Slice
from .registry import Checks

LOGGER = logging.getLogger(__name__)

# median-posterior values where the piecewise bounds on f change form
BREAKPOINTS = (1 / 10, 49 / 250, 5 / 18, 2 / 5, 5 / 8, 3 / 4, 1.0)

_DEGENERATE = 1.0 - 1e-15
_P_RANGE = (0.01, 0.45)


@attrs.define(frozen=True)
class DriftReport:
    """Exact expected one-step drift of the true message's log-likelihood ratio.

    ----
    """

    drift: float = attrs.field()
    """E[U_theta(t+1) - U_theta(t) | y^t] in bits."""
    C: float = attrs.field()
    Delta: float = attrs.field()
    rho_om: float = attrs.field()
    p: float = attrs.field()

    @property
    def slack(self) -> float:
        """drift - C."""
        return self.drift - self.C


# ---- drift arithmetic ---- #
def _increments(values: np.ndarray, iota: np.ndarray, Delta: float, channel: ChannelParams):
    """U increments of each member when the output agrees with its set (prob q) and when not (prob p).

    log2(2q) - log2(1 + (q - p) x) and log2(2p) - log2(1 - (q - p) x). The x form stays exact for a
    lone leader (x = -1) where the posterior-ratio form cancels.
    """
    a = channel.q - channel.p
    x = (iota * Delta - values) / (1.0 - values)
    return np.log2(2 * channel.q) - np.log2(1 + a * x), np.log2(2 * channel.p) - np.log2(1 - a * x)


def _drift(values, counts, iota, Delta, channel) -> float:
    if np.any(values >= _DEGENERATE):
        raise exceptions.DegenerateInstanceError(f"member value {values.max()} is too close to 1")
    agree, disagree = _increments(values, iota, Delta, channel)
    terms = counts * values * (channel.q * agree + channel.p * disagree)
    return math.fsum(terms.tolist())


def _arrays(state: GroupedPosterior, partition: BinaryPartition):
    slices = [(sl, 1.0) for sl in partition.S0] + [(sl, -1.0) for sl in partition.S1]
    values = np.array([state.value_of(sl) for sl, _ in slices])
    counts = np.array([float(sl.count) for sl, _ in slices])
    iota = np.array([i for _, i in slices])
    return values, counts, iota


def exact_drift(
    state: GroupedPosterior, partition: BinaryPartition, channel: ChannelParams
) -> DriftReport:
    """Exact one-step drift, summed over members and both channel outputs with the four-case update.

    Raises:
        DegenerateInstanceError:
            If a member value is within 1e-15 of 1.
    """
    values, counts, iota = _arrays(state, partition)
    rho_om, _ = state.median_value()
    drift = _drift(values, counts, iota, partition.Delta, channel)
    return DriftReport(drift=drift, C=channel.C, Delta=partition.Delta, rho_om=rho_om, p=channel.p)


def message_drift(value, iota, Delta: float, channel: ChannelParams):
    """Drift of a member's log-likelihood ratio given that it is the transmitted message.

    C - q log2(1 + (q - p) x) - p log2(1 - (q - p) x). Works elementwise on arrays.
    """
    a = channel.q - channel.p
    x = (iota * Delta - value) / (1.0 - value)
    return channel.C - channel.q * np.log2(1 + a * x) - channel.p * np.log2(1 - a * x)


def jensen_drift_bound(
    state: GroupedPosterior, partition: BinaryPartition, channel: ChannelParams
) -> float:
    """Lower bound C - sum_i rho_i log2(1 + (q - p)^2 x_i) of the exact drift."""
    values, counts, iota = _arrays(state, partition)
    return _jensen(values, counts, iota, partition.Delta, channel)


def _jensen(values, counts, iota, Delta, channel) -> float:
    x = (iota * Delta - values) / (1.0 - values)
    inner = 1 + (channel.q - channel.p) ** 2 * x
    if np.any(inner <= 0):
        return -math.inf
    return channel.C - math.fsum((counts * values * np.log2(inner)).tolist())


def f_jensen(Delta, R, delta, rho):
    """Remainder f(Delta, R, delta, rho) whose sign decides the drift >= C inequality.

    f = (1 + delta)(Delta (1 - 2R) + rho) / (1 - rho) - Delta (2 Delta + (1 - 2R)(1 + delta)),
    equivalently rho (1 + delta)(1 + Delta (1 - 2R)) / (1 - rho) - 2 Delta^2. Works elementwise.

    Raises:
        ValueError:
            If any rho is outside (0, 1).
    """
    rho = np.asarray(rho, dtype=float)
    if np.any((rho <= 0) | (rho >= 1)):
        raise ValueError("rho must lie in (0, 1)")
    u = Delta * (1 - 2 * R)
    f = (1 + delta) * (u + rho) / (1 - rho) - Delta * (2 * Delta + (1 - 2 * R) * (1 + delta))
    return f if f.ndim else float(f)


# ---- random instances ---- #
def _masses(rng: np.random.Generator, M: int) -> np.ndarray:
    """Flat-Dirichlet masses, sorted descending."""
    w = rng.exponential(size=M)
    return np.sort(w / w.sum())[::-1]


def _median(values: np.ndarray) -> tuple[int, float]:
    cum = np.cumsum(values)
    m = min(int(np.searchsorted(cum, 0.5)), len(values) - 1)
    return m, float(values[m])


def _wmad_split(rng: np.random.Generator, values: np.ndarray) -> tuple[np.ndarray, float] | None:
    """Random cut of a random member order with Delta^2 <= 0.4 rho_om, falling back to the median cut."""
    _, rho_om = _median(values)
    bound = WMAD_FACTOR * rho_om
    order = rng.permutation(len(values))
    Deltas = 2 * np.cumsum(values[order])[:-1] - 1
    valid = np.nonzero(Deltas**2 <= bound)[0]
    iota = -np.ones(len(values))
    if len(valid):
        c = int(rng.choice(valid)) + 1
        iota[order[:c]] = 1.0
        return iota, float(Deltas[c - 1])
    m, _ = _median(values)
    cum = np.cumsum(values)
    c = m + 1 if 2 * cum[m] - 1 <= values[m] else m
    c = min(max(c, 1), len(values) - 1)
    Delta = float(2 * cum[c - 1] - 1)
    if Delta**2 > bound:
        return None
    iota[:c] = 1.0
    return iota, Delta


def _instance(rng: np.random.Generator, M_low: int = 2):
    M = int(rng.integers(M_low, 65))
    return _masses(rng, M), make_channel(rng.uniform(*_P_RANGE))


def check_wmad_implies_C(trials: int, seed: int = 0) -> float:
    """Worst exact-drift slack (drift - C) over random WMAD-compliant instances."""
    worst = math.inf
    for i in range(trials):
        rng = utils.trial_rng(seed, i)
        values, channel = _instance(rng)
        split = _wmad_split(rng, values)
        if split is None:
            continue
        iota, Delta = split
        worst = min(worst, _drift(values, np.ones_like(values), iota, Delta, channel) - channel.C)
    return worst


def check_constraint_11(trials: int, seed: int = 0) -> float:
    """Worst conditional drift of the true message over communication-phase WMAD instances.

    Each member is taken in turn as the transmitted message.
    """
    worst = math.inf
    for i in range(trials):
        rng = utils.trial_rng(seed, i)
        values, channel = _instance(rng, M_low=3)
        if values[0] >= 0.5:
            continue
        split = _wmad_split(rng, values)
        if split is None:
            continue
        iota, Delta = split
        worst = min(worst, float(np.min(message_drift(values, iota, Delta, channel))))
    return worst


def check_step_bound(trials: int, seed: int = 0) -> float:
    """Largest U increment minus C2 over random instances and arbitrary two-set partitions."""
    worst = -math.inf
    for i in range(trials):
        rng = utils.trial_rng(seed, i)
        values, channel = _instance(rng)
        iota = np.where(rng.random(len(values)) < 0.5, 1.0, -1.0)
        iota[0], iota[-1] = 1.0, -1.0
        Delta = float(np.sum(iota * values))
        agree, disagree = _increments(values, iota, Delta, channel)
        worst = max(worst, float(max(agree.max(), disagree.max())) - channel.C2)
    return worst


def check_jensen_gap(trials: int, seed: int = 0) -> float:
    """Smallest exact drift minus Jensen bound over random WMAD-compliant instances."""
    worst = math.inf
    for i in range(trials):
        rng = utils.trial_rng(seed, i)
        values, channel = _instance(rng)
        split = _wmad_split(rng, values)
        if split is None:
            continue
        iota, Delta = split
        ones = np.ones_like(values)
        gap = _drift(values, ones, iota, Delta, channel) - _jensen(values, ones, iota, Delta, channel)
        worst = min(worst, gap)
    return worst


def check_singleton_identities(trials: int, seed: int = 0) -> float:
    """Largest deviation from drift = C1 and |U step| = C2 for a leader held alone in S0.

    Two-member instances also check that the whole exact drift equals C1.
    """
    worst = 0.0
    for i in range(trials):
        rng = utils.trial_rng(seed, i)
        channel = make_channel(rng.uniform(*_P_RANGE))
        top = rng.uniform(0.5, 0.999)
        values = np.array([top])
        iota = np.ones(1)
        Delta = 2 * top - 1
        agree, disagree = _increments(values, iota, Delta, channel)
        deviations = [
            abs(float(message_drift(top, 1.0, Delta, channel)) - channel.C1),
            abs(float(agree[0]) - channel.C2),
            abs(float(disagree[0]) + channel.C2),
        ]
        if i % 2:
            pair = np.array([top, 1 - top])
            deviations.append(abs(_drift(pair, np.ones(2), np.array([1.0, -1.0]), Delta, channel) - channel.C1))
        worst = max(worst, *deviations)
    return worst


def grid_check_f(seed: int = 0, samples: int = 100_000) -> float:
    """Smallest f over a grid of the median posterior rho and alpha^2 <= 0.4 rho.

    The grid uses the worst case Delta (1 - 2R) = -alpha, delta in [0, rho] and rho on a 1e-3 grid of
    [1e-6, 1) with BREAKPOINTS added. At rho = 1 the sign of f is taken from
    f (1 - rho). Jointly sampled (Delta, R, delta, rho) points are added as well.
    """
    rho = np.unique(np.concatenate((np.arange(1e-6, 1.0, 1e-3), BREAKPOINTS[:-1])))
    alpha = np.sqrt(WMAD_FACTOR * rho)[:, None] * np.linspace(0.0, 1.0, 201)[None, :]
    worst = math.inf
    for share in np.linspace(0.0, 1.0, 11):
        delta = (share * rho)[:, None]
        # Delta = alpha with R = 1 gives Delta (1 - 2R) = -alpha
        f = f_jensen(alpha, 1.0, delta, rho[:, None])
        worst = min(worst, float(f.min()))

    # rho = 1: f (1 - rho) = rho (1 + delta)(1 - alpha) >= 0
    edge = (1 + np.linspace(0.0, 1.0, 11)) * (1 - np.sqrt(WMAD_FACTOR))
    worst = min(worst, float(edge.min()))

    rng = np.random.default_rng(seed)
    r = rng.uniform(1e-6, 1.0 - 1e-6, samples)
    D = rng.uniform(-1.0, 1.0, samples) * np.sqrt(WMAD_FACTOR * r)
    f = f_jensen(D, rng.uniform(0.0, 1.0, samples), rng.uniform(0.0, 1.0, samples) * r, r)
    return min(worst, float(f.min()))


# ---- posterior-level checks ---- #
def _random_state(rng: np.random.Generator, K_range=(2, 9)) -> GroupedPosterior:
    K = int(rng.integers(*K_range))
    size = 2**K
    g = int(rng.integers(1, min(size, 12) + 1))
    cuts = np.sort(rng.choice(np.arange(1, size), size=g - 1, replace=False)) if g > 1 else []
    counts = np.diff(np.concatenate(([0], cuts, [size]))).astype(int)
    values = rng.exponential(size=g)
    channel = make_channel(rng.uniform(*_P_RANGE))
    return GroupedPosterior.from_groups(K, channel, zip(values.tolist(), counts.tolist()))


def _random_plan(rng: np.random.Generator, state: GroupedPosterior, Dmax: int) -> PartitionPlan:
    D = int(rng.integers(1, Dmax + 1))
    B = 2**D
    bins = [[] for _ in range(B)]
    for g, group in enumerate(state.groups):
        counts = rng.multinomial(group.count, np.full(B, 1.0 / B))
        start = 0
        for k, n in enumerate(counts.tolist()):
            if n:
                bins[k].append(Slice(g, start, n))
                start += n
    return PartitionPlan.from_bins(state, bins)


def _value_map(state: GroupedPosterior) -> dict[int, list[tuple[int, int, float]]]:
    out: dict[int, list[tuple[int, int, float]]] = {}
    for group in state.groups:
        for seg in group.segments:
            out.setdefault(seg.h, []).append((seg.lo, seg.hi, group.value))
    for entries in out.values():
        entries.sort()
    return out


def _max_relative_deviation(a: GroupedPosterior, b: GroupedPosterior) -> float:
    """Largest relative difference between the values two posteriors give the same message."""
    worst = 0.0
    map_a, map_b = _value_map(a), _value_map(b)
    for h, entries in map_a.items():
        other = map_b.get(h, [])
        j = 0
        for lo, hi, va in entries:
            while j < len(other) and other[j][1] <= lo:
                j += 1
            k = j
            while k < len(other) and other[k][0] < hi:
                vb = other[k][2]
                scale = max(abs(va), abs(vb))
                if scale > 0:
                    worst = max(worst, abs(va - vb) / scale)
                k += 1
    return worst


def check_block_identity(trials: int, Dmax: int = 6, seed: int = 0) -> float:
    """Worst relative deviation between the block update and the chain of single-symbol updates."""
    worst = 0.0
    for i in range(trials):
        rng = utils.trial_rng(seed, i)
        state = _random_state(rng)
        plan = _random_plan(rng, state, min(Dmax, state.K))
        y = utils.Cast.to_bits(rng.integers(0, 2, plan.D).tolist())
        chained = state
        for j, bit in enumerate(y):
            chained = chained.update_sequential(plan.bit_partition(chained, j), bit)
        worst = max(worst, _max_relative_deviation(state.update_block(plan, y), chained))
    return worst


def check_planner_safety(trials: int, Dmax: int = 6, seed: int = 0) -> float:
    """Worst realized WMAD slack of planned blocks over random communication-phase states.

    Half of the states are binomial (right after the systematic block), half random.
    """
    worst = -math.inf
    for i in range(trials):
        rng = utils.trial_rng(seed, i)
        if i % 2:
            state = _random_state(rng, K_range=(4, 11))
        else:
            K = int(rng.integers(4, 11))
            y_sys = rng.integers(0, 2, K).tolist()
            state = GroupedPosterior.systematic_init(K, make_channel(rng.uniform(*_P_RANGE)), y_sys)
        if state.top_value >= 0.5:
            continue
        plan = plan_block(state, state.channel, Dmax)
        worst = max(worst, enumerate_realized_delta(plan, state, state.channel, cap=Dmax))
    return worst


# ---- registry-driven runs ---- #
@attrs.define(frozen=True)
class CheckResult:
    """Outcome of one registered check."""

    name: str = attrs.field()
    instances: int | None = attrs.field()
    worst: float = attrs.field()
    tolerance: float = attrs.field()
    direction: str = attrs.field()

    @property
    def passed(self) -> bool:
        if self.direction == "min":
            return self.worst >= self.tolerance
        return self.worst <= self.tolerance

    def row(self) -> dict:
        return {
            "check": self.name,
            "instances": self.instances if self.instances is not None else "-",
            "worst": self.worst,
            "tolerance": self.tolerance,
            "direction": self.direction,
            "result": "pass" if self.passed else "FAIL",
        }


def run_check(name: str, trials: int | None = None, seed: int = 0, Dmax: int | None = None) -> CheckResult:
    """Run the registered check `name` and compare its worst value with the registered tolerance.

    Args:
        name (str):
            Registered check name, see :class:`sparsepm.registry.Checks`.
        trials (int, optional):
            Overrides the registered instance count.
        seed (int):
            Seed of the instance streams.
        Dmax (int, optional):
            Overrides the registered block size cap.
    """
    entry = Checks.get(name)
    func = globals()[entry["function"]]
    params = inspect.signature(func).parameters
    kwargs = {"seed": seed}
    instances = None
    if "trials" in params:
        instances = trials if trials is not None else entry["trials"]
        kwargs["trials"] = instances
    if "Dmax" in params:
        kwargs["Dmax"] = Dmax if Dmax is not None else entry.get("d_max", 6)
    worst = func(**kwargs)
    result = CheckResult(name, instances, worst, float(entry["tolerance"]), entry["direction"])
    LOGGER.info(f"check {name}: worst={worst:.3e} ({'pass' if result.passed else 'FAIL'})")
    return result

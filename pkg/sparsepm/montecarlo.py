# -*- coding: UTF-8 -*-
"""Monte Carlo trials of full encoder/decoder sessions over a simulated BSC, and their statistics.

Trial i of a run draws its message and channel noise from its own random stream, seeded by
(master seed, i). Results therefore do not depend on how many threads run the trials.

.. autosummary::

    Runner
    SummaryStats
    TrialRecord
    aggregate
    records_frame
    run_trial
    summary_row

----
"""
import concurrent.futures
import functools
import logging
import math
import time

import attrs
import attrs.validators
import numpy as np
import pandas as pd

from . import utils
from .bounds import BoundsReport
from .codec import Decoder, Encoder, Protocol, trace_line
from .types_ import Phase

LOGGER = logging.getLogger(__name__)

SUMMARY_COLUMNS = (
    "K",
    "p",
    "C",
    "epsilon",
    "rule",
    "feedback_mode",
    "trials",
    "rate",
    "mean_tau",
    "mean_eta",
    "meanD_all",
    "meanD_exsys",
    "meanD_comm",
    "fer",
    "rate_ci95",
    "ns_per_1000_symbols",
    "tau_B",
    "rate_bound_systematic",
    "rate_bound_uniform",
)

_Z95 = 1.96


@attrs.define(frozen=True)
class TrialRecord:
    """Outcome of one session.

    ----
    """

    index: int = attrs.field()
    """Trial index within the run."""
    tau: int = attrs.field()
    """Stopping time in symbols."""
    eta: int = attrs.field()
    """Feedback packets sent, the systematic and the final one included."""
    d_list: tuple[int, ...] = attrs.field(converter=tuple)
    """Symbols in each block. The first entry is K and the entries add up to tau."""
    block_phases: tuple[Phase, ...] = attrs.field(converter=tuple)
    """Phase at the start of each block."""
    error: bool = attrs.field()
    """Whether the estimate differs from the message."""
    comm_time: int = attrs.field()
    """Symbols sent while every posterior was below 1/2."""
    wall_time_ns: int = attrs.field()
    """Time spent in encoding, decoding and planning."""

    @property
    def conf_time(self) -> int:
        return self.tau - self.comm_time


def run_trial(protocol: Protocol, master_seed: int, index: int, trace: list | None = None) -> TrialRecord:
    """Run one session with a uniformly drawn message.

    Args:
        protocol (Protocol):
            Session parameters shared by encoder and decoder.
        master_seed (int):
            Seed of the run.
        index (int):
            Trial index. Message and noise are a deterministic function of (master_seed, index).
        trace (list, optional):
            If given, the session's trace lines are appended to it.
    """
    rng = utils.trial_rng(master_seed, index)
    theta = rng.integers(0, 2, protocol.K).tolist()
    p = protocol.channel.p

    elapsed = 0
    clock = time.perf_counter_ns()
    encoder, decoder = Encoder(protocol, theta), Decoder(protocol)
    elapsed += time.perf_counter_ns() - clock
    while True:
        clock = time.perf_counter_ns()
        block = encoder.next_block()
        elapsed += time.perf_counter_ns() - clock

        flips = rng.random(block.D) < p
        received = [bit ^ int(flip) for bit, flip in zip(block.bits, flips)]

        clock = time.perf_counter_ns()
        packet = decoder.absorb(block.start_time, received)
        encoder.absorb(packet)
        elapsed += time.perf_counter_ns() - clock

        if trace is not None:
            trace += [trace_line(block), trace_line(packet)]
        if packet.stop:
            break

    return TrialRecord(
        index=index,
        tau=decoder.tau,
        eta=len(decoder.packets),
        d_list=[len(packet.bits) for packet in decoder.packets],
        block_phases=decoder.block_phases,
        error=decoder.estimate() != encoder.theta,
        comm_time=decoder.comm_time,
        wall_time_ns=elapsed,
    )


def records_frame(records: list[TrialRecord]) -> pd.DataFrame:
    """One row per trial."""
    return pd.DataFrame(
        {
            "index": [r.index for r in records],
            "tau": [r.tau for r in records],
            "eta": [r.eta for r in records],
            "error": [r.error for r in records],
            "comm_time": [r.comm_time for r in records],
            "conf_time": [r.conf_time for r in records],
            "wall_time_ns": [r.wall_time_ns for r in records],
        }
    )


def _blocks_frame(records: list[TrialRecord]) -> pd.DataFrame:
    """One row per block: trial, position in the trial, size and starting phase."""
    rows = [
        (r.index, pos, d, phase.value)
        for r in records
        for pos, (d, phase) in enumerate(zip(r.d_list, r.block_phases))
    ]
    return pd.DataFrame(rows, columns=["trial", "position", "D", "phase"])


@attrs.define(frozen=True)
class SummaryStats:
    """Aggregated metrics of one configuration point.

    Half-widths are 95% normal-approximation intervals, None for a single trial.

    ----
    """

    K: int = attrs.field()
    trials: int = attrs.field()
    mean_tau: float = attrs.field()
    mean_eta: float = attrs.field()
    meanD_all: float = attrs.field()
    """Mean block size over all blocks."""
    meanD_exsys: float = attrs.field()
    """Mean block size without the systematic block."""
    meanD_comm: float = attrs.field()
    """Mean size of the non-systematic blocks that started in the communication phase."""
    fer: float = attrs.field()
    ns_per_1000_symbols: float = attrs.field()
    tau_ci95: float | None = attrs.field(default=None)
    eta_ci95: float | None = attrs.field(default=None)
    fer_ci95: float | None = attrs.field(default=None)
    rate_ci95: float | None = attrs.field(default=None)

    @property
    def rate(self) -> float:
        return self.K / self.mean_tau


def _half_width(values: pd.Series) -> float | None:
    if len(values) < 2:
        return None
    return _Z95 * float(values.std(ddof=1)) / math.sqrt(len(values))


def aggregate(records: list[TrialRecord], K: int) -> SummaryStats:
    """Fold trial records, in trial index order, into the summary metrics.

    Raises:
        ValueError:
            If `records` is empty.
    """
    if not records:
        raise ValueError("cannot aggregate zero trials")
    records = sorted(records, key=lambda r: r.index)
    if len(records) == 1:
        LOGGER.warning("a single trial leaves the confidence intervals not applicable")
    frame = records_frame(records)
    blocks = _blocks_frame(records)
    later = blocks[blocks["position"] > 0]

    mean_tau = float(frame["tau"].mean())
    tau_ci = _half_width(frame["tau"])
    return SummaryStats(
        K=K,
        trials=len(frame),
        mean_tau=mean_tau,
        mean_eta=float(frame["eta"].mean()),
        meanD_all=float(blocks["D"].mean()),
        meanD_exsys=float(later["D"].mean()) if len(later) else math.nan,
        meanD_comm=float(later.loc[later["phase"] == Phase.COMMUNICATION.value, "D"].mean())
        if len(later)
        else math.nan,
        fer=float(frame["error"].mean()),
        ns_per_1000_symbols=1000.0 * float(frame["wall_time_ns"].sum()) / float(frame["tau"].sum()),
        tau_ci95=tau_ci,
        eta_ci95=_half_width(frame["eta"]),
        fer_ci95=_half_width(frame["error"].astype(float)),
        rate_ci95=None if tau_ci is None else K * tau_ci / mean_tau**2,
    )


def summary_row(protocol: Protocol, stats: SummaryStats, bounds: BoundsReport) -> dict:
    """CSV row of the ``simulate`` command, keys in :data:`SUMMARY_COLUMNS` order."""
    row = {
        "K": protocol.K,
        "p": protocol.channel.p,
        "C": protocol.channel.C,
        "epsilon": protocol.epsilon,
        "rule": protocol.rule,
        "feedback_mode": protocol.feedback_mode,
        "trials": stats.trials,
        "rate": stats.rate,
        "mean_tau": stats.mean_tau,
        "mean_eta": stats.mean_eta,
        "meanD_all": stats.meanD_all,
        "meanD_exsys": stats.meanD_exsys,
        "meanD_comm": stats.meanD_comm,
        "fer": stats.fer,
        "rate_ci95": stats.rate_ci95,
        "ns_per_1000_symbols": stats.ns_per_1000_symbols,
        "tau_B": bounds.tau_B,
        "rate_bound_systematic": bounds.rate_lower_systematic,
        "rate_bound_uniform": bounds.rate_lower_uniform,
    }
    return {column: row[column] for column in SUMMARY_COLUMNS}


@attrs.define
class Runner:
    """Run the trials of one configuration point on a thread pool.

    Args:
        protocol (Protocol):
            Session parameters.
        trials (int):
            Number of trials.
        master_seed (int):
            Seed of the run.
        max_workers (int, optional):
            Maximum number of workers for the executor. This has no effect if an executor is provided.
        executor (concurrent.futures.ThreadPoolExecutor, optional):
            Executor that runs the trials.

    Example:

        .. code-block:: python

            protocol = sparsepm.Protocol(K=16, channel=sparsepm.make_channel(0.11))
            records = sparsepm.Runner(protocol, trials=1000, max_workers=4).run()
            stats = sparsepm.montecarlo.aggregate(records, K=16)

    ----
    """

    protocol: Protocol = attrs.field(validator=attrs.validators.instance_of(Protocol))
    trials: int = attrs.field(converter=int, validator=attrs.validators.gt(0))
    master_seed: int = attrs.field(default=0, converter=int)
    max_workers: int | None = attrs.field(
        default=None, validator=attrs.validators.optional(attrs.validators.instance_of(int))
    )
    _executor: concurrent.futures.ThreadPoolExecutor = attrs.field(
        default=None,
        validator=attrs.validators.optional(
            attrs.validators.instance_of(concurrent.futures.ThreadPoolExecutor)
        ),
    )

    @property
    def executor(self) -> concurrent.futures.ThreadPoolExecutor:
        """Executor that runs the trials."""
        if self._executor is None:
            self._executor = concurrent.futures.ThreadPoolExecutor(self.max_workers)
        return self._executor

    def run(self) -> list[TrialRecord]:
        """Run every trial and return the records in trial index order."""
        work = functools.partial(run_trial, self.protocol, self.master_seed)
        records = list(self.executor.map(work, range(self.trials)))
        LOGGER.info(
            f"K={self.protocol.K} p={self.protocol.channel.p:.6g}: {self.trials} trials, "
            f"mean tau {np.mean([r.tau for r in records]):.2f}"
        )
        return records

    def shutdown(self) -> None:
        """Release the executor's threads."""
        if self._executor is not None:
            self._executor.shutdown()
            self._executor = None

# -*- coding: UTF-8 -*-
"""Encoder and decoder sessions for posterior matching with sparse feedback.

A session runs three phases:

1. Systematic: the K message bits are sent raw and the first feedback packet returns at t = K.
2. Communication: while every posterior is below 1/2, the encoder sends the label of the planned
   bin holding the message. With sparse feedback a block may carry up to `d_max` symbols.
3. Confirmation: once some posterior reaches 1/2, the leading message is repeated through the
   singleton partition, one symbol per feedback packet.

The decoder stops as soon as some posterior reaches 1 - epsilon, truncating the current block. Encoder
and decoder build their plans independently from identical posteriors, so the only traffic
between them is :class:`ForwardBlock` and :class:`FeedbackPacket`.

.. autosummary::

    Decoder
    Encoder
    Protocol
    parse_trace_line
    phase_of
    replay
    trace_line

----
"""
import logging
from typing import Iterable, Sequence

import attrs
import attrs.validators

from . import exceptions, partition, utils
from .lookahead import PartitionPlan, plan_block
from .model import ChannelParams
from .posterior import GroupedPosterior, MessageLocator, locate_message, unrank
from .registry import Defaults, Rules
from .types_ import FeedbackPacket, ForwardBlock, Phase

LOGGER = logging.getLogger(__name__)

FEEDBACK_MODES = ("dense", "sparse")


def phase_of(state: GroupedPosterior | None) -> Phase:
    """Phase of a session whose posterior is `state` (None before the systematic feedback).

    Confirmation starts when some posterior reaches 1/2, i.e. its log-likelihood ratio is >= 0.
    """
    if state is None:
        return Phase.SYSTEMATIC
    return Phase.CONFIRMATION if state.top_value >= 0.5 else Phase.COMMUNICATION


def _check_epsilon(instance, attribute, value) -> None:
    if not 0 < value <= 0.5:
        raise exceptions.ConfigError(f"epsilon must lie in (0, 0.5], got {value}")


def _check_rule(instance, attribute, value) -> None:
    Rules.get(value)


@attrs.define(frozen=True)
class Protocol:
    """Parameters shared by an encoder and its decoder, and the planning both sides run.

    ----
    """

    K: int = attrs.field(validator=attrs.validators.ge(1))
    """Message size in bits."""
    channel: ChannelParams = attrs.field()
    epsilon: float = attrs.field(
        default=Defaults.get("epsilon"), converter=float, validator=_check_epsilon
    )
    """Decoding stops once some posterior reaches 1 - epsilon."""
    rule: str = attrs.field(default=Defaults.get("rule"), validator=_check_rule)
    """Registered partition rule, see :class:`sparsepm.registry.Rules`."""
    d_max: int = attrs.field(
        default=Defaults.get("d_max"),
        validator=[attrs.validators.ge(1), attrs.validators.le(24)],
    )
    """Largest block size the planner tries."""
    feedback_mode: str = attrs.field(
        default=Defaults.get("feedback_mode"), validator=attrs.validators.in_(FEEDBACK_MODES)
    )
    """'sparse' allows look-ahead blocks, 'dense' sends feedback after every symbol."""
    check_realized: bool = attrs.field(default=Defaults.get("check_realized"))
    """Assert WMAD on every realized communication-phase step of look-ahead rules."""

    @property
    def threshold(self) -> float:
        return 1.0 - self.epsilon

    @property
    def lookahead(self) -> bool:
        return bool(Rules.get(self.rule)["lookahead"]) and self.feedback_mode == "sparse"

    @property
    def effective_dmax(self) -> int:
        return self.d_max if self.lookahead else 1

    def next_plan(self, state: GroupedPosterior) -> PartitionPlan:
        """Plan the next block from `state`. Deterministic in `state`."""
        if phase_of(state) is Phase.CONFIRMATION:
            return PartitionPlan.from_partition(state, partition.singleton_partition(state))
        if self.effective_dmax > 1:
            return plan_block(state, self.channel, self.effective_dmax)
        builder = getattr(partition, Rules.get(self.rule)["builder"])
        return PartitionPlan.from_partition(state, builder(state))

    def absorb(
        self, state: GroupedPosterior, plan: PartitionPlan, bits: Sequence[int]
    ) -> tuple[GroupedPosterior, int, bool, int]:
        """Apply received `bits` one at a time through the plan's bit-slice partitions.

        Returns:
            tuple:
                (posterior, number of bits used, whether the stopping threshold was reached,
                number of steps taken from a communication-phase posterior). Bits after the
                stopping point are not used.

        Raises:
            ContractError:
                If a realized communication-phase partition of a look-ahead rule breaks WMAD.
        """
        comm_steps = 0
        for j, y in enumerate(bits):
            step = plan.bit_partition(state, j)
            communicating = phase_of(state) is Phase.COMMUNICATION
            comm_steps += communicating
            if (
                self.check_realized
                and self.lookahead
                and communicating
                and not partition.check_wmad(state, step)
            ):
                raise exceptions.ContractError(
                    f"realized WMAD violated at t={state.t}, step {j} of a D={plan.D} block"
                )
            state = state.update_sequential(step, y)
            if state.top_value >= self.threshold:
                return state, j + 1, True, comm_steps
        return state, len(bits), False, comm_steps


@attrs.define
class Decoder:
    """Receiver side of a session.

    Example:

        .. code-block:: python

            decoder = sparsepm.Decoder(protocol)
            packet = decoder.absorb(start_time=1, bits=received)
            if packet.stop:
                estimate = decoder.estimate()

    ----
    """

    protocol: Protocol = attrs.field()
    posterior: GroupedPosterior | None = attrs.field(default=None, init=False)
    plan: PartitionPlan | None = attrs.field(default=None, init=False)
    t: int = attrs.field(default=0, init=False)
    """Symbols received so far."""
    tau: int | None = attrs.field(default=None, init=False)
    """Stopping time, once stopped."""
    packets: list[FeedbackPacket] = attrs.field(factory=list, init=False)
    block_phases: list[Phase] = attrs.field(factory=list, init=False)
    """Phase at the start of each block."""
    comm_time: int = attrs.field(default=0, init=False)
    """Symbols sent while every posterior was below 1/2, the systematic block included."""

    @property
    def phase(self) -> Phase:
        return phase_of(self.posterior)

    @property
    def stopped(self) -> bool:
        return self.tau is not None

    @property
    def block_size(self) -> int:
        """Number of symbols the next forward block carries."""
        return self.protocol.K if self.posterior is None else self.plan.D

    def absorb(self, start_time: int, bits: Sequence[int], final: bool = False) -> FeedbackPacket:
        """Process the channel outputs of one forward block and return the feedback packet.

        Args:
            start_time (int):
                Symbol index of the first bit. Must follow the previous block.
            bits (sequence of int):
                Channel outputs of the whole block.
            final (bool):
                Accept a shorter, already truncated block that must end exactly at the stopping
                point. Used when replaying a trace.

        Raises:
            ProtocolError:
                If the session already stopped, the start time is wrong or the length does not
                match the block.
        """
        if self.stopped:
            raise exceptions.ProtocolError(f"decoder stopped at tau={self.tau}")
        if start_time != self.t + 1:
            raise exceptions.ProtocolError(f"expected a block starting at {self.t + 1}, got {start_time}")
        bits = utils.Cast.to_bits(bits)
        expected = self.block_size
        if len(bits) != expected and not (final and 0 < len(bits) < expected):
            raise exceptions.ProtocolError(f"block at {start_time} needs {expected} bits, got {len(bits)}")

        self.block_phases.append(self.phase)
        if self.posterior is None:
            self.posterior = GroupedPosterior.systematic_init(self.protocol.K, self.protocol.channel, bits)
            used, stop = len(bits), self.posterior.top_value >= self.protocol.threshold
            comm_steps = used
        else:
            self.posterior, used, stop, comm_steps = self.protocol.absorb(
                self.posterior, self.plan, bits
            )
        if final and not (stop and used == len(bits)):
            raise exceptions.ProtocolError(f"truncated block at {start_time} does not end at a stop")

        self.t += used
        self.comm_time += comm_steps
        packet = FeedbackPacket(start_time=start_time, bits=bits[:used], stop=stop)
        self.packets.append(packet)
        LOGGER.debug(trace_line(packet))
        if stop:
            self.tau = self.t
            self.plan = None
        else:
            self.plan = self.protocol.next_plan(self.posterior)
        return packet

    def estimate(self) -> utils.Bits:
        """Decoded message: the member holding at least 1 - epsilon of the posterior.

        With epsilon = 0.5 two members can tie at exactly 1/2. The first of them in lineage order
        is returned.

        Raises:
            ContractError:
                If the session has not stopped legitimately.
            ConsistencyError:
                If the leading group holds more than one message while epsilon < 0.5.
        """
        if not self.stopped or self.posterior.top_value < self.protocol.threshold:
            raise exceptions.ContractError("estimate requested before the stopping threshold was reached")
        top = self.posterior.groups[0]
        if top.count != 1:
            if self.protocol.threshold > 0.5:
                raise exceptions.ConsistencyError(f"leading group holds {top.count} messages")
            LOGGER.warning(f"{top.count} messages tie at {top.value}; taking the first in lineage order")
        seg = top.segments[0]
        return unrank(MessageLocator(root_class=seg.h, ordinal=seg.lo), self.posterior.y_sys)


@attrs.define
class Encoder:
    """Transmitter side of a session.

    ----
    """

    protocol: Protocol = attrs.field()
    theta: utils.Bits = attrs.field(converter=utils.Cast.to_bits)
    """Message being sent."""
    posterior: GroupedPosterior | None = attrs.field(default=None, init=False)
    plan: PartitionPlan | None = attrs.field(default=None, init=False)
    locator: MessageLocator | None = attrs.field(default=None, init=False)
    t: int = attrs.field(default=0, init=False)
    stopped: bool = attrs.field(default=False, init=False)
    _pending: ForwardBlock | None = attrs.field(default=None, init=False)

    def __attrs_post_init__(self) -> None:
        if len(self.theta) != self.protocol.K:
            raise ValueError(f"message has {len(self.theta)} bits, expected {self.protocol.K}")

    @property
    def phase(self) -> Phase:
        return phase_of(self.posterior)

    def next_block(self) -> ForwardBlock:
        """Bits to send until the next feedback time.

        Raises:
            ProtocolError:
                If the feedback of the previous block has not been absorbed, or the session stopped.
        """
        if self.stopped:
            raise exceptions.ProtocolError("encoder session has stopped")
        if self._pending is not None:
            raise exceptions.ProtocolError(
                f"feedback for the block at {self._pending.start_time} not absorbed yet"
            )
        if self.posterior is None:
            bits = self.theta
        else:
            bits = self.plan.label(self.plan.bin_of(self.locator))
        self._pending = ForwardBlock(start_time=self.t + 1, bits=bits)
        LOGGER.debug(trace_line(self._pending))
        return self._pending

    def absorb(self, packet: FeedbackPacket) -> None:
        """Update from the decoder's feedback.

        Raises:
            ProtocolError:
                If `packet` does not answer the pending block.
            ConsistencyError:
                If the encoder's own stopping check disagrees with the packet.
        """
        block = self._pending
        if block is None or packet.start_time != block.start_time:
            raise exceptions.ProtocolError(f"packet at {packet.start_time} answers no pending block")
        if len(packet.bits) > block.D or (not packet.stop and len(packet.bits) != block.D):
            raise exceptions.ProtocolError(
                f"packet of {len(packet.bits)} bits does not answer a D={block.D} block"
            )

        if self.posterior is None:
            self.posterior = GroupedPosterior.systematic_init(
                self.protocol.K, self.protocol.channel, packet.bits
            )
            used, stop = len(packet.bits), self.posterior.top_value >= self.protocol.threshold
            self.locator = locate_message(self.theta, packet.bits)
        else:
            self.posterior, used, stop, _ = self.protocol.absorb(
                self.posterior, self.plan, packet.bits
            )
        if (used, stop) != (len(packet.bits), packet.stop):
            raise exceptions.ConsistencyError(
                f"encoder stops after {used} bits (stop={stop}), packet says {len(packet.bits)} ({packet.stop})"
            )

        self.t += used
        self._pending = None
        self.stopped = stop
        self.plan = None if stop else self.protocol.next_plan(self.posterior)


def trace_line(item: ForwardBlock | FeedbackPacket) -> str:
    """One-line rendering of a protocol unit: ``<start> fwd <bits>`` or ``<start> fb <bits>[ stop]``."""
    bits = utils.Cast.bits_to_str(item.bits)
    if isinstance(item, ForwardBlock):
        return f"{item.start_time} fwd {bits}"
    return f"{item.start_time} fb {bits}" + (" stop" if item.stop else "")


def parse_trace_line(line: str) -> ForwardBlock | FeedbackPacket:
    """Inverse of :func:`trace_line`.

    Raises:
        ValueError:
            If `line` is not a trace line.
    """
    fields = line.split()
    if len(fields) not in (3, 4) or not fields[0].isdigit():
        raise ValueError(f"not a trace line: {line!r}")
    start, kind, bits = int(fields[0]), fields[1], utils.Cast.str_to_bits(fields[2])
    if kind == "fwd" and len(fields) == 3:
        return ForwardBlock(start_time=start, bits=bits)
    if kind == "fb" and (len(fields) == 3 or fields[3] == "stop"):
        return FeedbackPacket(start_time=start, bits=bits, stop=len(fields) == 4)
    raise ValueError(f"not a trace line: {line!r}")


def replay(lines: Iterable[str], protocol: Protocol) -> Decoder:
    """Rebuild a decoder from the feedback lines of a session trace.

    Forward lines are skipped. Each replayed packet must match the traced one.

    Raises:
        ConsistencyError:
            If the replayed decoder produces a different packet.
    """
    decoder = Decoder(protocol)
    for line in lines:
        item = parse_trace_line(line)
        if isinstance(item, ForwardBlock):
            continue
        packet = decoder.absorb(item.start_time, item.bits, final=item.stop)
        if packet != item:
            raise exceptions.ConsistencyError(f"replay gave {trace_line(packet)!r}, trace has {line!r}")
    return decoder

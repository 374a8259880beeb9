# -*- coding: UTF-8 -*-
"""Classes defining new types.

.. autosummary::

    FeedbackPacket
    ForwardBlock
    Phase

----
"""
import enum
import logging

import attrs

from . import utils

LOGGER = logging.getLogger(__name__)


class Phase(str, enum.Enum):
    """Protocol phase of a session."""

    SYSTEMATIC = "systematic"
    COMMUNICATION = "communication"
    CONFIRMATION = "confirmation"


@attrs.define(frozen=True)
class ForwardBlock:
    """Bits the encoder puts on the forward channel between two feedback times.

    The bits depend only on the message and on the feedback received before `start_time`.

    ----
    """

    start_time: int = attrs.field()
    """Symbol index of the first bit, s_l + 1."""
    bits: utils.Bits = attrs.field(converter=utils.Cast.to_bits)
    """Label of the bin holding the message; bit j is sent at step j."""

    @property
    def D(self) -> int:
        return len(self.bits)


@attrs.define(frozen=True)
class FeedbackPacket:
    """Channel outputs sent back to the encoder at a feedback time.

    ----
    """

    start_time: int = attrs.field()
    """Symbol index of the first received bit."""
    bits: utils.Bits = attrs.field(converter=utils.Cast.to_bits)
    """Received bits, truncated where the decoder stopped."""
    stop: bool = attrs.field(default=False)
    """Whether the decoder's posterior crossed the stopping threshold in this packet."""

    @property
    def end_time(self) -> int:
        """Symbol index of the last received bit."""
        return self.start_time + len(self.bits) - 1

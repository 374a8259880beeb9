# -*- coding: UTF-8 -*-
"""Exceptions.

.. autosummary::

    ChannelError
    ConfigError
    ConsistencyError
    ContractError
    DegenerateInstanceError
    PartitionError
    PlanningError
    ProtocolError

----
"""


class ChannelError(ValueError):
    """Raised when a channel parameter lies outside its valid range."""


class ConfigError(ValueError):
    """Raised when a run configuration is invalid. The message names the offending field."""


class ConsistencyError(Exception):
    """Raised when internal bookkeeping (lineage, ranks, group counts) contradicts itself."""


class ContractError(Exception):
    """Raised when an operation is called outside its precondition or a runtime assertion fails."""


class DegenerateInstanceError(ValueError):
    """Raised when a drift is requested for a posterior that has (numerically) collapsed to one message."""


class PartitionError(ValueError):
    """Raised when partition slices do not cover every group count exactly once."""


class ProtocolError(Exception):
    """Raised when encoder/decoder packets arrive out of order or with the wrong length."""


class PlanningError(Exception):
    """Raised when one look-ahead planning attempt fails.

    Args:
        D (int):
            Block size of the failed attempt.
        reason (str):
            Human-readable reason.
        bin (int, optional):
            Index of the offending bin, when one is known.
    """

    def __init__(self, D: int, reason: str, bin: int | None = None) -> None:
        self.D = D
        self.reason = reason
        self.bin = bin
        where = "" if bin is None else f" (bin {bin})"
        super().__init__(f"D={D}: {reason}{where}")

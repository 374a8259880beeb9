# -*- coding: UTF-8 -*-
"""Binary symmetric channel parameters and the information constants derived from them.

.. autosummary::

    ChannelParams
    capacity
    make_channel
    solve_p_for_capacity

----
"""
import logging
import math

import attrs
import scipy.optimize

from . import exceptions

LOGGER = logging.getLogger(__name__)

# bisection stops once the bracket is this narrow; the capacity error is then far below 1e-12
_P_XTOL = 1e-15


def capacity(p: float) -> float:
    """Capacity in bits per channel use of a BSC with crossover probability `p`, 0 <= p <= 1."""
    q = 1.0 - p
    h = 0.0
    if p > 0:
        h -= p * math.log2(p)
    if q > 0:
        h -= q * math.log2(q)
    return 1.0 - h


def _check_p(instance, attribute, value) -> None:
    if not 0 < value:
        raise exceptions.ChannelError(f"crossover probability must be > 0, got p={value}")
    if not value < 0.5:
        raise exceptions.ChannelError(f"crossover probability must be < 0.5, got p={value}")


@attrs.define(frozen=True)
class ChannelParams:
    """Crossover probability of a BSC and its closed-form constants.

    Use :func:`make_channel` to build one.

    ----
    """

    p: float = attrs.field(converter=float, validator=_check_p)
    """Crossover (bit flip) probability, 0 < p < 0.5."""
    q: float = attrs.field(init=False)
    """No-flip probability 1 - p."""
    C: float = attrs.field(init=False)
    """Capacity in bits per channel use."""
    C1: float = attrs.field(init=False)
    """Expected drift of the leading log-likelihood ratio under a singleton partition, (q - p) C2."""
    C2: float = attrs.field(init=False)
    """Largest one-step log-likelihood ratio increment, log2(q / p)."""

    def __attrs_post_init__(self) -> None:
        q = 1.0 - self.p
        C2 = math.log2(q / self.p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "C", capacity(self.p))
        object.__setattr__(self, "C2", C2)
        object.__setattr__(self, "C1", (q - self.p) * C2)
        if not (0 < self.C <= self.C1 <= self.C2):
            raise exceptions.ChannelError(
                f"constants out of order for p={self.p}: C={self.C}, C1={self.C1}, C2={self.C2}"
            )

    @property
    def degraded_step(self) -> float:
        """Per-symbol increment log2(2q)/q of the degraded process used by the tighter bounds."""
        return math.log2(2 * self.q) / self.q


def make_channel(p: float) -> ChannelParams:
    """Build the channel parameters for crossover probability `p`.

    Raises:
        ChannelError:
            If `p` is not strictly between 0 and 0.5.
    """
    return ChannelParams(p=p)


def solve_p_for_capacity(C_target: float) -> float:
    """Return the crossover probability whose capacity equals `C_target`.

    Capacity is strictly decreasing on (0, 0.5), so plain bisection converges.

    Raises:
        ChannelError:
            If `C_target` is not strictly between 0 and 1.
    """
    if not 0 < C_target < 1:
        raise exceptions.ChannelError(f"capacity target must lie in (0, 1), got {C_target}")

    p = scipy.optimize.bisect(
        lambda x: capacity(x) - C_target, 1e-300, 0.5, xtol=_P_XTOL, maxiter=2000
    )
    LOGGER.debug(f"capacity {C_target} -> p={p!r}")
    return float(p)

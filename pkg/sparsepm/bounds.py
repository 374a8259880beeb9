# -*- coding: UTF-8 -*-
"""Closed-form upper bounds on the expected stopping time, and the rate lower bounds they imply.

All bounds take the message size K (M = 2^K messages), the channel, and the stopping parameter
epsilon with 0 < epsilon < 0.5.

.. autosummary::

    BoundsReport
    compute_bounds
    tau_B
    tau_binomial_com
    tau_com
    tau_conf
    tau_prime_com

----
"""
import logging
import math

import attrs
import numpy as np
import scipy.special

from .model import ChannelParams

LOGGER = logging.getLogger(__name__)

_LN2 = math.log(2.0)


def _check(K: int, eps: float) -> None:
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if not 0 < eps < 0.5:
        raise ValueError(f"epsilon must lie in (0, 0.5), got {eps}")


def _log2_m_minus_1(K: int) -> float:
    """log2(2^K - 1) without forming 2^K."""
    return K + math.log1p(-(2.0**-K)) / _LN2


def _tail(channel: ChannelParams, eps: float) -> float:
    """Overshoot term 2^-C2 (1 - eps/(1-eps) 2^-C2) / (1 - 2^-C2)."""
    r = 2.0**-channel.C2
    return r * (1.0 - eps / (1.0 - eps) * r) / (1.0 - r)


def tau_com(K: int, channel: ChannelParams, eps: float) -> float:
    """Bound on the expected communication-phase time of the standard scheme."""
    _check(K, eps)
    C, C2 = channel.C, channel.C2
    return _log2_m_minus_1(K) / C + C2 / C + _tail(channel, eps) * C2 / C


def tau_conf(channel: ChannelParams, eps: float) -> float:
    """Bound on the expected confirmation-phase time. Independent of K, piecewise constant in eps."""
    _check(1, eps)
    steps = math.ceil(math.log2((1.0 - eps) / eps) / channel.C2)
    return channel.C2 / channel.C1 * (steps - _tail(channel, eps))


def tau_prime_com(K: int, channel: ChannelParams, eps: float) -> float:
    """Communication-phase bound of the degraded process, C2 replaced by log2(2q)/q."""
    _check(K, eps)
    step = channel.degraded_step / channel.C
    return _log2_m_minus_1(K) / channel.C + step * (1.0 + _tail(channel, eps))


def tau_binomial_com(K: int, channel: ChannelParams, eps: float) -> float:
    """Communication-phase bound after the systematic block, whose posterior is binomial.

    Class h (distance h from the systematic feedback) holds binom(K, h) messages of posterior
    rho = p^h q^(K-h). Only classes with rho < 1/2 contribute.
    """
    _check(K, eps)
    h = np.arange(K + 1)
    log2_rho = h * math.log2(channel.p) + (K - h) * math.log2(channel.q)
    log_weight = (
        scipy.special.gammaln(K + 1)
        - scipy.special.gammaln(h + 1)
        - scipy.special.gammaln(K - h + 1)
        + log2_rho * _LN2
    )
    rho = np.exp2(log2_rho)
    # log2((1 - rho) / rho); classes with rho rounding to 1 are masked out below
    with np.errstate(divide="ignore"):
        llr = np.log1p(-rho) / _LN2 - log2_rho
    step = channel.degraded_step / channel.C
    terms = (llr / channel.C + step) * np.exp(log_weight)
    total = math.fsum(terms[log2_rho < -1.0].tolist())
    return total + step * _tail(channel, eps)


def tau_B(K: int, channel: ChannelParams, eps: float) -> float:
    """Bound on the expected stopping time with systematic transmissions: K + tau_binomial_com + tau_conf."""
    return K + tau_binomial_com(K, channel, eps) + tau_conf(channel, eps)


@attrs.define(frozen=True)
class BoundsReport:
    """All bounds for one (K, channel, epsilon) point.

    Use :func:`compute_bounds` to build one.

    ----
    """

    K: int = attrs.field()
    channel: ChannelParams = attrs.field()
    epsilon: float = attrs.field()
    tau_com: float = attrs.field()
    tau_conf: float = attrs.field()
    tau_prime_com: float = attrs.field()
    tau_binomial_com: float = attrs.field()
    tau_B: float = attrs.field()

    @property
    def tau_uniform(self) -> float:
        """Expected stopping time bound of the standard scheme, tau_com + tau_conf."""
        return self.tau_com + self.tau_conf

    @property
    def rate_lower_uniform(self) -> float:
        return self.K / (self.tau_prime_com + self.tau_conf)

    @property
    def rate_lower_systematic(self) -> float:
        return self.K / self.tau_B

    @property
    def rate_lower_standard(self) -> float:
        return self.K / self.tau_uniform

    def row(self) -> dict:
        """CSV row of the ``bounds`` command, columns in output order."""
        return {
            "K": self.K,
            "p": self.channel.p,
            "C": self.channel.C,
            "epsilon": self.epsilon,
            "tau_com": self.tau_com,
            "tau_conf": self.tau_conf,
            "tau_prime_com": self.tau_prime_com,
            "tau_binomial_com": self.tau_binomial_com,
            "tau_B": self.tau_B,
            "rate_bound_uniform": self.rate_lower_uniform,
            "rate_bound_systematic": self.rate_lower_systematic,
            "tau_uniform": self.tau_uniform,
            "rate_bound_standard": self.rate_lower_standard,
        }


def compute_bounds(K: int, channel: ChannelParams, eps: float) -> BoundsReport:
    """Evaluate every bound at one point."""
    conf = tau_conf(channel, eps)
    binomial = tau_binomial_com(K, channel, eps)
    return BoundsReport(
        K=K,
        channel=channel,
        epsilon=eps,
        tau_com=tau_com(K, channel, eps),
        tau_conf=conf,
        tau_prime_com=tau_prime_com(K, channel, eps),
        tau_binomial_com=binomial,
        tau_B=K + binomial + conf,
    )

# -*- coding: UTF-8 -*-
"""Posterior matching over a binary symmetric channel with sparse feedback: simulator, bounds and checks."""
try:
    from importlib import metadata

except ImportError:  # for Python<3.8
    import importlib_metadata as metadata

from . import (
    bounds,
    codec,
    exceptions,
    lookahead,
    model,
    montecarlo,
    partition,
    posterior,
    registry,
    types_,
    utils,
    verify,
)
from .bounds import BoundsReport, compute_bounds
from .codec import Decoder, Encoder, Protocol
from .lookahead import PartitionPlan, plan_block
from .model import ChannelParams, make_channel, solve_p_for_capacity
from .montecarlo import Runner
from .partition import BinaryPartition
from .posterior import GroupedPosterior
from .registry import Checks, Defaults, Rules

__version__ = metadata.version("sparsepm")

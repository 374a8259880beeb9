# -*- coding: UTF-8 -*-
"""Command-line front end: ``sparsepm simulate|bounds|verify``.

``simulate`` and ``bounds`` sweep the Cartesian product of the K list and the channel list and write
one CSV row per point. ``verify`` runs the registered numerical checks and prints a pass/fail table.

Settings come from the registered defaults, then an optional YAML file (``--config``) whose keys are
:class:`RunConfig` field names, then the command-line flags. Later sources win.

.. autosummary::

    RunConfig
    bounds
    main
    parse_list
    simulate
    verify

----
"""
import argparse
import concurrent.futures
import itertools
import logging
import sys
from pathlib import Path
from typing import Callable, Sequence

import attrs
import pandas as pd
import tabulate
import yaml

from . import exceptions
from .bounds import compute_bounds
from .codec import FEEDBACK_MODES, Protocol
from .model import ChannelParams, make_channel, solve_p_for_capacity
from .montecarlo import SUMMARY_COLUMNS, Runner, aggregate, summary_row
from .registry import Checks, Defaults, Rules
from .verify import CheckResult, run_check

LOGGER = logging.getLogger(__name__)

COMMANDS = ("simulate", "bounds", "verify")
LIST_FIELDS = ("K", "p", "capacity", "checks")


# ---- list syntax ---- #
def _number(text: str, cast: Callable, field: str):
    try:
        return cast(text)
    except ValueError:
        raise exceptions.ConfigError(f"{field}: {text!r} is not a valid {cast.__name__}")


def parse_list(text: str, cast: Callable = float, field: str = "value") -> tuple:
    """Expand list syntax into a tuple.

    Accepts ``16,32,64``, the inclusive integer range ``1..512`` and the arithmetic progression
    ``0.25,0.3,...,0.9`` whose step comes from the first two items.

    Raises:
        ConfigError:
            If `text` does not parse. The message names `field`.
    """
    text = str(text).replace(" ", "")
    if not text:
        raise exceptions.ConfigError(f"{field}: empty list")

    if ".." in text and "..." not in text:
        lo, _, hi = text.partition("..")
        lo, hi = _number(lo, int, field), _number(hi, int, field)
        if hi < lo:
            raise exceptions.ConfigError(f"{field}: empty range {text!r}")
        return tuple(cast(i) for i in range(lo, hi + 1))

    items = text.split(",")
    if "..." not in items:
        return tuple(_number(item, cast, field) for item in items)

    if len(items) != 4 or items[2] != "...":
        raise exceptions.ConfigError(f"{field}: a progression reads 'first,second,...,last', got {text!r}")
    first, second, last = (_number(items[i], cast, field) for i in (0, 1, 3))
    step = second - first
    if step == 0 or (last - first) * step < 0:
        raise exceptions.ConfigError(f"{field}: progression {text!r} does not reach its last item")
    count = int(round((last - first) / step)) + 1
    # rounding keeps 0.25 + 13 * 0.05 printing as 0.9
    return tuple(cast(round(first + i * step, 12)) for i in range(count))


def _as_list(value, cast: Callable, field: str) -> tuple | None:
    if value is None:
        return None
    if isinstance(value, str):
        return parse_list(value, cast, field)
    if isinstance(value, (list, tuple)):
        return tuple(_number(str(item), cast, field) for item in value)
    return (_number(str(value), cast, field),)


# ---- configuration ---- #
def _fail(field: str, message: str):
    raise exceptions.ConfigError(f"{field}: {message}")


def _check_command(instance, attribute, value) -> None:
    if value not in COMMANDS:
        _fail(attribute.name, f"unknown command {value!r}, expected one of {COMMANDS}")


def _check_positive(instance, attribute, value) -> None:
    if value is not None and value < 1:
        _fail(attribute.name, f"must be >= 1, got {value}")


def _check_d_max(instance, attribute, value) -> None:
    if value is not None and not 1 <= value <= 24:
        _fail(attribute.name, f"must lie in [1, 24], got {value}")


def _check_epsilon(instance, attribute, value) -> None:
    if not 0 < value < 0.5:
        _fail(attribute.name, f"must lie in (0, 0.5), got {value}")


def _check_rule(instance, attribute, value) -> None:
    if value not in Rules().names:
        _fail(attribute.name, f"unknown rule {value!r}, expected one of {Rules().names}")


def _check_feedback(instance, attribute, value) -> None:
    if value not in FEEDBACK_MODES:
        _fail(attribute.name, f"unknown mode {value!r}, expected one of {FEEDBACK_MODES}")


def _check_checks(instance, attribute, value) -> None:
    for name in value or ():
        if name not in Checks().names:
            _fail(attribute.name, f"unknown check {name!r}, expected some of {Checks().names}")


@attrs.define(frozen=True)
class RunConfig:
    """Validated settings of one command.

    `trials` and `d_max` stay None for ``verify`` unless given, in which case they override the
    registered per-check values.

    Raises:
        ConfigError:
            On any invalid field. The message starts with the field name.

    ----
    """

    command: str = attrs.field(validator=_check_command)
    K: tuple[int, ...] | None = attrs.field(default=None)
    p: tuple[float, ...] | None = attrs.field(default=None)
    capacity: tuple[float, ...] | None = attrs.field(default=None)
    epsilon: float = attrs.field(default=Defaults.get("epsilon"), converter=float, validator=_check_epsilon)
    trials: int | None = attrs.field(default=None, validator=_check_positive)
    master_seed: int = attrs.field(default=Defaults.get("master_seed"), converter=int)
    d_max: int | None = attrs.field(default=None, validator=_check_d_max)
    rule: str = attrs.field(default=Defaults.get("rule"), validator=_check_rule)
    feedback_mode: str = attrs.field(default=Defaults.get("feedback_mode"), validator=_check_feedback)
    output: str | None = attrs.field(default=None)
    threads: int = attrs.field(default=Defaults.get("threads"), validator=_check_positive)
    checks: tuple[str, ...] | None = attrs.field(default=None, validator=_check_checks)

    def __attrs_post_init__(self) -> None:
        if self.command == "verify":
            return
        if not self.K:
            _fail("K", "needs at least one message size")
        for k in self.K:
            if k < 1:
                _fail("K", f"message sizes must be >= 1, got {k}")
        if (self.p is None) == (self.capacity is None):
            _fail("p", "give exactly one of p and capacity")
        if self.p is not None:
            if not self.p:
                _fail("p", "needs at least one value")
            for p in self.p:
                if not 0 < p < 0.5:
                    _fail("p", f"must lie in (0, 0.5), got {p}")
        if self.capacity is not None:
            if not self.capacity:
                _fail("capacity", "needs at least one value")
            for c in self.capacity:
                if not 0 < c < 1:
                    _fail("capacity", f"must lie in (0, 1), got {c}")

    @classmethod
    def from_sources(cls, command: str, file_values: dict | None = None, **flags) -> "RunConfig":
        """Merge registered defaults, config file values and flags (non-None flags win).

        Unknown config file keys are warned about and ignored.
        """
        known = {a.name for a in attrs.fields(cls)} - {"command"}
        values = {}
        for key, value in (file_values or {}).items():
            if key not in known:
                LOGGER.warning(f"config file key {key!r} is not a RunConfig field; ignored")
                continue
            values[key] = value
        # a channel flag replaces the file's channel list of either kind
        if flags.get("p") is not None or flags.get("capacity") is not None:
            values.pop("p", None)
            values.pop("capacity", None)
        values.update({key: value for key, value in flags.items() if value is not None})

        for field, cast in (("K", int), ("p", float), ("capacity", float), ("checks", str)):
            if field in values:
                values[field] = _as_list(values[field], cast, field)
        for field in ("trials", "d_max", "threads", "master_seed"):
            if field in values:
                values[field] = _number(str(values[field]), int, field)
        if "epsilon" in values:
            values["epsilon"] = _number(str(values["epsilon"]), float, "epsilon")
        if command != "verify":
            values.setdefault("trials", Defaults.get("trials"))
            values.setdefault("d_max", Defaults.get("d_max"))
        return cls(command=command, **values)

    def channels(self) -> list[ChannelParams]:
        """Channels of the sweep. Capacity targets are resolved to their crossover probability."""
        if self.p is not None:
            return [make_channel(p) for p in self.p]
        return [make_channel(solve_p_for_capacity(c)) for c in self.capacity]

    def points(self) -> list[tuple[int, ChannelParams]]:
        """(K, channel) pairs of the sweep, K varying slowest."""
        return list(itertools.product(self.K, self.channels()))


def load_config_file(path: str | None) -> dict:
    """Read a YAML config file into a dict. An empty file gives an empty dict.

    Raises:
        ConfigError:
            If the file does not hold a mapping.
    """
    if path is None:
        return {}
    values = yaml.safe_load(Path(path).read_text())
    if values is None:
        return {}
    if not isinstance(values, dict):
        raise exceptions.ConfigError(f"config: {path} does not hold a mapping of field names")
    return values


# ---- commands ---- #
def simulate(config: RunConfig) -> pd.DataFrame:
    """Run the trials of every sweep point. One row per point, columns in summary order."""
    rows = []
    with concurrent.futures.ThreadPoolExecutor(config.threads) as executor:
        for K, channel in config.points():
            protocol = Protocol(
                K=K,
                channel=channel,
                epsilon=config.epsilon,
                rule=config.rule,
                d_max=config.d_max,
                feedback_mode=config.feedback_mode,
            )
            records = Runner(protocol, config.trials, config.master_seed, executor=executor).run()
            stats = aggregate(records, K)
            rows.append(summary_row(protocol, stats, compute_bounds(K, channel, config.epsilon)))
            LOGGER.info(f"simulate K={K} p={channel.p:.6g}: rate {stats.rate:.4f}, fer {stats.fer:.2e}")
    return pd.DataFrame(rows, columns=list(SUMMARY_COLUMNS))


def bounds(config: RunConfig) -> pd.DataFrame:
    """Evaluate the bounds at every sweep point."""
    rows = [compute_bounds(K, channel, config.epsilon).row() for K, channel in config.points()]
    LOGGER.info(f"bounds: {len(rows)} points")
    return pd.DataFrame(rows)


def verify(config: RunConfig) -> list[CheckResult]:
    """Run the selected checks, all registered ones by default, in registry order."""
    names = config.checks or tuple(Checks().names)
    return [
        run_check(name, trials=config.trials, seed=config.master_seed, Dmax=config.d_max)
        for name in Checks().names
        if name in names
    ]


def _write_csv(frame: pd.DataFrame, output: str | None) -> None:
    if output is None:
        frame.to_csv(sys.stdout, index=False)
    else:
        frame.to_csv(output, index=False)
        LOGGER.info(f"wrote {len(frame)} rows to {output}")


# ---- entry point ---- #
def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML file whose keys are RunConfig field names.")
    common.add_argument("--K", help="Message sizes, e.g. 16,32,64 or 1..512.")
    channel = common.add_mutually_exclusive_group()
    channel.add_argument("--p", help="Crossover probabilities, e.g. 0.11 or 0.05,0.1,...,0.3.")
    channel.add_argument("--capacity", help="Capacities, resolved to crossover probabilities.")
    common.add_argument("--epsilon", type=float, help="Stopping parameter, 0 < epsilon < 0.5.")
    common.add_argument("--trials", type=int, help="Trials per point, or instances per check.")
    common.add_argument("--seed", dest="master_seed", type=int, help="Master seed.")
    common.add_argument("--dmax", dest="d_max", type=int, help="Largest block size, 1 to 24.")
    common.add_argument("--rule", help=f"Partition rule, one of {Rules().names}.")
    common.add_argument("--feedback", dest="feedback_mode", help=f"One of {FEEDBACK_MODES}.")
    common.add_argument("--output", help="CSV path. Defaults to stdout.")
    common.add_argument("--threads", type=int, help="Worker threads for the trials.")
    common.add_argument(
        "--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"]
    )

    parser = argparse.ArgumentParser(
        prog="sparsepm", description="Posterior matching over a BSC with sparse feedback."
    )
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("simulate", parents=[common], help="Monte Carlo sweep, one CSV row per point.")
    commands.add_parser("bounds", parents=[common], help="Closed-form bounds, one CSV row per point.")
    check = commands.add_parser("verify", parents=[common], help="Run the numerical checks.")
    check.add_argument("--checks", help=f"Comma list of checks to run, from {Checks().names}.")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Run one command and return the exit status: 0 on success, 1 on failure, 2 on a config error."""
    args = vars(_parser().parse_args(argv))
    command = args.pop("command")
    logging.basicConfig(
        level=args.pop("log_level"), format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )

    try:
        file_values = load_config_file(args.pop("config"))
        config = RunConfig.from_sources(command, file_values, **args)
        if command == "verify":
            results = verify(config)
            print(tabulate.tabulate([r.row() for r in results], headers="keys"))
            return 0 if all(r.passed for r in results) else 1
        frame = simulate(config) if command == "simulate" else bounds(config)
        _write_csv(frame, config.output)
    except exceptions.ConfigError as err:
        LOGGER.error(f"invalid configuration: {err}")
        return 2
    except Exception as err:
        LOGGER.error(f"{command} failed: {type(err).__name__}: {err}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

# -*- coding: UTF-8 -*-
"""Registries of run defaults, partition rules and numerical checks.

.. autosummary::

    Checks
    Defaults
    Rules

----
"""
import importlib.resources
import logging

import attrs
import yaml

from . import exceptions

LOGGER = logging.getLogger(__name__)
PACKAGE_DIR = importlib.resources.files(__package__)
DEFAULTS_MANIFEST = yaml.safe_load((PACKAGE_DIR / "registry_manifests/defaults.yml").read_text())
RULES_MANIFEST = yaml.safe_load((PACKAGE_DIR / "registry_manifests/rules.yml").read_text())
CHECKS_MANIFEST = yaml.safe_load((PACKAGE_DIR / "registry_manifests/checks.yml").read_text())


@attrs.define(frozen=True)
class Defaults:
    """Registry of run defaults.

    Examples:

        .. code-block:: python

            # Default stopping threshold offset.
            sparsepm.Defaults().get("epsilon")

            # View all defaults.
            sparsepm.Defaults().manifest

    ----
    """

    @staticmethod
    def get(name: str):
        """Return the default value of `name`.

        Raises:
            ConfigError:
                If `name` has no registered default.
        """
        try:
            return DEFAULTS_MANIFEST[name]
        except KeyError:
            raise exceptions.ConfigError(
                f"{name} has no default. For valid names, see `sparsepm.Defaults().manifest`."
            )

    @property
    def manifest(self) -> dict:
        """Dict of all registered defaults."""
        return DEFAULTS_MANIFEST


@attrs.define(frozen=True)
class Rules:
    """Registry of partition rules.

    Examples:

        .. code-block:: python

            # View list of registered rule names.
            sparsepm.Rules().names

            # Look up a rule.
            rule = sparsepm.Rules().get("wmad-lookahead")

    ----
    """

    @staticmethod
    def get(name: str) -> dict:
        """Return the registration of the rule named `name`.

        Returns:
            dict:
                With keys `name`, `description`, `builder` (function name in
                :mod:`sparsepm.partition`) and `lookahead`.

        Raises:
            ConfigError:
                If no rule named `name` is registered.
        """
        for mft_rule in RULES_MANIFEST:
            if mft_rule["name"] == name:
                return mft_rule
        raise exceptions.ConfigError(
            f"rule {name!r} not found. For valid names, see `sparsepm.Rules().names`."
        )

    @property
    def names(self) -> list[str]:
        """Names of all registered rules."""
        return [rule["name"] for rule in RULES_MANIFEST]

    @property
    def manifest(self) -> list[dict]:
        """List of dicts containing the registration information of all rules."""
        return RULES_MANIFEST


@attrs.define(frozen=True)
class Checks:
    """Registry of numerical checks run by ``sparsepm verify``.

    ----
    """

    @staticmethod
    def get(name: str) -> dict:
        """Return the registration of the check named `name`.

        Raises:
            ConfigError:
                If no check named `name` is registered.
        """
        for mft_check in CHECKS_MANIFEST:
            if mft_check["name"] == name:
                return mft_check
        raise exceptions.ConfigError(
            f"check {name!r} not found. For valid names, see `sparsepm.Checks().names`."
        )

    @property
    def names(self) -> list[str]:
        """Names of all registered checks, in run order."""
        return [check["name"] for check in CHECKS_MANIFEST]

    @property
    def manifest(self) -> list[dict]:
        """List of dicts containing the registration information of all checks."""
        return CHECKS_MANIFEST

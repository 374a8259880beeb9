# -*- coding: UTF-8 -*-
"""Classes and functions to support working with bit words and block labels.

.. autosummary::

    Cast
    hamming
    label_bit
    trial_rng

----
"""
import logging
from typing import Iterable, Sequence

import attrs
import numpy as np

LOGGER = logging.getLogger(__name__)

Bits = tuple[int, ...]


@attrs.define
class Cast:
    """Methods to convert bit words between representations.

    A bit word is a tuple of 0/1 ints. The first element is the most significant bit, which is also
    the first bit put on the channel.
    """

    @staticmethod
    def to_bits(bits: Iterable[int]) -> Bits:
        """Convert any iterable of 0/1 values to a bit word.

        Raises:
            ValueError:
                If any element is not 0 or 1.
        """
        word = tuple(int(b) for b in bits)
        if any(b not in (0, 1) for b in word):
            raise ValueError(f"not a bit word: {word}")
        return word

    @staticmethod
    def bits_to_str(bits: Sequence[int]) -> str:
        """Render a bit word as a 0/1 string, e.g. ``(1, 0, 1) -> "101"``."""
        return "".join(str(int(b)) for b in bits)

    @staticmethod
    def str_to_bits(text: str) -> Bits:
        """Parse a 0/1 string into a bit word.

        Raises:
            ValueError:
                If `text` contains anything other than 0 and 1.
        """
        if any(ch not in "01" for ch in text):
            raise ValueError(f"not a bit string: {text!r}")
        return tuple(int(ch) for ch in text)

    @staticmethod
    def bits_to_int(bits: Sequence[int]) -> int:
        """Interpret a bit word as an unsigned integer, most significant bit first."""
        value = 0
        for b in bits:
            value = (value << 1) | int(b)
        return value

    @staticmethod
    def int_to_bits(value: int, width: int) -> Bits:
        """Write the unsigned integer `value` as a bit word of length `width`.

        Raises:
            ValueError:
                If `value` does not fit in `width` bits.
        """
        if value < 0 or value >> width:
            raise ValueError(f"{value} does not fit in {width} bits")
        return tuple((value >> (width - 1 - i)) & 1 for i in range(width))


def hamming(a: Sequence[int], b: Sequence[int]) -> int:
    """Hamming distance between two bit words of equal length."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} != {len(b)}")
    return sum(x != y for x, y in zip(a, b))


def label_bit(label: int, j: int, D: int) -> int:
    """Bit `j` (0-based, transmission order) of the `D`-bit label of bin `label`."""
    return (label >> (D - 1 - j)) & 1


def trial_rng(master_seed: int, index: int) -> np.random.Generator:
    """Random generator of trial (or instance) `index`, independent of how trials are scheduled."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))

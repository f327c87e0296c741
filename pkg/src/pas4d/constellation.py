"""M-ASK alphabets, the 4D product constellation and its BRGC labeling.

Points live on the odd-integer grid (levels -(M-1), ..., -1, +1, ..., M-1);
scaling to a given average power happens only in :mod:`pas4d.channel`.

The 4D label is the concatenation of four per-dimension BRGC words, each
``log2(M)`` bits wide, dimension 1 first and MSB first.  Within a dimension
the MSB is the sign bit (0 = positive, 1 = negative) and the remaining bits
depend only on the amplitude.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

NDIM = 4


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def brgc(width: int) -> np.ndarray:
    """Binary reflected Gray code of the given width.

    Entry ``i`` is ``i ^ (i >> 1)``; consecutive entries differ in one bit.
    """
    if width < 1:
        raise ValueError("width must be >= 1")
    i = np.arange(1 << width, dtype=np.int64)
    return i ^ (i >> 1)


def int_to_bits(values, width: int) -> np.ndarray:
    """Unpack integers into MSB-first bit arrays of shape ``(..., width)``."""
    values = np.asarray(values, dtype=np.int64)
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((values[..., None] >> shifts) & 1).astype(np.uint8)


def bits_to_int(bits) -> int:
    """Pack an MSB-first bit sequence into a Python int."""
    out = 0
    for b in bits:
        b = int(b)
        if b not in (0, 1):
            raise ValueError(f"not a bit: {b!r}")
        out = (out << 1) | b
    return out


@dataclass(frozen=True)
class AskAlphabet:
    """Symmetric M-ASK on the odd-integer grid."""

    M: int

    def __post_init__(self):
        if not isinstance(self.M, (int, np.integer)) or not _is_pow2(int(self.M)) or self.M < 4:
            raise ValueError(f"M must be a power of two >= 4, got {self.M!r}")

    @property
    def bits_per_dim(self) -> int:
        return int(self.M).bit_length() - 1

    @cached_property
    def levels(self) -> np.ndarray:
        return np.arange(-(self.M - 1), self.M, 2, dtype=np.int64)

    @cached_property
    def amplitudes(self) -> np.ndarray:
        """Positive half ``{1, 3, ..., M-1}``."""
        return np.arange(1, self.M, 2, dtype=np.int64)

    @property
    def n_amp(self) -> int:
        return self.M // 2

    def level_index(self, level):
        """Index of a signed level in ``levels`` (vectorized, validates)."""
        level = np.asarray(level, dtype=np.int64)
        if np.any(level % 2 == 0) or np.any(np.abs(level) >= self.M):
            raise ValueError("coordinate is not on the ASK grid")
        return (level + self.M - 1) // 2

    def amp_index(self, amp):
        """Index of a positive amplitude in ``amplitudes`` (vectorized, validates)."""
        amp = np.asarray(amp, dtype=np.int64)
        if np.any(amp <= 0) or np.any(amp % 2 == 0) or np.any(amp >= self.M):
            raise ValueError("not a positive ASK amplitude")
        return (amp - 1) // 2


def build_ask(M: int) -> AskAlphabet:
    return AskAlphabet(M)


@dataclass(frozen=True)
class Labeling4D:
    """Per-dimension BRGC product labeling of the M^4 grid."""

    ask: AskAlphabet
    # label word of each level index (ascending levels)
    label_of_level: np.ndarray = field(init=False, repr=False, compare=False)
    level_of_label: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        b = self.ask.bits_per_dim
        # gray(M-1-i) == gray(i) with the MSB inverted: MSB set <=> negative level
        lab = brgc(b)[::-1].copy()
        inv = np.empty_like(lab)
        inv[lab] = np.arange(lab.size)
        lab.setflags(write=False)
        inv.setflags(write=False)
        object.__setattr__(self, "label_of_level", lab)
        object.__setattr__(self, "level_of_label", inv)

    @property
    def bits_per_dim(self) -> int:
        return self.ask.bits_per_dim

    @property
    def m(self) -> int:
        return NDIM * self.bits_per_dim

    @property
    def m_Q(self) -> int:
        return self.m - NDIM

    @property
    def m_S(self) -> int:
        return NDIM

    @property
    def sign_positions(self) -> tuple[int, ...]:
        b = self.bits_per_dim
        return tuple(d * b for d in range(NDIM))

    @property
    def amplitude_positions(self) -> tuple[int, ...]:
        sign = set(self.sign_positions)
        return tuple(j for j in range(self.m) if j not in sign)

    @cached_property
    def level_bits(self) -> np.ndarray:
        """``(M, bits_per_dim)`` label bits of each level index."""
        return int_to_bits(self.label_of_level, self.bits_per_dim)

    def label_to_point(self, label) -> np.ndarray:
        """Map an m-bit label (int or MSB-first bit sequence) to a 4D point."""
        if not isinstance(label, (int, np.integer)):
            bits = np.asarray(label).ravel()
            if bits.size != self.m:
                raise ValueError(f"expected {self.m} bits, got {bits.size}")
            label = bits_to_int(bits)
        label = int(label)
        if not 0 <= label < (1 << self.m):
            raise ValueError("label out of range")
        b = self.bits_per_dim
        mask = (1 << b) - 1
        words = [(label >> (b * (NDIM - 1 - d))) & mask for d in range(NDIM)]
        return self.ask.levels[self.level_of_label[words]]

    def point_to_label(self, point) -> int:
        point = np.asarray(point, dtype=np.int64).ravel()
        if point.size != NDIM:
            raise ValueError("a 4D point needs four coordinates")
        idx = self.ask.level_index(point)
        b = self.bits_per_dim
        label = 0
        for d in range(NDIM):
            label = (label << b) | int(self.label_of_level[idx[d]])
        return label

    def point_to_bits(self, point) -> np.ndarray:
        return int_to_bits(self.point_to_label(point), self.m)


def build_labeling(ask: AskAlphabet) -> Labeling4D:
    return Labeling4D(ask)


def tuple_energy(tuples) -> np.ndarray:
    t = np.asarray(tuples, dtype=np.int64)
    return np.sum(t * t, axis=-1)


def quadrant_enumerate(ask: AskAlphabet) -> np.ndarray:
    """All positive amplitude 4-tuples, sorted by energy then lexicographically.

    Returns an int array of shape ``((M/2)**4, 4)``.
    """
    a = ask.amplitudes
    grid = np.stack(np.meshgrid(a, a, a, a, indexing="ij"), axis=-1).reshape(-1, NDIM)
    # meshgrid with 'ij' is already lexicographic; a stable sort keeps that within ties
    order = np.argsort(tuple_energy(grid), kind="stable")
    out = grid[order]
    out.setflags(write=False)
    return out

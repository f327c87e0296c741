"""Look-up-table distribution matcher over a 4D quadrant, and shaped sources.

The LUT maps a k-bit word (natural binary of the table position) to one of the
``2**k`` lowest-energy positive amplitude 4-tuples.  Together with four uniform
sign bits this yields the shaped constellation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional

import numpy as np

from .constellation import (
    NDIM,
    AskAlphabet,
    Labeling4D,
    bits_to_int,
    build_labeling,
    int_to_bits,
    quadrant_enumerate,
    tuple_energy,
)


def _entropy_bits(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


@dataclass(frozen=True, eq=False)
class ShapedSource:
    """Sign-symmetric 4D source: a law on positive amplitude tuples times
    four independent uniform sign bits.

    ``tuples`` holds amplitudes in grid units, ``pmf`` their probabilities.
    ``amp_pmf_1d`` is set when the tuple law is an i.i.d. product over the four
    dimensions (used for factorized fast paths).  ``scale`` maps grid units to
    channel units; see :func:`pas4d.channel.normalize`.
    """

    ask: AskAlphabet
    tuples: np.ndarray
    pmf: np.ndarray
    name: str = "source"
    amp_pmf_1d: Optional[np.ndarray] = None
    scale: float = 1.0

    def __post_init__(self):
        t = np.asarray(self.tuples, dtype=np.int64).reshape(-1, NDIM)
        p = np.asarray(self.pmf, dtype=np.float64).ravel()
        if t.shape[0] != p.size:
            raise ValueError("tuples and pmf lengths differ")
        self.ask.amp_index(t)  # validates
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("pmf must be nonnegative and sum to 1")
        keep = p > 0
        t, p = t[keep], p[keep]
        if len({tuple(r) for r in t}) != len(t):
            raise ValueError("duplicate amplitude tuples")
        t.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "tuples", t)
        object.__setattr__(self, "pmf", p)

    @property
    def labeling(self) -> Labeling4D:
        return build_labeling(self.ask)

    @property
    def n_tuples(self) -> int:
        return self.tuples.shape[0]

    @property
    def size(self) -> int:
        """|X|, the number of signed 4D points with nonzero probability."""
        return self.n_tuples << NDIM

    @cached_property
    def entropy(self) -> float:
        """H(X) in bits per 4D symbol."""
        return _entropy_bits(self.pmf) + NDIM

    @cached_property
    def mean_energy(self) -> float:
        """E||x||^2 in grid units squared."""
        return float(np.dot(self.pmf, tuple_energy(self.tuples)))

    @property
    def is_product(self) -> bool:
        return self.amp_pmf_1d is not None

    @property
    def is_full_grid(self) -> bool:
        return self.n_tuples == self.ask.n_amp**NDIM

    @cached_property
    def amp_idx(self) -> np.ndarray:
        """Tuples as amplitude indices, int32 ``(T, 4)``."""
        return np.ascontiguousarray(self.ask.amp_index(self.tuples), dtype=np.int32)

    @cached_property
    def _code_lookup(self) -> np.ndarray:
        A = self.ask.n_amp
        lut = np.full(A**NDIM, -1, dtype=np.int64)
        lut[self._codes(self.amp_idx)] = np.arange(self.n_tuples)
        return lut

    def _codes(self, amp_idx) -> np.ndarray:
        A = self.ask.n_amp
        amp_idx = np.asarray(amp_idx, dtype=np.int64)
        return ((amp_idx[..., 0] * A + amp_idx[..., 1]) * A + amp_idx[..., 2]) * A + amp_idx[..., 3]

    def tuple_index(self, tuples) -> np.ndarray:
        """Row index of each amplitude tuple; raises if any is outside the support."""
        idx = self._code_lookup[self._codes(self.ask.amp_index(tuples))]
        if np.any(idx < 0):
            raise ValueError("amplitude tuple not in source support")
        return idx

    def marginal_1d(self) -> np.ndarray:
        """``(4, M/2)`` per-dimension amplitude marginals."""
        A = self.ask.n_amp
        out = np.zeros((NDIM, A))
        for d in range(NDIM):
            np.add.at(out[d], self.amp_idx[:, d], self.pmf)
        return out

    def marginal_2d(self) -> np.ndarray:
        """``(2, M/2, M/2)`` amplitude-pair marginals of the two 2D slices."""
        A = self.ask.n_amp
        out = np.zeros((2, A, A))
        for s in range(2):
            np.add.at(out[s], (self.amp_idx[:, 2 * s], self.amp_idx[:, 2 * s + 1]), self.pmf)
        return out

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """Enumerate the constellation: ``(|X|, 4)`` signed points and their pmf."""
        signs = 1 - 2 * int_to_bits(np.arange(1 << NDIM), NDIM).astype(np.int64)
        pts = (self.tuples[:, None, :] * signs[None, :, :]).reshape(-1, NDIM)
        pmf = np.repeat(self.pmf / (1 << NDIM), 1 << NDIM)
        return pts, pmf

    def scaled(self, scale: float) -> "ShapedSource":
        return replace(self, scale=float(scale))


@dataclass(frozen=True, eq=False)
class LutDm:
    ask: AskAlphabet
    k: int
    table: np.ndarray = field(repr=False)
    inverse: dict = field(repr=False)

    @property
    def size(self) -> int:
        return 1 << self.k

    def encode(self, bits) -> tuple[int, ...]:
        return lut_encode(self, bits)

    def decode(self, t) -> np.ndarray:
        return lut_decode(self, t)


def build_lut(ask: AskAlphabet, k: int) -> LutDm:
    m_Q = build_labeling(ask).m_Q
    if not 1 <= k <= m_Q:
        raise ValueError(f"k must lie in 1..{m_Q} for M={ask.M}, got {k}")
    table = quadrant_enumerate(ask)[: 1 << k].copy()
    table.setflags(write=False)
    inverse = {tuple(int(v) for v in row): i for i, row in enumerate(table)}
    return LutDm(ask, k, table, inverse)


def lut_encode(dm: LutDm, bits) -> tuple[int, ...]:
    bits = np.asarray(bits).ravel()
    if bits.size != dm.k:
        raise ValueError(f"expected {dm.k} bits, got {bits.size}")
    return tuple(int(v) for v in dm.table[bits_to_int(bits)])


def lut_decode(dm: LutDm, t) -> np.ndarray:
    key = tuple(int(v) for v in np.asarray(t).ravel())
    try:
        index = dm.inverse[key]
    except KeyError:
        raise ValueError(f"amplitude tuple {key} is not in the LUT") from None
    return int_to_bits(index, dm.k)


def lut_source(dm: LutDm) -> ShapedSource:
    T = dm.size
    name = f"PAS-4D(M={dm.ask.M},k={dm.k})"
    src = ShapedSource(dm.ask, dm.table, np.full(T, 1.0 / T), name=name)
    if dm.k == build_labeling(dm.ask).m_Q:
        # full quadrant: uniform i.i.d. per dimension
        src = replace(src, amp_pmf_1d=np.full(dm.ask.n_amp, 1.0 / dm.ask.n_amp))
    return src


def product_source(ask: AskAlphabet, amp_pmf: np.ndarray, name: str = "product") -> ShapedSource:
    """i.i.d. amplitude law per dimension (uniform QAM, Maxwell-Boltzmann, ...)."""
    amp_pmf = np.asarray(amp_pmf, dtype=np.float64)
    if amp_pmf.shape != (ask.n_amp,):
        raise ValueError("amplitude pmf must have M/2 entries")
    tuples = quadrant_enumerate(ask)
    idx = ask.amp_index(tuples)
    pmf = np.prod(amp_pmf[idx], axis=1)
    pmf = pmf / pmf.sum()
    keep = pmf > 0
    return ShapedSource(ask, tuples[keep], pmf[keep], name=name, amp_pmf_1d=amp_pmf)


def uniform_source(ask: AskAlphabet) -> ShapedSource:
    """Uniform M^2-QAM in both 2D slices."""
    return product_source(ask, np.full(ask.n_amp, 1.0 / ask.n_amp), name=f"UNIFORM-{ask.M**2}QAM")


def write_lut_csv(dm: LutDm, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "a1", "a2", "a3", "a4", "energy"])
        for i, row in enumerate(dm.table):
            w.writerow([i, *(int(v) for v in row), int(tuple_energy(row))])

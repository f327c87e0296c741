"""Maxwell-Boltzmann amplitude laws and constant composition distribution matching.

The CCDM is an exact arithmetic coder: the interval of every prefix is kept as
an integer count of multiset permutations, so no finite-precision gap handling
is needed.  Sub-intervals are ordered by ascending amplitude, which makes the
map from input integers to sequences the lexicographic ranking of the type
class.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .constellation import AskAlphabet


@dataclass(frozen=True, eq=False)
class MbDistribution:
    ask: AskAlphabet
    nu: float
    pmf: np.ndarray

    @property
    def support(self) -> np.ndarray:
        return self.ask.amplitudes

    @property
    def entropy(self) -> float:
        p = self.pmf[self.pmf > 0]
        return float(-np.sum(p * np.log2(p)))


def _mb_probs(amps: np.ndarray, nu: float) -> np.ndarray:
    e = amps.astype(np.float64) ** 2
    logits = -nu * (e - e[0])
    p = np.exp(logits)
    return p / p.sum()


def mb_pmf(ask: AskAlphabet, nu: float) -> MbDistribution:
    if not nu >= 0:
        raise ValueError(f"nu must be >= 0, got {nu}")
    return MbDistribution(ask, float(nu), _mb_probs(ask.amplitudes, nu))


def fit_mb_entropy(ask: AskAlphabet, target_H: float, tol: float = 1e-12) -> float:
    """Find the MB parameter whose amplitude entropy equals ``target_H`` bits."""
    h_max = math.log2(ask.n_amp)
    if not 0 < target_H <= h_max:
        raise ValueError(f"target entropy must lie in (0, {h_max}], got {target_H}")

    def H(nu):
        return mb_pmf(ask, nu).entropy

    if H(0.0) - target_H <= 1e-12:
        return 0.0
    lo, hi = 0.0, 1e-3
    while H(hi) > target_H:
        lo, hi = hi, hi * 2
        if hi > 1e6:
            raise ValueError("target entropy too small to fit")
    # entropy is strictly decreasing in nu
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if H(mid) > target_H:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class Composition:
    """Counts per positive amplitude (ascending), over a block of ``n`` symbols."""

    ask: AskAlphabet
    counts: tuple[int, ...]

    def __post_init__(self):
        c = tuple(int(v) for v in self.counts)
        if len(c) != self.ask.n_amp or any(v < 0 for v in c) or sum(c) == 0:
            raise ValueError("invalid composition")
        object.__setattr__(self, "counts", c)

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def pmf(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=np.float64) / self.n

    @property
    def entropy(self) -> float:
        p = self.pmf[self.pmf > 0]
        return float(-np.sum(p * np.log2(p)))

    def as_dict(self) -> dict[int, int]:
        return {int(a): c for a, c in zip(self.ask.amplitudes, self.counts)}


def quantize_composition(pmf: MbDistribution | np.ndarray, n: int, ask: AskAlphabet | None = None) -> Composition:
    """Largest-remainder n-type approximation; ties go to the smaller amplitude."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(pmf, MbDistribution):
        ask, p = pmf.ask, pmf.pmf
    else:
        if ask is None:
            raise ValueError("ask is required with a bare pmf")
        p = np.asarray(pmf, dtype=np.float64)
    # round away float noise like 0.3*10 = 3.0000000000000004
    target = np.round(n * p, 9)
    counts = np.floor(target).astype(np.int64)
    frac = target - counts
    rest = n - int(counts.sum())
    order = sorted(range(len(p)), key=lambda i: (-frac[i], i))
    for i in order[:rest]:
        counts[i] += 1
    return Composition(ask, tuple(int(c) for c in counts))


def _bits_to_bigint(bits: np.ndarray) -> int:
    if bits.size and not np.all((bits == 0) | (bits == 1)):
        raise ValueError("input must be a 0/1 array")
    return int("".join("1" if b else "0" for b in bits) or "0", 2)


def _bigint_to_bits(value: int, width: int) -> np.ndarray:
    if width == 0:
        return np.zeros(0, dtype=np.uint8)
    s = format(value, "b").zfill(width)
    return (np.frombuffer(s.encode(), dtype=np.uint8) - ord("0")).astype(np.uint8)


def multinomial(counts) -> int:
    out = math.factorial(sum(counts))
    for c in counts:
        out //= math.factorial(c)
    return out


def ccdm_input_length(c: Composition) -> int:
    """floor(log2 of the type-class size), exact."""
    return multinomial(c.counts).bit_length() - 1


@dataclass(frozen=True, eq=False)
class CcdmCodec:
    composition: Composition

    @cached_property
    def size(self) -> int:
        return multinomial(self.composition.counts)

    @cached_property
    def k_cc(self) -> int:
        return self.size.bit_length() - 1

    @property
    def n(self) -> int:
        return self.composition.n

    @property
    def rate(self) -> float:
        """Input bits per output amplitude."""
        return self.k_cc / self.n

    def encode(self, bits) -> np.ndarray:
        return ccdm_encode(self, bits)

    def decode(self, seq) -> np.ndarray:
        return ccdm_decode(self, seq)


def ccdm_encode(codec: CcdmCodec, bits) -> np.ndarray:
    bits = np.asarray(bits).ravel()
    if bits.size != codec.k_cc:
        raise ValueError(f"expected {codec.k_cc} bits, got {bits.size}")
    index = _bits_to_bigint(bits)
    amps = codec.composition.ask.amplitudes
    counts = list(codec.composition.counts)
    rem = codec.n
    width = codec.size  # sequences consistent with the current prefix
    out = np.empty(codec.n, dtype=np.int64)
    for pos in range(codec.n):
        for j, c in enumerate(counts):
            if c == 0:
                continue
            sub = width * c // rem
            if index < sub:
                out[pos] = amps[j]
                counts[j] -= 1
                width = sub
                break
            index -= sub
        rem -= 1
    return out


def ccdm_decode(codec: CcdmCodec, seq) -> np.ndarray:
    seq = np.asarray(seq, dtype=np.int64).ravel()
    comp = codec.composition
    if seq.size != codec.n:
        raise ValueError(f"expected a block of {codec.n} amplitudes, got {seq.size}")
    try:
        idx = comp.ask.amp_index(seq)
    except ValueError:
        raise ValueError("sequence contains symbols outside the amplitude alphabet") from None
    if tuple(np.bincount(idx, minlength=comp.ask.n_amp)) != comp.counts:
        raise ValueError("sequence does not have the codec's composition")
    counts = list(comp.counts)
    rem = codec.n
    width = codec.size
    index = 0
    for j_sent in idx:
        for j in range(j_sent):
            if counts[j]:
                index += width * counts[j] // rem
        width = width * counts[j_sent] // rem
        counts[j_sent] -= 1
        rem -= 1
    if index >= (1 << codec.k_cc):
        raise ValueError("sequence is in the type class but outside the codebook")
    return _bigint_to_bits(index, codec.k_cc)


def write_composition_csv(c: Composition, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["amplitude", "count"])
        for a, n in c.as_dict().items():
            w.writerow([a, n])

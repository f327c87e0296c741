"""Power normalization, the linear AWGN channel and moment statistics.

SNR convention: Es/N0 per 2D (complex) symbol with unit average 2D energy, so
the noise variance per real dimension is ``1 / (2 * snr_linear)``.  Noise is
drawn from numpy's PCG64 generator (``standard_normal``) seeded through
:func:`pas4d.pas.make_rng`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lut import ShapedSource
from .pas import SymbolStream, make_rng

# E||x||^2 per 4D symbol after normalization: unit energy per 2D slice
TARGET_4D_ENERGY = 2.0


@dataclass(frozen=True)
class SnrSpec:
    snr_db: float

    @property
    def linear(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)

    @property
    def sigma2(self) -> float:
        """Noise variance per real dimension."""
        if math.isinf(self.snr_db) and self.snr_db > 0:
            return 0.0
        return 1.0 / (2.0 * self.linear)


@dataclass(frozen=True, eq=False)
class ReceiveStream:
    y: np.ndarray
    snr: SnrSpec
    seed: int

    def __len__(self) -> int:
        return self.y.shape[0]


def normalize(source: ShapedSource) -> tuple[float, ShapedSource]:
    """Scale factor giving E||x||^2 = 2 per 4D symbol, and the scaled source."""
    e = source.mean_energy
    if not e > 0:
        raise ValueError("source has zero mean energy")
    delta = math.sqrt(TARGET_4D_ENERGY / e)
    return delta, source.scaled(delta)


def normalized(source: ShapedSource) -> ShapedSource:
    return normalize(source)[1]


def check_normalized(source: ShapedSource, tol: float = 1e-9) -> None:
    e = source.mean_energy * source.scale**2
    if abs(e - TARGET_4D_ENERGY) > tol:
        raise ValueError(f"source is not normalized (E||x||^2 = {e:.6g} per 4D, expected 2)")


def add_noise(xs: SymbolStream, snr: SnrSpec, seed: int) -> ReceiveStream:
    check_normalized(xs.source)
    x = xs.normalized()
    s2 = snr.sigma2
    if s2 == 0.0:
        return ReceiveStream(x.astype(np.float64), snr, int(seed))
    z = make_rng(seed).standard_normal(x.shape)
    return ReceiveStream(x + math.sqrt(s2) * z, snr, int(seed))


def _slice_moments(source: ShapedSource) -> tuple[np.ndarray, np.ndarray]:
    t = source.tuples.astype(np.float64) * source.scale
    r2 = np.stack([t[:, 0] ** 2 + t[:, 1] ** 2, t[:, 2] ** 2 + t[:, 3] ** 2], axis=1)
    m2 = source.pmf @ r2
    m4 = source.pmf @ (r2**2)
    return m2, m4


def moment_ratio(source: ShapedSource) -> float:
    """E|x_c|^4 / (E|x_c|^2)^2 per complex slice, averaged over both slices.

    Computed analytically over the pmf; invariant to the scale.
    """
    m2, m4 = _slice_moments(source)
    return float(np.mean(m4 / m2**2))


def sample_moment_ratio(samples) -> float:
    """Empirical counterpart of :func:`moment_ratio` for complex or ``(K, 4)`` real samples."""
    s = np.asarray(samples)
    if np.iscomplexobj(s):
        r2 = np.abs(s) ** 2
        r2 = r2.reshape(r2.shape[0], -1) if r2.ndim > 1 else r2[:, None]
    else:
        s = s.reshape(s.shape[0], -1, 2)
        r2 = np.sum(s**2, axis=-1)
    return float(np.mean(np.mean(r2**2, axis=0) / np.mean(r2, axis=0) ** 2))

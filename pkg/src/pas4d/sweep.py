"""Experiment runner: SNR sweeps, rate-crossing SNRs and sweep configs."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .channel import ReceiveStream, SnrSpec, normalized
from .lut import ShapedSource
from .pas import PasMode, SymbolStream, draw_symbols, make_rng, mode_from_dict
from .rates import ORACLE_MAX_POINTS, achievable_rate, exact_rate_oracle, gaussian_capacity, make_metric

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ["scheme", "M", "k_or_nu", "snr_db", "rate_bits_per_4d", "rate_bpqs", "stderr", "K", "seed"]
MIN_SAMPLES = 1000


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    modes: list[dict]
    start_db: float
    stop_db: float
    step_db: float = 1.0
    samples: int = 100_000
    seed: int = 1
    out: str | None = None
    oracle: bool = False
    capacity: bool = True
    parsed_modes: list[PasMode] = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        try:
            self.start_db, self.stop_db, self.step_db = float(self.start_db), float(self.stop_db), float(self.step_db)
            self.samples, self.seed = int(self.samples), int(self.seed)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        if not self.step_db > 0:
            raise ConfigError("snr step must be > 0")
        if self.stop_db < self.start_db:
            raise ConfigError("snr stop must not be below start")
        if self.samples < MIN_SAMPLES:
            raise ConfigError(f"samples must be >= {MIN_SAMPLES}")
        if not self.modes:
            raise ConfigError("at least one mode is required")
        try:
            self.parsed_modes = [mode_from_dict(m) for m in self.modes]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid mode: {exc}") from exc

    @property
    def snr_grid(self) -> np.ndarray:
        n = int(math.floor((self.stop_db - self.start_db) / self.step_db + 1e-9)) + 1
        return np.round(self.start_db + self.step_db * np.arange(n), 10)

    def to_dict(self) -> dict:
        return {
            "modes": [dict(m) for m in self.modes],
            "snr": {"start_db": self.start_db, "stop_db": self.stop_db, "step_db": self.step_db},
            "samples": self.samples,
            "seed": self.seed,
            "out": self.out,
            "oracle": self.oracle,
            "capacity": self.capacity,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            snr = d["snr"]
            return cls(
                modes=list(d["modes"]),
                start_db=float(snr["start_db"]),
                stop_db=float(snr["stop_db"]),
                step_db=float(snr.get("step_db", 1.0)),
                samples=int(d.get("samples", 100_000)),
                seed=int(d.get("seed", 1)),
                out=d.get("out"),
                oracle=bool(d.get("oracle", False)),
                capacity=bool(d.get("capacity", True)),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed config: {exc!r}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc


def cell_seed(master: int, *key: int) -> int:
    return int(np.random.SeedSequence([master, *key]).generate_state(1)[0])


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def run_sweep(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    grid = cfg.snr_grid
    for mi, mode in enumerate(cfg.parsed_modes):
        src = normalized(mode.source())
        xs = draw_symbols(src, cfg.samples, cell_seed(cfg.seed, mi))
        log.info("mode %s (M=%d, %s): %d points", mode.scheme, mode.M, mode.label, src.size)
        for si, snr_db in enumerate(grid):
            snr = SnrSpec(float(snr_db))
            seed = cell_seed(cfg.seed, mi, si)
            z = make_rng(seed).standard_normal(xs.points.shape)
            ys = ReceiveStream(xs.normalized() + math.sqrt(snr.sigma2) * z, snr, seed)
            est = achievable_rate(xs, ys, make_metric(mode.metric, src, snr.sigma2))
            rows.append(_row(mode.scheme, mode.M, mode.label, snr_db, est.rate, est.stderr, cfg.samples, seed))
            if cfg.oracle:
                if src.is_product or src.size <= ORACLE_MAX_POINTS:
                    r = exact_rate_oracle(src, snr.sigma2, mode.metric)
                    rows.append(_row(f"{mode.scheme}/oracle", mode.M, mode.label, snr_db, r, 0.0, 0, cfg.seed))
                else:
                    log.warning("oracle skipped for %s: %d points", mode.scheme, src.size)
    if cfg.capacity:
        for snr_db in grid:
            c = gaussian_capacity(SnrSpec(float(snr_db)))
            rows.append(_row("GAUSSIAN-CAPACITY", "", "", snr_db, 2 * c, 0.0, 0, cfg.seed))
    return rows


def _row(scheme, M, label, snr_db, rate4d, stderr, K, seed) -> dict:
    return {
        "scheme": scheme,
        "M": M,
        "k_or_nu": label,
        "snr_db": f"{snr_db:.2f}",
        "rate_bits_per_4d": _fmt(rate4d),
        "rate_bpqs": _fmt(rate4d / 2),
        "stderr": _fmt(stderr),
        "K": K,
        "seed": seed,
    }


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


# -- rate crossings ------------------------------------------------------------


class CrnRate:
    """Monte-Carlo rate as a function of SNR with common random numbers.

    Symbols and unit-variance noise are drawn once; every SNR rescales the same
    noise, so the estimate is a smooth deterministic function of the SNR.
    """

    def __init__(self, source: ShapedSource, kind: str, K: int, seed: int):
        self.source = normalized(source) if source.scale == 1.0 else source
        self.kind = kind
        self.xs: SymbolStream = draw_symbols(self.source, K, cell_seed(seed, 0))
        self.z = make_rng(cell_seed(seed, 1)).standard_normal(self.xs.points.shape)
        self._x = self.xs.normalized()

    def __call__(self, snr_db: float):
        snr = SnrSpec(float(snr_db))
        ys = ReceiveStream(self._x + math.sqrt(snr.sigma2) * self.z, snr, 0)
        return achievable_rate(self.xs, ys, make_metric(self.kind, self.source, snr.sigma2))


@dataclass(frozen=True)
class Crossing:
    snr_db: float
    stderr_db: float
    rate_stderr: float
    slope: float  # bits/4D per dB


def snr_at_rate(rate_fn, target_bits_4d: float, lo: float = -5.0, hi: float = 30.0, xtol: float = 1e-4) -> Crossing:
    """SNR (dB) at which ``rate_fn(snr).rate`` reaches ``target_bits_4d``.

    The SNR standard error is the rate standard error divided by the local slope.
    """
    f = lambda s: rate_fn(s).unclipped - target_bits_4d  # noqa: E731
    flo, fhi = f(lo), f(hi)
    if flo > 0 or fhi < 0:
        raise ValueError(f"target {target_bits_4d} bits/4D not bracketed by [{lo}, {hi}] dB")
    s0 = brentq(f, lo, hi, xtol=xtol)
    h = 0.05
    slope = (rate_fn(s0 + h).unclipped - rate_fn(s0 - h).unclipped) / (2 * h)
    se = rate_fn(s0).stderr
    return Crossing(s0, se / slope, se, slope)


def capacity_snr_db(se_bpqs: float) -> float:
    """SNR (dB) at which log2(1 + SNR) equals ``se_bpqs``."""
    return 10 * math.log10(2.0**se_bpqs - 1.0)


def mb_snr_at_rate(ask, target_bits_4d: float, kind: str = "BMD1D", lo: float = -5.0, hi: float = 30.0):
    """Lowest SNR at which some Maxwell-Boltzmann law reaches the target (quadrature).

    Returns ``(snr_db, nu)``.
    """
    from .pas import mb_source

    def snr_for(nu):
        src = normalized(mb_source(ask, nu))
        if src.entropy <= target_bits_4d:
            return hi + (target_bits_4d - src.entropy + 1)
        g = lambda s: exact_rate_oracle(src, SnrSpec(s).sigma2, kind) - target_bits_4d  # noqa: E731
        return brentq(g, lo, hi, xtol=1e-6)

    # nu large enough that the entropy falls below the target bounds the search
    hi_nu = 0.02
    while hi_nu < 5.0 and normalized(mb_source(ask, hi_nu)).entropy > target_bits_4d:
        hi_nu *= 2
    res = minimize_scalar(snr_for, bounds=(0.0, hi_nu), method="bounded", options={"xatol": 1e-6})
    return float(res.fun), float(res.x)

"""PAS rate bookkeeping, transmission modes and symbol drawing.

FEC is not implemented.  The sign bits carry a fraction ``gamma`` of
information bits and ``1 - gamma`` parity bits; parity of a good code is
uniform, so sign bits are drawn i.i.d. uniform.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .ccdm import CcdmCodec, fit_mb_entropy, mb_pmf, quantize_composition
from .constellation import NDIM, AskAlphabet, build_ask, build_labeling, int_to_bits
from .lut import ShapedSource, build_lut, lut_source, product_source, uniform_source

SCHEMES = ("PAS-4D-4D", "PAS-4D-2D", "PAS-nD-1D", "UNIFORM")

# decoding metric each scheme is evaluated with (all BMD, as in the AWGN comparison)
SCHEME_METRIC = {
    "PAS-4D-4D": "BMD4D",
    "PAS-4D-2D": "BMD2D",
    "PAS-nD-1D": "BMD1D",
    "UNIFORM": "BMD1D",
}

CCDM_BLOCK = 6000


def as_fraction(rc) -> Fraction:
    if isinstance(rc, str):
        return Fraction(rc.strip())
    if isinstance(rc, float):
        return Fraction(rc).limit_denominator(1 << 16)
    return Fraction(rc)


def gamma(Rc, M: int) -> float:
    """Fraction of sign bits that carry information for code rate ``Rc``."""
    Rc = as_fraction(Rc)
    if not 0 < Rc <= 1:
        raise ValueError(f"code rate must lie in (0, 1], got {Rc}")
    bits = build_ask(M).bits_per_dim
    g = 1 - (1 - Rc) * bits
    if g < 0:
        raise ValueError(f"Rc={Rc} is too low for M={M}: sign bits cannot absorb the parity (gamma={float(g)})")
    return float(g)


def se_of_k(k: int, M: int, Rc) -> float:
    """SE in bpQs of the PAS-4D mode with DM rate k."""
    return k / 2 + 2 * gamma(Rc, M)


def se_set(M: int, Rc) -> list[float]:
    m_Q = build_labeling(build_ask(M)).m_Q
    g = gamma(Rc, M)
    return [k / 2 + 2 * g for k in range(1, m_Q + 1)]


def mode_from_target_se(target: float, M: int, Rc) -> int:
    g = gamma(Rc, M)
    m_Q = build_labeling(build_ask(M)).m_Q
    k_real = 2 * (target - 2 * g)
    k = round(k_real)
    if abs(k_real - k) > 1e-9 or not 1 <= k <= m_Q:
        achievable = se_set(M, Rc)
        nearest = sorted(achievable, key=lambda s: (abs(s - target), s))[:2]
        raise ValueError(
            f"SE {target} bpQs is not achievable with M={M}, Rc={as_fraction(Rc)}; "
            f"nearest achievable: {sorted(nearest)}"
        )
    return k


@dataclass(frozen=True)
class PasMode:
    scheme: str
    M: int
    Rc: Fraction
    k: Optional[int] = None
    nu: Optional[float] = None
    n: Optional[int] = None
    # DM rate per dimension for PAS-nD-1D (k_cc / n)
    h_amp: Optional[float] = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        object.__setattr__(self, "Rc", as_fraction(self.Rc))
        build_ask(self.M)
        if self.scheme.startswith("PAS-4D"):
            if self.k is None:
                raise ValueError(f"{self.scheme} needs k")
            build_lut(build_ask(self.M), self.k)
        if self.scheme != "UNIFORM":
            gamma(self.Rc, self.M)
        if self.scheme == "PAS-nD-1D" and (self.nu is None or self.n is None):
            raise ValueError("PAS-nD-1D needs nu and n")

    @property
    def gamma(self) -> float:
        if self.scheme == "UNIFORM":
            return float("nan")
        return gamma(self.Rc, self.M)

    @property
    def R_tx(self) -> float:
        """Transmission rate in bits per 4D symbol."""
        if self.scheme.startswith("PAS-4D"):
            return self.k + NDIM * self.gamma
        if self.scheme == "PAS-nD-1D":
            return NDIM * (self.h_amp + self.gamma)
        return 2 * float(self.Rc) * 2 * build_ask(self.M).bits_per_dim

    @property
    def SE(self) -> float:
        return self.R_tx / 2

    @property
    def metric(self) -> str:
        return SCHEME_METRIC[self.scheme]

    @property
    def label(self) -> str:
        if self.scheme.startswith("PAS-4D"):
            return str(self.k)
        if self.scheme == "PAS-nD-1D":
            return f"{self.nu:.6g}"
        return ""

    def source(self) -> ShapedSource:
        ask = build_ask(self.M)
        if self.scheme.startswith("PAS-4D"):
            return lut_source(build_lut(ask, self.k))
        if self.scheme == "PAS-nD-1D":
            return mb_source(ask, self.nu)
        return uniform_source(ask)

    def to_dict(self) -> dict:
        d = {"scheme": self.scheme, "M": self.M, "Rc": str(self.Rc)}
        for key in ("k", "nu", "n"):
            v = getattr(self, key)
            if v is not None:
                d[key] = v
        return d


def mb_source(ask: AskAlphabet, nu: float) -> ShapedSource:
    mb = mb_pmf(ask, nu)
    return product_source(ask, mb.pmf, name=f"MB(M={ask.M},nu={nu:.6g})")


def pas4d_mode(M: int, k: int, Rc, two_d: bool = False) -> PasMode:
    return PasMode("PAS-4D-2D" if two_d else "PAS-4D-4D", M, as_fraction(Rc), k=k)


def pasnd_mode(M: int, Rc, nu: float | None = None, target_H: float | None = None, n: int = CCDM_BLOCK) -> PasMode:
    """PAS-nD-1D mode: MB law (given by ``nu`` or an amplitude entropy) and a CCDM of length n."""
    ask = build_ask(M)
    if (nu is None) == (target_H is None):
        raise ValueError("give exactly one of nu and target_H")
    if nu is None:
        nu = fit_mb_entropy(ask, target_H)
    comp = quantize_composition(mb_pmf(ask, nu), n)
    h_amp = CcdmCodec(comp).rate
    return PasMode("PAS-nD-1D", M, as_fraction(Rc), nu=float(nu), n=n, h_amp=h_amp)


def uniform_qam_mode(bits_per_2d: int, target_se: float) -> PasMode:
    """Uniform QAM and the code rate it would need to hit ``target_se`` bpQs."""
    if bits_per_2d % 2 or bits_per_2d < 4:
        raise ValueError("square QAM with M >= 4 per dimension needs an even bits_per_2d >= 4")
    if not 0 < target_se < bits_per_2d:
        raise ValueError(f"target SE must lie in (0, {bits_per_2d}) bpQs")
    Rc = Fraction(target_se).limit_denominator(1 << 16) / bits_per_2d
    return PasMode("UNIFORM", 1 << (bits_per_2d // 2), Rc)


def mode_from_dict(d: dict) -> PasMode:
    d = dict(d)
    scheme = d.pop("scheme")
    M = int(d.pop("M"))
    if scheme.startswith("PAS-4D"):
        Rc = d.pop("Rc", "13/16")
        if "k" in d:
            k = int(d.pop("k"))
        else:
            k = mode_from_target_se(float(d.pop("target_se")), M, Rc)
        mode = pas4d_mode(M, k, Rc, two_d=scheme == "PAS-4D-2D")
    elif scheme == "PAS-nD-1D":
        mode = pasnd_mode(
            M,
            d.pop("Rc", "13/16"),
            nu=d.pop("nu", None),
            target_H=d.pop("target_H", None),
            n=int(d.pop("n", CCDM_BLOCK)),
        )
    elif scheme == "UNIFORM":
        Rc = d.pop("Rc", None)
        bits = 2 * build_ask(M).bits_per_dim
        if Rc is None:
            mode = uniform_qam_mode(bits, float(d.pop("target_se")))
        else:
            mode = PasMode("UNIFORM", M, as_fraction(Rc))
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    d.pop("target_se", None)
    if d:
        raise ValueError(f"unexpected mode keys: {sorted(d)}")
    return mode


@dataclass(frozen=True, eq=False)
class SymbolStream:
    """Drawn 4D symbols in grid units, with the tuple index of each draw."""

    points: np.ndarray
    tuple_idx: np.ndarray
    source: ShapedSource
    seed: int

    def __len__(self) -> int:
        return self.points.shape[0]

    def normalized(self) -> np.ndarray:
        return self.points * self.source.scale


def make_rng(*key: int) -> np.random.Generator:
    """PCG64 generator seeded from ``SeedSequence(key)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(v) for v in key])))


def draw_symbols(source: ShapedSource, K: int, seed: int) -> SymbolStream:
    if K < 1:
        raise ValueError("K must be >= 1")
    rng = make_rng(seed)
    T = source.n_tuples
    if np.all(source.pmf == source.pmf[0]):
        # uniform k-bit DM words (LUT index in natural binary)
        idx = rng.integers(0, T, size=K)
    else:
        idx = rng.choice(T, size=K, p=source.pmf)
    signs = 1 - 2 * int_to_bits(rng.integers(0, 1 << NDIM, size=K), NDIM).astype(np.int64)
    points = source.tuples[idx] * signs
    return SymbolStream(points, idx, source, int(seed))


def mode_table(M: int, Rc) -> list[dict]:
    """One row per PAS-4D mode sharing code rate ``Rc``."""
    g = gamma(Rc, M)
    rows = []
    for k in range(1, build_labeling(build_ask(M)).m_Q + 1):
        rows.append(
            {
                "scheme": "PAS-4D",
                "M": M,
                "k": k,
                "Rc": str(as_fraction(Rc)),
                "gamma": g,
                "R_tx_bits_per_4D": k + NDIM * g,
                "SE_bpQs": se_of_k(k, M, Rc),
            }
        )
    return rows


MODE_COLUMNS = ["scheme", "M", "k", "Rc", "gamma", "R_tx_bits_per_4D", "SE_bpQs"]


def mode_table_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=MODE_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({**r, "gamma": f"{r['gamma']:.6g}", "R_tx_bits_per_4D": f"{r['R_tx_bits_per_4D']:.6g}",
                    "SE_bpQs": f"{r['SE_bpQs']:.6g}"})
    return buf.getvalue()


"""Command-line entry point: ``pas4d {sweep,modes,roundtrip,kurtosis}``.

Exit codes: 0 success, 2 configuration/usage error, 3 a runtime check failed.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .ccdm import CcdmCodec, fit_mb_entropy, mb_pmf, quantize_composition
from .channel import moment_ratio, normalized
from .constellation import build_ask
from .lut import build_lut, lut_source, product_source, uniform_source
from .pas import gamma, make_rng, mb_source, mode_table, mode_table_csv
from .sweep import ConfigError, ExperimentConfig, rows_to_csv, run_sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHECK = 3

OUTPUT_DIR_ENV = "PAS4D_OUTPUT_DIR"

log = logging.getLogger("pas4d")


def _default_out(name: str) -> str:
    return str(Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / name)


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    log.info("wrote %s", path)


def cmd_sweep(args) -> int:
    text = Path(args.config).read_text()
    cfg = ExperimentConfig.loads(text)
    d = cfg.to_dict()
    for flag, key in (("snr_start", "start_db"), ("snr_stop", "stop_db"), ("snr_step", "step_db")):
        v = getattr(args, flag)
        if v is not None:
            d["snr"][key] = v
    for flag in ("samples", "seed", "out"):
        v = getattr(args, flag)
        if v is not None:
            d[flag] = v
    if args.oracle:
        d["oracle"] = True
    cfg = ExperimentConfig.from_dict(d)
    rows = run_sweep(cfg)
    _write(rows_to_csv(rows), cfg.out or _default_out("sweep.csv"))
    return EXIT_OK


def cmd_modes(args) -> int:
    try:
        gamma(args.Rc, args.M)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _write(mode_table_csv(mode_table(args.M, args.Rc)), args.out)
    return EXIT_OK


def _lut_roundtrip(M: int, k: int, corrupt: bool) -> tuple[int, int, str | None]:
    dm = build_lut(build_ask(M), k)
    words = np.arange(dm.size)
    bits = ((words[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.uint8)
    for i, b in enumerate(bits):
        t = dm.encode(b)
        if corrupt and i == dm.size // 2:
            # an amplitude outside the table stands in for an uncorrected receive error
            t = (M - 1,) * 4
        try:
            back = dm.decode(t)
        except ValueError as exc:
            return i, dm.size, f"word {i}: {exc}"
        if not np.array_equal(back, b):
            return i, dm.size, f"word {i}: decoded to {back.tolist()}"
    return dm.size, dm.size, None


def _ccdm_roundtrip(M, n, nu, target_H, blocks, seed, corrupt) -> tuple[int, int, str | None]:
    ask = build_ask(M)
    if nu is None:
        nu = fit_mb_entropy(ask, target_H)
    comp = quantize_composition(mb_pmf(ask, nu), n)
    codec = CcdmCodec(comp)
    log.info("CCDM n=%d composition=%s k_cc=%d (%.4f bits/amplitude)", n, comp.counts, codec.k_cc, codec.rate)
    rng = make_rng(seed)
    for i in range(blocks):
        b = rng.integers(0, 2, size=codec.k_cc).astype(np.uint8)
        seq = codec.encode(b)
        counts = tuple(np.bincount(ask.amp_index(seq), minlength=ask.n_amp))
        if counts != comp.counts:
            return i, blocks, f"block {i}: composition {counts} != {comp.counts}"
        if corrupt and i == blocks // 2:
            j = int(np.flatnonzero(seq != seq[0])[0])
            seq = seq.copy()
            seq[0] = seq[j]  # breaks the composition
        try:
            back = codec.decode(seq)
        except ValueError as exc:
            return i, blocks, f"block {i}: {exc}"
        if not np.array_equal(back, b):
            first = int(np.flatnonzero(back != b)[0])
            return i, blocks, f"block {i}: first differing bit at {first}"
    return blocks, blocks, None


def cmd_roundtrip(args) -> int:
    if args.dm == "lut":
        if args.k is None:
            raise ConfigError("--k is required for the LUT DM")
        if args.k > 12:
            raise ConfigError("exhaustive LUT round trip is limited to k <= 12")
        try:
            passed, total, err = _lut_roundtrip(args.M, args.k, args.inject_error)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    else:
        if (args.nu is None) == (args.target_H is None):
            raise ConfigError("give exactly one of --nu and --target-H")
        if args.blocks < 1 or args.n < 1:
            raise ConfigError("--blocks and --n must be positive")
        try:
            passed, total, err = _ccdm_roundtrip(
                args.M, args.n, args.nu, args.target_H, args.blocks, args.seed, args.inject_error
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    print(f"{args.dm.upper()} roundtrip: {passed}/{total} pass")
    if err is not None:
        print(f"FAIL: {err}")
        return EXIT_CHECK
    return EXIT_OK


def parse_source_spec(spec: str):
    """``qpsk``, ``qam16``/``qam64``/``qam256``, ``lut:M=16,k=9``, ``mb:M=16,nu=0.05`` or ``mb:M=16,H=2.25``."""
    name, _, rest = spec.strip().lower().partition(":")
    kv = {}
    for part in filter(None, rest.split(",")):
        key, _, val = part.partition("=")
        kv[key.strip()] = val.strip()
    try:
        if name == "qpsk":
            return "QPSK", product_source(build_ask(4), np.array([1.0, 0.0]), name="QPSK")
        if name.startswith("qam"):
            q = int(name[3:])
            M = int(round(q**0.5))
            if M * M != q:
                raise ValueError(f"not a square QAM: {q}")
            return f"{q}-QAM", uniform_source(build_ask(M))
        if name == "lut":
            M, k = int(kv["m"]), int(kv["k"])
            return f"PAS-4D M={M} k={k}", lut_source(build_lut(build_ask(M), k))
        if name == "mb":
            ask = build_ask(int(kv["m"]))
            nu = float(kv["nu"]) if "nu" in kv else fit_mb_entropy(ask, float(kv["h"]))
            return f"MB M={ask.M} nu={nu:.6g}", mb_source(ask, nu)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad source spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown source spec {spec!r}")


def cmd_kurtosis(args) -> int:
    specs = args.source or ["qpsk", "qam16", "qam64", "qam256", "mb:M=16,H=2.25"]
    rows = []
    for spec in specs:
        name, src = parse_source_spec(spec)
        rows.append((moment_ratio(normalized(src)), name))
    rows.sort()
    lines = ["source,phi"] + [f"{name},{phi:.6g}" for phi, name in rows]
    _write("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pas4d", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("sweep", help="achievable rates over an SNR grid (CSV)")
    s.add_argument("config", help="JSON experiment config")
    s.add_argument("--snr-start", type=float)
    s.add_argument("--snr-stop", type=float)
    s.add_argument("--snr-step", type=float)
    s.add_argument("--samples", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help=f"output CSV ('-' for stdout; default ${OUTPUT_DIR_ENV}/sweep.csv)")
    s.add_argument("--oracle", action="store_true", help="add quadrature oracle rows")
    s.set_defaults(func=cmd_sweep)

    m = sub.add_parser("modes", help="PAS-4D modes sharing one code rate")
    m.add_argument("--M", type=int, default=16)
    m.add_argument("--Rc", default="13/16")
    m.add_argument("--out")
    m.set_defaults(func=cmd_modes)

    r = sub.add_parser("roundtrip", help="DM encode/decode self-check")
    r.add_argument("dm", choices=["lut", "ccdm"])
    r.add_argument("--M", type=int, default=16)
    r.add_argument("--k", type=int)
    r.add_argument("--n", type=int, default=6000)
    r.add_argument("--nu", type=float)
    r.add_argument("--target-H", type=float, dest="target_H")
    r.add_argument("--blocks", type=int, default=100)
    r.add_argument("--seed", type=int, default=1)
    r.add_argument("--inject-error", action="store_true", help="corrupt one block to exercise the failure path")
    r.set_defaults(func=cmd_roundtrip)

    k = sub.add_parser("kurtosis", help="fourth-moment ratio per source")
    k.add_argument("--source", action="append", help="source spec, repeatable (see parse_source_spec)")
    k.add_argument("--out")
    k.set_defaults(func=cmd_kurtosis)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""End-to-end acceptance checks.

Each test records one PASS/FAIL line (printed in the terminal summary and
inline with ``-s``).  Monte-Carlo quantities use K = 1e5 and fixed seeds.
"""

import contextlib
import functools
import json
import math

import numpy as np
import pytest

from pas4d.ccdm import fit_mb_entropy
from pas4d.channel import SnrSpec, add_noise, moment_ratio, normalized
from pas4d.cli import EXIT_OK, main
from pas4d.constellation import build_ask
from pas4d.lut import build_lut, lut_source, uniform_source
from pas4d.pas import draw_symbols, mb_source, mode_from_target_se, uniform_qam_mode
from pas4d.rates import KINDS, achievable_rate, make_metric, summand_moments
from pas4d.sweep import CrnRate, capacity_snr_db, mb_snr_at_rate, snr_at_rate

K = 100_000
RC = "13/16"
TARGET_SES = (3, 4, 5)
UNIFORM_BITS = {3: 4, 4: 6, 5: 8}  # 16/64/256-QAM


@contextlib.contextmanager
def criterion(results, n, title):
    """Record PASS when the block finishes, FAIL with the reason otherwise."""
    state = {"detail": ""}
    try:
        yield state
    except BaseException as exc:
        results[n] = (False, title, f"{state['detail']} {type(exc).__name__}: {exc}".strip())
        print(f"CRITERION {n} FAIL: {title} | {results[n][2]}")
        raise
    results[n] = (True, title, state["detail"])
    print(f"CRITERION {n} PASS: {title} | {state['detail']}")


@functools.lru_cache(maxsize=None)
def _rate_fns(se: int):
    k = mode_from_target_se(se, 16, RC)
    src = lut_source(build_lut(build_ask(16), k))
    uni = uniform_qam_mode(UNIFORM_BITS[se], se)
    # same seed: both PAS-4D metrics see identical symbols and noise
    return (
        CrnRate(src, "BMD4D", K, 1000 + se),
        CrnRate(src, "BMD2D", K, 1000 + se),
        CrnRate(uniform_source(build_ask(uni.M)), "BMD1D", K, 2000 + se),
    )


@functools.lru_cache(maxsize=None)
def _crossings(se: int):
    f4, f2, fu = _rate_fns(se)
    cap = capacity_snr_db(se)
    kw = dict(lo=cap - 0.5, hi=cap + 6.0, xtol=1e-3)
    return tuple(snr_at_rate(f, 2.0 * se, **kw) for f in (f4, f2, fu))


def test_criterion_1_shaping_superiority(acceptance_results, tmp_path):
    with criterion(acceptance_results, 1, "PAS-4D-4D beats uniform QAM at 3/4/5 bpQs") as st:
        parts = []
        ok = True
        for se in TARGET_SES:
            c4, _, cu = _crossings(se)
            gap = cu.snr_db - c4.snr_db
            tol = 3 * math.hypot(c4.stderr_db, cu.stderr_db)
            ok &= gap > tol
            parts.append(f"SE {se}: {c4.snr_db:.3f} vs {cu.snr_db:.3f} dB, gap {gap:.3f} > {tol:.3f}")

        # the same ordering read from the emitted sweep CSV, 256-QAM around the 5 bpQs crossing
        cfg = {
            "modes": [{"scheme": "PAS-4D-4D", "M": 16, "k": 9}, {"scheme": "UNIFORM", "M": 16, "target_se": 5}],
            "snr": {"start_db": 15.0, "stop_db": 17.0, "step_db": 0.5},
            "samples": K,
            "seed": 11,
            "capacity": False,
        }
        (tmp_path / "c1.json").write_text(json.dumps(cfg))
        out = tmp_path / "c1.csv"
        assert main(["sweep", str(tmp_path / "c1.json"), "--out", str(out)]) == EXIT_OK
        rows = [r.split(",") for r in out.read_text().splitlines()[1:]]
        pas = {r[3]: float(r[4]) for r in rows if r[0] == "PAS-4D-4D"}
        uni = {r[3]: float(r[4]) for r in rows if r[0] == "UNIFORM"}
        csv_ok = all(pas[s] >= uni[s] for s in pas)
        parts.append("CSV 15-17 dB PAS>=256QAM " + ("yes" if csv_ok else "NO"))
        st["detail"] = "; ".join(parts)
        assert ok and csv_ok, st["detail"]


def test_criterion_2_two_d_penalty(acceptance_results):
    with criterion(acceptance_results, 2, "2D demapping penalty <= 0.2 dB (+0.05 MC), <= 0.1 bpQs at 4 bpQs") as st:
        parts = []
        ok = True
        for se in TARGET_SES:
            c4, c2, _ = _crossings(se)
            pen = c2.snr_db - c4.snr_db
            ok &= pen <= 0.25
            parts.append(f"SE {se}: {pen:.3f} dB")
        f4, f2, _ = _rate_fns(4)
        s = _crossings(4)[0].snr_db
        loss = (f4(s).rate - f2(s).rate) / 2
        ok &= loss <= 0.1
        parts.append(f"rate loss at {s:.2f} dB: {loss:.4f} bpQs")
        st["detail"] = "; ".join(parts)
        assert ok, st["detail"]


def test_criterion_3_near_capacity(acceptance_results):
    with criterion(acceptance_results, 3, "MB M=16 BMD-1D within 0.3 dB of capacity, 1.5-5.5 bpQs") as st:
        ask = build_ask(16)
        gaps = {}
        for se in np.arange(1.5, 5.51, 0.5):
            snr, _ = mb_snr_at_rate(ask, 2 * se, "BMD1D")
            gaps[float(se)] = snr - capacity_snr_db(se)
        worst = max(gaps.values())
        st["detail"] = f"max gap {worst:.3f} dB; " + ", ".join(f"{k:g}:{v:.3f}" for k, v in gaps.items())
        assert worst <= 0.3, st["detail"]


def test_criterion_4_rate_granularity(acceptance_results, capsys):
    with criterion(acceptance_results, 4, "12 modes, 0.5 bpQs spacing, one Rc, 512-entry LUT") as st:
        assert main(["modes", "--M", "16", "--Rc", RC]) == EXIT_OK
        rows = [r.split(",") for r in capsys.readouterr().out.splitlines()[1:]]
        ses = np.array([float(r[6]) for r in rows])
        rcs = {r[3] for r in rows}
        k9 = next(int(r[2]) for r in rows if float(r[6]) == 5.0)
        size = build_lut(build_ask(16), k9).table.shape[0]
        st["detail"] = f"{len(rows)} modes, SE {ses.min():g}..{ses.max():g}, Rc {sorted(rcs)}, k={k9} LUT {size}"
        assert len(rows) == 12
        assert np.all(np.diff(ses) == 0.5)
        assert rcs == {RC}
        assert k9 == 9 and size == 512


def test_criterion_5_dm_correctness(acceptance_results, capsys):
    with criterion(acceptance_results, 5, "LUT k<=12 exhaustive, CCDM 100 blocks at n=6000") as st:
        for k in range(1, 13):
            assert main(["roundtrip", "lut", "--M", "16", "--k", str(k)]) == EXIT_OK
        lut_out = capsys.readouterr().out
        rc = main(["roundtrip", "ccdm", "--M", "16", "--n", "6000", "--target-H", "2.25", "--blocks", "100", "--seed", "5"])
        ccdm_out = capsys.readouterr().out.strip()
        st["detail"] = f"{lut_out.count(' pass')} LUT sizes ok; {ccdm_out}"
        assert rc == EXIT_OK and "100/100 pass" in ccdm_out


CRITERION_6_SOURCES = {
    "PAS-4D M=4 k=2 (|X|=64)": lambda: lut_source(build_lut(build_ask(4), 2)),
    "PAS-4D M=8 k=3 (|X|=128)": lambda: lut_source(build_lut(build_ask(8), 3)),
    "uniform 16-QAM (|X|=256)": lambda: uniform_source(build_ask(4)),
    "MB M=4 nu=0.1 (|X|=256)": lambda: mb_source(build_ask(4), 0.1),
}
CRITERION_6_SNRS = (0.0, 5.0, 10.0, 15.0, 20.0)


def test_criterion_6_estimator_validity(acceptance_results):
    with criterion(acceptance_results, 6, "MC within 3 SE of quadrature oracle; BMD <= SMD") as st:
        worst = worst_sample = 0.0
        fails = []
        order_fails = []
        n = 0
        for si, (name, make) in enumerate(CRITERION_6_SOURCES.items()):
            src = normalized(make())
            assert src.size <= 1024
            xs = draw_symbols(src, K, 600 + si)
            for j, db in enumerate(CRITERION_6_SNRS):
                snr = SnrSpec(db)
                ys = add_noise(xs, snr, 700 + 10 * si + j)
                orc = {}
                for kind in KINDS:
                    est = achievable_rate(xs, ys, make_metric(kind, src, snr.sigma2))
                    mean, var = summand_moments(src, snr.sigma2, kind)
                    orc[kind] = src.entropy - mean
                    # the sampled variance misses errors rarer than 1/K at high SNR,
                    # so the standard error comes from the quadrature variance
                    se = math.sqrt(var / K)
                    diff = abs(est.unclipped - orc[kind])
                    z = diff / se if se > 0 else (0.0 if diff < 1e-12 else math.inf)
                    worst = max(worst, z)
                    if est.stderr > 0:
                        worst_sample = max(worst_sample, diff / est.stderr)
                    n += 1
                    if z > 3:
                        fails.append(f"{name} {kind} {db:g} dB z={z:.2f}")
                for kind in KINDS[1:]:
                    if orc[kind] > orc["SMD4D"] + 1e-9:
                        order_fails.append(f"{name} {kind} {db:g} dB")
        st["detail"] = f"{n} cells, max |MC-oracle|/SE = {worst:.2f} (vs sampled SE {worst_sample:.3g})"
        if fails or order_fails:
            st["detail"] += f"; outside 3 SE: {fails}; ordering: {order_fails}"
        assert not fails and not order_fails, st["detail"]


def test_criterion_7_moment_indicator(acceptance_results):
    with criterion(acceptance_results, 7, "Phi(16-QAM) = 1.32, Phi(MB) > Phi(uniform)") as st:
        phi16 = moment_ratio(normalized(uniform_source(build_ask(4))))
        ask = build_ask(16)
        phi_u = moment_ratio(uniform_source(ask))
        nus = [fit_mb_entropy(ask, 2.25), 0.005, 0.05, 0.2]
        phi_mb = [moment_ratio(mb_source(ask, nu)) for nu in nus]
        st["detail"] = f"Phi(16-QAM)={phi16:.12g}; M=16 uniform {phi_u:.4f}, MB " + ", ".join(f"{p:.4f}" for p in phi_mb)
        assert phi16 == pytest.approx(1.32, abs=1e-12)
        assert all(p > phi_u for p in phi_mb)

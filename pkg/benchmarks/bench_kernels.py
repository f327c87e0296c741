"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--K 100000] [--repeat 3]

Times the two hot kernels on their own and a full achievable-rate evaluation
per metric kind, once per backend, and checks both backends agree.
"""

import argparse
import time

import numpy as np

import pas4d.rates as rates
from pas4d import kernels
from pas4d.channel import SnrSpec, add_noise, normalized
from pas4d.constellation import build_ask
from pas4d.lut import build_lut, lut_source
from pas4d.pas import draw_symbols


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def use_backend(name):
    if name == "cython":
        rates.tuple_logsumexp, rates.bit_metrics = kernels.tuple_logsumexp, kernels.bit_metrics
    else:
        rates.tuple_logsumexp, rates.bit_metrics = kernels.py_tuple_logsumexp, kernels.py_bit_metrics


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--K", type=int, default=100_000)
    ap.add_argument("--M", type=int, default=16)
    ap.add_argument("--k", type=int, default=9)
    ap.add_argument("--snr-db", type=float, default=15.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    if kernels.BACKEND != "cython":
        raise SystemExit("compiled extension not available; build with `pip install -e . --no-build-isolation`")

    src = normalized(lut_source(build_lut(build_ask(args.M), args.k)))
    snr = SnrSpec(args.snr_db)
    xs = draw_symbols(src, args.K, 1)
    ys = add_noise(xs, snr, 2)
    print(f"M={args.M} k={args.k} |X|={src.size} K={args.K} SNR={args.snr_db} dB\n")

    rng = np.random.default_rng(0)
    L = rng.normal(scale=5.0, size=(args.K, 4, src.ask.n_amp))
    logw = np.log(src.pmf)
    lab = src.labeling
    amp = rng.dirichlet(np.ones(src.ask.n_amp), size=(args.K, 4))
    lpos = rng.normal(size=amp.shape)
    lneg = rng.normal(size=amp.shape)
    logh = np.logaddexp(lpos, lneg)
    xi = rng.integers(0, args.M, size=(args.K, 4)).astype(np.int64)

    rows = []
    for label, fc, fp in [
        ("tuple_logsumexp", lambda: kernels.tuple_logsumexp(L, src.amp_idx, logw, np.empty_like(L)),
         lambda: kernels.py_tuple_logsumexp(L, src.amp_idx, logw, np.empty_like(L))),
        ("bit_metrics", lambda: kernels.bit_metrics(amp, lpos, lneg, logh, lab.level_bits, xi, np.empty_like(amp))[0],
         lambda: kernels.py_bit_metrics(amp, lpos, lneg, logh, lab.level_bits, xi, np.empty_like(amp))[0]),
    ]:
        tc, a = best_of(fc, args.repeat)
        tp, b = best_of(fp, args.repeat)
        rows.append((label, tc, tp, float(np.max(np.abs(a - b)))))

    for kind in rates.KINDS:
        metric = rates.make_metric(kind, src, snr.sigma2)
        res = {}
        for name in ("cython", "python"):
            use_backend(name)
            res[name] = best_of(lambda: rates.achievable_rate(xs, ys, metric).rate, args.repeat)
        use_backend("cython")
        rows.append((f"rate {kind}", res["cython"][0], res["python"][0], abs(res["cython"][1] - res["python"][1])))

    print(f"{'kernel':<18}{'cython s':>10}{'python s':>10}{'speedup':>9}{'max |diff|':>12}")
    for label, tc, tp, d in rows:
        print(f"{label:<18}{tc:>10.3f}{tp:>10.3f}{tp / tc:>8.1f}x{d:>12.2e}")


if __name__ == "__main__":
    main()

"""Achievable-rate estimation with symbol- and bit-metric decoding.

The Monte-Carlo estimate is

    R_a = [H(X) - mean_i( -log2 q(x_i, y_i) / sum_{a in X} q(a, y_i) )]^+   bits/4D

for one of four metrics:

``SMD4D``  q(x, y) = P(x) prod_d g(y_d - x_d)
``BMD4D``  product of bitwise metrics q_j computed with the 4D prior
``BMD2D``  as BMD4D, but q_j uses the amplitude-pair marginal of its 2D slice
``BMD1D``  as BMD4D, but q_j uses the 1D marginal of its dimension

Gaussian kernels are unnormalized (constants cancel in the ratio) and all
sums are done in the log domain.  Every source is sign-symmetric with
independent uniform signs, so sums over X reduce to log-sum-exp over
amplitude tuples of per-dimension terms; that loop is
:func:`pas4d.kernels.tuple_logsumexp`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import logsumexp

from .channel import ReceiveStream, SnrSpec, check_normalized
from .constellation import NDIM
from .kernels import bit_metrics, tuple_logsumexp
from .lut import ShapedSource
from .pas import SymbolStream

KINDS = ("SMD4D", "BMD4D", "BMD2D", "BMD1D")
LN2 = math.log(2.0)
_CHUNK = 1 << 14


@dataclass(frozen=True, eq=False)
class DecodingMetric:
    kind: str
    source: ShapedSource
    sigma2: float

    def summands(self, x_points: np.ndarray, y: np.ndarray, tuple_idx: np.ndarray | None = None) -> np.ndarray:
        """Per-sample ``-log2(q(x, y) / sum_a q(a, y))`` in bits.

        ``x_points`` are signed grid levels ``(K, 4)``, ``y`` channel outputs in
        normalized units.
        """
        x_points = np.asarray(x_points, dtype=np.int64)
        y = np.asarray(y, dtype=np.float64)
        if x_points.shape != y.shape or x_points.ndim != 2 or x_points.shape[1] != NDIM:
            raise ValueError("x and y must both have shape (K, 4)")
        if tuple_idx is None:
            tuple_idx = self.source.tuple_index(np.abs(x_points))
        out = np.empty(x_points.shape[0])
        for lo in range(0, x_points.shape[0], _CHUNK):
            hi = lo + _CHUNK
            out[lo:hi] = _summands(self, x_points[lo:hi], y[lo:hi], tuple_idx[lo:hi])
        return out


def make_metric(kind: str, source: ShapedSource, sigma2: float) -> DecodingMetric:
    if kind not in KINDS:
        raise ValueError(f"unknown metric kind {kind!r}; expected one of {KINDS}")
    if not sigma2 > 0:
        raise ValueError("sigma2 must be > 0")
    check_normalized(source)
    return DecodingMetric(kind, source, float(sigma2))


def _safe_log(p):
    with np.errstate(divide="ignore"):
        return np.log(p)


def _lse(a: np.ndarray, axis: int = -1) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return np.log(np.sum(np.exp(a - m), axis=axis)) + np.squeeze(m, axis=axis)


def _amp_posterior(metric: DecodingMetric, logh: np.ndarray) -> np.ndarray:
    """P(|x_d| = a | y) under the prior the metric kind allows, ``(K, 4, A)``."""
    src = metric.source
    kind = metric.kind
    if src.is_product:
        lp = _safe_log(src.amp_pmf_1d)[None, None, :] + logh
    elif kind == "BMD4D":
        marg = np.empty_like(logh)
        tuple_logsumexp(logh, src.amp_idx, _safe_log(src.pmf), marg)
        return marg
    elif kind == "BMD2D":
        return _pair_posterior(src.marginal_2d(), logh)
    else:
        lp = _safe_log(src.marginal_1d())[None, :, :] + logh
    return np.exp(lp - _lse(lp, axis=2)[:, :, None])


def _pair_posterior(W: np.ndarray, logh: np.ndarray) -> np.ndarray:
    """Per-dimension amplitude posteriors under the 2D-slice prior ``W`` ``(2, A, A)``.

    Linear domain after per-dimension max subtraction; rows whose joint mass
    underflows (likelihood peak on a zero-prior pair) are redone in log domain.
    """
    out = np.empty_like(logh)
    e = np.exp(logh - logh.max(axis=2, keepdims=True))
    for s in range(2):
        d0, d1 = 2 * s, 2 * s + 1
        J = W[s][None, :, :] * e[:, d0, :, None] * e[:, d1, None, :]
        tot = J.sum(axis=(1, 2))
        bad = tot < 1e-250
        with np.errstate(invalid="ignore", divide="ignore"):
            out[:, d0, :] = J.sum(axis=2) / tot[:, None]
            out[:, d1, :] = J.sum(axis=1) / tot[:, None]
        if np.any(bad):
            lW = _safe_log(W[s])[None, :, :]
            lJ = lW + logh[bad, d0, :, None] + logh[bad, d1, None, :]
            norm = _lse(lJ.reshape(lJ.shape[0], -1), axis=1)[:, None]
            out[bad, d0, :] = np.exp(_lse(lJ, axis=2) - norm)
            out[bad, d1, :] = np.exp(_lse(lJ, axis=1) - norm)
    return out


def _channel_terms(metric: DecodingMetric, y: np.ndarray):
    a = metric.source.scale * metric.source.ask.amplitudes.astype(np.float64)
    yy = y[:, :, None]
    c = 0.5 / metric.sigma2
    lpos = -c * (yy - a) ** 2
    lneg = -c * (yy + a) ** 2
    return lpos, lneg, np.logaddexp(lpos, lneg)


def _summands(metric: DecodingMetric, x: np.ndarray, y: np.ndarray, tidx: np.ndarray) -> np.ndarray:
    src = metric.source
    A = src.ask.n_amp
    lpos, lneg, logh = _channel_terms(metric, y)
    xi = src.ask.level_index(x)  # (K, 4) index into ascending levels
    if metric.kind == "SMD4D":
        if src.is_product:
            lw = _safe_log(src.amp_pmf_1d) - LN2
            den = np.sum(_lse(lw + logh, axis=2), axis=1)
        else:
            den = tuple_logsumexp(logh, src.amp_idx, _safe_log(src.pmf) - NDIM * LN2)
        sent = -0.5 / metric.sigma2 * np.sum((y - src.scale * x) ** 2, axis=1)
        num = np.log(src.pmf[tidx]) - NDIM * LN2 + sent
        return (den - num) / LN2

    amp = _amp_posterior(metric, logh)
    bits = src.labeling.level_bits
    if src.is_full_grid:
        # the sum over all M^4 labels factorizes into products of (p0 + p1)
        num, den = bit_metrics(amp, lpos, lneg, logh, bits, xi)
    else:
        R = np.empty_like(amp)
        num, _ = bit_metrics(amp, lpos, lneg, logh, bits, xi, R)
        den = tuple_logsumexp(R, src.amp_idx, np.zeros(src.n_tuples))
    # the kernel works with linear bit probabilities floored at 1e-300; rows where a
    # sent bit is that unlikely are redone exactly in the log domain
    bad = num < -_LINEAR_FLOOR
    if np.any(bad):
        num[bad], den[bad] = _bmd_log_domain(metric, lpos[bad], lneg[bad], logh[bad], xi[bad])
    return (den - num) / LN2


_LINEAR_FLOOR = 300.0  # nats


def _log_amp_posterior(metric: DecodingMetric, logh: np.ndarray) -> np.ndarray:
    src = metric.source
    kind = metric.kind
    if src.is_product or kind == "BMD1D":
        prior = src.amp_pmf_1d[None, None, :] if src.is_product else src.marginal_1d()[None, :, :]
        lp = _safe_log(prior) + logh
    elif kind == "BMD2D":
        W = _safe_log(src.marginal_2d())
        lp = np.empty_like(logh)
        for s in range(2):
            d0, d1 = 2 * s, 2 * s + 1
            lJ = W[s][None, :, :] + logh[:, d0, :, None] + logh[:, d1, None, :]
            lp[:, d0, :] = _lse(lJ, axis=2)
            lp[:, d1, :] = _lse(lJ, axis=1)
    else:
        t = src.amp_idx
        s = _safe_log(src.pmf)[None, :] + sum(logh[:, d, :][:, t[:, d]] for d in range(NDIM))
        lp = np.full_like(logh, -np.inf)
        for d in range(NDIM):
            for a in np.unique(t[:, d]):
                lp[:, d, a] = _lse(s[:, t[:, d] == a], axis=1)
    return lp - _lse(lp, axis=2)[:, :, None]


def _bmd_log_domain(metric: DecodingMetric, lpos, lneg, logh, xi):
    """Exact log-domain (num, den) of the bit metric; slow, used for rare rows."""
    src = metric.source
    la = _log_amp_posterior(metric, logh)
    # level posterior over ascending levels: negative half reversed, then positive
    ll = np.concatenate([(la + lneg - logh)[:, :, ::-1], la + lpos - logh], axis=2)  # (K, 4, M)
    bits = src.labeling.level_bits.astype(bool)
    K = ll.shape[0]
    log_r = np.zeros_like(ll)
    den_full = np.zeros(K)
    for j in range(bits.shape[1]):
        on = bits[:, j]
        lp1 = _lse(ll[:, :, on], axis=2)
        lp0 = _lse(ll[:, :, ~on], axis=2)
        log_r += np.where(on[None, None, :], lp1[:, :, None], lp0[:, :, None])
        den_full += np.sum(np.logaddexp(lp0, lp1), axis=1)
    num = np.sum(np.take_along_axis(log_r, xi[:, :, None], axis=2)[:, :, 0], axis=1)
    if src.is_full_grid:
        return num, den_full
    A = src.ask.n_amp
    logR = np.logaddexp(log_r[:, :, A:], log_r[:, :, :A][:, :, ::-1])
    return num, tuple_logsumexp(logR, src.amp_idx, np.zeros(src.n_tuples))


@dataclass(frozen=True)
class RateEstimate:
    rate: float  # bits / 4D, clipped at 0
    stderr: float
    K: int
    unclipped: float

    @property
    def rate_bpqs(self) -> float:
        return self.rate / 2

    @property
    def stderr_bpqs(self) -> float:
        return self.stderr / 2


def achievable_rate(xs: SymbolStream, ys: ReceiveStream, metric: DecodingMetric) -> RateEstimate:
    K = len(xs)
    if K == 0:
        raise ValueError("empty symbol stream")
    if len(ys) != K:
        raise ValueError("transmit and receive streams differ in length")
    if xs.source is not metric.source and not _same_constellation(xs.source, metric.source):
        raise ValueError("metric and symbol stream use different constellations")
    s = metric.summands(xs.points, ys.y, xs.tuple_idx)
    return rate_from_summands(metric.source.entropy, s)


def rate_from_summands(H: float, s: np.ndarray) -> RateEstimate:
    K = s.size
    mean = float(np.sum(s) / K)
    se = float(np.std(s, ddof=1) / math.sqrt(K)) if K > 1 else float("nan")
    raw = H - mean
    return RateEstimate(max(0.0, raw), se, K, raw)


def _same_constellation(a: ShapedSource, b: ShapedSource) -> bool:
    return (
        a.ask == b.ask
        and a.tuples.shape == b.tuples.shape
        and np.array_equal(a.tuples, b.tuples)
        and np.allclose(a.pmf, b.pmf, rtol=0, atol=1e-15)
    )


# -- deterministic oracle ---------------------------------------------------------

ORACLE_MAX_POINTS = 4096


def exact_rate_oracle(source: ShapedSource, sigma2: float, kind: str, nodes: int = 40) -> float:
    """Expected Monte-Carlo rate by Gauss-Hermite quadrature instead of sampling.

    Product sources factorize into four 1D integrals.  Other sources integrate
    over the ``nodes**4`` tensor grid (negligible-weight nodes pruned) per
    transmitted amplitude tuple; sign symmetry of every metric lets the sum
    over X run over positive tuples only.
    """
    mean, _ = summand_moments(source, sigma2, kind, nodes)
    return max(0.0, source.entropy - mean)


def summand_moments(source: ShapedSource, sigma2: float, kind: str, nodes: int = 40) -> tuple[float, float]:
    """Mean and variance (bits, bits^2) of one Monte-Carlo summand, by quadrature.

    ``sqrt(var / K)`` is the exact standard error of a K-sample estimate, which
    stays meaningful at high SNR where sampled variances miss rare errors.
    """
    if nodes < 40:
        raise ValueError("use at least 40 quadrature nodes per dimension")
    metric = make_metric(kind, source, sigma2)
    t, w = hermgauss(nodes)
    z = math.sqrt(2.0 * sigma2) * t
    w = w / math.sqrt(math.pi)
    if source.is_product:
        # the summand is a sum of four i.i.d. per-dimension terms
        m1, m2 = _oracle_1d(source, sigma2, kind, z, w)
        return NDIM * m1, NDIM * max(0.0, m2 - m1 * m1)
    if source.size > ORACLE_MAX_POINTS:
        raise ValueError(f"constellation too large for the 4D oracle ({source.size} > {ORACLE_MAX_POINTS})")
    Z, W = _pruned_grid(z, w)
    m1 = m2 = 0.0
    for ti, tup in enumerate(source.tuples):
        x = np.broadcast_to(tup, Z.shape)
        s = metric.summands(x, source.scale * x + Z, np.full(Z.shape[0], ti))
        m1 += source.pmf[ti] * float(np.dot(W, s))
        m2 += source.pmf[ti] * float(np.dot(W, s * s))
    return m1, max(0.0, m2 - m1 * m1)


# tensor nodes whose product weight is below this are dropped; the dropped
# mass is ~1.5e-10 for 40 nodes, far below Monte-Carlo resolution
_PRUNE = 1e-14


def _pruned_grid(z: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    idx = np.stack(np.meshgrid(*(np.arange(z.size),) * NDIM, indexing="ij"), axis=-1).reshape(-1, NDIM)
    W = np.prod(w[idx], axis=1)
    keep = W > _PRUNE
    return z[idx[keep]], W[keep]


def _oracle_1d(source: ShapedSource, sigma2: float, kind: str, z: np.ndarray, w: np.ndarray) -> tuple[float, float]:
    """First and second moments of the per-dimension summand (bits) for an i.i.d. product source."""
    ask = source.ask
    lab = source.labeling
    levels = ask.levels.astype(np.float64) * source.scale
    p_amp = source.amp_pmf_1d
    p_lev = np.concatenate([p_amp[::-1], p_amp]) / 2.0
    c = 0.5 / sigma2
    m1 = m2 = 0.0
    for xi, (xv, px) in enumerate(zip(levels, p_lev)):
        if px == 0:
            continue
        y = xv + z  # (N,)
        ll = -c * (y[:, None] - levels[None, :]) ** 2 + _safe_log(p_lev)[None, :]  # log P(l) g(y - l)
        norm = logsumexp(ll, axis=1)
        if kind == "SMD4D":
            f = norm - ll[:, xi]
        else:
            post = ll - norm[:, None]
            f = np.zeros_like(y)
            for j in range(lab.bits_per_dim):
                on = lab.level_bits[:, j].astype(bool)
                match = on == on[xi]
                f -= logsumexp(post[:, match], axis=1)
        f = f / LN2
        m1 += px * float(np.dot(w, f))
        m2 += px * float(np.dot(w, f * f))
    return m1, m2


def gaussian_capacity(snr: SnrSpec) -> float:
    """log2(1 + SNR) in bits per 2D symbol."""
    if not math.isfinite(snr.snr_db):
        raise ValueError("snr_db must be finite")
    return math.log2(1.0 + snr.linear)

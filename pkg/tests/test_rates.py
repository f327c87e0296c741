import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import logsumexp

from pas4d.channel import ReceiveStream, SnrSpec, add_noise, normalized
from pas4d.constellation import build_ask
from pas4d.lut import ShapedSource, build_lut, lut_source, product_source, uniform_source
from pas4d.pas import SymbolStream, draw_symbols, mb_source
from pas4d.rates import (
    KINDS,
    achievable_rate,
    exact_rate_oracle,
    summand_moments,
    gaussian_capacity,
    make_metric,
    rate_from_summands,
)


def reference_summands(src: ShapedSource, kind: str, sigma2: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Direct evaluation of -log2(q(x,y) / sum_a q(a,y)) by enumerating every point and label."""
    pts, p = src.points()
    lab = src.labeling
    labels = np.array([lab.point_to_bits(pt) for pt in pts])  # (N, m)
    b = lab.bits_per_dim
    A = pts * src.scale
    c = 0.5 / sigma2
    out = np.empty(len(x))
    for i in range(len(x)):
        ld = -c * (y[i][None, :] - A) ** 2  # (N, 4) per-dimension log kernels
        if kind == "SMD4D":
            logq = np.log(p) + ld.sum(axis=1)
        else:
            # dims whose prior is shared with dim d: all (4D), slice partner (2D) or none (1D)
            groups = {"BMD4D": [[0, 1, 2, 3]] * 4, "BMD2D": [[0, 1], [0, 1], [2, 3], [2, 3]],
                      "BMD1D": [[0], [1], [2], [3]]}[kind]
            logq = np.zeros(len(pts))
            for j in range(lab.m):
                g = groups[j // b]
                # marginal law of the points on the dims of g, with their kernels
                keys = [tuple(r) for r in pts[:, g]]
                uniq = {}
                for n, kk in enumerate(keys):
                    uniq.setdefault(kk, []).append(n)
                lw = []
                bit = []
                for kk, members in uniq.items():
                    m0 = members[0]
                    lw.append(math.log(p[members].sum()) + ld[m0, g].sum())
                    bit.append(labels[m0, j])
                lw, bit = np.array(lw), np.array(bit)
                qb = np.array([logsumexp(lw[bit == v]) if np.any(bit == v) else -np.inf for v in (0, 1)])
                logq += qb[labels[:, j]]
        sent = np.flatnonzero(np.all(pts == x[i], axis=1))[0]
        out[i] = (logsumexp(logq) - logq[sent]) / math.log(2)
    return out


def slice_product_source(ask):
    """Law that factorizes across the two 2D slices but not across dimensions."""
    A = ask.amplitudes
    pair = np.array([[0.4, 0.2], [0.25, 0.15]])
    tuples, pmf = [], []
    for i1 in range(2):
        for i2 in range(2):
            for i3 in range(2):
                for i4 in range(2):
                    tuples.append([A[i1], A[i2], A[i3], A[i4]])
                    pmf.append(pair[i1, i2] * pair[i3, i4])
    return ShapedSource(ask, np.array(tuples), np.array(pmf), name="slice-product")


SMALL_SOURCES = {
    "lut4k2": lambda: lut_source(build_lut(build_ask(4), 2)),
    "lut4k3": lambda: lut_source(build_lut(build_ask(4), 3)),
    "uniform16qam": lambda: uniform_source(build_ask(4)),
    "mb4": lambda: mb_source(build_ask(4), 0.08),
    "lut8k3": lambda: lut_source(build_lut(build_ask(8), 3)),
    "slice": lambda: slice_product_source(build_ask(4)),
}


@pytest.fixture(params=sorted(SMALL_SOURCES))
def small_source(request):
    return normalized(SMALL_SOURCES[request.param]())


class TestAgainstBruteForce:
    @pytest.mark.parametrize("kind", KINDS)
    @pytest.mark.parametrize("snr_db", [-3.0, 6.0, 15.0])
    def test_summands(self, small_source, kind, snr_db):
        s2 = SnrSpec(snr_db).sigma2
        xs = draw_symbols(small_source, 40, 11)
        ys = add_noise(xs, SnrSpec(snr_db), 12)
        got = make_metric(kind, small_source, s2).summands(xs.points, ys.y)
        ref = reference_summands(small_source, kind, s2, xs.points, ys.y)
        np.testing.assert_allclose(got, ref, rtol=1e-9, atol=1e-9)


class TestMetricProperties:
    @pytest.mark.parametrize("kind", KINDS)
    def test_zero_prior_peak(self, kind, lut4_k2):
        # y sits on amplitude pairs the source never sends; BMD2D must take its log-domain path
        src = normalized(lut_source(lut4_k2))
        s2 = 1e-3
        x = np.array([[1, 1, 1, 1], [-1, 3, 1, -1], [1, -1, -3, 1]])
        y = np.array([[3, 3, 3, 3], [-3, -3, 3, 3], [3, 3, -3, -3]]) * src.scale
        got = make_metric(kind, src, s2).summands(x, y)
        ref = reference_summands(src, kind, s2, x, y)
        np.testing.assert_allclose(got, ref, rtol=1e-9, atol=1e-7)

    @pytest.mark.parametrize("kind", ["BMD4D", "BMD2D", "BMD1D"])
    @pytest.mark.parametrize("name", ["lut8k3", "uniform16qam", "slice"])
    def test_log_domain_path_matches_kernel(self, kind, name, monkeypatch):
        import pas4d.rates as rates

        src = normalized(SMALL_SOURCES[name]())
        s2 = SnrSpec(4.0).sigma2
        xs = draw_symbols(src, 500, 1)
        y = add_noise(xs, SnrSpec(4.0), 2).y
        fast = make_metric(kind, src, s2).summands(xs.points, y)
        monkeypatch.setattr(rates, "_LINEAR_FLOOR", -np.inf)  # every row takes the exact path
        exact = make_metric(kind, src, s2).summands(xs.points, y)
        np.testing.assert_allclose(fast, exact, rtol=1e-10, atol=1e-10)

    def test_slice_product_bmd2d_equals_bmd4d(self):
        src = normalized(slice_product_source(build_ask(4)))
        s2 = SnrSpec(4.0).sigma2
        xs = draw_symbols(src, 2000, 1)
        ys = add_noise(xs, SnrSpec(4.0), 2)
        a = make_metric("BMD2D", src, s2).summands(xs.points, ys.y)
        b = make_metric("BMD4D", src, s2).summands(xs.points, ys.y)
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-10)

    def test_product_source_bmd_kinds_agree(self, ask16):
        src = normalized(mb_source(ask16, 0.02))
        s2 = SnrSpec(12.0).sigma2
        xs = draw_symbols(src, 2000, 1)
        ys = add_noise(xs, SnrSpec(12.0), 2)
        vals = [make_metric(k, src, s2).summands(xs.points, ys.y) for k in ("BMD4D", "BMD2D", "BMD1D")]
        np.testing.assert_allclose(vals[0], vals[1], atol=1e-10)
        np.testing.assert_allclose(vals[0], vals[2], atol=1e-10)

    def test_y_equals_x_smd_ratio_one(self, lut16_k9):
        src = normalized(lut_source(lut16_k9))
        xs = draw_symbols(src, 200, 1)
        s = make_metric("SMD4D", src, 1e-6).summands(xs.points, xs.normalized())
        np.testing.assert_allclose(s, 0.0, atol=1e-12)

    def test_y_zero_posterior_uniform_over_signs(self, lut4_k2):
        src = normalized(lut_source(lut4_k2))
        pts, _ = src.points()
        y = np.zeros((len(pts), 4))
        s = make_metric("SMD4D", src, 0.3).summands(pts, y)
        # q(x, 0) depends only on |x|: every sign pattern of a tuple gets 1/16 of the tuple's mass
        by_tuple = {}
        for pt, v in zip(np.abs(pts), s):
            by_tuple.setdefault(tuple(pt), []).append(v)
        for vals in by_tuple.values():
            assert np.ptp(vals) < 1e-12
        total = sum((2.0 ** -np.array(v)).sum() for v in by_tuple.values())
        assert total == pytest.approx(1.0)

    @pytest.mark.parametrize("kind", KINDS)
    def test_sign_symmetry(self, kind, lut16_k9):
        src = normalized(lut_source(lut16_k9))
        s2 = SnrSpec(10.0).sigma2
        xs = draw_symbols(src, 3000, 4)
        y = add_noise(xs, SnrSpec(10.0), 5).y
        m = make_metric(kind, src, s2)
        flip = np.array([1, -1, -1, 1])
        np.testing.assert_allclose(m.summands(xs.points, y), m.summands(-xs.points, -y), atol=1e-10)
        np.testing.assert_allclose(m.summands(xs.points, y), m.summands(xs.points * flip, y * flip), atol=1e-10)

    def test_summands_are_positive(self, lut16_k9):
        src = normalized(lut_source(lut16_k9))
        xs = draw_symbols(src, 3000, 4)
        y = add_noise(xs, SnrSpec(3.0), 5).y
        for kind in KINDS:
            assert np.all(make_metric(kind, src, SnrSpec(3.0).sigma2).summands(xs.points, y) >= -1e-12)

    def test_high_snr_no_underflow(self, lut16_k9):
        src = normalized(lut_source(lut16_k9))
        xs = draw_symbols(src, 500, 4)
        y = add_noise(xs, SnrSpec(60.0), 5).y
        for kind in KINDS:
            s = make_metric(kind, src, SnrSpec(60.0).sigma2).summands(xs.points, y)
            assert np.all(np.isfinite(s))


class TestMakeMetric:
    def test_bad_kind(self, lut4_k2):
        with pytest.raises(ValueError, match="unknown metric"):
            make_metric("MAXLOG", normalized(lut_source(lut4_k2)), 0.1)

    def test_bad_sigma(self, lut4_k2):
        with pytest.raises(ValueError):
            make_metric("SMD4D", normalized(lut_source(lut4_k2)), 0.0)

    def test_requires_normalized(self, lut4_k2):
        with pytest.raises(ValueError):
            make_metric("SMD4D", lut_source(lut4_k2), 0.1)


class TestAchievableRate:
    def test_noiseless_smd_is_entropy(self, lut16_k9):
        src = normalized(lut_source(lut16_k9))
        xs = draw_symbols(src, 2000, 1)
        ys = add_noise(xs, SnrSpec(math.inf), 0)
        est = achievable_rate(xs, ys, make_metric("SMD4D", src, 1e-8))
        assert est.rate == pytest.approx(13.0, abs=1e-9)

    def test_constant_metric_gives_zero(self):
        est = rate_from_summands(6.0, np.full(100, 6.0))
        assert est.rate == 0.0 and est.stderr == 0.0

    def test_clipping(self, lut16_k9):
        # the bit-metric mismatch makes the raw estimate negative at very low SNR
        src = normalized(lut_source(lut16_k9))
        xs = draw_symbols(src, 2000, 1)
        ys = add_noise(xs, SnrSpec(-30.0), 2)
        est = achievable_rate(xs, ys, make_metric("BMD4D", src, SnrSpec(-30.0).sigma2))
        assert est.unclipped < -10 * est.stderr
        assert est.rate == 0.0
        assert rate_from_summands(2.0, np.array([3.0, 2.5])).rate == 0.0

    def test_bpsk_against_oracle(self, ask4):
        src = normalized(product_source(ask4, np.array([1.0, 0.0])))
        s2 = SnrSpec(0.0).sigma2
        orc = exact_rate_oracle(src, s2, "SMD4D") / 4
        assert orc == pytest.approx(0.486, abs=5e-4)
        xs = draw_symbols(src, 100_000, 3)
        est = achievable_rate(xs, add_noise(xs, SnrSpec(0.0), 4), make_metric("SMD4D", src, s2))
        assert abs(est.rate / 4 - orc) < 3 * est.stderr / 4

    def test_empty_stream(self, lut4_k2):
        src = normalized(lut_source(lut4_k2))
        xs = SymbolStream(np.zeros((0, 4), dtype=np.int64), np.zeros(0, dtype=np.int64), src, 0)
        ys = ReceiveStream(np.zeros((0, 4)), SnrSpec(0), 0)
        with pytest.raises(ValueError, match="empty"):
            achievable_rate(xs, ys, make_metric("SMD4D", src, 0.5))

    def test_length_mismatch(self, lut4_k2):
        src = normalized(lut_source(lut4_k2))
        xs = draw_symbols(src, 10, 1)
        ys = ReceiveStream(np.zeros((9, 4)), SnrSpec(0), 0)
        with pytest.raises(ValueError, match="length"):
            achievable_rate(xs, ys, make_metric("SMD4D", src, 0.5))

    def test_constellation_mismatch(self, ask4):
        a = normalized(lut_source(build_lut(ask4, 2)))
        b = normalized(lut_source(build_lut(ask4, 3)))
        xs = draw_symbols(a, 10, 1)
        ys = add_noise(xs, SnrSpec(3), 1)
        with pytest.raises(ValueError, match="different constellations"):
            achievable_rate(xs, ys, make_metric("SMD4D", b, 0.5))

    def test_ordering_crn(self, lut16_k9):
        src = normalized(lut_source(lut16_k9))
        xs = draw_symbols(src, 20_000, 1)
        snr = SnrSpec(11.0)
        ys = add_noise(xs, snr, 2)
        r = {k: achievable_rate(xs, ys, make_metric(k, src, snr.sigma2)) for k in KINDS}
        assert r["BMD4D"].rate <= r["SMD4D"].rate + 3 * r["SMD4D"].stderr
        assert r["BMD2D"].rate <= r["BMD4D"].rate + 3 * r["BMD4D"].stderr
        assert r["BMD1D"].rate <= r["BMD2D"].rate + 3 * r["BMD2D"].stderr

    def test_monotone_in_snr_crn(self, ask4):
        src = normalized(lut_source(build_lut(ask4, 3)))
        xs = draw_symbols(src, 20_000, 1)
        z = np.random.default_rng(3).standard_normal(xs.points.shape)
        prev = None
        for db in np.arange(-5, 21, 2.5):
            snr = SnrSpec(float(db))
            ys = ReceiveStream(xs.normalized() + math.sqrt(snr.sigma2) * z, snr, 0)
            est = achievable_rate(xs, ys, make_metric("BMD4D", src, snr.sigma2))
            if prev is not None:
                assert est.rate >= prev.rate - 3 * est.stderr
            prev = est


class TestOracle:
    @pytest.mark.parametrize("kind", KINDS)
    def test_high_snr_is_entropy(self, kind, ask4):
        src = normalized(lut_source(build_lut(ask4, 2)))
        assert exact_rate_oracle(src, SnrSpec(40.0).sigma2, kind) == pytest.approx(src.entropy, abs=1e-6)

    def test_bmd_below_smd(self, ask4):
        src = normalized(lut_source(build_lut(ask4, 2)))
        for db in (3.0,):
            s2 = SnrSpec(db).sigma2
            r = {k: exact_rate_oracle(src, s2, k) for k in KINDS}
            assert r["BMD4D"] <= r["SMD4D"] + 1e-10
            assert r["BMD2D"] <= r["SMD4D"] + 1e-10
            assert r["BMD1D"] <= r["SMD4D"] + 1e-10

    def test_product_factorizes(self, ask4):
        # a product source through the 4D grid path must equal the 1D factorized path
        src = normalized(uniform_source(ask4))
        s2 = SnrSpec(5.0).sigma2
        as_lut = normalized(lut_source(build_lut(ask4, 4)))
        from dataclasses import replace

        forced = replace(as_lut, amp_pmf_1d=None)
        for kind in ("SMD4D", "BMD1D"):
            assert exact_rate_oracle(src, s2, kind) == pytest.approx(exact_rate_oracle(forced, s2, kind), abs=1e-7)

    @pytest.mark.parametrize("kind", KINDS)
    @pytest.mark.parametrize("product", [True, False], ids=["uniform16qam", "lut4k2"])
    def test_moments_match_samples(self, kind, product, ask4):
        src = normalized(uniform_source(ask4) if product else lut_source(build_lut(ask4, 2)))
        snr = SnrSpec(4.0)
        mean, var = summand_moments(src, snr.sigma2, kind)
        xs = draw_symbols(src, 40_000, 3)
        s = make_metric(kind, src, snr.sigma2).summands(xs.points, add_noise(xs, snr, 4).y, xs.tuple_idx)
        assert s.mean() == pytest.approx(mean, abs=4 * math.sqrt(var / s.size))
        assert s.var() == pytest.approx(var, rel=0.05)

    def test_oracle_is_entropy_minus_mean(self, lut4_k2):
        src = normalized(lut_source(lut4_k2))
        s2 = SnrSpec(2.0).sigma2
        mean, _ = summand_moments(src, s2, "BMD2D")
        assert exact_rate_oracle(src, s2, "BMD2D") == pytest.approx(src.entropy - mean)

    def test_rejects_few_nodes(self, lut4_k2):
        with pytest.raises(ValueError):
            exact_rate_oracle(normalized(lut_source(lut4_k2)), 0.1, "SMD4D", nodes=20)

    def test_rejects_large(self, ask16):
        with pytest.raises(ValueError, match="too large"):
            exact_rate_oracle(normalized(lut_source(build_lut(ask16, 9))), 0.1, "SMD4D")


class TestCapacity:
    def test_values(self):
        assert gaussian_capacity(SnrSpec(0.0)) == pytest.approx(1.0)
        assert gaussian_capacity(SnrSpec(10.0)) == pytest.approx(math.log2(11))

    @given(st.floats(-30, 50), st.floats(0.01, 10))
    def test_monotone(self, a, d):
        assert gaussian_capacity(SnrSpec(a + d)) > gaussian_capacity(SnrSpec(a))

    def test_rejects_infinite(self):
        with pytest.raises(ValueError):
            gaussian_capacity(SnrSpec(math.inf))

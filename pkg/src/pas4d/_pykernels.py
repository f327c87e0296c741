"""numpy fallback for :mod:`pas4d._ckernels` (same contract, chunked)."""

import numpy as np

_CHUNK_ELEMS = 1 << 22


def tuple_logsumexp(L, table, logw, marg=None):
    L = np.asarray(L, dtype=np.float64)
    table = np.asarray(table)
    logw = np.asarray(logw, dtype=np.float64)
    K, D, A = L.shape
    T = table.shape[0]
    if table.shape[1] != D or logw.shape[0] != T:
        raise ValueError("shape mismatch between L, table and logw")
    if marg is not None and marg.shape != (K, D, A):
        raise ValueError("marg has the wrong shape")
    onehot = [np.eye(A)[table[:, d]] for d in range(D)] if marg is not None else None
    out = np.empty(K)
    step = max(1, _CHUNK_ELEMS // max(T, 1))
    for lo in range(0, K, step):
        hi = min(K, lo + step)
        s = np.broadcast_to(logw, (hi - lo, T)).copy()
        for d in range(D):
            s += L[lo:hi, d, :][:, table[:, d]]
        mx = s.max(axis=1)
        finite = np.isfinite(mx)
        mx_safe = np.where(finite, mx, 0.0)
        e = np.exp(s - mx_safe[:, None])
        tot = e.sum(axis=1)
        with np.errstate(divide="ignore"):
            out[lo:hi] = np.where(finite, mx_safe + np.log(tot), -np.inf)
        if marg is not None:
            for d in range(D):
                marg[lo:hi, d, :] = (e @ onehot[d]) / tot[:, None]
    return out


_TINY = 1e-300


def bit_metrics(amp, lpos, lneg, logh, bits, xi, logR=None):
    K, D, A = amp.shape
    bits = np.asarray(bits, dtype=np.float64)
    if bits.shape[0] != 2 * A:
        raise ValueError("bits must have 2*A rows")
    lev = np.concatenate([(amp * np.exp(lneg - logh))[:, :, ::-1], amp * np.exp(lpos - logh)], axis=2)
    p1 = lev @ bits
    p0 = lev @ (1.0 - bits)
    lp1 = np.log(np.maximum(p1, _TINY))
    lp0 = np.log(np.maximum(p0, _TINY))
    log_r = lp1 @ bits.T + lp0 @ (1.0 - bits).T
    num = np.sum(np.take_along_axis(log_r, np.asarray(xi)[:, :, None], axis=2)[:, :, 0], axis=1)
    den = np.sum(np.log(p0 + p1), axis=(1, 2))
    if logR is not None:
        logR[...] = np.logaddexp(log_r[:, :, A - 1 :: -1], log_r[:, :, A:])
    return num, den

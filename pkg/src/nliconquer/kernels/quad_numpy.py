"""Pure-numpy quadrature backend, array-at-a-time instead of compiled loops.

Mirrors the compiled backend's API and semantics: same nodes, same branch
codes, same global bisection rule. Active intervals are evaluated as one
(intervals x nodes) batch per refinement round.
"""

import numpy as np

from .common import (
    XGK,
    WGK,
    WG,
    BR_SCI_TRI,
    BR_SCI_SQ,
    BR_XCI_POS,
    BR_XCI_NEG,
    BR_RHO,
)

_CAP = 16384


def _integrand_vec(w, branch, alpha, c2, span_km, p1, p2, p3):
    w = np.asarray(w, dtype=np.float64)
    ws = np.where((branch == BR_SCI_SQ) | (branch == BR_XCI_NEG), -w, w)
    psi = c2 * ws
    att = np.exp(-alpha * span_km)
    num = 1.0 - 2.0 * att * np.cos(psi * span_km) + att * att
    r = num / (alpha * alpha + psi * psi)
    out = np.zeros_like(w)
    with np.errstate(divide="ignore", invalid="ignore"):
        sel = branch == BR_RHO
        if sel.any():
            out[sel] = r[sel]
        sel = branch == BR_SCI_TRI
        if sel.any():
            disc = p1 * p1 - 4.0 * w[sel]
            s = np.sqrt(np.maximum(disc, 0.0))
            m = np.where(disc > 0.0, np.log((p1 + s) / (p1 - s)), 0.0)
            out[sel] = r[sel] * m
        sel = branch == BR_SCI_SQ
        if sel.any():
            wv = w[sel]
            m = np.where(wv > 0.0, np.log(p1 * p1 / np.where(wv > 0.0, wv, 1.0)), 0.0)
            out[sel] = r[sel] * m
        sel = branch == BR_XCI_POS
        if sel.any():
            wv = w[sel]
            q = ((p2 + p3) - np.sqrt(np.maximum((p2 + p3) ** 2 - 4.0 * wv, 0.0))) / 2.0
            hi = np.minimum(p1, wv / (p2 - p3))
            good = (hi > q) & (q > 0.0)
            m = np.where(good, np.log(np.where(good, hi / np.where(q > 0, q, 1.0), 1.0)), 0.0)
            out[sel] = r[sel] * m
        sel = branch == BR_XCI_NEG
        if sel.any():
            wv = w[sel]
            p = (-(p2 - p3) + np.sqrt((p2 - p3) ** 2 + 4.0 * wv)) / 2.0
            hi = np.minimum(p1, p)
            lo = wv / (p2 + p3)
            good = (hi > lo) & (lo > 0.0)
            m = np.where(good, np.log(np.where(good, hi / np.where(lo > 0, lo, 1.0), 1.0)), 0.0)
            out[sel] = r[sel] * m
    return out


def _gk15_vec(lo, hi, branch, alpha, c2, span_km, p1, p2, p3):
    c = 0.5 * (lo + hi)
    h = 0.5 * (hi - lo)
    w = c[:, None] + h[:, None] * XGK[None, :]
    br = np.broadcast_to(branch[:, None], w.shape)
    f = _integrand_vec(w, br, alpha, c2, span_km, p1, p2, p3)
    ik = h * (f * WGK).sum(axis=1)
    ig = h * (f[:, 1::2] * WG).sum(axis=1)
    return ik, np.abs(ik - ig)


def adaptive_eta(branches, los, his, alpha, c2, span_km, p1, p2, p3, rtol, max_depth):
    """Globally adaptive sum over initial intervals; see the compiled backend."""
    keep = np.asarray(his, dtype=np.float64) > np.asarray(los, dtype=np.float64)
    lo = np.asarray(los, dtype=np.float64)[keep]
    hi = np.asarray(his, dtype=np.float64)[keep]
    br = np.asarray(branches, dtype=np.int64)[keep]
    if lo.size == 0:
        return 0.0, 0.0, 0, True
    depth = np.zeros(lo.size, dtype=np.int64)
    vals, errs = _gk15_vec(lo, hi, br, alpha, c2, span_km, p1, p2, p3)
    nev = 15 * lo.size
    for _ in range(200):
        total = float(vals.sum())
        errsum = float(errs.sum())
        if errsum <= rtol * abs(total) or total == 0.0:
            return total, errsum, nev, True
        thr = rtol * abs(total) / vals.size
        split = (errs > thr) & (depth < max_depth)
        room = _CAP - vals.size
        if room <= 0:
            break
        idx = np.flatnonzero(split)
        if idx.size == 0:
            break
        if idx.size > room:
            idx = idx[:room]
        mid = 0.5 * (lo[idx] + hi[idx])
        l2 = np.concatenate([lo[idx], mid])
        h2 = np.concatenate([mid, hi[idx]])
        b2 = np.concatenate([br[idx], br[idx]])
        v2, e2 = _gk15_vec(l2, h2, b2, alpha, c2, span_km, p1, p2, p3)
        nev += 30 * idx.size
        k = idx.size
        vals[idx] = v2[:k]
        errs[idx] = e2[:k]
        hi = hi.copy()
        hi[idx] = mid
        depth[idx] += 1
        lo = np.concatenate([lo, mid])
        hi = np.concatenate([hi, h2[k:]])
        br = np.concatenate([br, b2[k:]])
        vals = np.concatenate([vals, v2[k:]])
        errs = np.concatenate([errs, e2[k:]])
        depth = np.concatenate([depth, depth[idx]])
    total = float(vals.sum())
    errsum = float(errs.sum())
    return total, errsum, nev, errsum <= rtol * abs(total)


def _strip_point(f1, fc, a2, b2, lo3, hi3, alpha, c2, span_km, rtol):
    f2lo = max(a2, lo3 + fc - f1)
    f2hi = min(b2, hi3 + fc - f1)
    if f2hi <= f2lo:
        return 0.0
    u = f1 - fc
    if u == 0.0:
        att = np.exp(-alpha * span_km)
        r0 = (1.0 - att) * (1.0 - att) / (alpha * alpha)
        return r0 * (f2hi - f2lo)
    wa = u * (f2lo - fc)
    wb = u * (f2hi - fc)
    if wb < wa:
        wa, wb = wb, wa
    v, _, _, _ = adaptive_eta(
        np.array([BR_RHO], np.int64),
        np.array([wa]),
        np.array([wb]),
        alpha,
        c2,
        span_km,
        0.0,
        0.0,
        0.0,
        rtol,
        12,
    )
    return v / abs(u)


def _strip_gk15(lo, hi, fc, a2, b2, lo3, hi3, alpha, c2, span_km, inner_rtol):
    c = 0.5 * (lo + hi)
    h = 0.5 * (hi - lo)
    ik = 0.0
    ig = 0.0
    for i in range(15):
        f = _strip_point(c + h * XGK[i], fc, a2, b2, lo3, hi3, alpha, c2, span_km, inner_rtol)
        ik += WGK[i] * f
        if i % 2 == 1:
            ig += WG[i // 2] * f
    return ik * h, abs(ik * h - ig * h)


def full_spectrum_raw(regions, fc, alpha, c2, span_km, rtol, inner_rtol, max_depth):
    """Brute-force spectral integral; see the compiled backend for the contract."""
    regions = np.asarray(regions, dtype=np.float64)
    total = 0.0
    all_ok = True
    for k in range(regions.shape[0]):
        a1, b1, g, a2, b2, lo3, hi3 = regions[k]
        work = []
        v, e = _strip_gk15(a1, b1, fc, a2, b2, lo3, hi3, alpha, c2, span_km, inner_rtol)
        work.append([a1, b1, v, e, 0])
        converged = False
        for _ in range(60):
            tot = sum(it[2] for it in work)
            errsum = sum(it[3] for it in work)
            if errsum <= rtol * abs(tot) or tot == 0.0:
                converged = True
                break
            thr = rtol * abs(tot) / len(work)
            grew = False
            for it in list(work):
                if it[3] > thr and it[4] < max_depth and len(work) < 2048:
                    lo1, hi1 = it[0], it[1]
                    mid = 0.5 * (lo1 + hi1)
                    v1, e1 = _strip_gk15(lo1, mid, fc, a2, b2, lo3, hi3, alpha, c2, span_km, inner_rtol)
                    v2, e2 = _strip_gk15(mid, hi1, fc, a2, b2, lo3, hi3, alpha, c2, span_km, inner_rtol)
                    it[1] = mid
                    it[2] = v1
                    it[3] = e1
                    it[4] += 1
                    work.append([mid, hi1, v2, e2, it[4]])
                    grew = True
            if not grew:
                break
        tot = sum(it[2] for it in work)
        total += g * tot
        if not converged:
            errsum = sum(it[3] for it in work)
            if errsum > rtol * abs(tot) and tot != 0.0:
                all_ok = False
    return total, all_ok


def warmup() -> None:
    """No compilation needed; present for backend API parity."""

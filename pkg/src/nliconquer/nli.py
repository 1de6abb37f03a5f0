"""Nonlinear-interference coefficients for dispersion-uncompensated links.

Per-span self- and pair-interference coefficients (eta, 1/W^2) come from
adaptive quadrature of the four-wave-mixing kernel over the interacting
spectral regions, reduced to one dimension in the frequency product.
Closed-form approximations and a brute-force full-spectrum integral are
provided for comparison, plus a persistent store so each distinct
coefficient is integrated once.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, QuadratureError
from .phys import (
    FiberParams,
    LinkConfig,
    asymptotic_effective_length_km,
    effective_length_km,
)

GHZ = 1e9
_FOUR_PI2 = 4.0 * math.pi ** 2

_QUAD_CALLS = {"sci": 0, "xci": 0, "full": 0}


def reset_quad_calls() -> None:
    """Zero the module-wide quadrature invocation counters."""
    for k in _QUAD_CALLS:
        _QUAD_CALLS[k] = 0


def quad_call_counts() -> dict:
    """Number of actual integrations performed since the last reset.

    Store hits do not count; this is how cache effectiveness is audited.
    """
    return dict(_QUAD_CALLS)


def kernel_rho(u_hz, v_hz, fiber: FiberParams, span_km: float):
    """Single-span four-wave-mixing efficiency kernel in km^2.

    u and v are frequency offsets from the channel under test in Hz;
    accepts scalars or arrays. rho(0, 0) equals the effective length squared.
    """
    u = np.asarray(u_hz, dtype=np.float64)
    v = np.asarray(v_hz, dtype=np.float64)
    a = fiber.alpha_per_km
    psi = _FOUR_PI2 * fiber.beta2_s2_km * u * v
    att = math.exp(-a * span_km)
    num = 1.0 - 2.0 * att * np.cos(psi * span_km) + att * att
    return num / (a * a + psi * psi)


def _quantize(value: float, limit: int, what: str) -> int:
    q = int(round(value * 100.0))
    if not 0 <= q < limit:
        raise ValueError(f"{what} {value!r} out of storable range")
    return q


@dataclass(frozen=True)
class CoeffKey:
    """Identity of one per-span coefficient, quantized for stable lookup.

    Rates are centi-GBd, spacing is centi-GHz, span length is whole km.
    Integrals are computed from the dequantized values so that any two
    requests mapping to the same key produce the same number.
    """

    kind: str
    rc_cgbd: int
    rk_cgbd: int
    df_cghz: int
    span_km: int

    @classmethod
    def sci(cls, rate_gbd: float, span_km: float) -> "CoeffKey":
        return cls(
            "sci",
            _quantize(rate_gbd, 10_000, "symbol rate"),
            0,
            0,
            _span_int(span_km),
        )

    @classmethod
    def xci(cls, rc_gbd: float, rk_gbd: float, df_ghz: float, span_km: float) -> "CoeffKey":
        return cls(
            "xci",
            _quantize(rc_gbd, 10_000, "symbol rate"),
            _quantize(rk_gbd, 10_000, "symbol rate"),
            _quantize(abs(df_ghz), 1_000_000, "spacing"),
            _span_int(span_km),
        )

    @property
    def rc_gbd(self) -> float:
        return self.rc_cgbd / 100.0

    @property
    def rk_gbd(self) -> float:
        return self.rk_cgbd / 100.0

    @property
    def df_ghz(self) -> float:
        return self.df_cghz / 100.0

    @property
    def packed(self) -> int:
        kind_code = 0 if self.kind == "sci" else 1
        p = (kind_code * 512 + self.span_km) * 1_000_000 + self.df_cghz
        return (p * 10_000 + self.rk_cgbd) * 10_000 + self.rc_cgbd


def _span_int(span_km: float) -> int:
    s = int(round(span_km))
    if not 0 < s < 512:
        raise ValueError(f"span length {span_km!r} out of storable range")
    return s


class SciStore:
    """Persistent append-only store of per-span interference coefficients.

    One JSON object per line; on load the last occurrence of a key wins.
    A sidecar meta file records the fiber parameters the coefficients were
    computed with, and loading under different parameters is refused.
    """

    def __init__(self, path: str | None = None, fiber: FiberParams | None = None):
        self.path = path
        self.fiber = fiber
        self.hits = 0
        self.misses = 0
        self._data: dict[int, float] = {}
        self._pending: list[tuple[CoeffKey, float]] = []
        if path is not None and os.path.exists(path):
            self.load()

    def __len__(self) -> int:
        return len(self._data)

    def __contains__(self, key: CoeffKey) -> bool:
        return key.packed in self._data

    def get(self, key: CoeffKey) -> float | None:
        v = self._data.get(key.packed)
        if v is None:
            self.misses += 1
        else:
            self.hits += 1
        return v

    def put(self, key: CoeffKey, eta: float) -> None:
        packed = key.packed
        if self._data.get(packed) == eta:
            return
        self._data[packed] = eta
        self._pending.append((key, eta))

    @property
    def stats(self) -> dict:
        return {"size": len(self._data), "hits": self.hits, "misses": self.misses}

    def _meta_path(self) -> str:
        return str(self.path) + ".meta.json"

    def load(self) -> int:
        """Read all lines from the backing file; returns entries loaded."""
        if self.path is None:
            raise ConfigError("store has no backing path")
        if self.fiber is not None and os.path.exists(self._meta_path()):
            with open(self._meta_path(), encoding="utf-8") as fh:
                meta = json.load(fh)
            if meta.get("fiber") != self.fiber.as_dict():
                raise ConfigError(
                    f"store {self.path} was built with different fiber parameters"
                )
        loaded = 0
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                d = json.loads(line)
                if d["kind"] == "sci":
                    key = CoeffKey.sci(d["rc"], d["lspan"])
                else:
                    key = CoeffKey.xci(d["rc"], d["rk"], d["df"], d["lspan"])
                self._data[key.packed] = float(d["eta"])
                loaded += 1
        return loaded

    def flush(self) -> int:
        """Append entries added since the last flush; returns lines written."""
        if self.path is None:
            raise ConfigError("store has no backing path")
        if not self._pending and os.path.exists(self.path):
            return 0
        with open(self.path, "a", encoding="utf-8") as fh:
            for key, eta in self._pending:
                fh.write(
                    json.dumps(
                        {
                            "rc": key.rc_gbd,
                            "rk": key.rk_gbd,
                            "df": key.df_ghz,
                            "lspan": key.span_km,
                            "kind": key.kind,
                            "eta": eta,
                        },
                        separators=(",", ":"),
                    )
                    + "\n"
                )
        written = len(self._pending)
        self._pending.clear()
        if self.fiber is not None and not os.path.exists(self._meta_path()):
            with open(self._meta_path(), "w", encoding="utf-8") as fh:
                json.dump({"fiber": self.fiber.as_dict()}, fh, indent=2, sort_keys=True)
                fh.write("\n")
        return written


def _c2(fiber: FiberParams) -> float:
    return _FOUR_PI2 * abs(fiber.beta2_s2_km)


def sci_intervals(rate_gbd: float) -> tuple:
    """Quadrature plan for one self-interference coefficient.

    Returns (branches, los, his, p1, p2, p3) ready for adaptive_eta.
    """
    r = rate_gbd * GHZ / 2.0
    branches = np.array([kernels.common.BR_SCI_TRI, kernels.common.BR_SCI_SQ], np.int64)
    los = np.array([0.0, 0.0])
    his = np.array([r * r / 4.0, r * r])
    return branches, los, his, r, 0.0, 0.0


def xci_intervals(rc_gbd: float, rk_gbd: float, df_ghz: float) -> tuple:
    """Quadrature plan for one pair-interference coefficient."""
    b = rk_gbd * GHZ / 2.0
    a = min(rc_gbd * GHZ / 2.0, 2.0 * b)
    df = df_ghz * GHZ
    if df < (rc_gbd + rk_gbd) * GHZ / 2.0:
        raise ValueError(
            f"spacing {df_ghz} GHz under half-bandwidth sum of "
            f"{rc_gbd} and {rk_gbd} GBd carriers"
        )
    w2 = a * (df + b - a)
    w1 = min(a * (df - b), w2)
    n2 = a * (df + b)
    n1 = min(a * (df - b + a), n2)
    branches = np.array(
        [kernels.common.BR_XCI_POS, kernels.common.BR_XCI_POS,
         kernels.common.BR_XCI_NEG, kernels.common.BR_XCI_NEG],
        np.int64,
    )
    los = np.array([0.0, w1, 0.0, n1])
    his = np.array([w1, w2, n1, n2])
    return branches, los, his, a, df, b


def _compute_sci(rate_gbd: float, fiber: FiberParams, span_km: float, rtol: float) -> float:
    _QUAD_CALLS["sci"] += 1
    branches, los, his, p1, p2, p3 = sci_intervals(rate_gbd)
    val, _err, _nev, ok = kernels.adaptive_eta(
        branches, los, his, fiber.alpha_per_km, _c2(fiber), span_km,
        p1, p2, p3, rtol, kernels.MAX_DEPTH,
    )
    if not ok:
        raise QuadratureError(f"self-interference integral did not converge at {rate_gbd} GBd")
    g2 = fiber.gamma_per_w_km ** 2
    return (16.0 / 27.0) * g2 * 2.0 * val / (rate_gbd * GHZ) ** 2


def _compute_xci(
    rc_gbd: float, rk_gbd: float, df_ghz: float, fiber: FiberParams, span_km: float, rtol: float
) -> float:
    _QUAD_CALLS["xci"] += 1
    branches, los, his, p1, p2, p3 = xci_intervals(rc_gbd, rk_gbd, df_ghz)
    val, _err, _nev, ok = kernels.adaptive_eta(
        branches, los, his, fiber.alpha_per_km, _c2(fiber), span_km,
        p1, p2, p3, rtol, kernels.MAX_DEPTH,
    )
    if not ok:
        raise QuadratureError(
            f"pair integral did not converge: {rc_gbd}/{rk_gbd} GBd at {df_ghz} GHz"
        )
    g2 = fiber.gamma_per_w_km ** 2
    return (32.0 / 27.0) * g2 * val / (rk_gbd * GHZ) ** 2


def sci_integral(
    rate_gbd: float,
    fiber: FiberParams,
    span_km: float,
    *,
    rtol: float = kernels.DEFAULT_RTOL,
    store: SciStore | None = None,
) -> float:
    """Per-span self-interference coefficient in 1/W^2, store-cached."""
    key = CoeffKey.sci(rate_gbd, span_km)
    if store is not None:
        v = store.get(key)
        if v is not None:
            return v
    eta = _compute_sci(key.rc_gbd, fiber, float(key.span_km), rtol)
    if store is not None:
        store.put(key, eta)
    return eta


def xci_pair_integral(
    rc_gbd: float,
    rk_gbd: float,
    df_ghz: float,
    fiber: FiberParams,
    span_km: float,
    *,
    rtol: float = kernels.DEFAULT_RTOL,
    store: SciStore | None = None,
) -> float:
    """Per-span pair-interference coefficient in 1/W^2, store-cached.

    rc is the channel under test, rk the interferer, df their center
    spacing (sign ignored).
    """
    key = CoeffKey.xci(rc_gbd, rk_gbd, df_ghz, span_km)
    if store is not None:
        v = store.get(key)
        if v is not None:
            return v
    eta = _compute_xci(key.rc_gbd, key.rk_gbd, key.df_ghz, fiber, float(key.span_km), rtol)
    if store is not None:
        store.put(key, eta)
    return eta


def closed_form_sci(rate_gbd: float, fiber: FiberParams, span_km: float) -> float:
    """Analytic per-span self-interference approximation in 1/W^2."""
    leff = effective_length_km(fiber.alpha_db_km, span_km)
    leffa = asymptotic_effective_length_km(fiber.alpha_db_km)
    r2 = (rate_gbd * GHZ) ** 2
    b2 = abs(fiber.beta2_s2_km)
    x = 0.5 * math.pi ** 2 * b2 * leffa * r2
    g2 = fiber.gamma_per_w_km ** 2
    return (8.0 / 27.0) * g2 * leff * leff * math.asinh(x) / (math.pi * b2 * leffa * r2)


def closed_form_xci(
    rc_gbd: float, rk_gbd: float, df_ghz: float, fiber: FiberParams, span_km: float
) -> float:
    """Analytic per-span pair-interference approximation in 1/W^2."""
    df = abs(df_ghz)
    if df <= rk_gbd / 2.0:
        raise ValueError("spacing must exceed the interferer half-bandwidth")
    leff = effective_length_km(fiber.alpha_db_km, span_km)
    leffa = asymptotic_effective_length_km(fiber.alpha_db_km)
    b2 = abs(fiber.beta2_s2_km)
    g2 = fiber.gamma_per_w_km ** 2
    ratio = (df + rk_gbd / 2.0) / (df - rk_gbd / 2.0)
    rk2 = (rk_gbd * GHZ) ** 2
    return (16.0 / 27.0) * g2 * leff * leff * math.log(ratio) / (math.pi * b2 * leffa * rk2)


@dataclass(frozen=True)
class NliBreakdown:
    """Link NLI variance with its per-span coefficient factors."""

    sigma2_w: float
    eta_sci: float
    eta_xci: tuple[float, ...]


def oracle_nli(
    link: LinkConfig,
    cut_index: int,
    fiber: FiberParams,
    store: SciStore | None = None,
    rtol: float = kernels.DEFAULT_RTOL,
) -> NliBreakdown:
    """Quadrature-based NLI variance for one channel, spans added incoherently."""
    cut = link.channels[cut_index]
    pc = cut.launch_power_w
    eta_s = sci_integral(cut.symbol_rate_gbd, fiber, link.span_km, rtol=rtol, store=store)
    per_span = eta_s * pc ** 3
    etas = []
    for k, ch in enumerate(link.channels):
        if k == cut_index:
            continue
        df = abs(ch.center_freq_ghz - cut.center_freq_ghz)
        e = xci_pair_integral(
            cut.symbol_rate_gbd, ch.symbol_rate_gbd, df, fiber, link.span_km,
            rtol=rtol, store=store,
        )
        etas.append(e)
        per_span += e * pc * ch.launch_power_w ** 2
    return NliBreakdown(link.n_spans * per_span, eta_s, tuple(etas))


def closed_form_nli(link: LinkConfig, cut_index: int, fiber: FiberParams) -> NliBreakdown:
    """Closed-form NLI variance for one channel, same accumulation rule."""
    cut = link.channels[cut_index]
    pc = cut.launch_power_w
    eta_s = closed_form_sci(cut.symbol_rate_gbd, fiber, link.span_km)
    per_span = eta_s * pc ** 3
    etas = []
    for k, ch in enumerate(link.channels):
        if k == cut_index:
            continue
        df = abs(ch.center_freq_ghz - cut.center_freq_ghz)
        e = closed_form_xci(cut.symbol_rate_gbd, ch.symbol_rate_gbd, df, fiber, link.span_km)
        etas.append(e)
        per_span += e * pc * ch.launch_power_w ** 2
    return NliBreakdown(link.n_spans * per_span, eta_s, tuple(etas))


def full_spectrum_integral(
    link: LinkConfig,
    cut_index: int,
    fiber: FiberParams,
    rtol: float = 1e-5,
    inner_rtol: float = 1e-6,
) -> float:
    """Brute-force NLI variance without the pairwise decomposition.

    Integrates the kernel against the product of three flat spectral
    densities over the whole occupied band. Verification oracle only; cost
    grows quickly with channel count.
    """
    _QUAD_CALLS["full"] += 1
    cut = link.channels[cut_index]
    fc = cut.center_freq_ghz * GHZ
    rc = cut.symbol_rate_gbd * GHZ
    segs = []
    for ch in sorted(link.channels, key=lambda c: c.center_freq_ghz):
        r = ch.symbol_rate_gbd * GHZ
        center = ch.center_freq_ghz * GHZ
        segs.append((center - r / 2.0, center + r / 2.0, ch.launch_power_w / r))
    f1segs = []
    for lo, hi, g in segs:
        if lo < fc < hi:
            f1segs.append((lo, fc, g))
            f1segs.append((fc, hi, g))
        else:
            f1segs.append((lo, hi, g))
    rows = []
    for a1, b1, g1 in f1segs:
        for a2, b2, g2 in segs:
            for lo3, hi3, g3 in segs:
                wlo = max(a1, lo3 + fc - b2)
                whi = min(b1, hi3 + fc - a2)
                if whi <= wlo:
                    continue
                cuts = [wlo, whi]
                for kink in (lo3 + fc - a2, hi3 + fc - b2):
                    if wlo < kink < whi:
                        cuts.append(kink)
                cuts.sort()
                for i in range(len(cuts) - 1):
                    if cuts[i + 1] > cuts[i]:
                        rows.append(
                            (cuts[i], cuts[i + 1], g1 * g2 * g3, a2, b2, lo3, hi3)
                        )
    regions = np.array(rows, dtype=np.float64)
    raw, ok = kernels.full_spectrum_raw(
        regions, fc, fiber.alpha_per_km, _c2(fiber), link.span_km, rtol, inner_rtol, 10
    )
    if not ok:
        raise QuadratureError("full-spectrum integral did not converge")
    sigma2_span = (16.0 / 27.0) * fiber.gamma_per_w_km ** 2 * rc * raw
    return link.n_spans * sigma2_span

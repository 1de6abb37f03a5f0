"""Interference coefficients: quadrature, closed forms, and the store.

Reference numbers were computed with an independent general-purpose
adaptive integrator over the same kernel and are frozen here; the in-repo
quadrature must stay within its stated tolerance of them.
"""

import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from nliconquer import kernels
from nliconquer.errors import ConfigError
from nliconquer.nli import (
    CoeffKey,
    SciStore,
    closed_form_nli,
    closed_form_sci,
    closed_form_xci,
    full_spectrum_integral,
    kernel_rho,
    oracle_nli,
    quad_call_counts,
    reset_quad_calls,
    sci_integral,
    xci_pair_integral,
)
from nliconquer.phys import FiberParams, LinkConfig, effective_length_km, make_channel

REL = 1e-3  # quadrature rtol is 1e-4; references carry their own ~1e-4

SCI_REFS = [
    # (rate_gbd, span_km, eta_per_span)
    (35.0, 80.0, 212.5731),
    (87.5, 80.0, 72.9348),
    (11.67, 80.0, 330.1899),
    (35.0, 60.0, 206.556),
    (35.0, 100.0, 214.070),
    (35.0, 120.0, 214.495),
]

XCI_REFS = [
    # (rc_gbd, rk_gbd, df_ghz, span_km, eta_per_span)
    (35.0, 35.0, 50.0, 80.0, 85.1043),
    (35.0, 35.0, 100.0, 80.0, 43.4605),
    (35.0, 35.0, 200.0, 80.0, 22.1323),
    (35.0, 35.0, 1000.0, 80.0, 4.5199),
    (35.0, 35.0, 50.0, 120.0, 85.1793),
    (87.5, 11.67, 62.5, 80.0, 181.771),
]


@pytest.mark.parametrize("rate,span,ref", SCI_REFS)
def test_sci_reference_values(fiber, rate, span, ref):
    assert sci_integral(rate, fiber, span) == pytest.approx(ref, rel=REL)


@pytest.mark.parametrize("rc,rk,df,span,ref", XCI_REFS)
def test_xci_reference_values(fiber, rc, rk, df, span, ref):
    assert xci_pair_integral(rc, rk, df, fiber, span) == pytest.approx(ref, rel=REL)


def test_xci_symmetric_in_spacing_sign(fiber):
    pos = xci_pair_integral(35.0, 70.0, 75.0, fiber, 80.0)
    neg = xci_pair_integral(35.0, 70.0, -75.0, fiber, 80.0)
    assert pos == neg


def test_xci_overlapping_channels_rejected(fiber):
    with pytest.raises(ValueError):
        xci_pair_integral(35.0, 35.0, 30.0, fiber, 80.0)  # bands overlap


def test_kernel_rho_at_origin_is_effective_length_squared(fiber):
    leff2 = effective_length_km(fiber.alpha_db_km, 80.0) ** 2
    assert kernel_rho(0.0, 0.0, fiber, 80.0) == pytest.approx(leff2, rel=1e-12)
    assert leff2 == pytest.approx(448.13819924037205, rel=1e-12)


def test_closed_form_reference_values(fiber):
    assert closed_form_sci(35.0, fiber, 80.0) == pytest.approx(218.9561, rel=1e-6)
    assert closed_form_xci(35.0, 35.0, 50.0, fiber, 80.0) == pytest.approx(
        180.8862, rel=1e-6
    )
    with pytest.raises(ValueError):
        closed_form_xci(35.0, 35.0, 17.0, fiber, 80.0)


def test_closed_form_matches_inline_formula(fiber):
    # independent transcription of the analytic expressions
    leff = effective_length_km(fiber.alpha_db_km, 80.0)
    leffa = 1.0 / fiber.alpha_per_km
    b2 = abs(fiber.beta2_s2_km)
    r2 = (35.0e9) ** 2
    x = 0.5 * math.pi ** 2 * b2 * leffa * r2
    want = (8.0 / 27.0) * fiber.gamma_per_w_km ** 2 * leff ** 2 * math.asinh(x) / (
        math.pi * b2 * leffa * r2
    )
    assert closed_form_sci(35.0, fiber, 80.0) == pytest.approx(want, rel=1e-12)


def test_tolerance_halving_converges(fiber):
    coarse = sci_integral(35.0, fiber, 80.0, rtol=1e-4)
    fine = sci_integral(35.0, fiber, 80.0, rtol=5e-5)
    assert abs(coarse - fine) / fine < 2e-4
    coarse = xci_pair_integral(35.0, 35.0, 50.0, fiber, 80.0, rtol=1e-4)
    fine = xci_pair_integral(35.0, 35.0, 50.0, fiber, 80.0, rtol=5e-5)
    assert abs(coarse - fine) / fine < 2e-4


def _three_channel_link() -> LinkConfig:
    return LinkConfig(
        span_km=80.0,
        n_spans=1,
        channels=(
            make_channel(0, "QPSK", 100),
            make_channel(6, "16QAM", 300),
            make_channel(14, "QPSK", 200),
        ),
    )


def test_oracle_nli_decomposition_matches_full_spectrum(fiber):
    link = _three_channel_link()
    for cut in range(3):
        dec = oracle_nli(link, cut, fiber).sigma2_w
        full = full_spectrum_integral(link, cut, fiber)
        assert abs(10 * math.log10(dec / full)) < 0.2


def test_oracle_nli_span_scaling_and_monotonicity(fiber):
    base = LinkConfig(span_km=80.0, n_spans=1, channels=(make_channel(0, "QPSK", 100),))
    multi = LinkConfig(span_km=80.0, n_spans=7, channels=base.channels)
    assert oracle_nli(multi, 0, fiber).sigma2_w == pytest.approx(
        7 * oracle_nli(base, 0, fiber).sigma2_w, rel=1e-12
    )
    # adding an interferer strictly increases the variance
    crowded = LinkConfig(
        span_km=80.0, n_spans=1,
        channels=(make_channel(0, "QPSK", 100), make_channel(30, "QPSK", 100)),
    )
    assert oracle_nli(crowded, 0, fiber).sigma2_w > oracle_nli(base, 0, fiber).sigma2_w


def test_closed_form_nli_same_shape_as_oracle(fiber):
    link = _three_channel_link()
    cf = closed_form_nli(link, 1, fiber)
    orc = oracle_nli(link, 1, fiber)
    assert len(cf.eta_xci) == len(orc.eta_xci) == 2
    assert cf.sigma2_w > 0.0


def test_store_roundtrip_and_quantization(fiber, tmp_path):
    path = str(tmp_path / "store.jsonl")
    store = SciStore(path=path, fiber=fiber)
    key = CoeffKey.xci(35.0, 35.0, 50.0, 80.0)
    assert store.get(key) is None
    store.put(key, 85.1043)
    # sub-centi perturbations quantize to the same key
    assert CoeffKey.xci(35.001, 35.0, 50.004, 80.0) == key
    assert key in store
    store.flush()
    reloaded = SciStore(path=path, fiber=fiber)
    assert reloaded.get(key) == 85.1043
    assert len(reloaded) == 1


def test_store_last_write_wins(fiber, tmp_path):
    path = str(tmp_path / "store.jsonl")
    store = SciStore(path=path, fiber=fiber)
    key = CoeffKey.sci(35.0, 80.0)
    store.put(key, 1.0)
    store.flush()
    store.put(key, 2.0)
    store.flush()
    assert SciStore(path=path, fiber=fiber).get(key) == 2.0


def test_store_rejects_other_fiber(fiber, tmp_path):
    path = str(tmp_path / "store.jsonl")
    store = SciStore(path=path, fiber=fiber)
    store.put(CoeffKey.sci(35.0, 80.0), 1.0)
    store.flush()
    other = FiberParams(alpha_db_km=0.25)
    with pytest.raises(ConfigError):
        SciStore(path=path, fiber=other)


def test_store_counts_hits_and_misses(fiber, tmp_path):
    store = SciStore(path=str(tmp_path / "store.jsonl"), fiber=fiber)
    sci_integral(35.0, fiber, 80.0, store=store)
    assert store.stats["misses"] == 1
    sci_integral(35.0, fiber, 80.0, store=store)
    assert store.stats["hits"] == 1
    assert store.stats["misses"] == 1


def test_quad_call_counters(fiber):
    reset_quad_calls()
    sci_integral(35.0, fiber, 80.0)
    xci_pair_integral(35.0, 35.0, 50.0, fiber, 80.0)
    counts = quad_call_counts()
    assert sum(counts.values()) >= 2
    reset_quad_calls()
    assert sum(quad_call_counts().values()) == 0


def test_numpy_backend_matches_active(fiber):
    """The fallback kernels must agree with the active backend to rounding."""
    script = (
        "from nliconquer.phys import FiberParams\n"
        "from nliconquer.nli import sci_integral, xci_pair_integral\n"
        "from nliconquer import kernels\n"
        "f = FiberParams()\n"
        "print(kernels.BACKEND)\n"
        "print(repr(sci_integral(35.0, f, 80.0)))\n"
        "print(repr(xci_pair_integral(35.0, 35.0, 50.0, f, 80.0)))\n"
    )
    env = dict(os.environ, NLICONQUER_NO_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", script], env=env, capture_output=True, text=True,
        check=True,
    ).stdout.splitlines()
    assert out[0] == "numpy"
    assert float(out[1]) == pytest.approx(sci_integral(35.0, fiber, 80.0), rel=1e-12)
    assert float(out[2]) == pytest.approx(
        xci_pair_integral(35.0, 35.0, 50.0, fiber, 80.0), rel=1e-12
    )

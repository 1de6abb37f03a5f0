"""Latency benchmarks for the estimation paths and the kernel backends.

Measures, on one densely loaded link, the per-channel cost of model
inference, the closed-form estimate, and the integral oracle with a cold
and a warm coefficient store. Optionally times identical quadrature and
tree workloads on both kernel backends.
"""

from __future__ import annotations

import time

import numpy as np

from . import kernels
from .dataset import LinkFeatures
from .errors import ConfigError
from .gbm import GbmModel
from .nli import (
    SciStore,
    _c2,
    closed_form_nli,
    oracle_nli,
    sci_intervals,
    xci_intervals,
)
from .phys import FiberParams, LinkConfig, make_channel


def benchmark_link(
    n_channels: int, span_km: float = 80.0, n_spans: int = 12
) -> LinkConfig:
    """Adjacent equal-rate channels filling the band from slot 0 up."""
    ch = make_channel(0, "QPSK", 100)
    chans = [
        make_channel(i * ch.slot_count, "QPSK", 100) for i in range(n_channels)
    ]
    last = chans[-1]
    band = max(400, last.start_slot + last.slot_count)
    return LinkConfig(span_km=span_km, n_spans=n_spans, channels=tuple(chans), band_slots=band)


def _time_call(fn, repeats: int, chunks: int = 5) -> float:
    """Seconds per call: best chunk mean, first chunk discarded as warmup."""
    best = float("inf")
    for c in range(chunks + 1):
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn()
        dt = (time.perf_counter() - t0) / repeats
        if c > 0 and dt < best:
            best = dt
    return best


def _compare_backends(model: GbmModel | None, fiber: FiberParams, repeats: int) -> dict:
    alpha = fiber.alpha_per_km
    c2 = _c2(fiber)
    sci_plan = sci_intervals(35.0)
    xci_plan = xci_intervals(35.0, 35.0, 50.0)
    rng = np.random.default_rng(0)
    xmat = rng.uniform(-40.0, 40.0, size=(1000, 25))

    out: dict = {}
    for name in ("numba", "numpy"):
        try:
            backend = kernels.load_backend(name)
        except ImportError:
            out[name] = {"available": False}
            continue
        backend["warmup"]()
        eta = backend["adaptive_eta"]

        def run_sci():
            b, lo, hi, p1, p2, p3 = sci_plan
            eta(b, lo, hi, alpha, c2, 80.0, p1, p2, p3, kernels.DEFAULT_RTOL, kernels.MAX_DEPTH)

        def run_xci():
            b, lo, hi, p1, p2, p3 = xci_plan
            eta(b, lo, hi, alpha, c2, 80.0, p1, p2, p3, kernels.DEFAULT_RTOL, kernels.MAX_DEPTH)

        entry = {
            "available": True,
            "sci_integral_s": _time_call(run_sci, repeats),
            "xci_integral_s": _time_call(run_xci, repeats),
        }
        if model is not None:
            feat, thr, left, right, val, offsets = model._pack()
            base = model.base_score
            predict = backend["predict_forest"]
            out_buf = np.empty(xmat.shape[0])

            def run_predict():
                predict(xmat, feat, thr, left, right, val, offsets, base, out_buf)

            entry["predict_1000x25_s"] = _time_call(run_predict, max(1, repeats // 10))
        out[name] = entry

    if out.get("numba", {}).get("available") and out.get("numpy", {}).get("available"):
        out["speedup_numba_over_numpy"] = {
            k: out["numpy"][k] / out["numba"][k]
            for k in ("sci_integral_s", "xci_integral_s", "predict_1000x25_s")
            if k in out["numba"] and k in out["numpy"]
        }
    return out


def run_bench(
    fiber: FiberParams,
    model: GbmModel | None = None,
    n_channels: int = 80,
    repeats: int = 100,
    compare_backends: bool = False,
) -> dict:
    """Time each estimation path; returns a report dict with timings in seconds.

    The "ml" figure is the amortized per-channel cost of assembling the
    feature matrix for the whole link and predicting it in one batch, the
    unit of work the evaluation pipeline actually performs. The oracle
    figure is one channel with an empty coefficient store.
    """
    kernels.warmup()
    link = benchmark_link(n_channels)
    cut = len(link.channels) // 2
    n = len(link.channels)

    store = SciStore(fiber=fiber)
    oracle_nli(link, cut, fiber, store=store)
    for i in range(n):
        oracle_nli(link, i, fiber, store=store)

    report: dict = {
        "backend": kernels.BACKEND,
        "n_channels": n,
        "span_km": link.span_km,
        "n_spans": link.n_spans,
    }

    if model is not None:
        if model.predict(np.zeros((1, 25))).shape != (1,):
            raise ConfigError("model does not map 25 features to one output")

        def run_ml_batch():
            feats = LinkFeatures(link, fiber, store=store)
            model.predict(feats.matrix())

        feats = LinkFeatures(link, fiber, store=store)
        row = feats.row(cut).reshape(1, -1)

        def run_ml_row():
            model.predict(feats.row(cut).reshape(1, -1))

        model.predict(row)
        report["ml_link_s"] = _time_call(run_ml_batch, max(1, repeats // 4))
        report["ml_per_channel_s"] = report["ml_link_s"] / n
        report["ml_single_row_s"] = _time_call(run_ml_row, repeats)

    def run_cf():
        closed_form_nli(link, cut, fiber)

    def run_oracle_cold():
        oracle_nli(link, cut, fiber, store=None)

    def run_oracle_warm():
        oracle_nli(link, cut, fiber, store=store)

    report["closed_form_per_channel_s"] = _time_call(run_cf, repeats)
    report["oracle_cold_per_channel_s"] = _time_call(run_oracle_cold, max(1, repeats // 20))
    report["oracle_warm_per_channel_s"] = _time_call(run_oracle_warm, max(1, repeats // 4))

    if model is not None:
        ml = report["ml_per_channel_s"]
        report["speedup_ml_vs_oracle_cold"] = report["oracle_cold_per_channel_s"] / ml
        report["ml_faster_than_closed_form"] = ml < report["closed_form_per_channel_s"]
        report["ordering_ok"] = (
            ml < report["closed_form_per_channel_s"] < report["oracle_cold_per_channel_s"]
        )

    if compare_backends:
        report["backends"] = _compare_backends(model, fiber, repeats)
    return report

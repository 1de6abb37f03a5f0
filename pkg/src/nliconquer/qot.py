"""SNR estimation with selectable NLI engines and error-CDF evaluation.

Three engines share one interface: the surrogate model ('ml'), the analytic
approximation ('gn'), and the quadrature oracle ('oracle'). Accuracy is
always judged against the oracle.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import kernels
from .dataset import LinkFeatures
from .errors import ConfigError
from .gbm import GbmModel
from .nli import SciStore, closed_form_nli, oracle_nli
from .phys import FiberParams, LinkConfig, ase_variance_w

MODES = ("ml", "gn", "oracle")


@dataclass(frozen=True)
class SnrResult:
    snr_db: float
    sigma2_ase_w: float
    sigma2_nli_w: float


class Estimator:
    """Per-channel SNR estimator over a single link's spectrum.

    nli_evaluations counts channel NLI estimates requested, independent of
    the engine, so workloads can be compared across engines.
    """

    def __init__(
        self,
        mode: str,
        fiber: FiberParams,
        model: GbmModel | None = None,
        store: SciStore | None = None,
        rtol: float = kernels.DEFAULT_RTOL,
    ):
        if mode not in MODES:
            raise ConfigError(f"estimator mode must be one of {MODES}")
        if mode == "ml" and model is None:
            raise ConfigError("ml estimator needs a trained model")
        self.mode = mode
        self.fiber = fiber
        self.model = model
        self.store = store
        self.rtol = rtol
        self.nli_evaluations = 0

    def eta_db_link(self, link: LinkConfig) -> np.ndarray:
        """Aggregate NLI coefficient 10*log10(sigma2/P^3) for every channel."""
        n = len(link.channels)
        self.nli_evaluations += n
        if self.mode == "ml":
            feats = LinkFeatures(link, self.fiber, self.store, self.rtol)
            return self.model.predict(feats.matrix())
        out = np.empty(n)
        for i, ch in enumerate(link.channels):
            if self.mode == "gn":
                br = closed_form_nli(link, i, self.fiber)
            else:
                br = oracle_nli(link, i, self.fiber, store=self.store, rtol=self.rtol)
            out[i] = 10.0 * math.log10(br.sigma2_w / ch.launch_power_w ** 3)
        return out

    def link_noise(self, link: LinkConfig) -> list[SnrResult]:
        """Noise variances and SNR for every channel on the link."""
        eta_db = self.eta_db_link(link)
        out = []
        for i, ch in enumerate(link.channels):
            p = ch.launch_power_w
            ase = ase_variance_w(
                self.fiber, link.span_km, link.n_spans, ch.symbol_rate_gbd * 1e9
            )
            nli = 10.0 ** (eta_db[i] / 10.0) * p ** 3
            snr = 10.0 * math.log10(p / (ase + nli))
            out.append(SnrResult(snr_db=snr, sigma2_ase_w=ase, sigma2_nli_w=nli))
        return out

    def snr_db(self, link: LinkConfig, cut_index: int) -> float:
        return self.link_noise(link)[cut_index].snr_db


@dataclass
class EvalReport:
    """Per-channel estimation errors against the oracle, with summary stats."""

    mode: str
    rows: list[dict]
    stats: dict

    def cdf(self) -> tuple[np.ndarray, np.ndarray]:
        errs = np.sort(np.abs(np.array([r["error_db"] for r in self.rows])))
        frac = np.arange(1, errs.size + 1) / errs.size
        return errs, frac


def evaluate(
    links: list[tuple[int, LinkConfig]],
    estimator: Estimator,
    fiber: FiberParams,
    store: SciStore | None = None,
) -> EvalReport:
    """Estimate SNR for every channel of every link; compare to the oracle."""
    oracle = Estimator("oracle", fiber, store=store)
    rows = []
    for link_id, link in links:
        est = estimator.link_noise(link)
        ref = oracle.link_noise(link)
        for cut in range(len(link.channels)):
            err = est[cut].snr_db - ref[cut].snr_db
            rows.append(
                {
                    "link_id": link_id,
                    "cut_index": cut,
                    "snr_est_db": est[cut].snr_db,
                    "snr_oracle_db": ref[cut].snr_db,
                    "error_db": err,
                }
            )
    abs_err = np.abs(np.array([r["error_db"] for r in rows]))
    signed = np.array([r["error_db"] for r in rows])
    stats = {
        "n": int(abs_err.size),
        "mean_abs_db": float(abs_err.mean()),
        "median_abs_db": float(np.median(abs_err)),
        "p95_abs_db": float(np.quantile(abs_err, 0.95)),
        "p99_abs_db": float(np.quantile(abs_err, 0.99)),
        "max_abs_db": float(abs_err.max()),
        "mean_signed_db": float(signed.mean()),
        "std_signed_db": float(signed.std()),
    }
    return EvalReport(mode=estimator.mode, rows=rows, stats=stats)


def write_report(report: EvalReport, out_dir: str) -> dict:
    """Write report.json, cdf.csv, and errors.csv; returns the file map."""
    os.makedirs(out_dir, exist_ok=True)
    errs, frac = report.cdf()
    cdf_path = os.path.join(out_dir, "cdf.csv")
    with open(cdf_path, "w", encoding="utf-8") as fh:
        fh.write("abs_error_db,fraction\n")
        for e, f in zip(errs, frac):
            fh.write(f"{e!r},{f!r}\n")
    rows_path = os.path.join(out_dir, "errors.csv")
    with open(rows_path, "w", encoding="utf-8") as fh:
        fh.write("link_id,cut_index,snr_est_db,snr_oracle_db,error_db\n")
        for r in report.rows:
            fh.write(
                f"{r['link_id']},{r['cut_index']},{r['snr_est_db']!r},"
                f"{r['snr_oracle_db']!r},{r['error_db']!r}\n"
            )
    report_path = os.path.join(out_dir, "report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump({"estimator": report.mode, "stats": report.stats}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"report": report_path, "cdf": cdf_path, "errors": rows_path}

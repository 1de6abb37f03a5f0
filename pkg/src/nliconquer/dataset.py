"""Training-data generation: link sampling, feature extraction, CSV output.

Each generated link contributes one row per channel, with that channel as
the channel under test. Features are built only from per-channel
self-interference coefficients and spectrum geometry, so that a trained
model can replace the expensive pairwise integrations at inference time.
The regression target is the channel's aggregate interference coefficient
10*log10(sigma2_nli / P^3) over the whole link.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError
from .nli import SciStore, oracle_nli, sci_integral
from .phys import (
    BAND_SLOTS,
    FiberParams,
    LinkConfig,
    VALID_COMBOS,
    make_channel,
    slot_footprint,
    symbol_rate_gbd,
)

N_NEIGHBORS = 10
FEATURE_COUNT = 5 + 2 * N_NEIGHBORS
SCI_PAD_DB = -100.0
DF_PAD_GHZ = 6000.0

_MIN_FOOTPRINT = min(slot_footprint(symbol_rate_gbd(r, m)) for m, r in VALID_COMBOS)


@dataclass(frozen=True)
class GenConfig:
    """Sampling space for generated links.

    Most links target a densely filled band, but a sparse tail keeps lightly
    loaded spectra in distribution: QoT queries during network planning hit
    near-empty bands constantly, and a model trained only on dense spectra
    extrapolates badly there (several dB of NLI overestimation for an
    isolated channel).
    """

    n_links: int = 500
    seed: int = 1234
    fill_lo: float = 0.75
    fill_hi: float = 0.95
    sparse_frac: float = 0.2
    sparse_lo: float = 0.02
    span_choices: tuple[float, ...] = (60.0, 80.0, 100.0, 120.0)
    max_spans: int = 50
    band_slots: int = BAND_SLOTS
    scale: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.fill_lo <= self.fill_hi <= 1.0:
            raise ConfigError("fill range must satisfy 0 < lo <= hi <= 1")
        if not 0.0 <= self.sparse_frac <= 1.0:
            raise ConfigError("sparse_frac must lie in [0, 1]")
        if not 0.0 < self.sparse_lo <= self.fill_lo:
            raise ConfigError("sparse_lo must satisfy 0 < sparse_lo <= fill_lo")
        if self.n_links < 1 or self.scale <= 0.0:
            raise ConfigError("n_links and scale must be positive")

    @property
    def effective_links(self) -> int:
        return max(1, int(round(self.n_links * self.scale)))


def sample_link(rng: np.random.Generator, cfg: GenConfig) -> LinkConfig:
    """Draw one link: span geometry, fill target, then channels until full.

    The fill target comes from the dense range [fill_lo, fill_hi] most of the
    time and from the sparse tail [sparse_lo, fill_lo) with probability
    sparse_frac. Channels are drawn uniformly from the valid
    (modulation, rate) set and placed on a uniformly chosen feasible slot
    run. A draw whose footprint
    would push occupancy past the fill target ends the loop; a draw that no
    longer fits anywhere is rejected and redrawn while smaller footprints
    still fit.
    """
    span_km = float(cfg.span_choices[rng.integers(len(cfg.span_choices))])
    n_spans = int(rng.integers(1, cfg.max_spans + 1))
    if rng.uniform() < cfg.sparse_frac:
        target = rng.uniform(cfg.sparse_lo, cfg.fill_lo) * cfg.band_slots
    else:
        target = rng.uniform(cfg.fill_lo, cfg.fill_hi) * cfg.band_slots
    free = np.ones(cfg.band_slots, dtype=bool)
    occupied = 0
    chans = []
    while True:
        mod, rate = VALID_COMBOS[rng.integers(len(VALID_COMBOS))]
        fp = slot_footprint(symbol_rate_gbd(rate, mod))
        if occupied + fp > target:
            break
        starts = _feasible_starts(free, fp)
        if starts.size == 0:
            if _feasible_starts(free, _MIN_FOOTPRINT).size == 0:
                break
            continue
        s = int(starts[rng.integers(starts.size)])
        free[s : s + fp] = False
        occupied += fp
        chans.append(make_channel(s, mod, rate))
    chans.sort(key=lambda c: c.start_slot)
    return LinkConfig(span_km=span_km, n_spans=n_spans, channels=tuple(chans),
                      band_slots=cfg.band_slots)


def _feasible_starts(free: np.ndarray, fp: int) -> np.ndarray:
    if fp > free.size:
        return np.empty(0, dtype=np.int64)
    runs = np.convolve(free.astype(np.int64), np.ones(fp, dtype=np.int64), "valid")
    return np.flatnonzero(runs == fp)


def feature_names() -> list[str]:
    names = ["sci_cut_db"]
    names += [f"sci_nbr{i:02d}_db" for i in range(1, N_NEIGHBORS + 1)]
    names += [f"df_nbr{i:02d}_ghz" for i in range(1, N_NEIGHBORS + 1)]
    names += ["power_dbm", "n_channels", "span_km", "n_spans"]
    return names


class LinkFeatures:
    """Per-link feature context: self-interference terms computed once.

    Row assembly per channel is then cheap, which is what makes inference
    fast once the store is warm.
    """

    def __init__(
        self,
        link: LinkConfig,
        fiber: FiberParams,
        store: SciStore | None = None,
        rtol: float = kernels.DEFAULT_RTOL,
    ):
        self.link = link
        n = len(link.channels)
        self.freqs_ghz = np.array([c.center_freq_ghz for c in link.channels])
        sci_db = np.empty(n)
        for i, ch in enumerate(link.channels):
            eta = sci_integral(ch.symbol_rate_gbd, fiber, link.span_km, rtol=rtol, store=store)
            sci_db[i] = 10.0 * math.log10(eta)
        self.sci_db_link = sci_db + 10.0 * math.log10(link.n_spans)
        self.powers_dbm = np.array([c.launch_power_dbm for c in link.channels])

    def row(self, cut_index: int) -> np.ndarray:
        link = self.link
        n = len(link.channels)
        x = np.empty(FEATURE_COUNT)
        x[0] = self.sci_db_link[cut_index]
        others = np.delete(np.arange(n), cut_index)
        df = self.freqs_ghz[others] - self.freqs_ghz[cut_index]
        order = np.lexsort((self.freqs_ghz[others], np.abs(df)))[:N_NEIGHBORS]
        k = order.size
        x[1 : 1 + k] = self.sci_db_link[others][order]
        x[1 + k : 1 + N_NEIGHBORS] = SCI_PAD_DB
        x[11 : 11 + k] = df[order]
        x[11 + k : 11 + N_NEIGHBORS] = DF_PAD_GHZ
        x[21] = self.powers_dbm[cut_index]
        x[22] = float(n)
        x[23] = link.span_km
        x[24] = float(link.n_spans)
        return x

    def matrix(self) -> np.ndarray:
        return np.vstack([self.row(i) for i in range(len(self.link.channels))])


def extract_features(
    link: LinkConfig,
    cut_index: int,
    fiber: FiberParams,
    store: SciStore | None = None,
    rtol: float = kernels.DEFAULT_RTOL,
) -> np.ndarray:
    """Feature vector for one channel under test."""
    return LinkFeatures(link, fiber, store, rtol).row(cut_index)


def label_eta_db(
    link: LinkConfig,
    cut_index: int,
    fiber: FiberParams,
    store: SciStore | None = None,
    rtol: float = kernels.DEFAULT_RTOL,
) -> float:
    """Regression target: aggregate link NLI normalized by launch power cubed."""
    br = oracle_nli(link, cut_index, fiber, store=store, rtol=rtol)
    pc = link.channels[cut_index].launch_power_w
    return 10.0 * math.log10(br.sigma2_w / pc ** 3)


def split_assignment(n_links: int, seed: int) -> dict[int, str]:
    """Deterministic 70/10/20 split over link ids."""
    perm = np.random.default_rng(seed).permutation(n_links)
    n_tr = int(round(0.7 * n_links))
    n_va = int(round(0.1 * n_links))
    out = {}
    for pos, link_id in enumerate(perm):
        if pos < n_tr:
            out[int(link_id)] = "train"
        elif pos < n_tr + n_va:
            out[int(link_id)] = "val"
        else:
            out[int(link_id)] = "test"
    return out


def generate(
    cfg: GenConfig,
    fiber: FiberParams,
    out_dir: str,
    store: SciStore | None = None,
) -> dict:
    """Sample links, compute features and labels, write the dataset tree.

    Writes train/val/test CSVs, a links.jsonl with full link configurations,
    and a manifest. Returns the manifest dict.
    """
    os.makedirs(out_dir, exist_ok=True)
    n_links = cfg.effective_links
    assignment = split_assignment(n_links, cfg.seed)
    header = ["link_id", "cut_index"] + feature_names() + ["eta_db"]
    writers = {}
    handles = {}
    rows_per_split = {"train": 0, "val": 0, "test": 0}
    links_per_split = {"train": 0, "val": 0, "test": 0}
    for split in ("train", "val", "test"):
        fh = open(os.path.join(out_dir, f"{split}.csv"), "w", newline="", encoding="utf-8")
        handles[split] = fh
        writers[split] = csv.writer(fh)
        writers[split].writerow(header)
    links_fh = open(os.path.join(out_dir, "links.jsonl"), "w", encoding="utf-8")
    try:
        for link_id in range(n_links):
            rng = np.random.default_rng(cfg.seed ^ link_id)
            link = sample_link(rng, cfg)
            split = assignment[link_id]
            links_per_split[split] += 1
            feats = LinkFeatures(link, fiber, store)
            for cut in range(len(link.channels)):
                x = feats.row(cut)
                y = label_eta_db(link, cut, fiber, store)
                writers[split].writerow(
                    [link_id, cut] + [repr(float(v)) for v in x] + [repr(y)]
                )
                rows_per_split[split] += 1
            links_fh.write(
                json.dumps(
                    {"link_id": link_id, "split": split, "link": link.as_dict()},
                    separators=(",", ":"),
                )
                + "\n"
            )
    finally:
        for fh in handles.values():
            fh.close()
        links_fh.close()
    if store is not None and store.path is not None:
        store.flush()
    manifest = {
        "n_links": n_links,
        "seed": cfg.seed,
        "fill": [cfg.fill_lo, cfg.fill_hi],
        "sparse": {"frac": cfg.sparse_frac, "lo": cfg.sparse_lo},
        "span_choices": list(cfg.span_choices),
        "max_spans": cfg.max_spans,
        "feature_names": feature_names(),
        "links_per_split": links_per_split,
        "rows_per_split": rows_per_split,
        "fiber": fiber.as_dict(),
        "files": {
            "train": "train.csv",
            "val": "val.csv",
            "test": "test.csv",
            "links": "links.jsonl",
        },
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_split(out_dir: str, split: str) -> dict:
    """Read one split CSV into arrays: X, y, link_id, cut_index."""
    path = os.path.join(out_dir, f"{split}.csv")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        data = data.reshape(0, 2 + FEATURE_COUNT + 1)
    return {
        "link_id": data[:, 0].astype(np.int64),
        "cut_index": data[:, 1].astype(np.int64),
        "X": data[:, 2 : 2 + FEATURE_COUNT],
        "y": data[:, 2 + FEATURE_COUNT],
    }


def load_links(out_dir: str, split: str | None = None) -> list[tuple[int, str, LinkConfig]]:
    """Read links.jsonl; optionally filter to one split."""
    out = []
    with open(os.path.join(out_dir, "links.jsonl"), encoding="utf-8") as fh:
        for line in fh:
            d = json.loads(line)
            if split is not None and d["split"] != split:
                continue
            out.append((d["link_id"], d["split"], LinkConfig.from_dict(d["link"])))
    return out

"""Shared fixtures.

The expensive artifacts (full 500-link dataset, trained model, coefficient
store) are built once into a cache directory and reused across test runs;
everything is deterministic, so a cached copy is byte-identical to a fresh
build. Set NLICONQUER_TEST_CACHE to relocate the cache.
"""

import json
import os
import time

import numpy as np
import pytest

from nliconquer import dataset, gbm
from nliconquer.nli import SciStore
from nliconquer.phys import FiberParams

CACHE_DIR = os.environ.get("NLICONQUER_TEST_CACHE", "/tmp/nliconquer_test_cache")
STORE_PATH = os.path.join(CACHE_DIR, "store.jsonl")
DS_DIR = os.path.join(CACHE_DIR, "ds500")
MODEL_PATH = os.path.join(CACHE_DIR, "model.json")
BUILD_INFO = os.path.join(CACHE_DIR, "build_info.json")


@pytest.fixture(scope="session")
def fiber() -> FiberParams:
    return FiberParams()


def _cache_valid() -> bool:
    try:
        with open(os.path.join(DS_DIR, "manifest.json"), encoding="utf-8") as fh:
            manifest = json.load(fh)
        with open(MODEL_PATH, encoding="utf-8") as fh:
            model = json.load(fh)
        with open(BUILD_INFO, encoding="utf-8") as fh:
            json.load(fh)
    except (OSError, ValueError):
        return False
    cfg = dataset.GenConfig()
    want = {
        "n_links": cfg.effective_links,
        "seed": cfg.seed,
        "fill": [cfg.fill_lo, cfg.fill_hi],
        "sparse": {"frac": cfg.sparse_frac, "lo": cfg.sparse_lo},
    }
    if any(manifest.get(k) != v for k, v in want.items()):
        return False
    if sum(manifest["rows_per_split"].values()) < 30_000:
        return False
    if model.get("params") != {f: getattr(gbm.GbmParams(), f)
                               for f in gbm.GbmParams.__dataclass_fields__}:
        return False
    if model.get("offset_feature") != 0:
        return False
    return os.path.exists(STORE_PATH)


def _build_cache(fiber: FiberParams) -> None:
    os.makedirs(CACHE_DIR, exist_ok=True)
    store = SciStore(path=STORE_PATH, fiber=fiber)
    t0 = time.perf_counter()
    dataset.generate(dataset.GenConfig(), fiber, DS_DIR, store=store)
    gen_s = time.perf_counter() - t0
    store.flush()
    tr = dataset.load_split(DS_DIR, "train")
    va = dataset.load_split(DS_DIR, "val")
    names = dataset.feature_names()
    t0 = time.perf_counter()
    model = gbm.train(tr["X"], tr["y"], va["X"], va["y"],
                      params=gbm.GbmParams(), feature_names=names,
                      offset_feature=names.index("sci_cut_db"))
    train_s = time.perf_counter() - t0
    model.to_json(MODEL_PATH)
    with open(BUILD_INFO, "w", encoding="utf-8") as fh:
        json.dump({"gen_seconds": gen_s, "train_seconds": train_s}, fh, indent=2)
        fh.write("\n")


@pytest.fixture(scope="session")
def artifacts(fiber) -> dict:
    """Paths to the full-scale dataset, model, and warm coefficient store."""
    if not _cache_valid():
        _build_cache(fiber)
    with open(BUILD_INFO, encoding="utf-8") as fh:
        build_info = json.load(fh)
    return {
        "ds_dir": DS_DIR,
        "model_path": MODEL_PATH,
        "store_path": STORE_PATH,
        "build_info": build_info,
    }


@pytest.fixture(scope="session")
def store(artifacts, fiber) -> SciStore:
    return SciStore(path=artifacts["store_path"], fiber=fiber)


@pytest.fixture(scope="session")
def model(artifacts) -> gbm.GbmModel:
    return gbm.GbmModel.from_json(artifacts["model_path"])


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20240816)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log() -> list[str]:
    """Registry for one-line acceptance verdicts, echoed after the run."""
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter) -> None:
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

"""Link sampling, feature extraction, and the dataset tree on disk."""

import filecmp
import math
import os

import numpy as np
import pytest

from nliconquer.dataset import (
    DF_PAD_GHZ,
    FEATURE_COUNT,
    N_NEIGHBORS,
    SCI_PAD_DB,
    GenConfig,
    LinkFeatures,
    extract_features,
    feature_names,
    generate,
    label_eta_db,
    load_links,
    load_split,
    sample_link,
    split_assignment,
)
from nliconquer.errors import ConfigError
from nliconquer.nli import SciStore, oracle_nli
from nliconquer.phys import LinkConfig, make_channel


def test_genconfig_validation():
    with pytest.raises(ConfigError):
        GenConfig(fill_lo=0.9, fill_hi=0.8)
    with pytest.raises(ConfigError):
        GenConfig(fill_lo=0.0)
    with pytest.raises(ConfigError):
        GenConfig(sparse_frac=1.5)
    with pytest.raises(ConfigError):
        GenConfig(sparse_lo=0.0)
    with pytest.raises(ConfigError):
        GenConfig(sparse_lo=0.8)  # above fill_lo
    with pytest.raises(ConfigError):
        GenConfig(n_links=0)
    with pytest.raises(ConfigError):
        GenConfig(scale=0.0)
    assert GenConfig(n_links=500, scale=0.02).effective_links == 10


def test_feature_names_shape():
    names = feature_names()
    assert len(names) == FEATURE_COUNT == 25
    assert names[0] == "sci_cut_db"
    assert names[1] == "sci_nbr01_db"
    assert names[11] == "df_nbr01_ghz"
    assert names[-4:] == ["power_dbm", "n_channels", "span_km", "n_spans"]


def test_sample_link_fill_accounting(rng):
    cfg = GenConfig(fill_lo=0.95, fill_hi=0.95, sparse_frac=0.0)
    for _ in range(5):
        link = sample_link(rng, cfg)
        occupied = sum(c.slot_count for c in link.channels)
        # no draw may cross the target, and the band cannot overfill
        assert occupied < 0.95 * cfg.band_slots
        assert occupied >= 0.95 * cfg.band_slots - 8  # largest footprint is 8
        starts = [c.start_slot for c in link.channels]
        assert starts == sorted(starts)


def test_sample_link_sparse_tail(rng):
    dense = GenConfig(sparse_frac=0.0)
    sparse = GenConfig(sparse_frac=1.0)
    for _ in range(5):
        occ = sum(c.slot_count for c in sample_link(rng, dense).channels)
        assert occ > 0.73 * dense.band_slots
    for _ in range(5):
        occ = sum(c.slot_count for c in sample_link(rng, sparse).channels)
        assert occ < 0.75 * sparse.band_slots


def test_sample_link_deterministic():
    cfg = GenConfig()
    a = sample_link(np.random.default_rng(99), cfg)
    b = sample_link(np.random.default_rng(99), cfg)
    assert a.as_dict() == b.as_dict()


def _twelve_channel_link() -> LinkConfig:
    chans = tuple(make_channel(8 * i, "QPSK", 200) for i in range(12))
    return LinkConfig(span_km=80.0, n_spans=3, channels=chans)


def test_row_neighbor_order_matches_brute_force(fiber):
    link = _twelve_channel_link()
    feats = LinkFeatures(link, fiber)
    cut = 5
    x = feats.row(cut)
    freqs = np.array([c.center_freq_ghz for c in link.channels])
    df = np.delete(freqs - freqs[cut], cut)
    sci = np.delete(feats.sci_db_link, cut)
    order = sorted(range(11), key=lambda i: (abs(df[i]), df[i] + freqs[cut]))
    want_df = [df[i] for i in order][:N_NEIGHBORS]
    want_sci = [sci[i] for i in order][:N_NEIGHBORS]
    assert np.allclose(x[11:21], want_df)
    assert np.allclose(x[1:11], want_sci)
    assert x[22] == 12.0 and x[23] == 80.0 and x[24] == 3.0


def test_row_padding_contract(fiber):
    link = LinkConfig(
        span_km=80.0, n_spans=2,
        channels=(make_channel(0, "QPSK", 100), make_channel(40, "QPSK", 100)),
    )
    x = extract_features(link, 0, fiber)
    assert np.all(x[2:11] == SCI_PAD_DB)   # one real neighbor, nine pads
    assert np.all(x[12:21] == DF_PAD_GHZ)
    assert x[11] == pytest.approx(40 * 12.5)


def test_row_mirror_property(fiber):
    """Mirroring the spectrum negates spacings but keeps their magnitudes."""
    link = _twelve_channel_link()
    n_slots = link.band_slots
    mirrored = LinkConfig(
        span_km=link.span_km, n_spans=link.n_spans,
        channels=tuple(sorted(
            (make_channel(n_slots - c.start_slot - c.slot_count, c.modulation,
                          c.data_rate_gbps) for c in link.channels),
            key=lambda c: c.start_slot,
        )),
    )
    a = extract_features(link, 3, fiber)
    b = extract_features(mirrored, 12 - 1 - 3, fiber)
    assert np.allclose(np.abs(a[11:21]), np.abs(b[11:21]))
    assert np.allclose(a[1:11], b[1:11])
    assert a[0] == b[0]


def test_lone_channel_label_equals_first_feature(fiber):
    for n_spans in (1, 4):
        link = LinkConfig(span_km=80.0, n_spans=n_spans,
                          channels=(make_channel(100, "16QAM", 400),))
        x = extract_features(link, 0, fiber)
        y = label_eta_db(link, 0, fiber)
        assert y == pytest.approx(x[0], rel=1e-9)
        if n_spans > 1:
            base = LinkConfig(span_km=80.0, n_spans=1, channels=link.channels)
            assert y == pytest.approx(
                label_eta_db(base, 0, fiber) + 10 * math.log10(n_spans), rel=1e-9
            )


def test_label_matches_oracle(fiber):
    link = _twelve_channel_link()
    br = oracle_nli(link, 4, fiber)
    p = link.channels[4].launch_power_w
    assert label_eta_db(link, 4, fiber) == pytest.approx(
        10 * math.log10(br.sigma2_w / p ** 3), rel=1e-12
    )


def test_split_assignment_deterministic_and_balanced():
    a = split_assignment(100, 7)
    assert a == split_assignment(100, 7)
    counts = {s: sum(1 for v in a.values() if v == s) for s in ("train", "val", "test")}
    assert counts == {"train": 70, "val": 10, "test": 20}
    assert split_assignment(100, 8) != a


def test_generate_tree_and_roundtrip(fiber, tmp_path):
    cfg = GenConfig(n_links=10, seed=5, max_spans=6)
    store = SciStore(path=str(tmp_path / "store.jsonl"), fiber=fiber)
    out = str(tmp_path / "ds")
    manifest = generate(cfg, fiber, out, store=store)

    assert manifest["n_links"] == 10
    assert sum(manifest["links_per_split"].values()) == 10
    for split in ("train", "val", "test"):
        got = load_split(out, split)
        assert got["X"].shape == (manifest["rows_per_split"][split], FEATURE_COUNT)
        assert got["y"].shape[0] == got["X"].shape[0]
        assert len(load_links(out, split)) == manifest["links_per_split"][split]
    links = load_links(out)
    assert len(links) == 10
    assert sorted(lid for lid, _, _ in links) == list(range(10))

    # features in the CSV must be bit-identical to a recomputation
    split0 = links[0][1]
    got = load_split(out, split0)
    mask = got["link_id"] == links[0][0]
    feats = LinkFeatures(links[0][2], fiber, store=store)
    assert np.array_equal(got["X"][mask], feats.matrix())


def test_generate_byte_identical_rerun(fiber, tmp_path):
    cfg = GenConfig(n_links=6, seed=11, max_spans=4)
    for d in ("a", "b"):
        store = SciStore(path=str(tmp_path / f"store_{d}.jsonl"), fiber=fiber)
        generate(cfg, fiber, str(tmp_path / d), store=store)
    for name in ("train.csv", "val.csv", "test.csv", "links.jsonl", "manifest.json"):
        assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name, shallow=False)

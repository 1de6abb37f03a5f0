"""Gradient-boosted regression trees on quantile-binned features.

Squared-error boosting: each round fits a depth-limited tree to the current
residuals using per-feature histograms, then adds its shrunken leaf values
to the running prediction. Validation RMSE drives early stopping and the
returned model is truncated to the best round. Everything is deterministic
for a fixed seed.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import kernels
from .errors import ConfigError


@dataclass(frozen=True)
class GbmParams:
    n_trees: int = 400
    max_depth: int = 6
    learning_rate: float = 0.1
    min_samples_leaf: int = 20
    subsample: float = 0.8
    max_bins: int = 256
    early_stopping_rounds: int = 30
    seed: int = 7

    def __post_init__(self) -> None:
        if self.n_trees < 1 or self.max_depth < 1:
            raise ConfigError("n_trees and max_depth must be positive")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError("learning_rate must be in (0, 1]")
        if not 0.0 < self.subsample <= 1.0:
            raise ConfigError("subsample must be in (0, 1]")
        if not 2 <= self.max_bins <= 256:
            raise ConfigError("max_bins must be in [2, 256]")


@dataclass
class Tree:
    """Flat node arrays; feature < 0 marks a leaf, children are node indices."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size


class GbmModel:
    """Trained ensemble: base score plus summed tree contributions.

    With offset_feature set, that feature column is added to every
    prediction and the trees model only the target's excess over it. This
    keeps predictions anchored to the offset column in regions the training
    data barely covers.
    """

    def __init__(
        self,
        params: GbmParams,
        base_score: float,
        trees: list[Tree],
        feature_names: list[str] | None = None,
        val_history: list[float] | None = None,
        train_history: list[float] | None = None,
        feature_importance: np.ndarray | None = None,
        best_iteration: int | None = None,
        offset_feature: int | None = None,
    ):
        self.params = params
        self.base_score = base_score
        self.trees = trees
        self.feature_names = feature_names
        self.val_history = val_history or []
        self.train_history = train_history or []
        self.feature_importance = feature_importance
        self.best_iteration = best_iteration
        self.offset_feature = offset_feature
        self._packed = None

    def _pack(self):
        if self._packed is None:
            total = sum(t.n_nodes for t in self.trees)
            feat = np.empty(max(total, 1), np.int32)
            thr = np.zeros(max(total, 1), np.float64)
            left = np.empty(max(total, 1), np.int32)
            right = np.empty(max(total, 1), np.int32)
            val = np.zeros(max(total, 1), np.float64)
            offsets = np.empty(len(self.trees) + 1, np.int64)
            pos = 0
            for t_i, tree in enumerate(self.trees):
                offsets[t_i] = pos
                n = tree.n_nodes
                feat[pos : pos + n] = tree.feature
                thr[pos : pos + n] = tree.threshold
                left[pos : pos + n] = np.where(tree.left >= 0, tree.left + pos, -1)
                right[pos : pos + n] = np.where(tree.right >= 0, tree.right + pos, -1)
                val[pos : pos + n] = tree.value
                pos += n
            offsets[len(self.trees)] = pos
            self._packed = (feat, thr, left, right, val, offsets)
        return self._packed

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(np.atleast_2d(np.asarray(x, dtype=np.float64)))
        feat, thr, left, right, val, offsets = self._pack()
        out = np.empty(x.shape[0])
        kernels.predict_forest(x, feat, thr, left, right, val, offsets, self.base_score, out)
        if self.offset_feature is not None:
            out += x[:, self.offset_feature]
        return out

    def to_json(self, path: str) -> None:
        obj = {
            "format_version": 1,
            "params": asdict(self.params),
            "base_score": self.base_score,
            "offset_feature": self.offset_feature,
            "feature_names": self.feature_names,
            "best_iteration": self.best_iteration,
            "val_history": self.val_history,
            "train_history": self.train_history,
            "feature_importance": (
                None
                if self.feature_importance is None
                else [float(v) for v in self.feature_importance]
            ),
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "value": t.value.tolist(),
                }
                for t in self.trees
            ],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(obj, fh)
            fh.write("\n")

    @classmethod
    def from_json(cls, path: str) -> "GbmModel":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        if obj.get("format_version") != 1:
            raise ConfigError(f"unsupported model format in {path}")
        trees = [
            Tree(
                feature=np.array(t["feature"], np.int32),
                threshold=np.array(t["threshold"], np.float64),
                left=np.array(t["left"], np.int32),
                right=np.array(t["right"], np.int32),
                value=np.array(t["value"], np.float64),
            )
            for t in obj["trees"]
        ]
        fi = obj.get("feature_importance")
        return cls(
            params=GbmParams(**obj["params"]),
            base_score=obj["base_score"],
            trees=trees,
            feature_names=obj.get("feature_names"),
            val_history=obj.get("val_history") or [],
            train_history=obj.get("train_history") or [],
            feature_importance=None if fi is None else np.array(fi),
            best_iteration=obj.get("best_iteration"),
            offset_feature=obj.get("offset_feature"),
        )


def _make_edges(x: np.ndarray, max_bins: int) -> list[np.ndarray]:
    qs = np.linspace(0.0, 1.0, max_bins + 1)[1:-1]
    return [np.unique(np.quantile(x[:, f], qs)) for f in range(x.shape[1])]


def _bin_matrix(x: np.ndarray, edges: list[np.ndarray]) -> np.ndarray:
    binned = np.empty(x.shape, np.uint8)
    for f, e in enumerate(edges):
        binned[:, f] = np.searchsorted(e, x[:, f], side="left").astype(np.uint8)
    return binned


def _best_split(cnt: np.ndarray, sm: np.ndarray, min_leaf: int):
    """Max variance-reduction split over all (feature, bin) pairs.

    Ties resolve to the lowest feature then lowest bin via first-argmax.
    """
    nl = np.cumsum(cnt, axis=1)
    sl = np.cumsum(sm, axis=1)
    n = nl[:, -1:]
    s = sl[:, -1:]
    nr = n - nl
    sr = s - sl
    valid = (nl >= min_leaf) & (nr >= min_leaf)
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = sl * sl / nl + sr * sr / nr - s * s / n
    gain = np.where(valid, gain, -np.inf)
    flat = int(np.argmax(gain))
    best = float(gain.flat[flat])
    if not math.isfinite(best) or best <= 1e-12:
        return None
    return flat // cnt.shape[1], flat % cnt.shape[1], best


def _grow_tree(binned, resid, root_idx, params, edges):
    feature = []
    threshold = []
    left = []
    right = []
    value = []
    gains = np.zeros(binned.shape[1])
    queue = [(root_idx, 0)]
    node_of = []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    root = new_node()
    node_of.append(root)
    pos = 0
    while pos < len(queue):
        idx, depth = queue[pos]
        node = node_of[pos]
        pos += 1
        split = None
        if depth < params.max_depth and idx.size >= 2 * params.min_samples_leaf:
            cnt, sm = kernels.build_histograms(binned, idx, resid, params.max_bins)
            split = _best_split(cnt, sm, params.min_samples_leaf)
        if split is None:
            value[node] = params.learning_rate * float(resid[idx].mean())
            continue
        f, b, gain = split
        gains[f] += gain
        mask = binned[idx, f] <= b
        li = idx[mask]
        ri = idx[~mask]
        feature[node] = f
        threshold[node] = float(edges[f][b])
        ln = new_node()
        rn = new_node()
        left[node] = ln
        right[node] = rn
        queue.append((li, depth + 1))
        node_of.append(ln)
        queue.append((ri, depth + 1))
        node_of.append(rn)
    tree = Tree(
        feature=np.array(feature, np.int32),
        threshold=np.array(threshold, np.float64),
        left=np.array(left, np.int32),
        right=np.array(right, np.int32),
        value=np.array(value, np.float64),
    )
    return tree, gains


def _predict_tree(tree: Tree, x: np.ndarray) -> np.ndarray:
    out = np.empty(x.shape[0])
    offsets = np.array([0, tree.n_nodes], np.int64)
    kernels.predict_forest(
        x, tree.feature, tree.threshold, tree.left, tree.right, tree.value,
        offsets, 0.0, out,
    )
    return out


def _rmse(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(np.mean((a - b) ** 2)))


def train(
    x: np.ndarray,
    y: np.ndarray,
    x_val: np.ndarray | None = None,
    y_val: np.ndarray | None = None,
    params: GbmParams = GbmParams(),
    feature_names: list[str] | None = None,
    log_path: str | None = None,
    offset_feature: int | None = None,
) -> GbmModel:
    """Boosted training with early stopping on validation RMSE.

    The returned model keeps only the trees up to the best validation
    round. Without a validation set all rounds are kept. With
    offset_feature set the trees are fitted to y minus that feature column;
    reported RMSEs are unchanged by the shift since it cancels per row.
    """
    x = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if offset_feature is not None:
        y = y - x[:, offset_feature]
    has_val = x_val is not None and y_val is not None and len(np.atleast_1d(y_val)) > 0
    if has_val:
        x_val = np.ascontiguousarray(np.atleast_2d(np.asarray(x_val, dtype=np.float64)))
        y_val = np.asarray(y_val, dtype=np.float64)
        if offset_feature is not None:
            y_val = y_val - x_val[:, offset_feature]
    n = x.shape[0]
    rng = np.random.default_rng(params.seed)
    edges = _make_edges(x, params.max_bins)
    binned = np.ascontiguousarray(_bin_matrix(x, edges))
    base = float(y.mean())
    pred = np.full(n, base)
    pred_val = np.full(y_val.size, base) if has_val else None
    trees: list[Tree] = []
    tree_gains: list[np.ndarray] = []
    train_hist: list[float] = []
    val_hist: list[float] = []
    best_rmse = math.inf
    best_round = -1
    for t in range(params.n_trees):
        resid = y - pred
        if params.subsample < 1.0:
            k = max(1, int(round(n * params.subsample)))
            idx = np.sort(rng.permutation(n)[:k])
        else:
            idx = np.arange(n)
        tree, gains = _grow_tree(binned, resid, idx, params, edges)
        trees.append(tree)
        tree_gains.append(gains)
        pred += _predict_tree(tree, x)
        train_hist.append(_rmse(y, pred))
        if has_val:
            pred_val += _predict_tree(tree, x_val)
            v = _rmse(y_val, pred_val)
            val_hist.append(v)
            if v < best_rmse:
                best_rmse = v
                best_round = t
            elif t - best_round >= params.early_stopping_rounds:
                break
    if has_val and best_round >= 0:
        keep = best_round + 1
    else:
        keep = len(trees)
        best_round = keep - 1
    model = GbmModel(
        params=params,
        base_score=base,
        trees=trees[:keep],
        feature_names=feature_names,
        val_history=val_hist,
        train_history=train_hist,
        feature_importance=(
            np.sum(tree_gains[:keep], axis=0) if keep else np.zeros(x.shape[1])
        ),
        best_iteration=best_round,
        offset_feature=offset_feature,
    )
    if log_path is not None:
        with open(log_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["round", "train_rmse", "val_rmse"])
            for i, tr in enumerate(train_hist):
                va = repr(val_hist[i]) if i < len(val_hist) else ""
                w.writerow([i, repr(tr), va])
    return model


TUNE_GRID = tuple(
    {"max_depth": d, "learning_rate": lr, "subsample": ss}
    for d in (4, 6, 8)
    for lr in (0.05, 0.1)
    for ss in (0.8, 1.0)
)


def tune(
    x: np.ndarray,
    y: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    base_params: GbmParams = GbmParams(),
    grid: tuple[dict, ...] = TUNE_GRID,
    feature_names: list[str] | None = None,
    offset_feature: int | None = None,
) -> tuple[GbmModel, list[dict]]:
    """Grid search over depth, learning rate, and row subsampling.

    Returns the best model by validation RMSE (ties: fewer trees, then
    shallower) and a result row per grid point.
    """
    results = []
    best = None
    best_key = None
    for spec in grid:
        params = replace(base_params, **spec)
        model = train(
            x, y, x_val, y_val, params,
            feature_names=feature_names, offset_feature=offset_feature,
        )
        v = model.val_history[model.best_iteration]
        results.append(
            {
                **spec,
                "val_rmse": v,
                "n_trees_kept": len(model.trees),
                "best_iteration": model.best_iteration,
            }
        )
        key = (v, len(model.trees), params.max_depth, params.learning_rate)
        if best_key is None or key < best_key:
            best_key = key
            best = model
    return best, results

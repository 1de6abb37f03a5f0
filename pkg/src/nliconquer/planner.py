"""Multi-period routing, modulation, and spectrum assignment on a mesh.

Each year, every demand pair's traffic requirement is covered by adding
lightpaths: highest data rate first, admitted only if the estimator says
the new path and every lightpath sharing a link still clear their SNR
thresholds plus margin. A final pass re-verifies every lightpath with the
quadrature oracle.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import ConfigError, NliConquerError
from .nli import SciStore
from .phys import (
    FiberParams,
    LinkConfig,
    VALID_COMBOS,
    launch_power_dbm,
    make_channel,
    slot_footprint,
    symbol_rate_gbd,
)
from .qot import Estimator

REQUIRED_SNR_DB = {"QPSK": 7.0, "16QAM": 13.5, "32QAM": 16.6, "64QAM": 19.7}
PLAN_MARGIN_DB = 0.5

# highest rate first; at equal rate prefer the sturdier modulation
CANDIDATES = tuple(
    sorted(VALID_COMBOS, key=lambda mr: (-mr[1], REQUIRED_SNR_DB[mr[0]]))
)


def default_topology_path() -> str:
    return str(resources.files("nliconquer.data") / "nordunet.json")


@dataclass(frozen=True)
class LinkSpec:
    length_km: float
    span_km: float = 80.0
    slots: int = 400

    @property
    def n_spans(self) -> int:
        return max(1, math.ceil(self.length_km / self.span_km))


class Topology:
    """Undirected weighted graph; spectra are per direction of traversal."""

    def __init__(
        self,
        nodes: tuple[str, ...],
        links: dict[tuple[str, str], LinkSpec],
        demand_pairs: tuple[tuple[str, str], ...],
        name: str = "",
    ):
        self.nodes = tuple(nodes)
        self.links = dict(links)
        self.demand_pairs = tuple(tuple(p) for p in demand_pairs)
        self.name = name
        self._adj: dict[str, list[str]] = {n: [] for n in self.nodes}
        for a, b in self.links:
            self._adj[a].append(b)
            self._adj[b].append(a)
        for n in self._adj:
            self._adj[n].sort()

    @classmethod
    def from_json(cls, path: str) -> "Topology":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        links = {}
        for item in raw["links"]:
            key = (item["a"], item["b"])
            links[key] = LinkSpec(
                length_km=float(item["length_km"]),
                span_km=float(item.get("span_km", 80.0)),
                slots=int(item.get("slots", 400)),
            )
        return cls(
            nodes=tuple(raw["nodes"]),
            links=links,
            demand_pairs=tuple(tuple(p) for p in raw["demand_pairs"]),
            name=raw.get("name", ""),
        )

    def edge_spec(self, u: str, v: str) -> LinkSpec:
        if (u, v) in self.links:
            return self.links[(u, v)]
        if (v, u) in self.links:
            return self.links[(v, u)]
        raise ConfigError(f"no link between {u} and {v}")

    def shortest_path(self, src: str, dst: str) -> tuple[str, ...]:
        """Minimum-length node sequence; ties resolve lexicographically."""
        heap = [(0.0, (src,))]
        seen = set()
        while heap:
            dist, path = heapq.heappop(heap)
            node = path[-1]
            if node == dst:
                return path
            if node in seen:
                continue
            seen.add(node)
            for nxt in self._adj[node]:
                if nxt not in seen:
                    spec = self.edge_spec(node, nxt)
                    heapq.heappush(heap, (dist + spec.length_km, path + (nxt,)))
        raise ConfigError(f"no path between {src} and {dst}")


@dataclass
class Lightpath:
    lp_id: int
    src: str
    dst: str
    path: tuple[str, ...]
    modulation: str
    data_rate_gbps: int
    start_slot: int
    slot_count: int
    year: int

    @property
    def required_snr_db(self) -> float:
        """Admission bar for a new lightpath: threshold plus planning margin."""
        return REQUIRED_SNR_DB[self.modulation] + PLAN_MARGIN_DB

    @property
    def threshold_snr_db(self) -> float:
        """Hard floor an established lightpath must keep.

        The planning margin is headroom granted at admission and eroded by
        later placements; protecting existing paths at threshold+margin
        would freeze the network after the first knife-edge admission.
        """
        return REQUIRED_SNR_DB[self.modulation]

    def edges(self) -> list[tuple[str, str]]:
        return [(self.path[i], self.path[i + 1]) for i in range(len(self.path) - 1)]


class NetworkState:
    """Directed per-edge spectrum occupancy plus the lightpath registry."""

    def __init__(self, topology: Topology):
        self.topology = topology
        self._free: dict[tuple[str, str], np.ndarray] = {}
        self._channels: dict[tuple[str, str], list[tuple[int, int, int]]] = {}
        self.lightpaths: dict[int, Lightpath] = {}

    def _edge(self, key: tuple[str, str]) -> np.ndarray:
        if key not in self._free:
            spec = self.topology.edge_spec(*key)
            self._free[key] = np.ones(spec.slots, dtype=bool)
            self._channels[key] = []
        return self._free[key]

    def common_free(self, edges: list[tuple[str, str]]) -> np.ndarray:
        out = self._edge(edges[0]).copy()
        for e in edges[1:]:
            out &= self._edge(e)
        return out

    def place(self, lp: Lightpath) -> None:
        for e in lp.edges():
            free = self._edge(e)
            if not free[lp.start_slot : lp.start_slot + lp.slot_count].all():
                raise NliConquerError("slot collision while placing a lightpath")
            free[lp.start_slot : lp.start_slot + lp.slot_count] = False
            self._channels[e].append((lp.start_slot, lp.slot_count, lp.lp_id))
        self.lightpaths[lp.lp_id] = lp

    def remove(self, lp: Lightpath) -> None:
        for e in lp.edges():
            self._edge(e)[lp.start_slot : lp.start_slot + lp.slot_count] = True
            self._channels[e].remove((lp.start_slot, lp.slot_count, lp.lp_id))
        self.lightpaths.pop(lp.lp_id, None)

    def edge_link(self, key: tuple[str, str]) -> tuple[LinkConfig, dict[int, int]]:
        """LinkConfig for one edge plus lightpath-id -> channel-index map."""
        self._edge(key)
        spec = self.topology.edge_spec(*key)
        entries = sorted(self._channels[key])
        chans = []
        idx_of = {}
        for i, (start, _count, lp_id) in enumerate(entries):
            lp = self.lightpaths[lp_id]
            chans.append(make_channel(start, lp.modulation, lp.data_rate_gbps))
            idx_of[lp_id] = i
        link = LinkConfig(
            span_km=spec.span_km,
            n_spans=spec.n_spans,
            channels=tuple(chans),
            band_slots=spec.slots,
        )
        return link, idx_of

    def lightpaths_sharing(self, edges: list[tuple[str, str]]) -> list[Lightpath]:
        ids = set()
        for e in edges:
            self._edge(e)
            for _s, _c, lp_id in self._channels[e]:
                ids.add(lp_id)
        return [self.lightpaths[i] for i in sorted(ids)]


class _NoiseCache:
    """Per-admission-check cache of edge noise results.

    With a base cache, edges outside `fresh` delegate to it; a placement
    trial only invalidates the edges of the candidate's own path, so the
    rest of the network is evaluated once per admission, not per slot.
    """

    def __init__(
        self,
        state: NetworkState,
        estimator: Estimator,
        base: "_NoiseCache | None" = None,
        fresh: set[tuple[str, str]] | None = None,
    ):
        self.state = state
        self.estimator = estimator
        self.base = base
        self.fresh = fresh or set()
        self._cache: dict[tuple[str, str], tuple[list, dict[int, int]]] = {}

    def edge_noise(self, key: tuple[str, str]):
        if self.base is not None and key not in self.fresh:
            return self.base.edge_noise(key)
        if key not in self._cache:
            link, idx_of = self.state.edge_link(key)
            self._cache[key] = (self.estimator.link_noise(link), idx_of)
        return self._cache[key]

    def lightpath_snr_db(self, lp: Lightpath) -> float:
        p_w = 10.0 ** ((_launch_dbm(lp) - 30.0) / 10.0)
        sigma2 = 0.0
        for e in lp.edges():
            results, idx_of = self.edge_noise(e)
            r = results[idx_of[lp.lp_id]]
            sigma2 += r.sigma2_ase_w + r.sigma2_nli_w
        return 10.0 * math.log10(p_w / sigma2)


def _launch_dbm(lp: Lightpath) -> float:
    return launch_power_dbm(symbol_rate_gbd(lp.data_rate_gbps, lp.modulation))


def traffic_evolution(
    pairs: tuple[tuple[str, str], ...], years: int, rng: np.random.Generator
) -> dict[tuple[str, str], list[int]]:
    """First-year requirement 100..400 Gbps, then 20-40% yearly growth.

    Values are multiples of 50 Gbps; growth rounds up.
    """
    out = {}
    for pair in sorted(pairs):
        tr = int(rng.integers(2, 9)) * 50
        series = [tr]
        for _ in range(years - 1):
            g = rng.uniform(1.2, 1.4)
            tr = int(math.ceil(tr * g / 50.0)) * 50
            series.append(tr)
        out[pair] = series
    return out


def _isolated_snr_db(
    specs: list[LinkSpec], mod: str, rate: int, estimator: Estimator
) -> float:
    """SNR of the candidate alone on its path, an upper bound with interferers."""
    ch = make_channel(0, mod, rate)
    sigma2 = 0.0
    for spec in specs:
        link = LinkConfig(
            span_km=spec.span_km, n_spans=spec.n_spans,
            channels=(ch,), band_slots=spec.slots,
        )
        r = estimator.link_noise(link)[0]
        sigma2 += r.sigma2_ase_w + r.sigma2_nli_w
    return 10.0 * math.log10(ch.launch_power_w / sigma2)


def rmsa_place(
    state: NetworkState,
    pair: tuple[str, str],
    year: int,
    estimator: Estimator,
    lp_id: int,
    feas_cache: dict | None = None,
) -> Lightpath | None:
    """Try to admit one lightpath for the pair; None if everything fails.

    Candidates are tried highest-rate-first on the shortest path. For each
    config, candidate start slots are scanned in ascending order and the
    admissible one leaving the largest minimum SNR slack wins (ties keep
    the lowest slot). Admission requires the new path to clear threshold
    plus margin and every lightpath sharing its links to stay above its
    hard threshold under the estimator. Taking the first admissible slot
    instead would repeatedly shave the weakest sharer's slack to nothing
    and deadlock the network within a few planning years. Configs whose
    interference-free SNR already misses the bar are skipped: interferers
    only add noise.
    """
    path = state.topology.shortest_path(pair[0], pair[1])
    edges = [(path[i], path[i + 1]) for i in range(len(path) - 1)]
    specs = [state.topology.edge_spec(*e) for e in edges]
    if feas_cache is None:
        feas_cache = {}
    base = _NoiseCache(state, estimator)
    path_edges = set(edges)
    narrowest = min(spec.slots for spec in specs)
    for mod, rate in CANDIDATES:
        required = REQUIRED_SNR_DB[mod] + PLAN_MARGIN_DB
        fp = slot_footprint(symbol_rate_gbd(rate, mod))
        if fp > narrowest:
            continue
        fkey = (path, mod, rate)
        if fkey not in feas_cache:
            feas_cache[fkey] = _isolated_snr_db(specs, mod, rate, estimator) >= required
        if not feas_cache[fkey]:
            continue
        free = state.common_free(edges)
        best_slack = -math.inf
        best_start = -1
        for start in _thin_starts(_feasible_starts(free, fp), fp):
            lp = Lightpath(
                lp_id=lp_id,
                src=pair[0],
                dst=pair[1],
                path=path,
                modulation=mod,
                data_rate_gbps=rate,
                start_slot=int(start),
                slot_count=fp,
                year=year,
            )
            state.place(lp)
            cache = _NoiseCache(state, estimator, base=base, fresh=path_edges)
            slack = cache.lightpath_snr_db(lp) - lp.required_snr_db
            if slack >= 0.0:
                for other in state.lightpaths_sharing(edges):
                    if other.lp_id == lp.lp_id:
                        continue
                    slack = min(
                        slack,
                        cache.lightpath_snr_db(other) - other.threshold_snr_db,
                    )
                    if slack < 0.0 or slack <= best_slack:
                        break
            state.remove(lp)
            if slack >= 0.0 and slack > best_slack:
                best_slack = slack
                best_start = int(start)
        if best_start >= 0:
            lp = Lightpath(
                lp_id=lp_id,
                src=pair[0],
                dst=pair[1],
                path=path,
                modulation=mod,
                data_rate_gbps=rate,
                start_slot=best_start,
                slot_count=fp,
                year=year,
            )
            state.place(lp)
            return lp
    return None


def _feasible_starts(free: np.ndarray, fp: int) -> np.ndarray:
    runs = np.convolve(free.astype(np.int64), np.ones(fp, dtype=np.int64), "valid")
    return np.flatnonzero(runs == fp)


def _thin_starts(starts: np.ndarray, fp: int) -> list[int]:
    """Subsample candidate starts to one per footprint width.

    Interference varies smoothly with spectral distance, so scanning every
    slot inside a free run adds cost without adding placement options.
    """
    picks = []
    last = -fp
    for s in starts:
        if s - last >= fp:
            picks.append(int(s))
            last = int(s)
    return picks


def verify_with_oracle(
    state: NetworkState, fiber: FiberParams, store: SciStore | None = None
) -> dict:
    """Recompute every lightpath's SNR with the oracle.

    A violation is a lightpath below its hard threshold. Lightpaths whose
    admission margin has been eroded (above threshold, below
    threshold+margin) are counted separately.
    """
    oracle = Estimator("oracle", fiber, store=store)
    cache = _NoiseCache(state, oracle)
    violations = []
    eroded = 0
    min_margin = math.inf
    for lp_id in sorted(state.lightpaths):
        lp = state.lightpaths[lp_id]
        snr = cache.lightpath_snr_db(lp)
        margin = snr - lp.threshold_snr_db
        min_margin = min(min_margin, margin)
        if snr < lp.threshold_snr_db:
            violations.append(
                {
                    "lp_id": lp_id,
                    "snr_db": snr,
                    "threshold_db": lp.threshold_snr_db,
                }
            )
        elif snr < lp.required_snr_db:
            eroded += 1
    return {
        "checked": len(state.lightpaths),
        "violations": violations,
        "margin_eroded": eroded,
        "min_margin_db": min_margin if state.lightpaths else None,
    }


def plan(
    topology: Topology,
    years: int,
    estimator: Estimator,
    fiber: FiberParams,
    store: SciStore | None = None,
    seed: int = 1234,
) -> dict:
    """Run the multi-year planning loop and return the full report dict."""
    rng = np.random.default_rng(seed)
    traffic = traffic_evolution(topology.demand_pairs, years, rng)
    state = NetworkState(topology)
    placed_rate: dict[tuple[str, str], int] = {p: 0 for p in sorted(topology.demand_pairs)}
    per_year = []
    blocked = []
    next_id = 0
    feas_cache: dict = {}
    calls_before = estimator.nli_evaluations
    for year in range(1, years + 1):
        new_count = 0
        for pair in sorted(topology.demand_pairs):
            need = traffic[pair][year - 1]
            while placed_rate[pair] < need:
                lp = rmsa_place(state, pair, year, estimator, next_id, feas_cache)
                if lp is None:
                    blocked.append(
                        {
                            "pair": list(pair),
                            "year": year,
                            "deficit_gbps": need - placed_rate[pair],
                        }
                    )
                    break
                next_id += 1
                new_count += 1
                placed_rate[pair] += lp.data_rate_gbps
        satisfied = all(
            placed_rate[p] >= traffic[p][year - 1] for p in sorted(topology.demand_pairs)
        )
        per_year.append(
            {
                "year": year,
                "new_lightpaths": new_count,
                "total_lightpaths": len(state.lightpaths),
                "traffic_satisfied": satisfied,
            }
        )
    check = verify_with_oracle(state, fiber, store=store)
    combos: dict[str, int] = {}
    for lp in state.lightpaths.values():
        key = f"{lp.modulation}-{lp.data_rate_gbps}"
        combos[key] = combos.get(key, 0) + 1
    return {
        "topology": topology.name,
        "years": years,
        "seed": seed,
        "estimator": estimator.mode,
        "traffic_gbps": {f"{a}-{b}": v for (a, b), v in sorted(traffic.items())},
        "per_year": per_year,
        "blocked": blocked,
        "total_lightpaths": len(state.lightpaths),
        "combo_counts": dict(sorted(combos.items())),
        "lightpaths": [
            {
                "lp_id": lp.lp_id,
                "src": lp.src,
                "dst": lp.dst,
                "path": list(lp.path),
                "modulation": lp.modulation,
                "data_rate_gbps": lp.data_rate_gbps,
                "start_slot": lp.start_slot,
                "slot_count": lp.slot_count,
                "year": lp.year,
            }
            for _, lp in sorted(state.lightpaths.items())
        ],
        "oracle_check": check,
        "nli_evaluations": estimator.nli_evaluations - calls_before,
    }

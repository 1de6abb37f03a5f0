"""Command-line interface.

Subcommands cover the full workflow: generate a training dataset, train
and evaluate the regression model, optimize a link's spectral layout,
plan a multi-year network build, and benchmark the estimation paths.

Exit codes: 0 on success, 1 on any domain error, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import config as cfgmod
from .errors import NliConquerError


def _common_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="TOML config file (overrides NLICONQUER_CONFIG)")
    p.add_argument("--seed", type=int, help="random seed override")
    p.add_argument("--threads", type=int, help="compute thread cap (results are identical)")
    p.add_argument("--store", help="coefficient store path, created if missing")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nliconquer",
        description="Nonlinear-interference aware QoT estimation toolkit",
    )
    common = _common_flags()
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    g = sub.add_parser("gen-dataset", parents=[common], help="sample links and write feature CSVs")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--links", type=int, help="number of links to sample")
    g.add_argument("--fill-lo", type=float, dest="fill_lo", help="lower spectral fill bound")
    g.add_argument("--fill-hi", type=float, dest="fill_hi", help="upper spectral fill bound")
    g.add_argument("--sparse-frac", type=float, dest="sparse_frac",
                   help="fraction of links drawn from the sparse tail")
    g.add_argument("--sparse-lo", type=float, dest="sparse_lo",
                   help="lower fill bound of the sparse tail")
    g.add_argument("--max-spans", type=int, dest="max_spans", help="largest span count sampled")
    g.add_argument("--scale", type=float, help="fraction of the link budget to generate")

    t = sub.add_parser("train", parents=[common], help="fit the boosted-tree model")
    t.add_argument("--dataset", required=True, help="dataset directory from gen-dataset")
    t.add_argument("--model-out", required=True, dest="model_out", help="model JSON path")
    t.add_argument("--log", help="training log CSV (default: alongside the model)")
    t.add_argument("--tune", action="store_true", help="grid-search hyperparameters first")
    t.add_argument("--n-trees", type=int, dest="n_trees")
    t.add_argument("--max-depth", type=int, dest="max_depth")
    t.add_argument("--learning-rate", type=float, dest="learning_rate")
    t.add_argument("--min-samples-leaf", type=int, dest="min_samples_leaf")
    t.add_argument("--subsample", type=float)

    e = sub.add_parser("eval", parents=[common], help="score an estimator against the oracle")
    e.add_argument("--dataset", required=True, help="dataset directory from gen-dataset")
    e.add_argument("--model", help="model JSON (required for --estimator ml)")
    e.add_argument("--estimator", choices=("ml", "gn"), default="ml")
    e.add_argument("--split", choices=("train", "val", "test", "all"), default="test")
    e.add_argument("--out", required=True, help="report directory")

    o = sub.add_parser("optimize-spectrum", parents=[common], help="rearrange channels on one link")
    o.add_argument("--estimator", choices=("ml", "gn", "oracle"), default="ml")
    o.add_argument("--model", help="model JSON (required for --estimator ml)")
    o.add_argument("--spans", type=int, help="span count of the link")
    o.add_argument("--span-km", type=float, dest="span_km", help="span length in km")
    o.add_argument("--fill", type=float, help="target spectral fill")
    o.add_argument("--out", required=True, help="result JSON path")

    pl = sub.add_parser("plan", parents=[common], help="multi-year lightpath planning")
    pl.add_argument("--topology", help="topology JSON (default: bundled five-node line)")
    pl.add_argument("--years", type=int, default=5)
    pl.add_argument("--estimator", choices=("ml", "gn", "oracle"), default="ml")
    pl.add_argument("--model", help="model JSON (required for --estimator ml)")
    pl.add_argument("--out", required=True, help="plan report JSON path")

    b = sub.add_parser("bench", parents=[common], help="time the estimation paths")
    b.add_argument("--model", help="model JSON to include inference timings")
    b.add_argument("--channels", type=int, default=80)
    b.add_argument("--repeats", type=int, default=100)
    b.add_argument("--compare-kernels", action="store_true", dest="compare_kernels",
                   help="also time both kernel backends on identical workloads")
    b.add_argument("--out", help="bench JSON path (default: print to stdout)")
    return parser


def _make_store(args, fiber):
    from .nli import SciStore

    return SciStore(path=args.store, fiber=fiber)


def _finish_store(args, store) -> None:
    if args.store:
        store.flush()
    s = store.stats
    print(f"store: {s['size']} entries, {s['hits']} hits, {s['misses']} misses")


def _load_model(path: str | None):
    if path is None:
        return None
    from .gbm import GbmModel

    return GbmModel.from_json(path)


def _json_out(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_gen_dataset(args, filecfg, fiber) -> int:
    from . import dataset

    defaults = dataclasses.asdict(dataset.GenConfig())
    cli = {
        "n_links": args.links,
        "seed": args.seed,
        "fill_lo": args.fill_lo,
        "fill_hi": args.fill_hi,
        "sparse_frac": args.sparse_frac,
        "sparse_lo": args.sparse_lo,
        "max_spans": args.max_spans,
        "scale": args.scale,
    }
    raw = cfgmod.merged(defaults, filecfg.get("dataset", {}), cli)
    raw["span_choices"] = tuple(float(s) for s in raw["span_choices"])
    cfg = dataset.GenConfig(**raw)
    store = _make_store(args, fiber)
    manifest = dataset.generate(cfg, fiber, args.out, store=store)
    _finish_store(args, store)
    cfgmod.write_run_config(args.out, {
        "command": "gen-dataset",
        "dataset": dict(raw, span_choices=list(raw["span_choices"])),
        "fiber": fiber.as_dict(),
        "store": args.store,
    })
    rows = manifest["rows_per_split"]
    print(f"dataset: {manifest['n_links']} links, "
          f"{rows['train']}/{rows['val']}/{rows['test']} train/val/test rows -> {args.out}")
    return 0


def _write_history_log(model, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("round,train_rmse,val_rmse\n")
        for i, (tr, va) in enumerate(zip(model.train_history, model.val_history)):
            fh.write(f"{i},{tr!r},{va!r}\n")


def _cmd_train(args, filecfg, fiber) -> int:
    import os

    from . import dataset, gbm

    defaults = dataclasses.asdict(gbm.GbmParams())
    cli = {
        "n_trees": args.n_trees,
        "max_depth": args.max_depth,
        "learning_rate": args.learning_rate,
        "min_samples_leaf": args.min_samples_leaf,
        "subsample": args.subsample,
        "seed": args.seed,
    }
    params = gbm.GbmParams(**cfgmod.merged(defaults, filecfg.get("train", {}), cli))
    tr = dataset.load_split(args.dataset, "train")
    va = dataset.load_split(args.dataset, "val")
    names = dataset.feature_names()
    log = args.log or os.path.join(os.path.dirname(args.model_out) or ".", "train_log.csv")
    # Column 0 shares the label's units and equals it exactly for a lone
    # channel, so the trees model only the cross-channel excess.
    off = names.index("sci_cut_db")

    if args.tune:
        model, results = gbm.tune(tr["X"], tr["y"], va["X"], va["y"],
                                  base_params=params, feature_names=names,
                                  offset_feature=off)
        _write_history_log(model, log)
        base, _ = os.path.splitext(args.model_out)
        _json_out(base + ".tune.json", {"results": results})
        print(f"tune: best of {len(results)} grid points -> {model.params}")
    else:
        model = gbm.train(tr["X"], tr["y"], va["X"], va["y"],
                          params=params, feature_names=names, log_path=log,
                          offset_feature=off)
    model.to_json(args.model_out)
    cfgmod.write_run_config(args.model_out, {
        "command": "train",
        "dataset": args.dataset,
        "params": dataclasses.asdict(model.params),
        "tune": bool(args.tune),
    })
    n_rounds = len(model.trees)
    val_rmse = model.val_history[model.best_iteration] if model.val_history else float("nan")
    top = sorted(zip(model.feature_importance, names), reverse=True)[:3]
    print(f"model: {n_rounds} trees, val rmse {val_rmse:.4f} dB -> {args.model_out}")
    print("top features: " + ", ".join(f"{n} ({g:.3g})" for g, n in top))
    return 0


def _cmd_eval(args, filecfg, fiber) -> int:
    from . import dataset, qot

    split = None if args.split == "all" else args.split
    links = [(lid, link) for lid, _s, link in dataset.load_links(args.dataset, split)]
    store = _make_store(args, fiber)
    est = qot.Estimator(args.estimator, fiber, model=_load_model(args.model), store=store)
    report = qot.evaluate(links, est, fiber, store=store)
    files = qot.write_report(report, args.out)
    _finish_store(args, store)
    cfgmod.write_run_config(args.out, {
        "command": "eval",
        "dataset": args.dataset,
        "estimator": args.estimator,
        "model": args.model,
        "split": args.split,
    })
    s = report.stats
    print(f"eval[{args.estimator}/{args.split}]: {s['n']} channels, "
          f"mean abs {s['mean_abs_db']:.4f} dB, p99 {s['p99_abs_db']:.4f} dB "
          f"-> {files['report']}")
    return 0


def _cmd_optimize_spectrum(args, filecfg, fiber) -> int:
    from . import qot, specopt

    defaults = dataclasses.asdict(specopt.SpectrumScenario())
    cli = {
        "n_spans": args.spans,
        "span_km": args.span_km,
        "fill": args.fill,
        "seed": args.seed,
    }
    scen = specopt.SpectrumScenario(
        **cfgmod.merged(defaults, filecfg.get("spectrum", {}), cli))
    store = _make_store(args, fiber)
    est = qot.Estimator(args.estimator, fiber, model=_load_model(args.model), store=store)
    result = specopt.run_scenario(scen, est, fiber, store=store)
    _json_out(args.out, result)
    _finish_store(args, store)
    cfgmod.write_run_config(args.out, {
        "command": "optimize-spectrum",
        "estimator": args.estimator,
        "model": args.model,
        "scenario": scen.as_dict(),
    })
    print(f"spectrum[{args.estimator}]: {len(result['demands'])} channels, "
          f"mean gain {result['mean_gain_db']:.4f} dB "
          f"(min {result['min_gain_db']:.4f}, max {result['max_gain_db']:.4f}) -> {args.out}")
    return 0


def _cmd_plan(args, filecfg, fiber) -> int:
    from . import planner, qot

    topo_path = args.topology or planner.default_topology_path()
    topo = planner.Topology.from_json(topo_path)
    store = _make_store(args, fiber)
    est = qot.Estimator(args.estimator, fiber, model=_load_model(args.model), store=store)
    seed = 1234 if args.seed is None else args.seed
    report = planner.plan(topo, args.years, est, fiber, store=store, seed=seed)
    _json_out(args.out, report)
    _finish_store(args, store)
    cfgmod.write_run_config(args.out, {
        "command": "plan",
        "topology": topo_path,
        "years": args.years,
        "estimator": args.estimator,
        "model": args.model,
        "seed": seed,
    })
    ok = not report["oracle_check"]["violations"]
    print(f"plan[{args.estimator}]: {report['total_lightpaths']} lightpaths over "
          f"{args.years} years, {len(report['blocked'])} blocked, "
          f"oracle check {'clean' if ok else 'VIOLATIONS'} -> {args.out}")
    return 1 if not ok else 0


def _cmd_bench(args, filecfg, fiber) -> int:
    from . import bench

    report = bench.run_bench(
        fiber,
        model=_load_model(args.model),
        n_channels=args.channels,
        repeats=args.repeats,
        compare_backends=args.compare_kernels,
    )
    if args.out:
        _json_out(args.out, report)
        print(f"bench -> {args.out}")
    else:
        json.dump(report, sys.stdout, indent=2, sort_keys=True)
        print()
    us = 1e6
    if "ml_per_channel_s" in report:
        print(f"ml {report['ml_per_channel_s'] * us:.1f} us/ch  "
              f"closed-form {report['closed_form_per_channel_s'] * us:.1f} us/ch  "
              f"oracle cold {report['oracle_cold_per_channel_s'] * us:.1f} us/ch  "
              f"({report['speedup_ml_vs_oracle_cold']:.0f}x)")
        if not report["ordering_ok"]:
            print("latency ordering violated: expected ml < closed-form < oracle",
                  file=sys.stderr)
            return 1
    return 0


_HANDLERS = {
    "gen-dataset": _cmd_gen_dataset,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "optimize-spectrum": _cmd_optimize_spectrum,
    "plan": _cmd_plan,
    "bench": _cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        filecfg = cfgmod.resolve_config(args.config)
        if args.threads is not None:
            cfgmod.set_threads(args.threads)
        fiber = cfgmod.fiber_from(filecfg)
        return _HANDLERS[args.command](args, filecfg, fiber)
    except (NliConquerError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

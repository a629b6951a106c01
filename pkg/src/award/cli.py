"""Command-line harness: ``award generate | cluster | benchmark | grid | evaluate``.

Exit status is 0 when all requested work succeeded, 1 when some of it failed
at run time and 2 for invalid arguments or configuration.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .agglomerative import ALGORITHMS, run_algorithm
from .core import Partition, partition_from_labels, standardize_range
from .datagen import NoiseSpec, make_dataset, paper_table1, parse_config_name
from .evaluation import METRICS, adjusted_rand, ari_excluding, run_grid, silhouette

logger = logging.getLogger("award")

OUT_ENV = "AWARD_OUT"
EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def parse_seeds(text) -> list[int]:
    """``"3"``, ``"0-19"`` or ``"1,4,7"`` (ranges may be mixed in)."""
    if isinstance(text, int):
        return [text]
    if isinstance(text, (list, tuple)):
        return [int(s) for s in text]
    seeds: list[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    if not seeds:
        raise UsageError("no seeds given")
    return seeds


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or "award_out")
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- dataset resolution --------------------------------------------------------

class Loaded:
    def __init__(self, matrix, truth=None, substituted=None, name="data"):
        self.matrix = matrix
        self.truth = truth
        self.substituted = substituted
        self.name = name


def _noise_from_args(args) -> tuple:
    noise = []
    if getattr(args, "noise_features", 0):
        noise.append(NoiseSpec("noise_features", args.noise_features))
    if getattr(args, "blur", None):
        noise.append(NoiseSpec("cluster_blur", args.blur))
    if getattr(args, "substitute", None):
        noise.append(NoiseSpec("entity_substitution", args.substitute))
    return tuple(noise)


def _generated(name: str, seed: int, extra=()) -> Loaded:
    cfg, noise = parse_config_name(name, seed)
    ds = make_dataset(cfg, noise + tuple(extra))
    return Loaded(ds.matrix, ds.truth, ds.substituted, f"{ds.name} seed{seed}")


def _load(args, seed: int | None = None) -> Loaded:
    if getattr(args, "dataset", None):
        return _generated(args.dataset, seed if seed is not None else 0, _noise_from_args(args))
    if not getattr(args, "data", None):
        raise UsageError("give a data CSV or --dataset NAME")
    label = getattr(args, "label_column", None)
    m, truth = io.read_matrix_csv(args.data, label_column=label)
    sub = None
    side = Path(args.data).with_suffix(".json")
    if side.exists():
        meta = json.loads(side.read_text())
        if truth is None and meta.get("truth"):
            truth = partition_from_labels(meta["truth"])
        if meta.get("substituted"):
            sub = np.zeros(m.n_entities, dtype=bool)
            sub[meta["substituted"]] = True
    return Loaded(m, truth, sub, Path(args.data).stem)


def _prepare(loaded: Loaded, standardize: bool) -> Loaded:
    if standardize:
        m, dropped = standardize_range(loaded.matrix)
        if dropped:
            logger.warning("dropped constant features: %s", ", ".join(dropped))
        loaded.matrix = m
    return loaded


def _score(loaded: Loaded, part: Partition) -> float | None:
    if loaded.truth is None:
        return None
    if loaded.substituted is not None and loaded.substituted.any():
        return ari_excluding(part, loaded.truth, loaded.substituted)
    return adjusted_rand(part, loaded.truth)


def _algo_params(args) -> dict:
    alg = args.algorithm
    p = args.p if alg in ("ward_p", "a_ward_pb") else None
    beta = args.beta if alg == "a_ward_pb" else None
    if alg in ("ward", "a_ward") and (args.p is not None or args.beta is not None):
        raise UsageError(f"{alg} takes no --p or --beta")
    if alg == "ward_p" and args.beta is not None:
        raise UsageError("ward_p takes --p only")
    if alg in ("ward_p", "a_ward_pb") and p is None and not getattr(args, "grid", False):
        raise UsageError(f"{alg} needs --p" + (" and --beta" if alg == "a_ward_pb" else ""))
    if alg == "a_ward_pb" and beta is None and not getattr(args, "grid", False):
        raise UsageError("a_ward_pb needs --beta")
    return {"p": p, "beta": beta, "theta": args.theta}


# -- generate ------------------------------------------------------------------

def cmd_generate(args) -> int:
    out = _out_dir(args)
    seeds = parse_seeds(args.seeds)
    if args.preset == "paper-table1":
        datasets = paper_table1(seeds)
    elif args.preset:
        raise UsageError(f"unknown preset {args.preset!r}")
    elif args.dataset:
        try:
            parsed = [_with_extra(parse_config_name(args.dataset, s), args) for s in seeds]
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        datasets = [make_dataset(*p) for p in parsed]
    else:
        raise UsageError("give --dataset NAME or --preset paper-table1")
    for ds in datasets:
        io.save_dataset(ds, out)
    print(f"wrote {len(datasets)} dataset(s) to {out}")
    return EXIT_OK


def _with_extra(parsed, args):
    cfg, noise = parsed
    return cfg, noise + _noise_from_args(args)


# -- cluster -------------------------------------------------------------------

def cmd_cluster(args) -> int:
    params = _algo_params(args)
    loaded = _prepare(_load(args, args.seed), args.standardize)
    m = loaded.matrix
    res = run_algorithm(args.algorithm, m, args.k, params["p"], params["beta"], params["theta"])
    out = _out_dir(args)
    io.write_partition_csv(out / "partition.csv", res.partition)
    io.write_linkage_csv(out / "linkage.csv", res.dendrogram)
    (out / "tree.nwk").write_text(io.to_newick(res.dendrogram) + "\n")
    d = res.dendrogram
    if args.algorithm.startswith("a_"):
        io.write_partition_csv(out / "leaves.csv", Partition(d.leaf_labels))
    timing = {
        "algorithm": args.algorithm,
        "k_target": res.k_target,
        "k_star": res.k_star,
        "init_ms": 1000 * res.timings.get("init_s", 0.0),
        "agglomeration_ms": 1000 * res.timings.get("agglomeration_s", 0.0),
        "inversions": d.inversions(),
        "p": params["p"],
        "beta": params["beta"],
    }
    timing["total_ms"] = timing["init_ms"] + timing["agglomeration_ms"]
    ari = _score(loaded, res.partition)
    if ari is not None:
        timing["ari_vs_truth"] = ari
    (out / "timing.json").write_text(json.dumps(timing, indent=1))
    print(f"{args.algorithm}: K*={res.k_star} k={res.k_target}"
          + ("" if ari is None else f" ARI={ari:.4f}") + f" -> {out}")
    return EXIT_OK


# -- benchmark -----------------------------------------------------------------

def _bench_seed(job):
    args, seed, algorithms = job
    loaded = _prepare(_load(args, seed), args.standardize)
    rows, parts = [], {}
    for alg in algorithms:
        row = {"seed": seed, "algorithm": alg}
        try:
            if alg in ("ward_p", "a_ward_pb") and args.grid:
                t0 = time.perf_counter()
                g = run_grid(loaded.matrix, args.k, alg, metrics=(), truth=loaded.truth,
                             step=args.step, jobs=1)
                best = g.best_by_ari()
                parts[alg] = Partition(best.labels)
                row.update(p=best.p, beta=best.beta, k_star="",
                           init_ms="", agglomeration_ms="",
                           total_ms=1000 * (time.perf_counter() - t0))
            else:
                p = args.p if alg in ("ward_p", "a_ward_pb") else None
                beta = args.beta if alg == "a_ward_pb" else None
                res = run_algorithm(alg, loaded.matrix, args.k, p, beta, args.theta)
                parts[alg] = res.partition
                init_ms = 1000 * res.timings["init_s"]
                agg_ms = 1000 * res.timings["agglomeration_s"]
                row.update(p=p if p is not None else "", beta=beta if beta is not None else "",
                           k_star=res.k_star, init_ms=init_ms, agglomeration_ms=agg_ms,
                           total_ms=init_ms + agg_ms)
            row["ari_vs_truth"] = _score(loaded, parts[alg])
            row["error"] = ""
        except Exception as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    pair = None
    if "ward" in parts and "a_ward" in parts:
        pair = adjusted_rand(parts["ward"], parts["a_ward"])
    for row in rows:
        row["ari_ward_vs_award"] = pair if pair is not None else ""
    return rows


BENCH_FIELDS = ["seed", "algorithm", "p", "beta", "ari_vs_truth", "ari_ward_vs_award",
                "k_star", "init_ms", "agglomeration_ms", "total_ms", "error"]


def summarise(rows: list[dict]) -> list[dict]:
    """Mean and population standard deviation per algorithm over successful rows."""
    out = []
    for alg in dict.fromkeys(r["algorithm"] for r in rows):
        good = [r for r in rows if r["algorithm"] == alg and not r["error"]]
        agg = {"algorithm": alg, "n_ok": len(good),
               "n_failed": sum(1 for r in rows if r["algorithm"] == alg and r["error"])}
        for key in ("ari_vs_truth", "k_star", "total_ms", "ari_ward_vs_award"):
            vals = [float(r[key]) for r in good if r.get(key) not in ("", None)]
            agg[f"{key}_mean"] = float(np.mean(vals)) if vals else ""
            agg[f"{key}_sd"] = float(np.std(vals)) if vals else ""
        out.append(agg)
    return out


def cmd_benchmark(args) -> int:
    seeds = parse_seeds(args.seeds)
    algorithms = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    for alg in algorithms:
        if alg not in ALGORITHMS:
            raise UsageError(f"unknown algorithm {alg!r}")
        if alg in ("ward_p", "a_ward_pb") and not args.grid and args.p is None:
            raise UsageError(f"{alg} needs --p (and --beta) or --grid")
        if alg == "a_ward_pb" and not args.grid and args.beta is None:
            raise UsageError("a_ward_pb needs --beta or --grid")
    if not args.dataset and not args.data:
        raise UsageError("benchmark needs --dataset NAME or a data CSV")
    jobs = [(args, s, algorithms) for s in seeds]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_bench_seed, jobs))
    else:
        results = [_bench_seed(j) for j in jobs]
    rows = [r for rs in results for r in rs]
    out = _out_dir(args)
    _write_rows(out / "benchmark_rows.csv", rows, BENCH_FIELDS)
    summary = summarise(rows)
    _write_rows(out / "benchmark_summary.csv", summary, list(summary[0].keys()))
    for s in summary:
        print(f"{s['algorithm']:>10}: ARI {_f(s['ari_vs_truth_mean'])} "
              f"(sd {_f(s['ari_vs_truth_sd'])})  K* {_f(s['k_star_mean'], 2)}  "
              f"ok {s['n_ok']}/{s['n_ok'] + s['n_failed']}")
    return EXIT_FAILED if any(r["error"] for r in rows) else EXIT_OK


def _f(x, digits=4) -> str:
    return "-" if x == "" else f"{x:.{digits}f}"


def _write_rows(path, rows, fields) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in fields})


# -- grid ----------------------------------------------------------------------

def cmd_grid(args) -> int:
    if args.algorithm not in ("a_ward_pb", "ward_p"):
        raise UsageError("grid supports a_ward_pb and ward_p")
    metrics = [x.strip() for x in args.metric.split(",") if x.strip()]
    for metric in metrics:
        if metric not in METRICS:
            raise UsageError(f"unknown metric {metric!r}; choose from {METRICS}")
    seeds = parse_seeds(args.seeds) if args.dataset else [None]
    out = _out_dir(args)
    summary = []
    for seed in seeds:
        loaded = _prepare(_load(args, seed), args.standardize)
        g = run_grid(loaded.matrix, args.k, args.algorithm, metrics=metrics, truth=loaded.truth,
                     step=args.step, jobs=args.jobs)
        tag = "" if seed is None else f"_seed{seed}"
        g.to_csv(out / f"grid{tag}.csv")
        best_ari = None
        if loaded.truth is not None:
            best = g.best_by_ari()
            best_ari = _score(loaded, Partition(best.labels))
            summary.append({"seed": seed, "selection": "best_ari", "p": best.p, "beta": best.beta,
                            "silhouette": "", "ari_vs_truth": best_ari})
        for metric in metrics:
            cell = g.best(metric)
            ari = None if loaded.truth is None else _score(loaded, Partition(cell.labels))
            summary.append({"seed": seed, "selection": f"silhouette_{metric}", "p": cell.p,
                            "beta": cell.beta, "silhouette": cell.silhouette[metric],
                            "ari_vs_truth": ari})
        failed = sum(not c.ok for c in g.cells)
        print(f"{loaded.name}: {len(g.cells) - failed}/{len(g.cells)} cells ok"
              + ("" if best_ari is None else f", best ARI {best_ari:.4f}"))
    _write_rows(out / "grid_summary.csv", summary,
                ["seed", "selection", "p", "beta", "silhouette", "ari_vs_truth"])
    return EXIT_OK


# -- evaluate ------------------------------------------------------------------

def cmd_evaluate(args) -> int:
    part = io.read_partition_csv(args.partition)
    report = {}
    if args.against:
        other = io.read_partition_csv(args.against)
        report["ari"] = adjusted_rand(part, other)
    if args.data or args.dataset:
        loaded = _prepare(_load(args, args.seed), args.standardize)
        if loaded.truth is not None:
            report["ari_vs_truth"] = _score(loaded, part)
        for metric in [x.strip() for x in args.metric.split(",") if x.strip()]:
            if metric == "minkowski" and args.p is None:
                raise UsageError("the minkowski Silhouette needs --p")
            report[f"silhouette_{metric}"] = silhouette(loaded.matrix, part, metric, args.p)
    if not report:
        raise UsageError("nothing to evaluate: give --against and/or data")
    print(json.dumps(report, indent=1))
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------

def _add_data(sp, seeds=False):
    sp.add_argument("data", nargs="?", help="dataset CSV (a .json sidecar is read if present)")
    sp.add_argument("--dataset", help="generate in memory, e.g. '1000x20-10 +10NF'")
    if seeds:
        sp.add_argument("--seeds", default="0", help="e.g. 0-19 or 1,3,5")
    else:
        sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--label-column", help="column (name or index) holding true labels")
    sp.add_argument("--standardize", action="store_true", help="range-standardise features")
    sp.add_argument("--noise-features", type=int, default=0)
    sp.add_argument("--blur", type=float)
    sp.add_argument("--substitute", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="award", description=__doc__.splitlines()[0],
                                 allow_abbrev=False)
    ap.add_argument("--config", help="JSON file of option defaults")
    ap.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./award_out)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write synthetic datasets", allow_abbrev=False)
    g.add_argument("--dataset", help="configuration name such as '1000x6-3 +3NF'")
    g.add_argument("--preset", help="'paper-table1': nine configurations per seed")
    g.add_argument("--seeds", default="0")
    g.add_argument("--noise-features", type=int, default=0)
    g.add_argument("--blur", type=float)
    g.add_argument("--substitute", type=float)

    c = sub.add_parser("cluster", help="run one algorithm", allow_abbrev=False)
    _add_data(c)
    c.add_argument("--algorithm", choices=ALGORITHMS, default="a_ward")
    c.add_argument("--k", type=int, help="number of clusters (required)")
    c.add_argument("--p", type=float)
    c.add_argument("--beta", type=float)
    c.add_argument("--theta", type=int, default=1)

    b = sub.add_parser("benchmark", help="run algorithms over seeds and summarise",
                       allow_abbrev=False)
    _add_data(b, seeds=True)
    b.add_argument("--algorithms", default="ward,a_ward")
    b.add_argument("--k", type=int, help="number of clusters (required)")
    b.add_argument("--p", type=float)
    b.add_argument("--beta", type=float)
    b.add_argument("--theta", type=int, default=1)
    b.add_argument("--grid", action="store_true", help="best-ARI over the exponent grid")
    b.add_argument("--step", type=float, default=0.1)
    b.add_argument("--jobs", type=int, default=1)

    r = sub.add_parser("grid", help="exponent grid scored by Silhouette", allow_abbrev=False)
    _add_data(r, seeds=True)
    r.add_argument("--algorithm", choices=("a_ward_pb", "ward_p"), default="a_ward_pb")
    r.add_argument("--k", type=int, help="number of clusters (required)")
    r.add_argument("--metric", default="manhattan", help="comma list of " + ", ".join(METRICS))
    r.add_argument("--step", type=float, default=0.1)
    r.add_argument("--jobs", type=int, default=1)

    e = sub.add_parser("evaluate", help="ARI and Silhouette of a saved partition", allow_abbrev=False)
    e.add_argument("partition", help="partition CSV (entity_id,cluster)")
    e.add_argument("--against", help="second partition CSV")
    _add_data(e)
    e.add_argument("--metric", default="", help="Silhouette metrics, comma list")
    e.add_argument("--p", type=float)
    return ap


COMMANDS = {"generate": cmd_generate, "cluster": cmd_cluster, "benchmark": cmd_benchmark,
            "grid": cmd_grid, "evaluate": cmd_evaluate}


def _apply_config(ap, argv):
    """Re-parse with defaults taken from ``--config`` so flags still win."""
    args = ap.parse_args(argv)
    if not args.config:
        return args
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    for key in ("seeds",):
        if isinstance(cfg.get(key), list):
            cfg[key] = ",".join(str(s) for s in cfg[key])
    ap.set_defaults(**{k: v for k, v in cfg.items() if k in ("out", "verbose")})
    sub = ap._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    unknown = set(cfg) - known - {"out", "verbose", "command", "config"}
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    sub.set_defaults(**{k: v for k, v in cfg.items() if k in known})
    return ap.parse_args(argv)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = _apply_config(ap, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"award: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "k", 0) is None:
            raise UsageError("--k is required (on the command line or in --config)")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"award: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"award: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())

"""Single command-line entry point.

Subcommands: gen, train, eval, explain, verify, bench, sweep-csbm. Every
subcommand resolves its configuration as defaults < config file < explicit
flags and writes the effective config next to its outputs, so re-running with
that file reproduces the outputs byte-for-byte. Exit codes: 0 success,
1 property/acceptance failure, 2 usage error, 3 runtime divergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import datasets as ds
from .model import SolverOpts
from .seeding import rng_for
from .solver import TikhonovOperator, forward as solver_forward
from .bernstein import BernsteinFilter
from .training import (
    TrainConfig,
    TrainingDiverged,
    export_explanation,
    forward_dataset,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .verification import DEFAULT_TRIALS, format_table, replay, run_all

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_DIVERGED = 3

GEN_TASKS = ("colors", "clique_distance", "triangles", "csbm", "diameter")

# Per-task training presets (hyperparameter-appendix conventions at desk scale).
PRESETS: dict[str, dict] = {
    "colors": dict(
        filter_init="linear", hidden=16, qnet_layers=3, qnet_order=3, qnet_hidden=8,
        q_init=1.0, pooling="mean_sum_max_layernorm", batch_size=64, patience=50,
        learning_rate=5e-3, loss="cross_entropy",
    ),
    "clique_distance": dict(
        filter_init="flat", hidden=8, qnet_layers=5, qnet_order=3, qnet_hidden=8,
        q_init=0.1, pooling="mean_sum_max_layernorm", batch_size=128, patience=150,
        learning_rate=5e-3, loss="cross_entropy",
    ),
    "triangles": dict(
        filter_init="linear", hidden=8, qnet_layers=5, qnet_order=3, qnet_hidden=8,
        q_init=0.01, pooling="mean_sum_max_layernorm", batch_size=128, patience=250,
        learning_rate=5e-3, loss="cross_entropy", max_epochs=800,
    ),
    "csbm": dict(
        filter_init="linear", hidden=16, qnet_layers=3, qnet_order=10, qnet_hidden=8,
        q_init=0.1, pooling="sum_sumsq_batchnorm", batch_size=128, patience=50,
        learning_rate=5e-4, loss="cross_entropy",
    ),
    "diameter": dict(
        filter_init="linear", hidden=8, qnet_layers=2, qnet_order=3, qnet_hidden=8,
        q_init=0.001, pooling="mean_sum_max_layernorm", batch_size=256, patience=150,
        learning_rate=1e-2, loss="mae", pcg_tol=1e-10, pcg_max_iter=50, max_epochs=400,
    ),
}

TRAIN_KEYS = [
    "learning_rate", "batch_size", "patience", "max_epochs", "seed", "pcg_tol",
    "pcg_max_iter", "q_min", "q_max", "pooling", "loss", "hidden", "channels",
    "degree", "filter_init", "qnet_layers", "qnet_order", "qnet_hidden",
    "q_init", "precond",
]


def _usage_error(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_USAGE


def read_config_file(path: str) -> dict:
    """Flat key=value lines, '#' comments, UTF-8."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _coerce(value, like):
    if isinstance(like, bool):
        return str(value).lower() in ("1", "true", "yes")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    return value


def resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults < config file < explicit CLI flags."""
    eff = dict(defaults)
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        file_cfg = read_config_file(cfg_path)
        for key, value in file_cfg.items():
            if key in eff:
                eff[key] = _coerce(value, eff[key])
            else:
                eff[key] = value
    for key in eff:
        cli_val = getattr(args, key, None)
        if cli_val is not None:
            eff[key] = cli_val
    return eff


def write_effective_config(out_dir: str, subcommand: str, eff: dict):
    path = os.path.join(out_dir, "config.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"subcommand": subcommand, "args": eff}, fh, sort_keys=True)
        fh.write("\n")


def _dump_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True)
        fh.write("\n")


def _check_out_dir(path: str) -> bool:
    parent = os.path.dirname(os.path.abspath(path))
    return os.path.isdir(parent)


# ---------------------------------------------------------------------------
# gen


def cmd_gen(args) -> int:
    defaults = {
        "task": args.task, "count": 1000, "seed": 0,
        "n_min": 5, "n_max": 15, "num_colors": 3, "mean_degree": 3.0,
        "clique_min": 4, "clique_max": 8, "path_min": 1, "path_max": 7,
        "edge_factor": 1.1,
        "n": 100, "avg_degree": 10.0, "lam": 1.0, "mu_over_sqrtgamma": 1.0, "gamma": 25.0,
        "diam_min": 4, "diam_max": 30,
    }
    eff = resolve(args, defaults)
    task, count, seed = eff["task"], int(eff["count"]), int(eff["seed"])
    if task not in GEN_TASKS:
        return _usage_error(f"unknown task {task!r}; choose from {GEN_TASKS}")
    if not _check_out_dir(args.out):
        return _usage_error(f"output directory parent does not exist: {args.out}")
    os.makedirs(args.out, exist_ok=True)

    if task == "colors":
        samples = ds.gen_colors(count, seed, (eff["n_min"], eff["n_max"]),
                                eff["num_colors"], eff["mean_degree"])
        stratify = True
    elif task == "clique_distance":
        samples = ds.gen_clique_distance(count, seed, (eff["clique_min"], eff["clique_max"]),
                                         (eff["path_min"], eff["path_max"]))
        stratify = True
    elif task == "triangles":
        samples = ds.gen_triangles(count, seed, (eff["n_min"], eff["n_max"]), eff["edge_factor"])
        stratify = True
    elif task == "csbm":
        mu = float(eff["mu_over_sqrtgamma"]) * float(eff["gamma"]) ** 0.5
        params = ds.CsbmParams(n=int(eff["n"]), avg_degree=float(eff["avg_degree"]),
                               lam=float(eff["lam"]), mu=mu, gamma=float(eff["gamma"]), seed=seed)
        samples = ds.gen_csbm_task(params, count)
        stratify = True
    else:
        samples = ds.gen_diameter(count, seed, (eff["diam_min"], eff["diam_max"]))
        stratify = False

    splits = ds.split_dataset(samples, seed=seed, stratify=stratify)
    gen_params = {k: eff[k] for k in sorted(eff) if k not in ("task",)}
    for name, part in zip(("train", "val", "test"), splits):
        ds.save_jsonl(os.path.join(args.out, f"{name}.jsonl"), part, task, gen_params, seed)
    write_effective_config(args.out, "gen", eff)
    print(f"wrote {[len(p) for p in splits]} samples to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train


def _load_splits(data_dir: str):
    parts = []
    header = None
    for name in ("train", "val", "test"):
        path = os.path.join(data_dir, f"{name}.jsonl")
        if not os.path.exists(path):
            raise FileNotFoundError(f"missing dataset split: {path}")
        samples, header = ds.load_jsonl(path)
        parts.append(samples)
    return parts, header


def cmd_train(args) -> int:
    if not os.path.isdir(args.data):
        return _usage_error(f"dataset directory not found: {args.data}")
    if not _check_out_dir(args.out):
        return _usage_error(f"output directory parent does not exist: {args.out}")
    try:
        (train_s, val_s, test_s), header = _load_splits(args.data)
    except (FileNotFoundError, ValueError) as exc:
        return _usage_error(str(exc))
    generator = header.get("generator", "")
    defaults = TrainConfig().to_dict()
    preset_name = args.preset if args.preset not in (None, "auto") else generator
    defaults.update(PRESETS.get(preset_name, {}))
    eff = resolve(args, defaults)
    os.makedirs(args.out, exist_ok=True)
    cfg = TrainConfig(**{k: eff[k] for k in TRAIN_KEYS})

    trace_fh = None
    trace = None
    if args.trace_solver:
        trace_fh = open(os.path.join(args.out, "trace.jsonl"), "w", encoding="utf-8")

        def trace(record):
            trace_fh.write(json.dumps(record, sort_keys=True) + "\n")

    try:
        result = train(train_s, val_s, test_s, cfg, trace=trace)
    except TrainingDiverged as exc:
        _dump_json(os.path.join(args.out, "report.json"),
                   {"diverged": True, "message": str(exc), "report": exc.report})
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    finally:
        if trace_fh:
            trace_fh.close()

    save_checkpoint(os.path.join(args.out, "checkpoint.json"), result.params,
                    result.encoding, cfg)
    _dump_json(os.path.join(args.out, "report.json"), result.report)
    write_effective_config(args.out, "train", eff)
    final = result.report["final"]
    print(f"test_metric={final['test_metric']:.4f} best_epoch={final['best_epoch']} "
          f"epochs_run={final['epochs_run']}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval / explain


def cmd_eval(args) -> int:
    if not os.path.exists(args.checkpoint):
        return _usage_error(f"checkpoint not found: {args.checkpoint}")
    if not os.path.exists(args.data):
        return _usage_error(f"dataset not found: {args.data}")
    params, encoding = load_checkpoint(args.checkpoint)
    samples, _ = ds.load_jsonl(args.data)
    opts = SolverOpts(tol=args.pcg_tol or 1e-6, max_iter=args.pcg_max_iter or 30)
    preds = forward_dataset(params, samples, opts)
    metric = encoding.metric(preds, [s.label for s in samples])
    out = {"count": len(samples), "task": encoding.task, "metric": metric}
    if args.out:
        _dump_json(args.out, out)
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK


def _q_statistics(explanations: list[dict]) -> dict:
    """Median q over ground-truth-marked nodes vs the rest, pooled over the
    graphs that carry annotations (unannotated graphs are excluded so they do
    not dilute the contrast)."""
    marked, unmarked = [], []
    annotated = 0
    for exp in explanations:
        nodes = set(exp.get("meta", {}).get("highlight_nodes", []))
        if not nodes:
            continue
        annotated += 1
        for i, qv in enumerate(exp["q"][0]):
            (marked if i in nodes else unmarked).append(qv)
    stats: dict = {"num_graphs": len(explanations), "num_annotated": annotated}
    if marked and unmarked:
        m, u = float(np.median(marked)), float(np.median(unmarked))
        stats.update({
            "median_q_marked": m,
            "median_q_unmarked": u,
            "ratio": m / u if u > 0 else float("inf"),
        })
    return stats


def cmd_explain(args) -> int:
    if not os.path.exists(args.checkpoint):
        return _usage_error(f"checkpoint not found: {args.checkpoint}")
    if not os.path.exists(args.data):
        return _usage_error(f"dataset not found: {args.data}")
    if not _check_out_dir(args.out):
        return _usage_error(f"output directory parent does not exist: {args.out}")
    params, encoding = load_checkpoint(args.checkpoint)
    samples, _ = ds.load_jsonl(args.data)
    if args.limit:
        samples = samples[: args.limit]
    os.makedirs(args.out, exist_ok=True)
    opts = SolverOpts(tol=args.pcg_tol or 1e-6, max_iter=args.pcg_max_iter or 30)
    explanations = []
    for idx, sample in enumerate(samples):
        exp = export_explanation(params, encoding, sample, opts)
        _dump_json(os.path.join(args.out, f"explanation_{idx:04d}.json"), exp)
        explanations.append(exp)
    _dump_json(os.path.join(args.out, "summary.json"), _q_statistics(explanations))
    write_effective_config(args.out, "explain", {
        "checkpoint": os.path.basename(args.checkpoint), "data": os.path.basename(args.data),
        "limit": args.limit, "pcg_tol": args.pcg_tol, "pcg_max_iter": args.pcg_max_iter,
    })
    print(f"wrote {len(explanations)} explanations to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    if args.replay:
        with open(args.replay, encoding="utf-8") as fh:
            record = json.load(fh)
        instance = record.get("instance", record)
        ok, margin, detail = replay(instance)
        print(json.dumps({"ok": ok, "margin": margin, "detail": detail}, sort_keys=True))
        return EXIT_OK if ok else EXIT_FAIL
    trials = args.trials if args.trials else None
    summary = run_all(seed=args.seed or 0, trials=trials, only=args.only)
    print(format_table(summary))
    if args.out:
        _dump_json(args.out, summary)
    return EXIT_OK if summary["all_passed"] else EXIT_FAIL


# ---------------------------------------------------------------------------
# bench


def cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    tols = [float(t) for t in args.tols.split(",")]
    degree = args.degree or 5
    repeats = args.repeats or 3
    rng = rng_for(args.seed or 0, "bench")
    rows = []
    for n in sizes:
        mean_deg = 6.0
        iu, ju = np.triu_indices(n, k=1)
        hit = rng.random(len(iu)) < mean_deg / (n - 1)
        from .graph import build_graph

        g = build_graph(list(zip(iu[hit].tolist(), ju[hit].tolist())), n)
        theta = rng.normal(0.0, 1.0, size=degree + 1)
        for q_kind in ("homogeneous", "spread"):
            q = np.ones(n) if q_kind == "homogeneous" else 10.0 ** rng.uniform(-2, 2, size=n)
            op = TikhonovOperator(g, BernsteinFilter(theta), q)
            x = rng.normal(size=(n, 4))
            for tol in tols:
                sols = {}
                for precond in ("exact", "approx"):
                    t0 = time.perf_counter()
                    for _ in range(repeats):
                        res = solver_forward(op, x, tol, max_iter=10 * n, precond=precond)
                    elapsed = (time.perf_counter() - t0) / repeats
                    sols[precond] = res.z
                    rows.append({
                        "n": n, "m": g.num_edges, "K": degree, "tol": tol,
                        "q_kind": q_kind, "precond": precond,
                        "iters_mean": float(np.mean(res.iterations)),
                        "residual_max": float(np.max(res.residual)),
                        "time_sec": elapsed,
                    })
                diff = float(
                    np.abs(sols["exact"] - sols["approx"]).max()
                    / max(np.abs(sols["exact"]).max(), 1e-30)
                )
                rows[-1]["precond_solution_diff"] = diff
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "bench.csv")
    fields = ["n", "m", "K", "tol", "q_kind", "precond", "iters_mean",
              "residual_max", "time_sec", "precond_solution_diff"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in fields})
    write_effective_config(args.out, "bench", {
        "sizes": args.sizes, "tols": args.tols, "degree": degree,
        "repeats": repeats, "seed": args.seed or 0,
    })
    # Iteration counts should stay roughly flat in n for homogeneous q.
    homog = [r for r in rows if r["q_kind"] == "homogeneous" and r["precond"] == "exact"]
    by_n = {}
    for r in homog:
        by_n.setdefault(r["n"], []).append(r["iters_mean"])
    means = [np.mean(v) for _, v in sorted(by_n.items())]
    flat = all(b <= 1.5 * a and b >= a / 1.5 for a, b in zip(means, means[1:]))
    print(f"wrote {path}; iteration counts {'roughly flat' if flat else 'NOT flat'} in n: "
          + ", ".join(f"{m:.1f}" for m in means))
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep-csbm


def cmd_sweep_csbm(args) -> int:
    lambdas = [float(v) for v in args.lambdas.split(",")]
    mus = [float(v) for v in args.mus.split(",")]
    folds = args.folds or 3
    count = args.count or 600
    seed = args.seed or 0
    gamma = args.gamma or 25.0
    avg_degree = args.avg_degree or 10.0
    n = args.n or 100
    if any(l > avg_degree**0.5 for l in lambdas):
        return _usage_error("lambda grid exceeds sqrt(avg_degree)")
    if not _check_out_dir(args.out):
        return _usage_error(f"output directory parent does not exist: {args.out}")
    os.makedirs(args.out, exist_ok=True)

    defaults = TrainConfig().to_dict()
    defaults.update(PRESETS["csbm"])
    eff = resolve(args, defaults)
    rows = []
    for lam in lambdas:
        for mu_norm in mus:
            label = f"cell/{lam:.6f}/{mu_norm:.6f}".encode()
            cell_seed = seed + int.from_bytes(
                hashlib.blake2b(label, digest_size=4).digest(), "big"
            )
            params = ds.CsbmParams(n=n, avg_degree=avg_degree, lam=lam,
                                   mu=mu_norm * gamma**0.5, gamma=gamma, seed=cell_seed)
            samples = ds.gen_csbm_task(params, count)
            accs, medians = [], []
            fold_sizes = [count // folds] * folds
            for extra in range(count - sum(fold_sizes)):
                fold_sizes[extra] += 1
            bounds = np.concatenate([[0], np.cumsum(fold_sizes)])
            for fold in range(folds):
                test_idx = set(range(bounds[fold], bounds[fold + 1]))
                test_s = [samples[i] for i in sorted(test_idx)]
                rest = [samples[i] for i in range(count) if i not in test_idx]
                n_val = max(1, len(rest) // 10)
                val_s, train_s = rest[:n_val], rest[n_val:]
                cfg = TrainConfig(**{k: eff[k] for k in TRAIN_KEYS})
                cfg.seed = cell_seed + fold
                result = train(train_s, val_s, test_s, cfg)
                accs.append(result.report["final"]["test_metric"])
                medians.append(_median_q(result, test_s, cfg))
            acc_mean = float(np.mean(accs))
            rows.append({
                "lambda": lam, "mu_over_sqrt_gamma": mu_norm,
                "accuracy_mean": acc_mean, "accuracy_std": float(np.std(accs)),
                "median_q": float(np.median(medians)),
                "blank": int(acc_mean < 0.56),
            })
            print(f"cell lam={lam} mu/sqrt(gamma)={mu_norm}: acc={acc_mean:.3f} "
                  f"median_q={rows[-1]['median_q']:.3e}")
    path = os.path.join(args.out, "sweep.csv")
    fields = ["lambda", "mu_over_sqrt_gamma", "accuracy_mean", "accuracy_std",
              "median_q", "blank"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    write_effective_config(args.out, "sweep-csbm", {
        "lambdas": args.lambdas, "mus": args.mus, "folds": folds, "count": count,
        "seed": seed, "gamma": gamma, "avg_degree": avg_degree, "n": n,
        **{k: eff[k] for k in TRAIN_KEYS},
    })
    print(f"wrote {path}")
    return EXIT_OK


def _median_q(result, test_samples, cfg) -> float:
    """Median post-clamp q over all nodes of all test graphs (both classes)."""
    from .graph import normalized_laplacian
    from .qnet import qnet_forward
    from .solver import clamp_q

    qs = []
    for s in test_samples:
        lap = normalized_laplacian(s.graph)
        q_tilde, _ = qnet_forward(lap, s.features, result.params.qnets[0])
        q, _ = clamp_q(q_tilde, cfg.q_min, cfg.q_max)
        qs.append(q)
    return float(np.median(np.concatenate(qs)))


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tikgraph")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a benchmark dataset (train/val/test JSONL)")
    p_gen.add_argument("task", choices=GEN_TASKS)
    p_gen.add_argument("--count", type=int)
    p_gen.add_argument("--seed", type=int)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--config")
    p_gen.add_argument("--n-min", dest="n_min", type=int)
    p_gen.add_argument("--n-max", dest="n_max", type=int)
    p_gen.add_argument("--num-colors", dest="num_colors", type=int)
    p_gen.add_argument("--mean-degree", dest="mean_degree", type=float)
    p_gen.add_argument("--clique-min", dest="clique_min", type=int)
    p_gen.add_argument("--clique-max", dest="clique_max", type=int)
    p_gen.add_argument("--path-min", dest="path_min", type=int)
    p_gen.add_argument("--path-max", dest="path_max", type=int)
    p_gen.add_argument("--edge-factor", dest="edge_factor", type=float)
    p_gen.add_argument("--n", type=int)
    p_gen.add_argument("--avg-degree", dest="avg_degree", type=float)
    p_gen.add_argument("--lambda", dest="lam", type=float)
    p_gen.add_argument("--mu-over-sqrtgamma", dest="mu_over_sqrtgamma", type=float)
    p_gen.add_argument("--gamma", type=float)
    p_gen.add_argument("--diam-min", dest="diam_min", type=int)
    p_gen.add_argument("--diam-max", dest="diam_max", type=int)
    p_gen.set_defaults(func=cmd_gen)

    p_train = sub.add_parser("train", help="train a model on a generated dataset")
    p_train.add_argument("--data", required=True)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--config")
    p_train.add_argument("--preset", default="auto",
                         help="task preset name or 'auto' (from the dataset header)")
    p_train.add_argument("--trace-solver", action="store_true")
    p_train.add_argument("--learning-rate", dest="learning_rate", type=float)
    p_train.add_argument("--batch-size", dest="batch_size", type=int)
    p_train.add_argument("--patience", type=int)
    p_train.add_argument("--max-epochs", dest="max_epochs", type=int)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--pcg-tol", dest="pcg_tol", type=float)
    p_train.add_argument("--pcg-max-iter", dest="pcg_max_iter", type=int)
    p_train.add_argument("--q-min", dest="q_min", type=float)
    p_train.add_argument("--q-max", dest="q_max", type=float)
    p_train.add_argument("--pooling")
    p_train.add_argument("--loss")
    p_train.add_argument("--hidden", type=int)
    p_train.add_argument("--j-channels", dest="channels", type=int)
    p_train.add_argument("--degree", type=int)
    p_train.add_argument("--filter-init", dest="filter_init")
    p_train.add_argument("--qnet-layers", dest="qnet_layers", type=int)
    p_train.add_argument("--qnet-order", dest="qnet_order", type=int)
    p_train.add_argument("--qnet-hidden", dest="qnet_hidden", type=int)
    p_train.add_argument("--q-init", dest="q_init", type=float)
    p_train.add_argument("--precond")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a dataset file")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--out")
    p_eval.add_argument("--pcg-tol", dest="pcg_tol", type=float)
    p_eval.add_argument("--pcg-max-iter", dest="pcg_max_iter", type=int)
    p_eval.set_defaults(func=cmd_eval)

    p_explain = sub.add_parser("explain", help="export per-graph explanations")
    p_explain.add_argument("--checkpoint", required=True)
    p_explain.add_argument("--data", required=True)
    p_explain.add_argument("--out", required=True)
    p_explain.add_argument("--limit", type=int)
    p_explain.add_argument("--pcg-tol", dest="pcg_tol", type=float)
    p_explain.add_argument("--pcg-max-iter", dest="pcg_max_iter", type=int)
    p_explain.set_defaults(func=cmd_explain)

    p_verify = sub.add_parser("verify", help="run the mechanical property suite")
    p_verify.add_argument("--seed", type=int)
    p_verify.add_argument("--trials", type=int)
    p_verify.add_argument("--only", action="append",
                          help="run only property ids containing this substring")
    p_verify.add_argument("--out")
    p_verify.add_argument("--replay", help="re-run one serialized failure instance")
    p_verify.set_defaults(func=cmd_verify)

    p_bench = sub.add_parser("bench", help="PCG iteration/time benchmark")
    p_bench.add_argument("--sizes", default="100,200,400")
    p_bench.add_argument("--tols", default="1e-6,1e-10")
    p_bench.add_argument("--degree", type=int)
    p_bench.add_argument("--repeats", type=int)
    p_bench.add_argument("--seed", type=int)
    p_bench.add_argument("--out", required=True)
    p_bench.set_defaults(func=cmd_bench)

    p_sweep = sub.add_parser("sweep-csbm", help="accuracy/median-q phase grid")
    p_sweep.add_argument("--lambdas", required=True)
    p_sweep.add_argument("--mus", required=True)
    p_sweep.add_argument("--count", type=int)
    p_sweep.add_argument("--folds", type=int)
    p_sweep.add_argument("--seed", type=int)
    p_sweep.add_argument("--gamma", type=float)
    p_sweep.add_argument("--avg-degree", dest="avg_degree", type=float)
    p_sweep.add_argument("--n", type=int)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--config")
    for key in TRAIN_KEYS:
        flag = "--" + key.replace("_", "-")
        if flag in ("--seed",):
            continue
        kind = type(getattr(TrainConfig(), key))
        p_sweep.add_argument(flag, dest=key, type=kind if kind is not str else None)
    p_sweep.set_defaults(func=cmd_sweep_csbm)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        return _usage_error(str(exc))


if __name__ == "__main__":
    sys.exit(main())

"""Repeated train/test experiments with mean and std reporting."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from .config import ExperimentConfig, SplitSpec, SynthSpec
from .driver import fit
from .graph import prune
from .io import load_dataset, load_graph, ratio_split, standardize
from .metrics import normalize_adjacency, rmse, veracity
from .synth import generate

PRUNE_THRESHOLD = 1e-3


def graph_veracity(truth_adjacency, learned_graph, threshold=PRUNE_THRESHOLD):
    """Veracity of a learned graph (pruned, then max-normalized) against the truth."""
    pred = normalize_adjacency(prune(learned_graph, threshold).adjacency())
    return veracity(normalize_adjacency(truth_adjacency), pred)


def _load(cfg: ExperimentConfig, repeat: int):
    if isinstance(cfg.dataset, SynthSpec):
        spec = replace(cfg.dataset, seed=cfg.dataset.seed + repeat)
        tasks, gt = generate(spec)
        return tasks, gt.adjacency
    tasks = load_dataset(cfg.dataset)
    truth = load_graph(cfg.truth_graph).adjacency() if cfg.truth_graph else None
    return tasks, truth


def run_once(cfg: ExperimentConfig, repeat: int):
    seed = cfg.seed + repeat
    tasks, truth = _load(cfg, repeat)
    train, test = ratio_split(tasks, cfg.train_ratio, seed=seed, chronological=cfg.chronological)
    if cfg.standardize:
        train, test = standardize(train, test)
    result = fit(train, cfg.hyperparams, SplitSpec(cfg.split.val_fraction, cfg.split.seed + repeat))
    metrics = {"rmse": rmse(result.models, test)}
    if truth is not None:
        metrics.update(graph_veracity(truth, result.graph).to_dict())
    metrics["edges_kept"] = float(np.sum(result.graph.weights >= PRUNE_THRESHOLD))
    return metrics, result


def _workers():
    try:
        return max(1, int(os.environ.get("GGMTL_THREADS", "1")))
    except ValueError:
        return 1


def run_experiment(cfg: ExperimentConfig, workers=None):
    """Run every repeat and summarize each metric as mean/std over repeats.

    Returns ``(report, fits)``; fits are ordered by repeat index.
    """
    workers = workers or _workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda r: run_once(cfg, r), range(cfg.repeats)))
    else:
        outcomes = [run_once(cfg, r) for r in range(cfg.repeats)]
    names = list(outcomes[0][0])
    summary = {}
    for name in names:
        vals = np.array([m[name] for m, _ in outcomes])
        summary[name] = {"mean": float(vals.mean()), "std": float(vals.std()), "values": vals.tolist()}
    label = "baseline_fixed_graph" if cfg.hyperparams.max_outer == 0 else "ggmtl"
    report = {"label": label, "repeats": cfg.repeats, "metrics": summary, "config": cfg.to_dict()}
    return report, [f for _, f in outcomes]


def format_report(report) -> str:
    lines = [f"{report['label']} ({report['repeats']} repeats)"]
    for name, s in report["metrics"].items():
        lines.append(f"  {name:<12s} {s['mean']:.4f} +- {s['std']:.4f}")
    return "\n".join(lines)

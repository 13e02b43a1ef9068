"""Acceptance criteria, one test per criterion.

Each test records a single ``[PASS]``/``[FAIL]``/``[SKIP]`` line, echoed in
the pytest terminal summary. Run this file directly to print the lines
without pytest.
"""
import functools
import itertools
import os
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, complete_graph, random_tasks
from ggmtl.cli import bench_one
from ggmtl.config import ExperimentConfig, HyperParams, MultiTaskCsv, SplitSpec, SynthSpec
from ggmtl.driver import baseline_fixed_graph, fit, split_tasks
from ggmtl.experiment import PRUNE_THRESHOLD, graph_veracity, run_experiment
from ggmtl.graph import TaskGraph
from ggmtl.hypergrad import (
    closed_form_edges, closed_form_system, fd_hypergradient, hypergradient,
)
from ggmtl.inner import (
    dirichlet_energy, l2_objective, ols_per_task, solve_inner_l2, solve_inner_sq, system,
)
from ggmtl.io import ratio_split
from ggmtl.metrics import rmse, veracity

SEEDS = range(10)
# pinned outer-loop settings for the synthetic experiments
SYNTH_HP = HyperParams(lam=30.0, gamma=0.3, nu=0.1, k=5, max_outer=200, tol_rel=1e-7)
LAMBDA_GRID = (0.1, 0.3, 1.0, 3.0, 10.0)
TRACES = {}


def record(n, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)
    return ok


def record_skip(n, detail):
    line = f"[SKIP] criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)


# 1 ---------------------------------------------------------------------------

def test_c01_hypergradient_matches_finite_differences():
    t0 = time.perf_counter()
    worst = 0.0
    for s in range(20):
        rng = np.random.default_rng(1000 + s)
        n, d = [3, 5][s % 2], [2, 3][(s // 2) % 2]
        tr = random_tasks(rng, n, d, N=20)
        va = random_tasks(rng, n, d, N=20)
        g = complete_graph(n)
        e = rng.uniform(0.2, 0.9, g.n_edges)
        xi, eta, gamma, lam = rng.uniform(0.05, 2.0, 4)
        hp = HyperParams(xi=xi, eta=eta, gamma=gamma, lam=lam)
        an = hypergradient(e, g, tr, va, hp)
        fd = fd_hypergradient(e, g, tr, va, hp, h=1e-6)
        mask = np.abs(fd) > 1e-8
        worst = max(worst, np.max(np.abs(an - fd)[mask]) / np.max(np.abs(fd)[mask]))
    dt = time.perf_counter() - t0
    ok = record(1, worst < 1e-5 and dt < 10,
                f"max rel inf-norm error {worst:.2e} (< 1e-5), {dt:.2f}s (< 10s)")
    assert ok


# 2 ---------------------------------------------------------------------------

def test_c02_inner_solver_exactness():
    worst_res, worst_ols = 0.0, 0.0
    for s in range(10):
        rng = np.random.default_rng(2000 + s)
        n, d = int(rng.integers(2, 8)), int(rng.integers(1, 6))
        data = random_tasks(rng, n, d, N=d + 10)
        g = complete_graph(n, rng.uniform(0, 1, n * (n - 1) // 2))
        lam = rng.uniform(0.1, 50)
        V = solve_inner_sq(data, g, lam)
        A, rhs = system(data, g, lam)
        worst_res = max(worst_res, np.linalg.norm(A @ V.ravel() - rhs) / np.linalg.norm(rhs))
        worst_ols = max(worst_ols, np.max(np.abs(solve_inner_sq(data, g, 0.0) - ols_per_task(data))))
    ok = record(2, worst_res <= 1e-8 and worst_ols <= 1e-8,
                f"stationarity residual {worst_res:.2e} (<= 1e-8 rel), "
                f"lambda=0 vs OLS {worst_ols:.2e} (<= 1e-8)")
    assert ok


# 3 ---------------------------------------------------------------------------

def test_c03_dirichlet_identity():
    worst = 0.0
    for s in range(50):
        rng = np.random.default_rng(3000 + s)
        n, d = int(rng.integers(2, 12)), int(rng.integers(1, 8))
        V = rng.standard_normal((n, d))
        g = complete_graph(n, rng.uniform(0, 1, n * (n - 1) // 2))
        trace = float(np.sum(V * (g.laplacian() @ V)))
        pair = dirichlet_energy(V, g)
        worst = max(worst, abs(trace - pair) / max(abs(pair), 1e-300))
    ok = record(3, worst <= 1e-10, f"trace vs pairwise max rel diff {worst:.2e} (<= 1e-10)")
    assert ok


# 4 ---------------------------------------------------------------------------

def test_c04_l2_monotonicity():
    worst = -np.inf
    for s in range(10):
        rng = np.random.default_rng(4000 + s)
        n, d = int(rng.integers(2, 7)), int(rng.integers(2, 5))
        data = random_tasks(rng, n, d)
        g = complete_graph(n, rng.uniform(0, 1, n * (n - 1) // 2))
        hist = []
        solve_inner_l2(data, g, rng.uniform(0.1, 20), tol=1e-10, history=hist)
        worst = max(worst, np.max(np.diff(hist)))
    ok = record(4, worst <= 1e-9, f"largest per-round objective increase {worst:.2e} (<= 1e-9)")
    assert ok


# 5 ---------------------------------------------------------------------------

def test_c05_crisp_equivalence():
    n = 4
    iu = np.triu_indices(n, 1)

    def crisp(bits):
        a = np.zeros((n, n))
        a[iu] = bits
        return a + a.T

    graphs = [crisp(b) for b in itertools.product([0, 1], repeat=6)]
    mismatches = 0
    for t, p in itertools.product(graphs, repeat=2):
        r = veracity(t, p)
        tb, pb = t.astype(bool), p.astype(bool)
        tp = np.sum(tb & pb)
        rec = 1.0 if tb.sum() == 0 else tp / tb.sum()
        prec = 1.0 if pb.sum() == 0 else tp / pb.sum()
        acc = 1.0 - np.sum(tb ^ pb) / n**2
        mismatches += (r.recall != rec) + (r.precision != prec) + (r.accuracy != acc)
    ok = record(5, mismatches == 0, f"{len(graphs) ** 2} adjacency pairs, {mismatches} mismatches")
    assert ok


# 6, 7 ------------------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def structure_runs(structure):
    t0 = time.perf_counter()
    f_g, f_b = [], []
    for s in SEEDS:
        tasks, gt = generate_cached(structure, s)
        res = fit(tasks, SYNTH_HP, SplitSpec(seed=s))
        TRACES[(structure, s)] = res.trace
        base = baseline_fixed_graph(tasks, SYNTH_HP, SplitSpec(seed=s))
        f_g.append(graph_veracity(gt.adjacency, res.graph, PRUNE_THRESHOLD).f1)
        f_b.append(graph_veracity(gt.adjacency, base.graph, PRUNE_THRESHOLD).f1)
    return float(np.mean(f_g)), float(np.mean(f_b)), time.perf_counter() - t0


def generate_cached(structure, seed):
    from ggmtl.synth import generate
    return generate(SynthSpec(structure, seed=seed))


def structure_criterion(n, structure, time_limit=None):
    g, b, dt = structure_runs(structure)
    rel = g / b - 1 if b > 0 else np.inf
    ok = g >= 0.20 and rel >= 0.5 and (time_limit is None or dt < time_limit)
    limit = f" (< {time_limit:.0f}s)" if time_limit else ""
    return record(n, ok, f"{structure}: GGMTL F1 {g:.3f} (>= 0.20), kNN F1 {b:.3f}, "
                         f"relative gain {rel:+.1%} (>= +50%), {dt:.1f}s{limit}")


def test_c06_line_structure_recovery():
    assert structure_criterion(6, "line", time_limit=120)


def test_c07_tree_structure_recovery():
    assert structure_criterion(7, "tree")


# 8 ---------------------------------------------------------------------------

def _select_lambda(method, train, seed):
    sub, hold = split_tasks(train, SplitSpec(seed=1000 + seed))
    errs = []
    for lam in LAMBDA_GRID:
        res = method(sub, SYNTH_HP.replace(lam=lam), SplitSpec(seed=seed))
        if res.trace:
            TRACES[("star-select", seed, lam)] = res.trace
        errs.append(rmse(res.models, hold))
    return LAMBDA_GRID[int(np.argmin(errs))]


def test_c08_star_rmse_ordering():
    g_rmse, b_rmse, o_rmse = [], [], []
    for s in SEEDS:
        tasks, _ = generate_cached("star", s)
        train, test = ratio_split(tasks, 0.5, seed=s)
        lg = _select_lambda(fit, train, s)
        lb = _select_lambda(baseline_fixed_graph, train, s)
        res = fit(train, SYNTH_HP.replace(lam=lg), SplitSpec(seed=s))
        TRACES[("star", s)] = res.trace
        g_rmse.append(rmse(res.models, test))
        b_rmse.append(rmse(baseline_fixed_graph(train, SYNTH_HP.replace(lam=lb),
                                                SplitSpec(seed=s)).models, test))
        o_rmse.append(rmse(ols_per_task(train), test))
    g, b, o = np.mean(g_rmse), np.mean(b_rmse), np.mean(o_rmse)
    ok = record(8, g <= b and g <= o and b <= o,
                f"star mean test RMSE: GGMTL {g:.4f} <= baseline {b:.4f}, both <= OLS {o:.4f}")
    assert ok


# 9 ---------------------------------------------------------------------------

def test_c09_outer_loop_monotone():
    structure_runs("line")
    structure_runs("tree")
    if not any(k[0] == "star" for k in TRACES):
        # star runs come from criterion 8; re-run the fits if it was deselected
        for s in SEEDS:
            tasks, _ = generate_cached("star", s)
            train, _ = ratio_split(tasks, 0.5, seed=s)
            TRACES[("star", s)] = fit(train, SYNTH_HP, SplitSpec(seed=s)).trace
    worst, runs = -np.inf, 0
    for trace in TRACES.values():
        obj = [t.objective for t in trace if t.accepted]
        if len(obj) > 1:
            worst = max(worst, float(np.max(np.diff(obj))))
        runs += 1
    ok = record(9, worst <= 0.0, f"{runs} synthetic runs, largest accepted-step increase {worst:.2e} (<= 0)")
    assert ok


# 10 --------------------------------------------------------------------------

def _grid_optimum(U, v, m, step=1e-3):
    ticks = np.linspace(0.0, 1.0, int(round(1 / step)) + 1)
    if m == 1:
        return float(np.min(np.linalg.norm(U[:, :1] * ticks - v[:, None], axis=0)))
    best = np.inf
    for a in ticks:
        r = (U[:, 0] * a - v)[:, None] + U[:, 1:2] * ticks
        best = min(best, float(np.min(np.linalg.norm(r, axis=0))))
    return best


def test_c10_closed_form_edges():
    worst = -np.inf
    cases = 0
    for s in range(12):
        rng = np.random.default_rng(10_000 + s)
        n = 2 if s % 3 == 0 else 3
        m = 1 if n == 2 else 1 + s % 2
        edges = [(0, 1), (1, 2)][:m]
        tr = random_tasks(rng, n, 2)
        va = random_tasks(rng, n, 2)
        g = TaskGraph(n, edges, np.ones(m))
        hp = HyperParams(xi=0, gamma=0, eta=float(rng.uniform(0.05, 2)), lam=float(rng.uniform(0.1, 5)))
        e = closed_form_edges(g, tr, va, hp)
        sysm = closed_form_system(g, tr, va, hp)
        gap = np.linalg.norm(sysm.U @ e - sysm.v) - _grid_optimum(sysm.U, sysm.v, m)
        worst = max(worst, gap)
        cases += 1
    ok = record(10, worst <= 1e-6, f"{cases} instances, ||Ue - v|| minus grid optimum at most {worst:.2e} (<= 1e-6)")
    assert ok


# 11 --------------------------------------------------------------------------

def test_c11_school_dataset():
    path = os.environ.get("GGMTL_SCHOOL_DIR")
    if not path or not os.path.isdir(path):
        record_skip(11, "School data not supplied (set GGMTL_SCHOOL_DIR to a per-task CSV directory)")
        pytest.skip("School dataset not supplied")
    base = dict(dataset=MultiTaskCsv(path, target_column=os.environ.get("GGMTL_SCHOOL_TARGET", "y"),
                                     add_intercept=True),
                train_ratio=0.3, repeats=10, seed=0)
    hp = SYNTH_HP.replace(lam=float(os.environ.get("GGMTL_SCHOOL_LAMBDA", "1.0")))
    rep_g, _ = run_experiment(ExperimentConfig(hyperparams=hp, **base))
    rep_b, _ = run_experiment(ExperimentConfig(hyperparams=hp.replace(max_outer=0), **base))
    g = rep_g["metrics"]["rmse"]["mean"]
    b = rep_b["metrics"]["rmse"]["mean"]
    ok = record(11, 9.8 <= g <= 10.6 and g <= b + 0.05,
                f"School r=0.3: GGMTL RMSE {g:.3f} in [9.8, 10.6], baseline {b:.3f} (GGMTL <= baseline + 0.05)")
    assert ok


# 12 --------------------------------------------------------------------------

def test_c12_scaling_sanity():
    row = bench_one(200, d=10, k=5)
    t = row["timings"]["hypergradient"]
    ok = record(12, t < 5.0 and row["dense_free"] is True,
                f"n=200, d=10, k=5: hypergradient {t:.3f}s (< 5s), peak "
                f"{row['hypergradient_peak_bytes'] / 2**20:.1f} MiB vs dense (nd)^2 "
                f"{row['dense_nd2_bytes'] / 2**20:.1f} MiB")
    assert ok


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_c") and callable(fn):
            try:
                fn()
            except (AssertionError, pytest.skip.Exception):
                pass

"""Experiment runners: fixed-graph comparison, dynamic load balancing,
adversarial recurrence and the spectral bounds suite.

Each grid point draws from its own generator keyed on ``(seed, point
index)``, so results do not depend on execution order or on ``jobs``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from fractions import Fraction
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .engine import algorithm1_two_pass, equal_neighbor_provider, run_linear, run_load_balancing
from .graph import (
    adversarial_contraction,
    adversarial_initial,
    adversarial_sequence,
    erdos_renyi,
    geometric_random_graph,
    hubbed_geometric,
    is_strongly_connected,
    line_graph,
    random_graph_sequence,
    random_tree,
    spanning_tree,
    star_graph,
)
from .spectral import line_bound_check, tree_bounds_check
from .weights import max_degree_weights

__all__ = [
    "ExperimentConfig",
    "default_config",
    "experiment_fixed_compare",
    "experiment_dynamic",
    "experiment_adversarial",
    "bounds_suite",
    "write_rows",
    "default_radius",
    "doubling_ratios",
]

logger = logging.getLogger(__name__)

EXPERIMENTS = ("fixed-compare", "dynamic-er", "dynamic-geo", "adversarial", "bounds-suite")


@dataclass
class ExperimentConfig:
    experiment: str
    n_grid: tuple[int, ...]
    seeds: int = 3
    epsilon: float = 1e-3
    r: float | None = None
    c: float = 0.75
    n_d: int = 10
    p: float = 1.0 / 3.0
    B_grid: tuple[int, ...] = (2, 3, 5)
    periods: int = 10
    trees: int = 500
    seed: int = 0
    redraw_cap: int = 100
    step_cap: int = 10**7
    exact: bool = False
    jobs: int = 1
    out: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        self.n_grid = tuple(int(n) for n in self.n_grid)
        self.B_grid = tuple(int(b) for b in self.B_grid)
        if not self.n_grid:
            raise ValueError("n grid must be nonempty")
        if self.seeds < 1:
            raise ValueError("seeds must be >= 1")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")

    def describe(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


_DEFAULT_GRIDS = {
    "fixed-compare": (100, 200, 300, 400, 500, 600),
    "dynamic-er": (50, 100, 200, 400),
    "dynamic-geo": (50, 100, 200, 400),
    "adversarial": (4, 6, 8),
    "bounds-suite": tuple(range(4, 129)),
}


def default_config(experiment: str, **overrides) -> ExperimentConfig:
    overrides.setdefault("n_grid", _DEFAULT_GRIDS[experiment])
    return ExperimentConfig(experiment=experiment, **overrides)


def default_radius(n: int) -> float:
    return math.sqrt(math.log(n) / n)


def _map(fn, tasks, jobs):
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def write_rows(rows: list[dict], path, comment: str | None = None) -> None:
    """CSV with an optional leading ``# comment`` line and a header row."""
    if not rows:
        raise ValueError("no rows to write")
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def _mean_rows(rows, key_cols, value_cols):
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        if row.get("skipped"):
            continue
        groups.setdefault(tuple(row[k] for k in key_cols), []).append(row)
    out = []
    for key, grp in groups.items():
        row = dict(zip(key_cols, key))
        row["seed"] = "mean"
        for v in value_cols:
            row[v] = float(np.mean([g[v] for g in grp]))
        out.append(row)
    return out


# ---------------------------------------------------------------------------
# fixed-graph comparison


def _fixed_point(task):
    cfg, n, s, idx = task
    rng = np.random.default_rng([cfg.seed, idx])
    r = cfg.r if cfg.r is not None else default_radius(n)
    for attempt in range(cfg.redraw_cap):
        g = hubbed_geometric(n, r, cfg.n_d, cfg.p, rng)
        if is_strongly_connected(g):
            break
    else:
        logger.warning("n=%d seed=%d: no connected draw in %d attempts, skipped", n, s, cfg.redraw_cap)
        return {"n": n, "seed": s, "algo1_iters": -1, "maxdeg_iters": -1, "redraws": cfg.redraw_cap,
                "skipped": 1}
    x0 = rng.random(n)
    a1 = algorithm1_two_pass(g, x0, cfg.epsilon, absolute=True, step_cap=cfg.step_cap)
    md = run_linear(max_degree_weights(g), x0, cfg.epsilon, absolute=True, step_cap=cfg.step_cap,
                    record_every=10**9)
    return {"n": n, "seed": s, "algo1_iters": a1.steps_to_epsilon, "maxdeg_iters": md.steps_to_epsilon,
            "redraws": attempt, "skipped": 0}


def experiment_fixed_compare(cfg: ExperimentConfig) -> list[dict]:
    """Two-pass averaging versus max-degree weights on hubbed geometric graphs.

    Both runs stop once every node is within ``cfg.epsilon`` of the mean.
    Returns per-seed rows followed by per-``n`` mean rows (``seed="mean"``).
    """
    tasks = [(cfg, n, s, i * cfg.seeds + s) for i, n in enumerate(cfg.n_grid) for s in range(cfg.seeds)]
    rows = _map(_fixed_point, tasks, cfg.jobs)
    return rows + _mean_rows(rows, ["n"], ["algo1_iters", "maxdeg_iters"])


# ---------------------------------------------------------------------------
# dynamic load balancing


def _graph_maker(cfg, n):
    if cfg.experiment == "dynamic-er":
        c = cfg.c
        return lambda rng: erdos_renyi(n, c, rng)
    r = cfg.r if cfg.r is not None else default_radius(n)
    return lambda rng: geometric_random_graph(n, r, rng)


def _dynamic_point(task):
    cfg, n, s, idx = task
    rng = np.random.default_rng([cfg.seed, idx])
    x0 = rng.random(n)
    seq = random_graph_sequence(_graph_maker(cfg, n), n, seed=int(rng.integers(2**63)))
    tr = run_load_balancing(seq, x0, cfg.epsilon, criterion="max_dev", step_cap=cfg.step_cap)
    return {"n": n, "seed": s, "iters": tr.steps_to_epsilon}


def experiment_dynamic(cfg: ExperimentConfig) -> list[dict]:
    """Load balancing on a fresh random graph every step (Erdos-Renyi or geometric).

    Stops once every node is within ``cfg.epsilon`` of the mean.
    """
    if cfg.experiment not in ("dynamic-er", "dynamic-geo"):
        raise ValueError("experiment_dynamic needs dynamic-er or dynamic-geo")
    tasks = [(cfg, n, s, i * cfg.seeds + s) for i, n in enumerate(cfg.n_grid) for s in range(cfg.seeds)]
    rows = _map(_dynamic_point, tasks, cfg.jobs)
    return rows + _mean_rows(rows, ["n"], ["iters"])


def doubling_ratios(rows: list[dict], value: str = "iters") -> list[tuple[int, int, float]]:
    """``(n, 2n, T(2n)/T(n))`` on seed-averaged rows wherever both sizes are present."""
    means = {r["n"]: r[value] for r in rows if r.get("seed") == "mean"}
    return [(n, 2 * n, means[2 * n] / means[n]) for n in sorted(means) if 2 * n in means]


# ---------------------------------------------------------------------------
# adversarial recurrence


def _adversarial_point(task):
    cfg, n, B = task
    seq = adversarial_sequence(n, B)
    x0 = adversarial_initial(n)
    steps = cfg.periods * B
    tr = run_linear(equal_neighbor_provider(seq, exact=cfg.exact), x0, target=0.0, max_steps=steps,
                    exact=cfg.exact, record_states=True)
    if cfg.exact:
        formula = 1 - Fraction(4, n + 2) * Fraction(2, n) ** (B - 1)
        x0 = np.array([Fraction(int(v)) for v in x0], dtype=object)
    else:
        formula = adversarial_contraction(n, B)
    rows = []
    for k in range(1, cfg.periods + 1):
        state = tr.states[k * B]
        expected = formula ** k * x0
        err = float(max(abs(d) for d in state - expected))
        measured = float(max(state) / max(x0))
        rows.append({"n": n, "B": B, "k": k, "formula": float(formula ** k), "measured": measured,
                     "max_abs_err": err, "verdict": "pass" if err <= 1e-10 else "fail"})
    return rows


def experiment_adversarial(cfg: ExperimentConfig) -> tuple[list[dict], bool]:
    """Per-period contraction of the adversarial sequence against ``1 - (4/(n+2))(2/n)^(B-1)``."""
    tasks = [(cfg, n, B) for n in cfg.n_grid for B in cfg.B_grid]
    rows = [r for chunk in _map(_adversarial_point, tasks, cfg.jobs) for r in chunk]
    return rows, all(r["verdict"] == "pass" for r in rows)


# ---------------------------------------------------------------------------
# bounds suite


def _tree_instances(cfg):
    rng = np.random.default_rng([cfg.seed, 0])
    grid = list(cfg.n_grid)
    count = max(cfg.trees, 1)
    for k in range(count):
        n = grid[k % len(grid)] if count >= len(grid) else int(rng.choice(grid))
        kind = k % 3
        if kind == 0:
            tree, label = random_tree(n, rng), "prufer"
        elif kind == 1:
            r = 1.5 * default_radius(n)
            for _ in range(cfg.redraw_cap):
                g = geometric_random_graph(n, r, rng)
                if is_strongly_connected(g):
                    break
            else:
                g = line_graph(n)
            tree, label = spanning_tree(g), "bfs-geometric"
        else:
            tree, label = star_graph(n, center=int(rng.integers(n))), "star"
        yield label, tree


def bounds_suite(cfg: ExperimentConfig) -> tuple[list[dict], list]:
    """Tree bounds on random trees and the line-graph lower bound over ``cfg.n_grid``.

    Returns report rows and the list of violating instances (graphs for tree
    checks, sizes for line checks).
    """
    rows, violations = [], []
    for label, tree in _tree_instances(cfg):
        rep = tree_bounds_check(tree)
        rows.append({"check": f"tree-{label}", "n": tree.n, "value": rep.lambda2, "bound": rep.lambda2_bound,
                     "margin": rep.lambda2_margin, "value2": rep.lambda_min, "bound2": rep.lambda_min_bound,
                     "margin2": rep.lambda_min_margin, "pass": int(rep.passed)})
        if not rep.passed:
            violations.append(tree)
    for n in cfg.n_grid:
        rep = line_bound_check(n)
        rows.append({"check": "line", "n": n, "value": rep.lambda2, "bound": rep.bound,
                     "margin": rep.lambda2 - rep.bound, "value2": rep.test_vector_bound, "bound2": rep.C,
                     "margin2": rep.test_vector_bound - rep.bound, "pass": int(rep.passed)})
        if not rep.passed:
            violations.append(n)
    return rows, violations

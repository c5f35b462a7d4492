"""Acceptance gate: one test per criterion, each printing a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the report lines
next to pytest's own verdicts.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from distavg.engine import (
    algorithm1_two_pass,
    algorithm2_tree_heuristic,
    equal_neighbor_provider,
    run_linear,
    run_load_balancing,
)
from distavg.experiments import (
    bounds_suite,
    default_config,
    doubling_ratios,
    experiment_dynamic,
    experiment_fixed_compare,
)
from distavg.graph import (
    adversarial_initial,
    adversarial_sequence,
    dumbbell_graph,
    erdos_renyi,
    geometric_random_graph,
    is_strongly_connected,
    line_graph,
    random_B_connected_sequence,
    random_graph_sequence,
)
from distavg.spectral import (
    lambda2_lower_bound,
    line_bound_check,
    measure_convergence_time,
    second_eigenvector,
    spectral_summary,
)
from distavg.weights import equal_neighbor, max_degree_weights, stationary_distribution


@pytest.fixture
def report(capsys):
    def emit(num, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return emit


def _slope(ns, ts):
    return float(np.polyfit(np.log(ns), np.log(ts), 1)[0])


def test_c01_adversarial_recurrence(report):
    start = time.perf_counter()
    worst_float, exact_ok = 0.0, True
    for n in (4, 6, 8):
        x0 = adversarial_initial(n)
        for B in (2, 3, 5):
            seq = adversarial_sequence(n, B)
            f = 1 - (4 / (n + 2)) * (2 / n) ** (B - 1)
            tr = run_linear(equal_neighbor_provider(seq), x0, target=0.0, max_steps=10 * B, record_states=True)
            for k in range(1, 11):
                worst_float = max(worst_float, float(np.abs(tr.states[k * B] - f ** k * x0).max()))
            fx = 1 - Fraction(4, n + 2) * Fraction(2, n) ** (B - 1)
            tx = run_linear(equal_neighbor_provider(seq, exact=True), x0, target=0, max_steps=10 * B,
                            exact=True, record_states=True)
            exact_ok &= all(list(tx.states[k * B]) == [fx ** k * int(v) for v in x0] for k in range(1, 11))
    elapsed = time.perf_counter() - start
    ok = worst_float <= 1e-10 and exact_ok and elapsed < 1.0
    report(1, ok, f"max float error {worst_float:.2e} (tol 1e-10), rational exact={exact_ok}, {elapsed:.2f}s (<1s)")


def test_c02_lyapunov_contraction(report):
    # rational arithmetic: the inequalities are exact statements, and double
    # rounding leaves ~1e-20 noise once V is near zero
    start = time.perf_counter()
    mono_viol = window_viol = windows = 0
    float_noise = 0.0
    for seed in range(200):
        rng = np.random.default_rng([2, seed])
        n, B = int(rng.integers(2, 31)), int(rng.integers(1, 6))
        seq = random_B_connected_sequence(n, B, seed, extra_p=float(rng.uniform(0, 0.2)))
        x0 = rng.uniform(-1, 1, size=n)
        K = 20
        V = run_load_balancing(seq, [Fraction(v) for v in x0], exact=True, max_steps=K * B).V
        mono_viol += sum(b > a for a, b in zip(V, V[1:]))
        factor = 1 - Fraction(1, 2 * n ** 3)
        for k in range(K):
            windows += 1
            if V[(k + 1) * B] > factor * V[k * B]:
                window_viol += 1
        Vf = run_load_balancing(seq, x0, max_steps=K * B).V
        float_noise = max(float_noise, float(np.max(np.diff(Vf))) / Vf[0])
    elapsed = time.perf_counter() - start
    ok = mono_viol == 0 and window_viol == 0 and elapsed < 60
    report(2, ok, f"200 sequences, {windows} windows (rational): {mono_viol} increases, {window_viol} window "
                  f"violations; double-mode max relative uptick {float_noise:.1e}; {elapsed:.1f}s (<60s)")


def test_c03_sum_conservation(report):
    seq = random_B_connected_sequence(12, 3, 5, extra_p=0.1)
    x0 = [Fraction(k * k, 11) for k in range(12)]
    tr = run_load_balancing(seq, x0, exact=True, max_steps=300, record_states=True)
    exact_ok = all(sum(s) == sum(x0) for s in tr.states)
    rng = np.random.default_rng(3)
    n = 40
    xf = rng.random(n)
    fseq = random_graph_sequence(lambda r: erdos_renyi(n, 0.2, r), n, seed=3)
    ftr = run_load_balancing(fseq, xf, max_steps=10_000)
    drift = float(np.abs(ftr.total - xf.sum()).max())
    report(3, exact_ok and drift <= 1e-9,
           f"rational sum exact={exact_ok}; double drift over 10^4 steps {drift:.2e} (tol 1e-9)")


def test_c04_tree_bounds(report):
    start = time.perf_counter()
    cfg = default_config("bounds-suite", n_grid=tuple(range(4, 129)), trees=500, seed=4)
    rows, _ = bounds_suite(cfg)
    tree_rows = [r for r in rows if r["check"].startswith("tree")]
    bad = [r for r in tree_rows if not r["pass"]]
    elapsed = time.perf_counter() - start
    worst = min(min(r["margin"], r["margin2"]) for r in tree_rows)
    report(4, not bad and len(tree_rows) == 500 and elapsed < 60,
           f"{len(tree_rows)} trees, {len(bad)} violations, smallest margin {worst:.2e}, {elapsed:.1f}s (<60s)")


def test_c05_line_bound(report):
    bad, tight = [], math.inf
    for n in range(4, 129):
        rep = line_bound_check(n)
        tight = min(tight, rep.lambda2 - rep.bound)
        if rep.lambda2 < rep.bound:
            bad.append(n)
    report(5, not bad, f"n=4..128: {len(bad)} violations of lambda2 >= 1 - 6C/n^2, smallest margin {tight:.2e}")


def test_c06_variational_machinery(report):
    rng = np.random.default_rng(6)
    mats = []
    while len(mats) < 25:
        n = int(rng.integers(2, 21))
        g = erdos_renyi(n, float(rng.uniform(0.15, 0.8)), rng)
        if is_strongly_connected(g):
            mats.append(equal_neighbor(g) if len(mats) % 2 else max_degree_weights(g))
    worst_imag, worst_excess, worst_eq = 0.0, -math.inf, 0.0
    summaries = []
    for W in mats:
        pi = stationary_distribution(W)
        s = spectral_summary(W, pi)
        summaries.append((W, pi, s))
        worst_imag = max(worst_imag, float(np.abs(s.eigenvalues.imag).max()))
        lam2, v = second_eigenvector(W, pi)
        worst_eq = max(worst_eq, abs(lambda2_lower_bound(W, pi, v) - lam2))
    for k in range(1000):
        W, pi, s = summaries[k % len(summaries)]
        y = rng.normal(size=W.n)
        y -= pi @ y
        worst_excess = max(worst_excess, lambda2_lower_bound(W, pi, y) - s.lambda2)
    ok = worst_imag <= 1e-9 and worst_excess <= 1e-9 and worst_eq <= 1e-9
    report(6, ok, f"max imag {worst_imag:.1e}; max bound-lambda2 over 1000 y {worst_excess:.2e}; "
                  f"eigenvector equality gap {worst_eq:.1e}")


def test_c07_averaging_correctness(report):
    rng = np.random.default_rng(7)
    graphs = [line_graph(n) for n in (2, 3, 17, 64)] + [dumbbell_graph(12)]
    while len(graphs) < 40:
        n = int(rng.integers(2, 65))
        g = geometric_random_graph(n, float(rng.uniform(0.2, 0.6)), rng)
        if is_strongly_connected(g):
            graphs.append(g)
    worst1 = worst2 = 0.0
    for g in graphs:
        x0 = rng.random(g.n)
        t1 = algorithm1_two_pass(g, x0, 1e-10, absolute=True)
        t2 = algorithm2_tree_heuristic(g, x0, 1e-10, absolute=True)
        worst1 = max(worst1, float(np.abs(t1.final_state - x0.mean()).max()))
        worst2 = max(worst2, float(np.abs(t2.final_state - x0.mean()).max()))
    report(7, worst1 <= 1e-6 and worst2 <= 1e-6,
           f"{len(graphs)} graphs n<=64: two-pass error {worst1:.1e}, tree error {worst2:.1e} (tol 1e-6)")


def test_c08_scaling_laws(report):
    start = time.perf_counter()
    ns = [12, 24, 48, 96]
    td = [measure_convergence_time(equal_neighbor(dumbbell_graph(n)), 1e-3).T for n in ns]
    tl = [measure_convergence_time(equal_neighbor(line_graph(n)), 1e-3).T for n in ns]
    sd, sl = _slope(ns, td), _slope(ns, tl)
    elapsed = time.perf_counter() - start
    ok = abs(sd - 3) <= 0.4 and abs(sl - 2) <= 0.4 and elapsed < 300
    report(8, ok, f"dumbbell slope {sd:.2f} (3+-0.4, T={td}); line slope {sl:.2f} (2+-0.4, T={tl}); "
                  f"{elapsed:.1f}s")


def test_c09_fixed_graph_comparison(report):
    rows = experiment_fixed_compare(default_config("fixed-compare", seeds=10, seed=9))
    per_seed = [r for r in rows if r["seed"] != "mean" and not r["skipped"]]
    big = [r for r in per_seed if r["n"] >= 300]
    frac = sum(r["maxdeg_iters"] > r["algo1_iters"] for r in big) / len(big)
    means = sorted((r["n"], r["maxdeg_iters"] - r["algo1_iters"]) for r in rows if r["seed"] == "mean")
    gaps = [g for _, g in means]
    monotone = all(b > a for a, b in zip(gaps, gaps[1:]))
    report(9, frac >= 0.9 and monotone,
           f"max-degree slower on {frac:.0%} of seeds with n>=300 (>=90%); mean gaps {[round(g, 1) for g in gaps]} "
           f"monotone={monotone}")


def test_c10_dynamic_sublinear(report):
    parts, ok = [], True
    for exp in ("dynamic-er", "dynamic-geo"):
        rows = experiment_dynamic(default_config(exp, seeds=5, seed=10))
        ratios = [r for _, _, r in doubling_ratios(rows)]
        ok &= all(r <= 1.5 for r in ratios)
        parts.append(f"{exp} T(2n)/T(n)={[round(r, 2) for r in ratios]}")
    report(10, ok, "; ".join(parts) + " (each <=1.5)")

"""Command-line front end.

Subcommands: ``simulate``, ``spectral``, ``adversarial``, ``experiment``,
``bounds``. Exit codes: 0 success, 2 property violation, 3 timeout.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys

import numpy as np

from . import experiments as ex
from .engine import (
    DEFAULT_STEP_CAP,
    algorithm1_two_pass,
    algorithm2_tree_heuristic,
    equal_neighbor_provider,
    run_linear,
    run_load_balancing,
)
from .exceptions import ConvergenceTimeout
from .graph import (
    Graph,
    complete_graph,
    dumbbell_graph,
    erdos_renyi,
    geometric_random_graph,
    hubbed_geometric,
    line_graph,
    random_graph_sequence,
    read_graph,
    read_sequence,
    spanning_tree,
    star_graph,
    write_graph,
)
from .spectral import (
    lambda2_lower_bound,
    line_test_vector,
    second_eigenvector,
    spectral_summary,
    tree_bounds_check,
)
from .weights import (
    equal_neighbor,
    max_degree_weights,
    read_matrix,
    tree_dictator_weights,
)

EXIT_OK, EXIT_VIOLATION, EXIT_TIMEOUT = 0, 2, 3

log = logging.getLogger("distavg")


def _ints(text: str) -> tuple[int, ...]:
    """``"4,6,8"`` or ``"4:129"`` (half-open range) or ``"4:129:4"``."""
    if ":" in text:
        parts = [int(p) for p in text.split(":")]
        return tuple(range(*parts))
    return tuple(int(p) for p in text.split(",") if p)


def _parse_random(spec: str):
    """``model,key=value,...`` -> (model, params). Models: er, geo, hubbed, line, complete, dumbbell, star."""
    model, *rest = spec.split(",")
    params = {}
    for item in rest:
        k, v = item.split("=")
        params[k.strip()] = float(v)
    if "n" not in params:
        raise argparse.ArgumentTypeError("random model needs n=<nodes>")
    params["n"] = int(params["n"])
    return model.strip(), params


def _maker(model, params):
    n = params["n"]
    r = params.get("r", math.sqrt(math.log(n) / n) if n > 1 else 1.0)
    if model == "er":
        return lambda rng: erdos_renyi(n, params.get("c", 0.75), rng)
    if model == "geo":
        return lambda rng: geometric_random_graph(n, r, rng)
    if model == "hubbed":
        return lambda rng: hubbed_geometric(n, r, int(params.get("nd", 10)), params.get("p", 1 / 3), rng)
    fixed = {"line": line_graph, "complete": complete_graph, "dumbbell": dumbbell_graph, "star": star_graph}
    if model in fixed:
        g = fixed[model](n)
        return lambda rng: g
    raise SystemExit(f"unknown random model {model!r}")


def _load_x0(arg, n, rng):
    if arg == "uniform":
        return rng.random(n)
    x0 = np.loadtxt(arg, dtype=float).ravel()
    if x0.size != n:
        raise SystemExit(f"x0 file has {x0.size} entries, graph has {n} nodes")
    return x0


def _weights(g: Graph, args):
    kind = args.weights
    if kind == "equal-neighbor":
        return equal_neighbor(g, exact=getattr(args, "exact", False))
    if kind == "max-degree":
        return max_degree_weights(g, args.step_size)
    if kind == "tree-dictator":
        tree = g if len(g.undirected_edges()) == g.n - 1 else spanning_tree(g)
        root = args.root if args.root is not None else 0
        return tree_dictator_weights(tree, root, args.delta)
    raise SystemExit(f"unknown weights {kind!r}")


def cmd_simulate(args) -> int:
    rng = np.random.default_rng(args.seed)
    seq = None
    if args.graph:
        g = read_graph(args.graph)
    elif args.seq:
        seq = read_sequence(args.seq)
        g = seq(0)
    elif args.random:
        model, params = _parse_random(args.random)
        make = _maker(model, params)
        if args.algorithm == "load-balance" and model in ("er", "geo", "hubbed"):
            seq = random_graph_sequence(make, params["n"], seed=args.seed)
            g = seq(0)
        else:
            g = make(rng)
    else:
        raise SystemExit("one of --graph, --seq, --random is required")
    x0 = _load_x0(args.x0, g.n, rng)

    if args.algorithm == "linear":
        if seq is not None:
            provider = equal_neighbor_provider(seq, exact=args.exact)
            tr = run_linear(provider, x0, args.epsilon, target="mean", step_cap=args.step_cap,
                            exact=args.exact, record_states=args.full_state)
        else:
            W = _weights(g, args)
            target = "mean" if W.doubly_stochastic else "pi"
            tr = run_linear(W, x0, args.epsilon, target=target, step_cap=args.step_cap, exact=args.exact,
                            record_states=args.full_state)
    elif args.algorithm == "two-pass":
        tr = algorithm1_two_pass(g, x0, args.epsilon, step_cap=args.step_cap, record_states=args.full_state)
    elif args.algorithm == "tree":
        tr = algorithm2_tree_heuristic(g, x0, args.epsilon, step_cap=args.step_cap,
                                       record_states=args.full_state)
    else:
        tr = run_load_balancing(seq if seq is not None else g, x0, args.epsilon, step_cap=args.step_cap,
                                exact=args.exact, record_states=args.full_state)
    comment = f"algorithm={args.algorithm} n={g.n} epsilon={args.epsilon} seed={args.seed}"
    if args.out:
        tr.to_csv(args.out, full_state=args.full_state, header_comment=comment)
    print(f"steps_to_epsilon={tr.steps_to_epsilon}")
    print(f"consensus_value={float(tr.consensus_value)!r}")
    print(f"final_max_dev={float(tr.max_dev[-1])!r}")
    return EXIT_OK


def cmd_spectral(args) -> int:
    if args.matrix:
        W = read_matrix(args.matrix)
        g = None
    else:
        g = read_graph(args.graph)
        W = _weights(g, args)
    s = spectral_summary(W)
    report = {
        "n": W.n,
        "rho": s.rho,
        "lambda1": s.eigenvalues[0].real,
        "lambda2": s.lambda2,
        "lambda_min": s.lambda_min,
        "real_spectrum": s.is_real_spectrum,
        "reversible": s.reversible,
        "defective": s.defective,
    }
    status = EXIT_OK
    if args.test_vector and s.pi is not None and s.reversible:
        if args.test_vector == "linear":
            y = line_test_vector(s.pi)
        else:
            _, y = second_eigenvector(W, s.pi)
        report["test_vector_bound"] = lambda2_lower_bound(W, s.pi, y)
    if args.report_bounds and g is not None:
        if len(g.undirected_edges()) == g.n - 1 and g.is_symmetric():
            rep = tree_bounds_check(g)
            report.update(tree_lambda2_bound=rep.lambda2_bound, tree_lambda_min_bound=rep.lambda_min_bound,
                          tree_bounds_pass=rep.passed)
            if not rep.passed:
                status = EXIT_VIOLATION
        if s.pi is not None:
            C = float(np.max(1.0 / (W.n * s.pi)))
            report["C"] = C
            report["line_bound"] = 1.0 - 6.0 * C / W.n ** 2
    for k, v in report.items():
        print(f"{k}={float(v)!r}" if isinstance(v, (float, np.floating)) else f"{k}={v}")
    if args.eigs_csv:
        with open(args.eigs_csv, "w") as fh:
            fh.write("index,real,imag,modulus\n")
            for i, lam in enumerate(s.eigenvalues):
                fh.write(f"{i},{lam.real!r},{lam.imag!r},{abs(lam)!r}\n")
    return status


def _write_or_print(rows, out, comment):
    if out:
        ex.write_rows(rows, out, comment=comment)
    else:
        import csv

        sys.stdout.write(f"# {comment}\n")
        w = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def cmd_adversarial(args) -> int:
    cfg = ex.default_config("adversarial", n_grid=args.n_grid or (4, 6, 8), B_grid=args.B_grid,
                            periods=args.periods, exact=args.exact, seed=args.seed, out=args.out)
    rows, ok = ex.experiment_adversarial(cfg)
    _write_or_print(rows, args.out, cfg.describe())
    print(f"verdict={'pass' if ok else 'fail'}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_experiment(args) -> int:
    overrides = dict(seeds=args.seeds, epsilon=args.epsilon, seed=args.seed, jobs=args.jobs, out=args.out,
                     step_cap=args.step_cap)
    if args.n_grid:
        overrides["n_grid"] = args.n_grid
    for key in ("r", "c", "n_d", "p"):
        val = getattr(args, key)
        if val is not None:
            overrides[key] = val
    cfg = ex.default_config(args.id, **overrides)
    if args.id == "fixed-compare":
        rows = ex.experiment_fixed_compare(cfg)
    elif args.id in ("dynamic-er", "dynamic-geo"):
        rows = ex.experiment_dynamic(cfg)
    elif args.id == "adversarial":
        rows, ok = ex.experiment_adversarial(cfg)
        _write_or_print(rows, args.out, cfg.describe())
        return EXIT_OK if ok else EXIT_VIOLATION
    else:
        rows, bad = ex.bounds_suite(cfg)
        _write_or_print(rows, args.out, cfg.describe())
        return EXIT_OK if not bad else EXIT_VIOLATION
    _write_or_print(rows, args.out, cfg.describe())
    return EXIT_OK


def cmd_bounds(args) -> int:
    cfg = ex.default_config("bounds-suite", seed=args.seed, trees=args.trees,
                            **({"n_grid": args.n_grid} if args.n_grid else {}))
    rows, bad = ex.bounds_suite(cfg)
    _write_or_print(rows, args.out, cfg.describe())
    npass = sum(r["pass"] for r in rows)
    print(f"checks={len(rows)} passed={npass} violations={len(bad)}", file=sys.stderr)
    for i, inst in enumerate(bad):
        if isinstance(inst, Graph):
            path = f"violation_{i}.graph"
            write_graph(inst, path)
            print(f"offending tree written to {path}", file=sys.stderr)
        else:
            print(f"offending line graph n={inst}", file=sys.stderr)
    return EXIT_OK if not bad else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="output CSV path")
    common.add_argument("--exact", action="store_true", help="rational arithmetic where supported")
    common.add_argument("--step-cap", type=int, default=DEFAULT_STEP_CAP)
    common.add_argument("-v", "--verbose", action="store_true")

    wsel = argparse.ArgumentParser(add_help=False)
    wsel.add_argument("--weights", choices=["equal-neighbor", "max-degree", "tree-dictator"],
                      default="equal-neighbor")
    wsel.add_argument("--delta", type=float, default=None, help="tree-dictator perturbation")
    wsel.add_argument("--root", type=int, default=None, help="tree-dictator root")

    p = argparse.ArgumentParser(prog="distavg", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common, wsel], help="run one averaging algorithm")
    s.add_argument("--algorithm", choices=["linear", "two-pass", "tree", "load-balance"], default="linear")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--graph")
    src.add_argument("--seq")
    src.add_argument("--random", help="model,key=value,... e.g. er,n=50,c=0.75")
    s.add_argument("--x0", default="uniform", help="file of n values, or 'uniform'")
    s.add_argument("--epsilon", type=float, default=1e-3, help="relative accuracy")
    s.add_argument("--step-size", type=float, default=None, help="max-degree step size")
    s.add_argument("--full-state", action="store_true")
    s.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("spectral", parents=[common, wsel], help="spectrum and bound diagnostics")
    srcs = sp.add_mutually_exclusive_group(required=True)
    srcs.add_argument("--graph")
    srcs.add_argument("--matrix")
    sp.add_argument("--epsilon", dest="step_size", type=float, default=None, help="max-degree step size")
    sp.add_argument("--report-bounds", action="store_true")
    sp.add_argument("--test-vector", choices=["linear", "eigen"])
    sp.add_argument("--eigs-csv")
    sp.set_defaults(func=cmd_spectral)

    a = sub.add_parser("adversarial", parents=[common], help="verify the adversarial contraction factor")
    a.add_argument("--n-grid", type=_ints, default=None)
    a.add_argument("--B-grid", type=_ints, default=(2, 3, 5))
    a.add_argument("--periods", type=int, default=10)
    a.set_defaults(func=cmd_adversarial)

    e = sub.add_parser("experiment", parents=[common], help="run an experiment grid")
    e.add_argument("id", choices=list(ex.EXPERIMENTS))
    e.add_argument("--n-grid", type=_ints, default=None)
    e.add_argument("--seeds", type=int, default=3)
    e.add_argument("--epsilon", type=float, default=1e-3)
    e.add_argument("--r", type=float, default=None)
    e.add_argument("--c", type=float, default=None)
    e.add_argument("--n-d", dest="n_d", type=int, default=None)
    e.add_argument("--p", type=float, default=None)
    e.add_argument("--jobs", type=int, default=1)
    e.set_defaults(func=cmd_experiment)

    b = sub.add_parser("bounds", parents=[common], help="tree and line-graph eigenvalue bounds")
    b.add_argument("--n-grid", type=_ints, default=None)
    b.add_argument("--trees", type=int, default=500)
    b.set_defaults(func=cmd_bounds)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConvergenceTimeout as exc:
        print(f"timeout: {exc}", file=sys.stderr)
        return EXIT_TIMEOUT


if __name__ == "__main__":
    sys.exit(main())

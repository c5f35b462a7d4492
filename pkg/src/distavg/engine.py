"""Simulation of linear agreement, two-pass averaging, the spanning-tree
heuristic and load-balancing averaging."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .exceptions import ConvergenceTimeout, DivergenceError, GraphError
from .graph import Graph, GraphSequence, check_B_connectivity, is_strongly_connected, spanning_tree
from .weights import WeightMatrix, equal_neighbor, scaled_initial, stationary_distribution

__all__ = [
    "SimulationTrace",
    "OfferRound",
    "run_linear",
    "algorithm1_two_pass",
    "algorithm2_tree_heuristic",
    "load_balancing_step",
    "serialized_offers",
    "run_load_balancing",
    "lyapunov",
    "equal_neighbor_provider",
    "DEFAULT_STEP_CAP",
]

logger = logging.getLogger(__name__)

DEFAULT_STEP_CAP = 10**7


@dataclass
class SimulationTrace:
    """Per-step record of a run.

    Row ``k`` of each array refers to time ``t[k]``; row 0 is the initial
    state. ``V`` is NaN for linear runs unless requested.
    """

    t: np.ndarray
    max_dev: np.ndarray
    V: np.ndarray
    total: np.ndarray
    consensus_value: float
    steps_to_epsilon: int | None
    final_state: np.ndarray
    states: np.ndarray | None = field(default=None, repr=False)

    @property
    def steps(self) -> int:
        return int(self.t[-1])

    def to_csv(self, path, full_state: bool = False, header_comment: str | None = None) -> None:
        cols = ["t", "max_dev", "V", "sum"]
        data = [self.t, self.max_dev, self.V, self.total]
        if full_state:
            if self.states is None:
                raise ValueError("trace was recorded without full state")
            cols += [f"x{i}" for i in range(self.states.shape[1])]
            data += list(self.states.T)
        with open(path, "w") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            fh.write(",".join(cols) + "\n")
            for row in zip(*data):
                fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


class _Recorder:
    def __init__(self, record_states):
        self.t, self.dev, self.V, self.total = [], [], [], []
        self.states = [] if record_states else None

    def add(self, t, x, dev, V=float("nan")):
        self.t.append(t)
        self.dev.append(float(dev))
        self.V.append(V if isinstance(V, Fraction) else float(V))
        self.total.append(float(sum(x)) if isinstance(x, list) else float(np.sum(x)))
        if self.states is not None:
            # object dtype is kept so exact runs stay exact
            self.states.append(np.array(x))

    def finish(self, consensus, steps_to_eps, final):
        return SimulationTrace(
            t=np.array(self.t),
            max_dev=np.array(self.dev),
            V=np.array(self.V),
            total=np.array(self.total),
            consensus_value=float(consensus),
            steps_to_epsilon=steps_to_eps,
            final_state=np.array(final, dtype=float),
            states=None if self.states is None else np.vstack(self.states),
        )


def _as_provider(matrices) -> Callable[[int], object]:
    if callable(matrices) and not isinstance(matrices, (WeightMatrix, np.ndarray)):
        return matrices
    return lambda t: matrices


def equal_neighbor_provider(seq: GraphSequence, exact: bool = False) -> Callable[[int], WeightMatrix]:
    """``t -> equal_neighbor(seq(t))``, building each distinct graph's matrix once."""
    cache: dict[int, tuple[Graph, WeightMatrix]] = {}

    def provider(t):
        g = seq(t)
        hit = cache.get(id(g))
        if hit is None or hit[0] is not g:
            if len(cache) > 256:
                cache.clear()
            hit = cache[id(g)] = (g, equal_neighbor(g, exact=exact))
        return hit[1]

    return provider


def _operator(m, exact):
    if isinstance(m, WeightMatrix):
        if exact:
            return m.to_exact().a
        return sp.csr_matrix(m.a) if m.n > 64 else m.a
    if exact:
        return np.asarray(m, dtype=object)
    return np.asarray(m, dtype=float)


def _to_fraction(x):
    return np.array([Fraction(v) for v in np.asarray(x).tolist()], dtype=object)


def run_linear(matrices, x0, epsilon: float = 1e-3, target="mean", absolute: bool = False,
               step_cap: int = DEFAULT_STEP_CAP, exact: bool = False, max_steps: int | None = None,
               record_states: bool = False, record_every: int = 1) -> SimulationTrace:
    """Iterate ``x(t+1) = A(t) x(t)``.

    Parameters
    ----------
    matrices : WeightMatrix, ndarray or callable
        A fixed matrix or a provider ``t -> WeightMatrix``.
    target : {"mean", "pi"} or float
        Consensus value the deviation is measured against. ``"pi"`` uses
        ``pi^T x(0)`` of a fixed matrix.
    absolute : bool
        If False the run stops once ``max |x_i - target| <= epsilon * (initial
        deviation)``; if True once it is ``<= epsilon``.
    max_steps : int, optional
        Run exactly this many steps, ignoring the stopping rule.
    exact : bool
        Iterate in rational arithmetic.

    Raises
    ------
    ConvergenceTimeout
        When ``step_cap`` steps pass without meeting the stopping rule.
    DivergenceError
        When the deviation exceeds ten times its initial value.
    """
    provider = _as_provider(matrices)
    x = _to_fraction(x0) if exact else np.asarray(x0, dtype=float).copy()
    if target == "mean":
        x_star = sum(x) / len(x) if exact else float(np.mean(x))
    elif target == "pi":
        m0 = provider(0)
        pi = stationary_distribution(m0 if isinstance(m0, WeightMatrix) else WeightMatrix(m0))
        x_star = float(pi @ np.asarray(x, dtype=float))
    else:
        x_star = Fraction(target) if exact else float(target)

    def deviation(v):
        return max(abs(vi - x_star) for vi in v) if exact else float(np.max(np.abs(v - x_star)))

    dev0 = deviation(x)
    threshold = epsilon if absolute else epsilon * dev0
    rec = _Recorder(record_states)
    rec.add(0, x, dev0)
    steps_to_eps = 0 if dev0 <= threshold else None
    cache_key, op = None, None
    t = 0
    while True:
        if max_steps is not None:
            if t >= max_steps:
                break
        elif steps_to_eps is not None:
            break
        if t >= step_cap:
            raise ConvergenceTimeout(f"linear run did not reach epsilon within {step_cap} steps", steps=t)
        m = provider(t)
        if m is not cache_key:
            cache_key, op = m, _operator(m, exact)
        x = op @ x
        t += 1
        dev = deviation(x)
        if t % record_every == 0 or dev <= threshold:
            rec.add(t, x, dev)
        if dev > 10 * dev0 and dev0 > 0:
            raise DivergenceError(f"deviation grew to {float(dev):.3e} at t={t}", steps=t)
        if steps_to_eps is None and dev <= threshold:
            steps_to_eps = t
    if rec.t[-1] != t:
        rec.add(t, x, deviation(x))
    return rec.finish(x_star, steps_to_eps, x)


def _require_connected_symmetric(g: Graph):
    if not g.is_symmetric():
        raise GraphError("graph must be symmetric")
    if not is_strongly_connected(g):
        raise GraphError("graph must be connected")


def algorithm1_two_pass(g: Graph, x0, epsilon: float = 1e-3, absolute: bool = False,
                        step_cap: int = DEFAULT_STEP_CAP, record_states: bool = False) -> SimulationTrace:
    """Averaging by two agreement runs on the equal-neighbour matrix.

    ``y(0) = 1/d`` and ``z(0) = x(0)/d`` are iterated with the same matrix;
    node ``i`` reports ``z_i(t) / y_i(t)``, which tends to the mean of
    ``x(0)`` because ``y -> n/E`` and ``z -> sum(x)/E``.
    """
    _require_connected_symmetric(g)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (g.n,):
        raise ValueError("x0 must have one entry per node")
    A = equal_neighbor(g)
    op = sp.csr_matrix(A.a) if g.n > 64 else A.a
    d = g.degrees.astype(float)
    yz = np.column_stack([1.0 / d, x0 / d])
    mean = float(x0.mean())
    dev0 = float(np.max(np.abs(x0 - mean)))
    threshold = epsilon if absolute else epsilon * dev0
    rec = _Recorder(record_states)
    rec.add(0, x0, dev0)
    steps_to_eps = 0 if dev0 <= threshold else None
    t = 0
    ratio = x0
    while steps_to_eps is None:
        if t >= step_cap:
            raise ConvergenceTimeout(f"two-pass run did not reach epsilon within {step_cap} steps", steps=t)
        yz = op @ yz
        t += 1
        ratio = yz[:, 1] / yz[:, 0]
        dev = float(np.max(np.abs(ratio - mean)))
        rec.add(t, ratio, dev)
        if dev <= threshold:
            steps_to_eps = t
    return rec.finish(mean, steps_to_eps, ratio)


def algorithm2_tree_heuristic(g: Graph, x0, epsilon: float = 1e-3, absolute: bool = False,
                              step_cap: int = DEFAULT_STEP_CAP, root="center",
                              record_states: bool = False) -> SimulationTrace:
    """Spanning-tree heuristic: equal-neighbour agreement on a BFS tree of ``g``
    started from ``x_i(0) / (n pi_i)`` with ``pi = d/E`` on the tree."""
    tree = spanning_tree(g, root=root)
    A = equal_neighbor(tree)
    pi = tree.degrees / tree.E
    xbar = scaled_initial(np.asarray(x0, dtype=float), pi)
    trace = run_linear(A, xbar, epsilon=epsilon, target=float(np.mean(x0)), absolute=absolute,
                       step_cap=step_cap, record_states=record_states)
    return trace


def lyapunov(x, mean0) -> float:
    """``sum_i (x_i - mean0)^2``."""
    if isinstance(x, list) or (isinstance(x, np.ndarray) and x.dtype == object):
        return sum((xi - mean0) ** 2 for xi in x)
    x = np.asarray(x, dtype=float)
    return float(np.sum((x - mean0) ** 2))


@dataclass
class OfferRound:
    """Offers and acceptances of one load-balancing round.

    ``offer_to[i]`` is the node ``i`` made an offer to (-1 if none) and
    ``offer_amount[i]`` its size; ``accepted_from[j]`` is the sender whose
    offer ``j`` accepted (-1 if none).
    """

    offer_to: np.ndarray
    offer_amount: list
    accepted_from: np.ndarray
    delta: list

    @property
    def accepted(self) -> list[tuple[int, int, object]]:
        """``(sender, receiver, amount)`` for every accepted offer."""
        return [(int(s), j, self.offer_amount[s]) for j, s in enumerate(self.accepted_from) if s >= 0]


def load_balancing_step(g: Graph, x) -> tuple[object, OfferRound]:
    """One synchronous round of the offer/accept protocol.

    Every node with at least one neighbour finds its minimum-valued neighbour
    (lowest index on ties) and, if strictly smaller, offers half the gap.
    Each node accepts its largest incoming offer (lowest sender index on
    ties); accepted transfers are applied simultaneously.

    ``x`` may be a float array or a sequence of :class:`~fractions.Fraction`;
    the result has the same kind.
    """
    if not g.is_symmetric():
        raise GraphError("load balancing requires a symmetric graph")
    exact = isinstance(x, list) or (isinstance(x, np.ndarray) and x.dtype == object)
    if exact:
        return _lb_step_exact(g, list(x))
    return _lb_step_float(g, np.asarray(x, dtype=float))


def _lb_step_float(g, x):
    n = g.n
    nb = np.array(g.adj)
    np.fill_diagonal(nb, False)
    masked = np.where(nb, x[None, :], np.inf)
    target = np.argmin(masked, axis=1)
    xmin = masked[np.arange(n), target]
    offers = xmin < x
    offer_to = np.where(offers, target, -1)
    amount = np.where(offers, (x - xmin) / 2.0, 0.0)

    senders = np.flatnonzero(offers)
    accepted_from = np.full(n, -1)
    if senders.size:
        recv = offer_to[senders]
        # group by receiver, largest amount first, lowest sender index on ties
        order = np.lexsort((senders, -amount[senders], recv))
        recv_sorted = recv[order]
        first = np.ones(order.size, dtype=bool)
        first[1:] = recv_sorted[1:] != recv_sorted[:-1]
        accepted_from[recv_sorted[first]] = senders[order][first]

    delta = np.zeros(n)
    acc = np.flatnonzero(accepted_from >= 0)
    src = accepted_from[acc]
    delta[acc] += amount[src]
    delta[src] -= amount[src]
    rnd = OfferRound(offer_to, amount.tolist(), accepted_from, delta.tolist())
    return x + delta, rnd


def _lb_step_exact(g, x):
    n = g.n
    zero = x[0] * 0
    offer_to = np.full(n, -1)
    amount = [zero] * n
    for i in range(n):
        nbrs = g.neighbors(i)
        if nbrs.size == 0:
            continue
        b = min(nbrs.tolist(), key=lambda j: (x[j], j))
        if x[b] < x[i]:
            offer_to[i] = b
            amount[i] = (x[i] - x[b]) / 2
    accepted_from = np.full(n, -1)
    for j in range(n):
        incoming = [i for i in range(n) if offer_to[i] == j]
        if incoming:
            accepted_from[j] = min(incoming, key=lambda i: (-amount[i], i))
    delta = [zero] * n
    for j in range(n):
        s = accepted_from[j]
        if s >= 0:
            delta[j] += amount[s]
            delta[s] -= amount[s]
    new = [xi + di for xi, di in zip(x, delta)]
    return new, OfferRound(offer_to, amount, accepted_from, delta)


def serialized_offers(x, rnd: OfferRound, mean0=None):
    """Apply a round's accepted offers one at a time.

    Receivers are processed in ascending order of their value at the start of
    the round (lowest index on ties). Returns the final state and the
    Lyapunov value after each application (first entry: before any).
    """
    exact = isinstance(x, list) or (isinstance(x, np.ndarray) and x.dtype == object)
    cur = list(x) if exact else np.array(x, dtype=float)
    if mean0 is None:
        mean0 = sum(cur) / len(cur)
    order = sorted(range(len(cur)), key=lambda i: (x[i], i))
    Vs = [lyapunov(cur, mean0)]
    for j in order:
        s = int(rnd.accepted_from[j])
        if s < 0:
            continue
        amt = rnd.offer_amount[s]
        cur[j] += amt
        cur[s] -= amt
        Vs.append(lyapunov(cur, mean0))
    return cur, Vs


def run_load_balancing(seq: GraphSequence | Graph, x0, epsilon: float = 1e-3, criterion: str = "V",
                       step_cap: int = DEFAULT_STEP_CAP, exact: bool = False, max_steps: int | None = None,
                       record_states: bool = False, check_horizon: int = 4) -> SimulationTrace:
    """Iterate :func:`load_balancing_step` over a graph sequence.

    ``criterion="V"`` stops once ``V(t) <= epsilon V(0)`` has held for ``B``
    consecutive steps and reports the first step of that stretch.
    ``criterion="max_dev"`` stops at the first step where every node is within
    ``epsilon`` (absolute) of the initial mean.
    """
    if isinstance(seq, Graph):
        seq = GraphSequence.constant(seq)
    x = [Fraction(v) for v in np.asarray(x0).tolist()] if exact else np.asarray(x0, dtype=float).copy()
    if len(x) != seq.n:
        raise ValueError("x0 must have one entry per node")
    if seq.period is not None and not check_B_connectivity(seq, seq.B, check_horizon):
        logger.warning("graph sequence fails B-connectivity over %d windows (B=%d)", check_horizon, seq.B)
    mean0 = sum(x) / len(x) if exact else float(np.mean(x))

    def max_dev(v):
        return max(abs(vi - mean0) for vi in v) if exact else float(np.max(np.abs(v - mean0)))

    V0 = lyapunov(x, mean0)
    rec = _Recorder(record_states)
    rec.add(0, x, max_dev(x), V0)
    if criterion not in ("V", "max_dev"):
        raise ValueError(f"unknown criterion {criterion!r}")

    def below(V, dev):
        return V <= epsilon * V0 if criterion == "V" else dev <= epsilon

    hold = seq.B if criterion == "V" else 1
    first_below = 0 if below(V0, max_dev(x)) else None
    t = 0
    while True:
        if max_steps is not None:
            if t >= max_steps:
                break
        elif first_below is not None and t - first_below + 1 >= hold:
            break
        if t >= step_cap:
            raise ConvergenceTimeout(f"load balancing did not reach epsilon within {step_cap} steps", steps=t)
        x, _ = load_balancing_step(seq(t), x)
        t += 1
        V = lyapunov(x, mean0)
        dev = max_dev(x)
        rec.add(t, x, dev, V)
        if below(V, dev):
            if first_below is None:
                first_below = t
        else:
            first_below = None
    return rec.finish(mean0, first_below, x)

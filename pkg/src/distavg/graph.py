"""Graphs and graph sequences for agreement algorithms.

Nodes are indexed ``0..n-1``. An arc ``(u, v)`` means that ``u`` influences
``v``: node ``v`` may use ``x_u`` in its update. Every node always carries a
self-arc ``(v, v)``.

Internally a :class:`Graph` stores a read-only boolean matrix ``adj`` with
``adj[v, u] = True`` iff ``(u, v)`` is an arc, so row ``v`` is the
in-neighbourhood of ``v``. This is the sparsity pattern of an update matrix
``A`` acting as ``x(t+1) = A x(t)``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .exceptions import GraphError

__all__ = [
    "Graph",
    "GraphSequence",
    "line_graph",
    "complete_graph",
    "dumbbell_graph",
    "star_graph",
    "geometric_random_graph",
    "hubbed_geometric",
    "erdos_renyi",
    "random_tree",
    "is_strongly_connected",
    "check_B_connectivity",
    "spanning_tree",
    "adversarial_sequence",
    "adversarial_initial",
    "random_B_connected_sequence",
    "random_graph_sequence",
    "read_graph",
    "write_graph",
    "read_sequence",
    "write_sequence",
]


def _freeze(a):
    a = np.array(a, dtype=bool, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Directed graph with mandatory self-arcs.

    Parameters
    ----------
    adj : ndarray of bool, shape (n, n)
        ``adj[v, u]`` is True iff ``u`` influences ``v``. The diagonal is
        forced to True.
    positions : ndarray, shape (n, 2), optional
        Node coordinates for geometric models.
    symmetric : bool, default=False
        When True the constructor verifies that the arc set is closed under
        reversal and raises :class:`GraphError` otherwise.
    """

    adj: np.ndarray
    positions: np.ndarray | None = field(default=None, repr=False)
    symmetric: bool = False

    def __post_init__(self):
        adj = np.array(self.adj, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1] or adj.shape[0] == 0:
            raise GraphError(f"adjacency must be a non-empty square matrix, got shape {adj.shape}")
        np.fill_diagonal(adj, True)
        object.__setattr__(self, "adj", _freeze(adj))
        if self.positions is not None:
            pos = np.array(self.positions, dtype=float)
            pos.flags.writeable = False
            object.__setattr__(self, "positions", pos)
        if self.symmetric and not self.is_symmetric():
            raise GraphError("graph flagged symmetric but its arc set is not closed under reversal")

    @classmethod
    def from_arcs(cls, n: int, arcs: Iterable[tuple[int, int]], symmetric: bool = False) -> "Graph":
        """Build a graph from directed arcs ``(u, v)`` (u influences v)."""
        if n < 1:
            raise GraphError("n must be >= 1")
        adj = np.zeros((n, n), dtype=bool)
        for u, v in arcs:
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"arc ({u}, {v}) out of range for n={n}")
            adj[v, u] = True
        return cls(adj, symmetric=symmetric)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        """Build a symmetric graph, adding each undirected edge in both directions."""
        if n < 1:
            raise GraphError("n must be >= 1")
        adj = np.zeros((n, n), dtype=bool)
        for u, v in edges:
            adj[u, v] = adj[v, u] = True
        return cls(adj, symmetric=True)

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    @property
    def arcs(self) -> frozenset[tuple[int, int]]:
        v, u = np.nonzero(self.adj)
        return frozenset(zip(u.tolist(), v.tolist()))

    @property
    def degrees(self) -> np.ndarray:
        """In-neighbourhood sizes ``d_i``, self included."""
        return self.adj.sum(axis=1)

    @property
    def E(self) -> int:
        return int(self.adj.sum())

    def in_neighbors(self, v: int) -> np.ndarray:
        """In-neighbours of ``v`` including ``v`` itself."""
        return np.flatnonzero(self.adj[v])

    def neighbors(self, v: int) -> np.ndarray:
        """In-neighbours of ``v`` excluding ``v``."""
        nb = self.adj[v].copy()
        nb[v] = False
        return np.flatnonzero(nb)

    def undirected_edges(self) -> list[tuple[int, int]]:
        """Unordered non-self pairs ``(u, v)``, ``u < v``, joined by an arc in either direction."""
        sym = self.adj | self.adj.T
        u, v = np.nonzero(np.triu(sym, k=1))
        return list(zip(u.tolist(), v.tolist()))

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.adj, self.adj.T))

    def union(self, other: "Graph") -> "Graph":
        if other.n != self.n:
            raise GraphError("cannot union graphs with different node counts")
        return Graph(self.adj | other.adj)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and bool(np.array_equal(self.adj, other.adj))

    def __hash__(self):
        return hash((self.n, self.adj.tobytes()))

    def __repr__(self):
        return f"Graph(n={self.n}, arcs={self.E}, symmetric={self.is_symmetric()})"


@dataclass(frozen=True)
class GraphSequence:
    """A map ``t -> Graph`` with a declared connectivity window ``B``.

    ``provider`` must be a total, deterministic function of ``t >= 0``. Use
    :meth:`periodic` for explicit lists and :func:`random_graph_sequence` for
    seeded random models.
    """

    provider: Callable[[int], Graph]
    B: int
    n: int
    period: int | None = None
    claims_B_connected: bool = False

    @classmethod
    def periodic(cls, graphs: Sequence[Graph], B: int | None = None,
                 claims_B_connected: bool = False) -> "GraphSequence":
        graphs = tuple(graphs)
        if not graphs:
            raise GraphError("a periodic sequence needs at least one graph")
        n = graphs[0].n
        if any(g.n != n for g in graphs):
            raise GraphError("all graphs in a sequence must share the node count")
        P = len(graphs)
        return cls(lambda t: graphs[t % P], B=P if B is None else B, n=n, period=P,
                   claims_B_connected=claims_B_connected)

    @classmethod
    def constant(cls, g: Graph, B: int = 1) -> "GraphSequence":
        return cls.periodic([g], B=B)

    def __call__(self, t: int) -> Graph:
        g = self.provider(t)
        if g.n != self.n:
            raise GraphError(f"graph at t={t} has {g.n} nodes, expected {self.n}")
        return g

    def graphs(self, start: int = 0, stop: int | None = None) -> Iterator[Graph]:
        stop = start + (self.period or self.B) if stop is None else stop
        for t in range(start, stop):
            yield self(t)


# ---------------------------------------------------------------------------
# deterministic families


def line_graph(n: int) -> Graph:
    """Path on ``n`` nodes: arcs ``{(i, j) : |i - j| <= 1}``."""
    if n < 1:
        raise GraphError("line_graph requires n >= 1")
    return Graph.from_edges(n, ((i, i + 1) for i in range(n - 1)))


def complete_graph(n: int) -> Graph:
    if n < 1:
        raise GraphError("complete_graph requires n >= 1")
    return Graph(np.ones((n, n), dtype=bool), symmetric=True)


def star_graph(n: int, center: int = 0) -> Graph:
    if n < 1:
        raise GraphError("star_graph requires n >= 1")
    return Graph.from_edges(n, ((center, v) for v in range(n) if v != center))


def dumbbell_graph(n: int) -> Graph:
    """Two cliques on ``n/3`` nodes joined through a path of ``n/3`` nodes.

    Layout: clique ``0..m-1``, path ``m..2m-1``, clique ``2m..3m-1`` with
    ``m = n/3``; the path is attached to node ``m-1`` and node ``2m``.
    """
    if n < 6 or n % 3:
        raise GraphError("dumbbell_graph requires n >= 6 and n divisible by 3")
    m = n // 3
    edges = []
    for lo in (0, 2 * m):
        edges += [(i, j) for i in range(lo, lo + m) for j in range(i + 1, lo + m)]
    edges += [(i, i + 1) for i in range(m - 1, 2 * m)]
    return Graph.from_edges(n, edges)


# ---------------------------------------------------------------------------
# random models


def _geometric_adj(pos, r):
    diff = pos[:, None, :] - pos[None, :, :]
    return (diff ** 2).sum(axis=-1) <= r * r


def geometric_random_graph(n: int, r: float, rng: np.random.Generator) -> Graph:
    """Uniform points in the unit square, joined when at distance ``<= r``."""
    if n < 1:
        raise GraphError("geometric_random_graph requires n >= 1")
    if r < 0:
        raise GraphError("radius must be nonnegative")
    pos = rng.random((n, 2))
    return Graph(_geometric_adj(pos, r), positions=pos, symmetric=True)


def hubbed_geometric(n: int, r: float, n_d: int, p: float, rng: np.random.Generator) -> Graph:
    """Geometric random graph with ``n_d`` hubs.

    Each potential edge incident to a hub is added with probability ``p``,
    on top of the geometric edges. With ``n_d = 0`` the draw is identical to
    :func:`geometric_random_graph` under the same generator state.
    """
    if not 0 <= n_d <= n:
        raise GraphError("need 0 <= n_d <= n")
    if not 0.0 <= p <= 1.0:
        raise GraphError("need 0 <= p <= 1")
    base = geometric_random_graph(n, r, rng)
    if n_d == 0:
        return base
    adj = np.array(base.adj)
    hubs = rng.choice(n, size=n_d, replace=False)
    is_hub = np.zeros(n, dtype=bool)
    is_hub[hubs] = True
    coin = rng.random((n, n)) < p
    coin = np.triu(coin, k=1)
    coin = coin | coin.T
    incident = is_hub[:, None] | is_hub[None, :]
    adj |= coin & incident
    return Graph(adj, positions=base.positions, symmetric=True)


def erdos_renyi(n: int, c: float, rng: np.random.Generator) -> Graph:
    """Each unordered pair is joined (in both directions) with probability ``c``."""
    if n < 1:
        raise GraphError("erdos_renyi requires n >= 1")
    if not 0.0 <= c <= 1.0:
        raise GraphError("need 0 <= c <= 1")
    upper = np.triu(rng.random((n, n)) < c, k=1)
    return Graph(upper | upper.T, symmetric=True)


def random_tree(n: int, rng: np.random.Generator) -> Graph:
    """Uniformly random labelled tree (Prufer decoding) as a bidirectional graph."""
    if n < 1:
        raise GraphError("random_tree requires n >= 1")
    if n == 1:
        return Graph(np.ones((1, 1), dtype=bool), symmetric=True)
    if n == 2:
        return line_graph(2)
    import heapq

    prufer = rng.integers(0, n, size=n - 2).tolist()
    degree = [1] * n
    for v in prufer:
        degree[v] += 1
    leaves = [v for v in range(n) if degree[v] == 1]
    heapq.heapify(leaves)
    edges = []
    for v in prufer:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, v))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, v)
    edges.append((heapq.heappop(leaves), heapq.heappop(leaves)))
    return Graph.from_edges(n, edges)


# ---------------------------------------------------------------------------
# connectivity


def _reachable(adj_out: np.ndarray, src: int) -> np.ndarray:
    seen = np.zeros(adj_out.shape[0], dtype=bool)
    seen[src] = True
    frontier = [src]
    while frontier:
        nxt = np.flatnonzero(adj_out[frontier].any(axis=0) & ~seen)
        seen[nxt] = True
        frontier = nxt.tolist()
    return seen


def is_strongly_connected(g: Graph) -> bool:
    """True iff every node reaches every other node along directed arcs."""
    # out-adjacency: out[u, v] = arc u -> v
    out = g.adj.T
    return bool(_reachable(out, 0).all() and _reachable(g.adj, 0).all())


def check_B_connectivity(seq: GraphSequence, B: int | None = None, horizon: int = 1) -> bool:
    """True iff the union graph over every window ``[kB, (k+1)B)``, ``k < horizon``, is strongly connected."""
    B = seq.B if B is None else B
    if B < 1 or horizon < 1:
        raise ValueError("B and horizon must be >= 1")
    for k in range(horizon):
        adj = np.zeros((seq.n, seq.n), dtype=bool)
        for t in range(k * B, (k + 1) * B):
            adj |= seq(t).adj
        if not is_strongly_connected(Graph(adj)):
            return False
    return True


def _bfs_dist(adj, src):
    n = adj.shape[0]
    dist = np.full(n, -1)
    dist[src] = 0
    q = deque([src])
    while q:
        u = q.popleft()
        for v in np.flatnonzero(adj[u]):
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def graph_center(g: Graph) -> int:
    """Node of minimum eccentricity, lowest index on ties."""
    ecc = [_bfs_dist(g.adj, v).max() for v in range(g.n)]
    return int(np.argmin(ecc))


def spanning_tree(g: Graph, root: int | str = "center") -> Graph:
    """Bidirectional BFS spanning tree of a symmetric connected graph.

    ``root="center"`` picks the node of minimum eccentricity (lowest index on
    ties), which keeps the tree depth at the graph radius. Neighbours are
    visited in ascending index order.
    """
    if not g.is_symmetric():
        raise GraphError("spanning_tree requires a symmetric graph")
    if not is_strongly_connected(g):
        raise GraphError("spanning_tree requires a connected graph")
    r = graph_center(g) if root == "center" else int(root)
    if not 0 <= r < g.n:
        raise GraphError(f"root {r} out of range")
    parent = np.full(g.n, -1)
    parent[r] = r
    q = deque([r])
    edges = []
    while q:
        u = q.popleft()
        for v in np.flatnonzero(g.adj[u]):
            if parent[v] < 0:
                parent[v] = u
                edges.append((u, int(v)))
                q.append(int(v))
    return Graph.from_edges(g.n, edges)


def is_spanning_tree(g: Graph) -> bool:
    """Symmetric, connected, with exactly ``n - 1`` undirected non-self edges."""
    return (g.is_symmetric() and is_strongly_connected(g)
            and len(g.undirected_edges()) == g.n - 1)


def tree_parents(tree: Graph, root: int) -> np.ndarray:
    """Parent of every node on the path toward ``root``; ``parent[root] == root``."""
    if not is_spanning_tree(tree):
        raise GraphError("input is not a bidirectional spanning tree")
    dist = _bfs_dist(tree.adj, root)
    parent = np.empty(tree.n, dtype=int)
    for v in range(tree.n):
        if v == root:
            parent[v] = root
            continue
        nb = tree.neighbors(v)
        parent[v] = nb[dist[nb] == dist[v] - 1][0]
    return parent


# ---------------------------------------------------------------------------
# sequences


def adversarial_sequence(n: int, B: int) -> GraphSequence:
    """Periodic equal-neighbour worst case with per-period contraction
    ``1 - (4/(n+2)) (2/n)^(B-1)``.

    With ``h = n/2``, top half ``T = {0..h-1}`` and bottom half
    ``S = {h..n-1}``:

    * ``G(0)``: complete on ``T`` and on ``S`` plus the edge ``0 -- n-1``;
    * ``G(t)``, ``1 <= t <= B-2``: node 0 listens to all of ``T``, node
      ``n-1`` to all of ``S``, complete on ``T \\ {0}`` and on
      ``S \\ {n-1}``, nobody listens to 0 or ``n-1``;
    * ``G(B-1)``: complete on ``T`` and on ``S``.

    Started from :func:`adversarial_initial`, ``x(B)`` is a scalar multiple of
    ``x(0)``.
    """
    if n < 4 or n % 2:
        raise GraphError("adversarial_sequence requires even n >= 4")
    if B < 2:
        raise GraphError("adversarial_sequence requires B >= 2")
    h = n // 2
    top, bot = np.arange(h), np.arange(h, n)

    halves = np.zeros((n, n), dtype=bool)
    halves[np.ix_(top, top)] = True
    halves[np.ix_(bot, bot)] = True

    g0 = halves.copy()
    g0[0, n - 1] = g0[n - 1, 0] = True

    mid = np.zeros((n, n), dtype=bool)
    inner_top, inner_bot = top[1:], bot[:-1]
    mid[np.ix_(inner_top, inner_top)] = True
    mid[np.ix_(inner_bot, inner_bot)] = True
    mid[0, top] = True
    mid[n - 1, bot] = True

    graphs = [Graph(g0, symmetric=True)]
    graphs += [Graph(mid)] * (B - 2)
    graphs.append(Graph(halves, symmetric=True))
    return GraphSequence.periodic(graphs, B=B, claims_B_connected=True)


def adversarial_initial(n: int) -> np.ndarray:
    """``+1`` on the top half, ``-1`` on the bottom half."""
    if n < 2 or n % 2:
        raise GraphError("adversarial_initial requires even n")
    return np.concatenate([np.ones(n // 2), -np.ones(n // 2)])


def adversarial_contraction(n: int, B: int) -> float:
    """Per-period contraction factor of :func:`adversarial_sequence`."""
    return 1.0 - (4.0 / (n + 2)) * (2.0 / n) ** (B - 1)


def random_graph_sequence(make: Callable[[np.random.Generator], Graph], n: int, seed: int,
                          B: int = 1) -> GraphSequence:
    """Fresh random graph at every step; ``G(t)`` is drawn from a stream keyed on ``(seed, t)``."""

    def provider(t):
        return make(np.random.default_rng([seed, t]))

    return GraphSequence(provider, B=B, n=n)


def random_B_connected_sequence(n: int, B: int, seed: int, extra_p: float = 0.0) -> GraphSequence:
    """Symmetric sequence whose every aligned window of length ``B`` is connected.

    For window ``k`` a uniformly random spanning tree is drawn and each of its
    edges is placed at a uniformly random step of the window; every other pair
    appears at each step independently with probability ``extra_p``.
    """
    if n < 1 or B < 1:
        raise GraphError("need n >= 1 and B >= 1")

    def window(k):
        rng = np.random.default_rng([seed, k])
        tree = random_tree(n, rng)
        slots = [np.zeros((n, n), dtype=bool) for _ in range(B)]
        for u, v in tree.undirected_edges():
            s = slots[int(rng.integers(B))]
            s[u, v] = s[v, u] = True
        if extra_p > 0:
            for s in slots:
                coin = np.triu(rng.random((n, n)) < extra_p, k=1)
                s |= coin | coin.T
        return [Graph(s, symmetric=True) for s in slots]

    cache: dict[int, list[Graph]] = {}

    def provider(t):
        k = t // B
        if k not in cache:
            if len(cache) > 64:
                cache.clear()
            cache[k] = window(k)
        return cache[k][t % B]

    return GraphSequence(provider, B=B, n=n, claims_B_connected=True)


# ---------------------------------------------------------------------------
# text formats


def _format_graph(g: Graph) -> list[str]:
    arcs = sorted((u, v) for u, v in g.arcs if u != v)
    return [f"{g.n} {len(arcs)}"] + [f"{u} {v}" for u, v in arcs]


def _parse_graph(lines: list[str]) -> Graph:
    n, m = (int(tok) for tok in lines[0].split())
    body = [ln.split() for ln in lines[1:1 + m]]
    if len(body) != m:
        raise GraphError(f"expected {m} arcs, found {len(body)}")
    return Graph.from_arcs(n, ((int(u), int(v)) for u, v in body))


def _content_lines(text: str) -> list[str]:
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def write_graph(g: Graph, path) -> None:
    """Write ``n m`` then ``m`` lines ``u v`` (arc u -> v); self-arcs are implicit."""
    with open(path, "w") as fh:
        fh.write("\n".join(_format_graph(g)) + "\n")


def read_graph(path) -> Graph:
    with open(path) as fh:
        return _parse_graph(_content_lines(fh.read()))


def write_sequence(seq: GraphSequence, path) -> None:
    """Write ``n B P`` followed by ``P`` graph blocks separated by ``---``."""
    if seq.period is None:
        raise GraphError("only periodic sequences can be serialized")
    blocks = ["\n".join(_format_graph(g)) for g in seq.graphs(0, seq.period)]
    with open(path, "w") as fh:
        fh.write(f"{seq.n} {seq.B} {seq.period}\n" + "\n---\n".join(blocks) + "\n")


def read_sequence(path) -> GraphSequence:
    with open(path) as fh:
        lines = _content_lines(fh.read())
    n, B, P = (int(tok) for tok in lines[0].split())
    blocks, cur = [], []
    for ln in lines[1:]:
        if ln == "---":
            blocks.append(cur)
            cur = []
        else:
            cur.append(ln)
    blocks.append(cur)
    graphs = [_parse_graph(b) for b in blocks if b]
    if len(graphs) != P:
        raise GraphError(f"header declares period {P}, found {len(graphs)} graphs")
    if any(g.n != n for g in graphs):
        raise GraphError("graph block node count disagrees with header")
    return GraphSequence.periodic(graphs, B=B)

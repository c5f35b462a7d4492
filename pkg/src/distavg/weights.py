"""Update matrices for the agreement iteration ``x(t+1) = A x(t)``.

Two degree conventions coexist here and are kept on purpose:

* :func:`equal_neighbor` and :func:`tree_dictator_weights` use ``d_i`` =
  in-neighbourhood size *including* ``i``;
* :func:`max_degree_weights` uses ``d_i`` = number of neighbours
  *excluding* ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .exceptions import GraphError, NonErgodicError, UnscalableError
from .graph import Graph, is_spanning_tree, tree_parents

__all__ = [
    "WeightMatrix",
    "equal_neighbor",
    "max_degree_weights",
    "tree_dictator_weights",
    "stationary_distribution",
    "is_reversible",
    "scaled_initial",
    "read_matrix",
    "write_matrix",
    "ROW_SUM_TOL",
]

ROW_SUM_TOL = 1e-12


def _is_exact(a: np.ndarray) -> bool:
    return a.dtype == object


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Row-stochastic, possibly signed, update matrix.

    Parameters
    ----------
    a : ndarray, shape (n, n)
        Entries ``a_ij``. ``dtype=object`` arrays of :class:`~fractions.Fraction`
        are accepted for exact arithmetic.
    graph : Graph, optional
        When given, ``a_ij != 0`` is only allowed where ``(j, i)`` is an arc.
    """

    a: np.ndarray
    graph: Graph | None = field(default=None, repr=False)

    def __post_init__(self):
        a = np.array(self.a, dtype=object if _is_exact(np.asarray(self.a)) else float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"weight matrix must be square, got shape {a.shape}")
        a.flags.writeable = False
        object.__setattr__(self, "a", a)
        ones = a.sum(axis=1)
        if self.exact:
            if any(s != 1 for s in ones):
                raise ValueError("rows of an exact weight matrix must sum to exactly 1")
        elif np.max(np.abs(ones - 1.0)) > ROW_SUM_TOL:
            raise ValueError(f"row sums deviate from 1 by {np.max(np.abs(ones - 1.0)):.3e}")
        if self.graph is not None:
            if self.graph.n != a.shape[0]:
                raise ValueError("graph and matrix sizes disagree")
            if np.any(np.asarray(a != 0, dtype=bool) & ~self.graph.adj):
                raise ValueError("matrix has nonzero entries outside the graph's arcs")

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def exact(self) -> bool:
        return _is_exact(self.a)

    @property
    def nonnegative(self) -> bool:
        return bool(np.all(np.asarray(self.a >= 0, dtype=bool)))

    @property
    def doubly_stochastic(self) -> bool:
        cols = self.a.sum(axis=0)
        if self.exact:
            return self.nonnegative and all(c == 1 for c in cols)
        return self.nonnegative and float(np.max(np.abs(cols - 1.0))) <= ROW_SUM_TOL

    @property
    def alpha(self) -> float:
        """Smallest nonzero entry magnitude."""
        mags = np.abs(self.a[np.asarray(self.a != 0, dtype=bool)])
        return mags.min() if mags.size else 0.0

    def astype_float(self) -> np.ndarray:
        return np.asarray(self.a, dtype=float)

    def to_exact(self) -> "WeightMatrix":
        if self.exact:
            return self
        frac = np.vectorize(lambda v: Fraction(v).limit_denominator(10**12), otypes=[object])(self.a)
        # absorb rounding into the diagonal so rows sum to exactly 1
        for i in range(self.n):
            frac[i, i] += 1 - sum(frac[i])
        return WeightMatrix(frac, self.graph)

    def __matmul__(self, x):
        return self.a @ x


def equal_neighbor(g: Graph, exact: bool = False) -> WeightMatrix:
    """``a_ij = 1/d_i`` for every in-neighbour ``j`` of ``i`` (self included)."""
    d = g.degrees
    if exact:
        a = np.zeros((g.n, g.n), dtype=object)
        a[:] = Fraction(0)
        for i in range(g.n):
            w = Fraction(1, int(d[i]))
            for j in g.in_neighbors(i):
                a[i, j] = w
    else:
        a = g.adj / d[:, None]
    return WeightMatrix(a, g)


def max_degree_weights(g: Graph, epsilon: float | None = None) -> WeightMatrix:
    """Doubly stochastic iteration ``x_i += eps * sum_j (x_j - x_i)`` on a symmetric graph.

    Here ``d_i`` counts neighbours other than ``i``. ``epsilon`` must lie in
    ``(0, 1/max_i d_i)``; the default is ``1/(2 max_i d_i)``.
    """
    if not g.is_symmetric():
        raise GraphError("max_degree_weights requires a symmetric graph")
    d = g.degrees - 1
    dmax = int(d.max())
    if dmax == 0:
        if epsilon is not None and epsilon <= 0:
            raise ValueError("epsilon must be positive")
        return WeightMatrix(np.eye(g.n), g)
    if epsilon is None:
        epsilon = 1.0 / (2 * dmax)
    if not 0 < epsilon < 1.0 / dmax:
        raise ValueError(f"epsilon must lie in (0, 1/{dmax}), got {epsilon}")
    a = epsilon * g.adj.astype(float)
    np.fill_diagonal(a, 1.0 - epsilon * d)
    return WeightMatrix(a, g)


def tree_dictator_weights(tree: Graph, root: int, delta: float | None = None) -> WeightMatrix:
    """Matrix steering every node toward ``root`` along a spanning tree.

    The base matrix puts weight 1 on each node's parent (the root keeps its
    own value). For ``delta > 0`` every other tree arc, self-arcs included,
    receives ``delta`` and the parent entry is reduced so rows still sum to 1.
    Default ``delta = 1/(4n)``.
    """
    parent = tree_parents(tree, root)
    n = tree.n
    d = tree.degrees
    if delta is None:
        delta = 1.0 / (4 * n)
    if not 0 <= delta < 1.0 / d.max():
        raise ValueError(f"delta must lie in [0, 1/{int(d.max())}), got {delta}")
    a = delta * tree.adj.astype(float)
    for i in range(n):
        a[i, parent[i]] = 1.0 - delta * (d[i] - 1)
    return WeightMatrix(a, tree)


def _left_unit_eigvals(a):
    w = np.linalg.eigvals(a)
    return int(np.sum(np.abs(w - 1.0) <= 1e-9))


def _closed_classes(pattern: np.ndarray) -> int:
    """Number of closed communicating classes of the chain with support ``pattern``."""
    from scipy.sparse.csgraph import connected_components

    ncomp, labels = connected_components(pattern, directed=True, connection="strong")
    # a class is closed when no positive entry leaves it
    leaves = np.zeros(ncomp, dtype=bool)
    rows, cols = np.nonzero(pattern)
    leaves[labels[rows][labels[rows] != labels[cols]]] = True
    return int(np.sum(~leaves))


def _gth(a: np.ndarray) -> np.ndarray:
    """Grassmann-Taksar-Heyman elimination for an irreducible stochastic matrix.

    Subtraction-free, so tiny stationary probabilities keep their relative
    accuracy.
    """
    p = np.array(a, dtype=float)
    n = p.shape[0]
    for k in range(n - 1, 0, -1):
        s = p[k, :k].sum()
        p[:k, k] /= s
        p[:k, :k] += np.outer(p[:k, k], p[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = pi[:k] @ p[:k, k]
    return pi / pi.sum()


def _power_left(a, tol=1e-13, max_iter=10**6):
    n = a.shape[0]
    # lazy chain has the same stationary vector and avoids periodicity
    lazy = 0.5 * (a + np.eye(n))
    pi = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = pi @ lazy
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) < tol:
            return nxt
        pi = nxt
    return pi


def stationary_distribution(W: WeightMatrix, tol: float = 1e-10) -> np.ndarray:
    """Left eigenvector ``pi`` of ``A`` at eigenvalue 1, normalised to sum 1.

    Nonnegative matrices are classified structurally (closed classes of the
    support) and solved by GTH elimination up to ``n = 2000``, by power
    iteration beyond. Signed matrices use a dense least-squares solve.

    Raises
    ------
    NonErgodicError
        If the eigenvalue 1 is not simple.
    UnscalableError
        If ``pi`` has zero entries (or mixed signs), so that ``x_i / (n pi_i)``
        is undefined.
    """
    a = W.astype_float()
    n = W.n
    if W.nonnegative:
        pattern = a > 0
        closed = _closed_classes(pattern)
        if closed > 1:
            raise NonErgodicError(f"non-ergodic: {closed} closed classes, eigenvalue 1 is not simple")
        from scipy.sparse.csgraph import connected_components

        if connected_components(pattern, directed=True, connection="strong")[0] > 1:
            raise UnscalableError("unscalable: stationary vector has zero entries (reducible matrix)")
        pi = _gth(a) if n <= 2000 else _power_left(a)
    else:
        if _left_unit_eigvals(a) != 1:
            raise NonErgodicError("non-ergodic: eigenvalue 1 is not simple")
        lhs = np.vstack([a.T - np.eye(n), np.ones((1, n))])
        rhs = np.zeros(n + 1)
        rhs[-1] = 1.0
        pi, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
        scale = max(np.abs(pi).max(), 1.0 / n)
        if np.any(np.abs(pi) <= 1e-12 * scale):
            raise UnscalableError("unscalable: stationary vector has zero entries")
        if not (np.all(pi > 0) or np.all(pi < 0)):
            raise UnscalableError("unscalable: stationary vector changes sign")
        pi = np.abs(pi)
        pi /= pi.sum()
    resid = np.max(np.abs(pi @ a - pi))
    if resid > tol:
        raise NonErgodicError(f"stationary residual {resid:.2e} exceeds {tol:.0e}")
    return pi


def is_reversible(W: WeightMatrix, pi, tol: float = 1e-12) -> bool:
    """Detailed balance ``pi_i a_ij == pi_j a_ji`` entrywise."""
    a = W.a
    pi = np.asarray(pi, dtype=object if W.exact else float)
    flow = pi[:, None] * a
    diff = flow - flow.T
    if W.exact and pi.dtype == object:
        return all(v == 0 for v in diff.ravel())
    return bool(np.max(np.abs(diff.astype(float))) <= tol)


def scaled_initial(x0, pi) -> np.ndarray:
    """Rescale ``x_i -> x_i / (n pi_i)`` so that ``sum_i pi_i xbar_i`` equals the mean of ``x``."""
    x0 = np.asarray(x0)
    pi = np.asarray(pi)
    if x0.shape != pi.shape:
        raise ValueError("x0 and pi must have the same shape")
    if np.any(pi <= 0):
        raise UnscalableError("all pi_i must be positive")
    return x0 / (len(pi) * pi)


def write_matrix(W: WeightMatrix | np.ndarray, path) -> None:
    a = np.asarray(W.a if isinstance(W, WeightMatrix) else W, dtype=float)
    with open(path, "w") as fh:
        fh.write(f"{a.shape[0]}\n")
        for row in a:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def read_matrix(path) -> WeightMatrix:
    """Read ``n`` then ``n`` whitespace-separated rows of ``n`` entries."""
    with open(path) as fh:
        tokens = fh.read().split()
    n = int(tokens[0])
    vals = np.array([float(v) for v in tokens[1:]])
    if vals.size != n * n:
        raise ValueError(f"expected {n * n} entries, found {vals.size}")
    return WeightMatrix(vals.reshape(n, n))

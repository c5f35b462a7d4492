"""Scikit-learn style averagers.

Each averager is fitted on a network and then transforms a batch of initial
value vectors, one per row, into the node states at the end of the run::

    avg = TwoPassAverager(epsilon=1e-6).fit(graph)
    states = avg.transform(X0)        # shape (n_samples, n_nodes)

``fit`` accepts a :class:`~distavg.graph.Graph` or a square adjacency matrix
(nonzero ``A[i, j]`` meaning ``j`` influences ``i``). Load balancing also
accepts a :class:`~distavg.graph.GraphSequence`.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .engine import algorithm1_two_pass, algorithm2_tree_heuristic, run_linear, run_load_balancing
from .graph import Graph, GraphSequence, is_strongly_connected, spanning_tree
from .spectral import spectral_summary
from .weights import (
    equal_neighbor,
    max_degree_weights,
    scaled_initial,
    stationary_distribution,
    tree_dictator_weights,
)

__all__ = ["AgreementAverager", "TwoPassAverager", "TreeAverager", "LoadBalancingAverager", "check_graph"]


def check_graph(G, require_symmetric=False, require_connected=False) -> Graph:
    """Coerce ``G`` to a :class:`Graph` and validate it."""
    if not isinstance(G, Graph):
        adj = check_array(G, dtype=None, ensure_min_samples=1, ensure_min_features=1)
        if adj.shape[0] != adj.shape[1]:
            raise ValueError(f"adjacency matrix must be square, got {adj.shape}")
        G = Graph(adj != 0)
    if require_symmetric and not G.is_symmetric():
        raise ValueError("graph must be symmetric")
    if require_connected and not is_strongly_connected(G):
        raise ValueError("graph must be strongly connected")
    return G


def _check_X(X, n):
    X = check_array(X, ensure_2d=False, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != n:
        raise ValueError(f"X has {X.shape[1]} columns, fitted network has {n} nodes")
    return X


class AgreementAverager(TransformerMixin, BaseEstimator):
    """Linear agreement iteration ``x(t+1) = A x(t)`` on a fixed graph.

    Parameters
    ----------
    weights : {"equal-neighbor", "max-degree", "tree-dictator"}
    epsilon : float
        Relative accuracy of the stopping rule.
    scale_initial : bool
        Rescale initial values by ``1/(n pi_i)`` so the limit is the plain
        mean even when ``A`` is not doubly stochastic.
    step_size, delta, root
        Parameters of the max-degree and tree-dictator constructions.
    """

    def __init__(self, weights="equal-neighbor", epsilon=1e-3, scale_initial=True, step_size=None,
                 delta=None, root=0, step_cap=10**7):
        self.weights = weights
        self.epsilon = epsilon
        self.scale_initial = scale_initial
        self.step_size = step_size
        self.delta = delta
        self.root = root
        self.step_cap = step_cap

    def fit(self, G, y=None):
        g = check_graph(G, require_connected=True)
        if self.weights == "equal-neighbor":
            W = equal_neighbor(g)
        elif self.weights == "max-degree":
            W = max_degree_weights(g, self.step_size)
        elif self.weights == "tree-dictator":
            tree = g if len(g.undirected_edges()) == g.n - 1 else spanning_tree(g)
            W = tree_dictator_weights(tree, self.root, self.delta)
        else:
            raise ValueError(f"unknown weights {self.weights!r}")
        self.graph_ = g
        self.weights_ = W
        self.pi_ = stationary_distribution(W)
        summary = spectral_summary(W, pi=self.pi_)
        self.eigenvalues_ = summary.eigenvalues
        self.rho_ = summary.rho
        self.n_features_in_ = g.n
        return self

    def transform(self, X):
        check_is_fitted(self, "weights_")
        X = _check_X(X, self.n_features_in_)
        out = np.empty_like(X)
        self.n_iter_ = np.empty(X.shape[0], dtype=int)
        for k, x0 in enumerate(X):
            start = scaled_initial(x0, self.pi_) if self.scale_initial else x0
            target = float(self.pi_ @ start)
            tr = run_linear(self.weights_, start, self.epsilon, target=target, step_cap=self.step_cap,
                            record_every=10**9)
            out[k] = tr.final_state
            self.n_iter_[k] = tr.steps_to_epsilon
        return out


class TwoPassAverager(TransformerMixin, BaseEstimator):
    """Ratio of two equal-neighbour agreement runs; converges to the mean."""

    def __init__(self, epsilon=1e-3, step_cap=10**7):
        self.epsilon = epsilon
        self.step_cap = step_cap

    def fit(self, G, y=None):
        self.graph_ = check_graph(G, require_symmetric=True, require_connected=True)
        self.n_features_in_ = self.graph_.n
        return self

    def transform(self, X):
        check_is_fitted(self, "graph_")
        X = _check_X(X, self.n_features_in_)
        out = np.empty_like(X)
        self.n_iter_ = np.empty(X.shape[0], dtype=int)
        for k, x0 in enumerate(X):
            tr = algorithm1_two_pass(self.graph_, x0, self.epsilon, step_cap=self.step_cap)
            out[k] = tr.final_state
            self.n_iter_[k] = tr.steps_to_epsilon
        return out


class TreeAverager(TransformerMixin, BaseEstimator):
    """Equal-neighbour agreement on a BFS spanning tree with rescaled initial values."""

    def __init__(self, epsilon=1e-3, root="center", step_cap=10**7):
        self.epsilon = epsilon
        self.root = root
        self.step_cap = step_cap

    def fit(self, G, y=None):
        g = check_graph(G, require_symmetric=True, require_connected=True)
        self.graph_ = g
        self.tree_ = spanning_tree(g, root=self.root)
        self.pi_ = self.tree_.degrees / self.tree_.E
        self.n_features_in_ = g.n
        return self

    def transform(self, X):
        check_is_fitted(self, "tree_")
        X = _check_X(X, self.n_features_in_)
        out = np.empty_like(X)
        self.n_iter_ = np.empty(X.shape[0], dtype=int)
        for k, x0 in enumerate(X):
            tr = algorithm2_tree_heuristic(self.graph_, x0, self.epsilon, root=self.root,
                                           step_cap=self.step_cap)
            out[k] = tr.final_state
            self.n_iter_[k] = tr.steps_to_epsilon
        return out


class LoadBalancingAverager(TransformerMixin, BaseEstimator):
    """Offer/accept load balancing on a fixed graph or a graph sequence.

    ``criterion="V"`` stops on ``V(t) <= epsilon V(0)``; ``"max_dev"`` on an
    absolute max deviation from the mean.
    """

    def __init__(self, epsilon=1e-6, criterion="V", step_cap=10**7):
        self.epsilon = epsilon
        self.criterion = criterion
        self.step_cap = step_cap

    def fit(self, G, y=None):
        if isinstance(G, GraphSequence):
            self.sequence_ = G
        else:
            self.sequence_ = GraphSequence.constant(check_graph(G, require_symmetric=True))
        self.n_features_in_ = self.sequence_.n
        return self

    def transform(self, X):
        check_is_fitted(self, "sequence_")
        X = _check_X(X, self.n_features_in_)
        out = np.empty_like(X)
        self.n_iter_ = np.empty(X.shape[0], dtype=int)
        self.lyapunov_ = []
        for k, x0 in enumerate(X):
            tr = run_load_balancing(self.sequence_, x0, self.epsilon, criterion=self.criterion,
                                    step_cap=self.step_cap)
            out[k] = tr.final_state
            self.n_iter_[k] = tr.steps_to_epsilon
            self.lyapunov_.append(tr.V)
        return out

"""Distributed consensus and averaging: agreement iterations, averaging
constructions, spectral convergence analysis and load-balancing averaging."""

from .engine import (
    OfferRound,
    SimulationTrace,
    algorithm1_two_pass,
    algorithm2_tree_heuristic,
    equal_neighbor_provider,
    load_balancing_step,
    lyapunov,
    run_linear,
    run_load_balancing,
)
from .estimators import AgreementAverager, LoadBalancingAverager, TreeAverager, TwoPassAverager
from .exceptions import (
    ConvergenceTimeout,
    DivergenceError,
    EigenSolverError,
    GraphError,
    NonErgodicError,
    UnscalableError,
)
from .graph import (
    Graph,
    GraphSequence,
    adversarial_sequence,
    check_B_connectivity,
    complete_graph,
    dumbbell_graph,
    erdos_renyi,
    geometric_random_graph,
    hubbed_geometric,
    is_strongly_connected,
    line_graph,
    spanning_tree,
)
from .spectral import (
    dirichlet_form,
    lambda2_lower_bound,
    measure_convergence_time,
    spectral_summary,
    tree_bounds_check,
)
from .weights import (
    WeightMatrix,
    equal_neighbor,
    is_reversible,
    max_degree_weights,
    scaled_initial,
    stationary_distribution,
    tree_dictator_weights,
)

__version__ = "0.1.0"

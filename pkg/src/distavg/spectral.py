"""Eigen-analysis of update matrices and convergence-time measurement."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConvergenceTimeout, EigenSolverError, GraphError, NonErgodicError, UnscalableError
from .graph import Graph, is_spanning_tree, line_graph
from .weights import WeightMatrix, equal_neighbor, is_reversible, stationary_distribution

__all__ = [
    "SpectralSummary",
    "ConvergenceMeasurement",
    "TreeBoundsReport",
    "LineBoundReport",
    "spectral_summary",
    "dirichlet_form",
    "lambda2_lower_bound",
    "second_eigenvector",
    "tree_bounds_check",
    "line_bound_check",
    "line_test_vector",
    "measure_convergence_time",
    "slowest_mode",
]

IMAG_TOL = 1e-9


@dataclass(frozen=True)
class SpectralSummary:
    """Spectrum of an update matrix.

    ``eigenvalues`` are sorted by decreasing modulus (ties broken by
    decreasing real part). ``lambda2`` and ``lambda_min`` are the second
    largest and the smallest eigenvalue by real part, which is the ordering
    used by the variational bounds for real spectra.
    """

    eigenvalues: np.ndarray
    rho: float
    is_real_spectrum: bool
    reversible: bool = False
    defective: bool = False
    pi: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    def _real_sorted(self):
        return np.sort(self.eigenvalues.real)[::-1]

    @property
    def lambda2(self) -> float:
        r = self._real_sorted()
        return float(r[1]) if len(r) > 1 else float("nan")

    @property
    def lambda_min(self) -> float:
        return float(self._real_sorted()[-1])

    @property
    def spectral_gap(self) -> float:
        return 1.0 - self.rho


def _sort_by_modulus(w):
    order = np.lexsort((-w.real, -np.round(np.abs(w), 12)))
    return w[order]


def spectral_summary(W: WeightMatrix | np.ndarray, pi=None) -> SpectralSummary:
    """Full spectrum and convergence rate ``rho = max(|lambda_2|, |lambda_n|)``.

    When ``A`` is reversible with respect to its stationary vector the
    spectrum is computed from the symmetric matrix
    ``sqrt(pi_i / pi_j) a_ij``; otherwise a general dense eigensolve is used
    and its residuals are checked.
    """
    if not isinstance(W, WeightMatrix):
        W = WeightMatrix(np.asarray(W, dtype=float))
    a = W.astype_float()
    n = W.n
    if pi is None:
        try:
            pi = stationary_distribution(W)
        except (NonErgodicError, UnscalableError):
            pi = None
    reversible = pi is not None and is_reversible(W, pi, tol=1e-12)
    defective = False
    if reversible:
        s = np.sqrt(pi)
        sym = s[:, None] * a / s[None, :]
        sym = 0.5 * (sym + sym.T)
        w = np.linalg.eigvalsh(sym).astype(complex)
    else:
        try:
            w, v = np.linalg.eig(a)
        except np.linalg.LinAlgError as exc:
            raise EigenSolverError(f"eigensolver failed: {exc}") from exc
        norm_a = max(np.linalg.norm(a, 2), 1.0)
        resid = np.linalg.norm(a @ v - v * w[None, :], axis=0)
        if np.any(resid > 1e-8 * norm_a):
            raise EigenSolverError(f"eigen residual {resid.max():.2e} above contract")
        with np.errstate(all="ignore"):
            cond = np.linalg.cond(v)
        defective = not np.isfinite(cond) or cond > 1e10
    w = _sort_by_modulus(w)
    rho = float(np.abs(w[1])) if n > 1 else 0.0
    is_real = bool(np.all(np.abs(w.imag) <= IMAG_TOL))
    return SpectralSummary(w, rho, is_real, reversible=reversible, defective=defective, pi=pi)


def dirichlet_form(W: WeightMatrix | np.ndarray, pi, x) -> float:
    """``sum_ij pi_i a_ij (x_i - x_j)^2``."""
    a = W.astype_float() if isinstance(W, WeightMatrix) else np.asarray(W, dtype=float)
    pi = np.asarray(pi, dtype=float)
    x = np.asarray(x, dtype=float)
    if a.shape != (len(pi), len(pi)) or x.shape != pi.shape:
        raise ValueError("dimension mismatch")
    diff = x[:, None] - x[None, :]
    return float(np.sum(pi[:, None] * a * diff ** 2))


def lambda2_lower_bound(W, pi, y, balance_tol: float = 1e-10) -> float:
    """Variational lower bound on ``lambda_2`` from a balanced test vector.

    Returns ``1 - Q(y) / (2 sum_i pi_i y_i^2)`` where ``Q`` is the
    :func:`dirichlet_form`. Requires ``sum_i pi_i y_i = 0``; the bound is
    invariant to rescaling ``y``.
    """
    pi = np.asarray(pi, dtype=float)
    y = np.asarray(y, dtype=float)
    if not np.any(y):
        raise ValueError("test vector must not be identically zero")
    scale = np.abs(y).max()
    if abs(pi @ y) > balance_tol * max(scale, 1.0):
        raise ValueError(f"test vector is not balanced: sum pi_i y_i = {pi @ y:.3e}")
    return 1.0 - dirichlet_form(W, pi, y) / (2.0 * float(pi @ y ** 2))


def _canonical(v):
    # unit max-abs scaling, sign fixed by the first largest-magnitude entry
    mag = np.abs(v)
    k = int(np.argmax(mag >= mag.max() * (1 - 1e-9)))
    return v / v[k]


def second_eigenvector(W: WeightMatrix, pi=None) -> tuple[float, np.ndarray]:
    """``(lambda_2, v)`` for a reversible ``A``, with ``A v = lambda_2 v`` and ``sum pi_i v_i = 0``."""
    if pi is None:
        pi = stationary_distribution(W)
    if not is_reversible(W, pi):
        raise ValueError("second_eigenvector requires a reversible matrix")
    s = np.sqrt(pi)
    a = W.astype_float()
    sym = s[:, None] * a / s[None, :]
    w, u = np.linalg.eigh(0.5 * (sym + sym.T))
    v = u[:, -2] / s
    return float(w[-2]), _canonical(v)


def slowest_mode(W: WeightMatrix, pi=None) -> np.ndarray:
    """Real eigenvector for the eigenvalue of modulus ``rho`` of a reversible ``A``."""
    if pi is None:
        pi = stationary_distribution(W)
    s = np.sqrt(pi)
    a = W.astype_float()
    sym = s[:, None] * a / s[None, :]
    w, u = np.linalg.eigh(0.5 * (sym + sym.T))
    # drop the unit eigenvalue (largest) and pick the largest remaining modulus
    idx = int(np.argmax(np.abs(w[:-1])))
    return _canonical(u[:, idx] / s)


def line_test_vector(pi) -> np.ndarray:
    """``y_i = i - beta`` with ``beta = sum pi_i i / sum pi_i``."""
    pi = np.asarray(pi, dtype=float)
    idx = np.arange(len(pi), dtype=float)
    return idx - (pi @ idx) / pi.sum()


@dataclass(frozen=True)
class TreeBoundsReport:
    n: int
    lambda2: float
    lambda_min: float
    lambda2_bound: float
    lambda_min_bound: float

    @property
    def lambda2_margin(self) -> float:
        return self.lambda2_bound - self.lambda2

    @property
    def lambda_min_margin(self) -> float:
        return self.lambda_min - self.lambda_min_bound

    @property
    def passed(self) -> bool:
        return self.lambda2_margin >= -1e-12 and self.lambda_min_margin >= -1e-12


def tree_bounds_check(tree: Graph) -> TreeBoundsReport:
    """Equal-neighbour spectrum on a spanning tree against
    ``lambda_2 <= 1 - 1/(3n^2)`` and ``lambda_n >= -1 + 2/n``."""
    if not is_spanning_tree(tree):
        raise GraphError("tree_bounds_check requires a bidirectional spanning tree")
    n = tree.n
    s = spectral_summary(equal_neighbor(tree), pi=tree.degrees / tree.E)
    lam2 = s.lambda2 if n > 1 else -math.inf
    return TreeBoundsReport(n, lam2, s.lambda_min, 1.0 - 1.0 / (3 * n * n), -1.0 + 2.0 / n)


@dataclass(frozen=True)
class LineBoundReport:
    n: int
    C: float
    lambda2: float
    test_vector_bound: float
    bound: float

    @property
    def passed(self) -> bool:
        return (self.lambda2 >= self.test_vector_bound - 1e-9
                and self.test_vector_bound >= self.bound - 1e-12)


def line_bound_check(W: WeightMatrix | int) -> LineBoundReport:
    """Check ``lambda_2 >= 1 - 6C/n^2`` for a line-supported matrix, ``C = max_i 1/(n pi_i)``.

    Passing an integer ``n`` uses the equal-neighbour matrix of the line graph.
    Both links of the chain are checked: the linear test vector bound must be
    below ``lambda_2`` and above ``1 - 6C/n^2``.
    """
    if isinstance(W, (int, np.integer)):
        W = equal_neighbor(line_graph(int(W)))
    n = W.n
    a = W.astype_float()
    i, j = np.nonzero(a)
    if np.any(np.abs(i - j) > 1):
        raise ValueError("matrix is not supported on the line graph")
    pi = stationary_distribution(W)
    C = float(np.max(1.0 / (n * pi)))
    y = line_test_vector(pi)
    tv = lambda2_lower_bound(W, pi, y)
    lam2 = spectral_summary(W, pi=pi).lambda2
    return LineBoundReport(n, C, lam2, tv, 1.0 - 6.0 * C / n ** 2)


@dataclass(frozen=True)
class ConvergenceMeasurement:
    """``T``: first step after which ``||x(t) - x*||_inf <= eps ||x(0) - x*||_inf`` for every monitored ``t``."""

    T: int
    epsilon: float
    init_kind: str
    horizon: int
    norm: str = "inf"


def measure_convergence_time(W: WeightMatrix, epsilon: float = 1e-3, init_kind: str = "eigenvector",
                             x0=None, rng: np.random.Generator | None = None,
                             step_cap: int = 10**9) -> ConvergenceMeasurement:
    """Measure ``T_n(eps)`` for ``x(t+1) = A x(t)`` with ``x* = (pi^T x(0)) 1``.

    ``init_kind`` selects the start: ``"eigenvector"`` (slowest real mode of a
    reversible ``A``), ``"supplied"`` (``x0``) or ``"random"`` (uniform on
    ``[0, 1]`` from ``rng``). The run continues to twice the candidate ``T``
    before reporting, so late excursions above the threshold are caught.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    pi = stationary_distribution(W)
    if init_kind == "eigenvector":
        if not is_reversible(W, pi):
            raise ValueError("eigenvector initialisation requires a reversible matrix")
        x = slowest_mode(W, pi)
    elif init_kind == "supplied":
        if x0 is None:
            raise ValueError("init_kind='supplied' needs x0")
        x = np.asarray(x0, dtype=float).copy()
    elif init_kind == "random":
        rng = np.random.default_rng() if rng is None else rng
        x = rng.random(W.n)
    else:
        raise ValueError(f"unknown init_kind {init_kind!r}")

    a = W.astype_float()
    target = float(pi @ x)
    dev0 = np.abs(x - target).max()
    if dev0 == 0:
        return ConvergenceMeasurement(0, epsilon, init_kind, 0)
    thresh = epsilon * dev0
    T = 1
    t = 0
    while True:
        if t >= max(2 * T, T + 1):
            return ConvergenceMeasurement(T, epsilon, init_kind, t)
        if t >= step_cap:
            raise ConvergenceTimeout(f"no convergence within {step_cap} steps", steps=t)
        x = a @ x
        t += 1
        if np.abs(x - target).max() > thresh:
            T = t + 1

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from distavg.exceptions import GraphError
from distavg.graph import (
    complete_graph,
    dumbbell_graph,
    erdos_renyi,
    geometric_random_graph,
    is_strongly_connected,
    line_graph,
    random_tree,
    spanning_tree,
    star_graph,
)
from distavg.spectral import (
    dirichlet_form,
    lambda2_lower_bound,
    line_bound_check,
    line_test_vector,
    measure_convergence_time,
    second_eigenvector,
    slowest_mode,
    spectral_summary,
    tree_bounds_check,
)
from distavg.weights import WeightMatrix, equal_neighbor, max_degree_weights, stationary_distribution

PI3 = np.array([2 / 7, 3 / 7, 2 / 7])
# row-stochastic, supported on the 4-line, negative self-weights at the ends
SIGNED_LINE = np.array([[-0.1, 1.1, 0, 0], [0.4, 0.3, 0.3, 0], [0, 0.3, 0.3, 0.4], [0, 0, 1.1, -0.1]])


def reversible_matrices(count, max_n=20, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        n = int(rng.integers(2, max_n + 1))
        g = erdos_renyi(n, float(rng.uniform(0.15, 0.8)), rng)
        if is_strongly_connected(g):
            out.append(equal_neighbor(g) if len(out) % 2 == 0 else max_degree_weights(g))
    return out


class TestSummary:
    @pytest.mark.parametrize("n", [1, 2, 5, 9])
    def test_complete(self, n):
        s = spectral_summary(equal_neighbor(complete_graph(n)))
        assert s.eigenvalues[0] == pytest.approx(1.0)
        np.testing.assert_allclose(s.eigenvalues[1:], 0, atol=1e-12)
        assert s.rho == pytest.approx(0.0, abs=1e-12)

    def test_line3(self):
        s = spectral_summary(equal_neighbor(line_graph(3)))
        np.testing.assert_allclose(s.eigenvalues.real, [1, 1 / 2, -1 / 6], atol=1e-12)
        assert s.rho == pytest.approx(0.5)
        assert s.reversible and s.is_real_spectrum
        assert s.lambda2 == pytest.approx(0.5)
        assert s.lambda_min == pytest.approx(-1 / 6)

    def test_line3_characteristic_polynomial(self):
        a = equal_neighbor(line_graph(3)).a
        roots = np.sort(np.roots(np.poly(a)).real)
        np.testing.assert_allclose(roots, [-1 / 6, 1 / 2, 1], atol=1e-12)

    def test_rho_is_max_of_extremes(self):
        for W in reversible_matrices(20, seed=1):
            s = spectral_summary(W)
            lam = np.sort(s.eigenvalues.real)
            assert s.rho == pytest.approx(max(abs(lam[-2]), abs(lam[0])), abs=1e-12)
            assert s.eigenvalues[0].real == pytest.approx(1.0, abs=1e-9)

    def test_directed_cycle_complex(self):
        a = np.array([[0.5, 0.5, 0], [0, 0.5, 0.5], [0.5, 0, 0.5]])
        s = spectral_summary(WeightMatrix(a))
        assert not s.reversible and not s.is_real_spectrum
        assert s.rho == pytest.approx(abs(0.5 + 0.5 * np.exp(2j * np.pi / 3)))
        assert not s.defective

    def test_defective_flag(self):
        # Jordan block at eigenvalue 1/2 inside a stochastic matrix
        a = np.array([[1.0, 0, 0], [0.5, 0.5, 0], [0, 0.5, 0.5]])
        s = spectral_summary(WeightMatrix(a))
        assert s.defective
        assert s.rho == pytest.approx(0.5, abs=1e-6)

    def test_unscalable_still_summarised(self):
        from distavg.weights import tree_dictator_weights

        s = spectral_summary(tree_dictator_weights(line_graph(4), 0, 0.0))
        assert s.eigenvalues[0].real == pytest.approx(1.0)
        assert not s.reversible

    def test_signed_line_matrix(self):
        a = SIGNED_LINE
        s = spectral_summary(WeightMatrix(a))
        assert s.eigenvalues[0].real == pytest.approx(1.0, abs=1e-9)
        assert s.reversible and s.is_real_spectrum
        assert s.rho == pytest.approx(np.sort(np.abs(np.linalg.eigvals(a)))[-2])


class TestSelfAdjoint:
    def test_detailed_balance_matrix_identity(self):
        for W in reversible_matrices(25, seed=2):
            pi = stationary_distribution(W)
            D = np.diag(pi)
            assert np.abs(D @ W.a - W.a.T @ D).max() <= 1e-12
            s = spectral_summary(W, pi)
            assert s.is_real_spectrum
            assert np.abs(s.eigenvalues.imag).max() <= 1e-9


class TestDirichlet:
    def test_constant_zero(self):
        assert dirichlet_form(equal_neighbor(line_graph(3)), PI3, np.full(3, 4.2)) == pytest.approx(0.0)

    def test_line3_values(self):
        W = equal_neighbor(line_graph(3))
        assert dirichlet_form(W, PI3, [1, 0, -1]) == pytest.approx(4 / 7)
        assert dirichlet_form(W, PI3, [1, 0, 0]) == pytest.approx(2 / 7)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            dirichlet_form(equal_neighbor(line_graph(3)), PI3, [1, 0])


class TestLambda2Bound:
    def test_line3_eigenvector_exact(self):
        W = equal_neighbor(line_graph(3))
        assert lambda2_lower_bound(W, PI3, [1, 0, -1]) == pytest.approx(0.5, abs=1e-15)

    @pytest.mark.parametrize("alpha", [-3.0, 1e-4, 2.5, 1e6])
    def test_scale_invariant(self, alpha):
        W = equal_neighbor(line_graph(5))
        pi = stationary_distribution(W)
        y = line_test_vector(pi)
        assert lambda2_lower_bound(W, pi, alpha * y) == pytest.approx(lambda2_lower_bound(W, pi, y), abs=1e-12)

    def test_rejects_zero_and_unbalanced(self):
        W = equal_neighbor(line_graph(3))
        with pytest.raises(ValueError):
            lambda2_lower_bound(W, PI3, np.zeros(3))
        with pytest.raises(ValueError, match="balanced"):
            lambda2_lower_bound(W, PI3, [1, 0, 0])

    def test_dominance_random_vectors(self):
        rng = np.random.default_rng(7)
        mats = reversible_matrices(20, seed=3)
        for k in range(1000):
            W = mats[k % len(mats)]
            pi = stationary_distribution(W)
            y = rng.normal(size=W.n)
            y -= pi @ y
            lam2 = spectral_summary(W, pi).lambda2
            assert lambda2_lower_bound(W, pi, y) <= lam2 + 1e-9

    def test_equality_at_second_eigenvector(self):
        for W in reversible_matrices(20, seed=4):
            pi = stationary_distribution(W)
            lam2, v = second_eigenvector(W, pi)
            np.testing.assert_allclose(W.a @ v, lam2 * v, atol=1e-10)
            assert lambda2_lower_bound(W, pi, v) == pytest.approx(lam2, abs=1e-9)

    @pytest.mark.parametrize("n", [8, 16, 32])
    def test_line_test_vector_chain(self, n):
        W = equal_neighbor(line_graph(n))
        pi = stationary_distribution(W)
        y = line_test_vector(pi)
        C = np.max(1 / (n * pi))
        # the two intermediate inequalities of the chain
        assert dirichlet_form(W, pi, y) / 2 <= 1 + 1e-12
        assert pi @ y ** 2 >= n ** 2 / (12 * C) - 1e-12
        assert lambda2_lower_bound(W, pi, y) >= 1 - 6 * C / n ** 2


class TestTreeBounds:
    def test_line3(self):
        rep = tree_bounds_check(line_graph(3))
        assert rep.lambda2 == pytest.approx(0.5)
        assert rep.lambda_min == pytest.approx(-1 / 6)
        assert rep.lambda2_bound == pytest.approx(1 - 1 / 27)
        assert rep.lambda_min_bound == pytest.approx(-1 / 3)
        assert rep.passed

    @pytest.mark.parametrize("n", [4, 8, 16, 32])
    def test_star(self, n):
        rep = tree_bounds_check(star_graph(n))
        assert rep.passed
        assert rep.lambda_min >= -1 + 2 / n

    def test_star8_smallest(self):
        assert tree_bounds_check(star_graph(8)).lambda_min_margin >= 0

    def test_random_bfs_trees(self):
        rng = np.random.default_rng(12)
        done = 0
        while done < 60:
            n = int(rng.integers(2, 129))
            g = geometric_random_graph(n, 1.5 * math.sqrt(math.log(n) / n), rng)
            if not is_strongly_connected(g):
                continue
            assert tree_bounds_check(spanning_tree(g)).passed
            done += 1

    @settings(max_examples=40, deadline=None)
    @given(n=st.integers(2, 60), seed=st.integers(0, 2**32 - 1))
    def test_prufer_trees(self, n, seed):
        assert tree_bounds_check(random_tree(n, np.random.default_rng(seed))).passed

    def test_rejects_non_tree(self):
        with pytest.raises(GraphError):
            tree_bounds_check(complete_graph(4))


class TestLineBound:
    @pytest.mark.parametrize("n", [4, 5, 17, 32, 64])
    def test_passes(self, n):
        rep = line_bound_check(n)
        assert rep.passed
        assert rep.C <= 1.5

    def test_C_formula(self):
        rep = line_bound_check(32)
        assert rep.C == pytest.approx((3 * 32 - 2) / (2 * 32))

    def test_signed_matrix(self):
        a = SIGNED_LINE
        rep = line_bound_check(WeightMatrix(a))
        assert rep.test_vector_bound >= rep.bound

    def test_rejects_off_line_support(self):
        with pytest.raises(ValueError):
            line_bound_check(equal_neighbor(complete_graph(4)))


class TestConvergenceTime:
    def test_complete_one_step(self):
        W = equal_neighbor(complete_graph(6))
        m = measure_convergence_time(W, 1e-3, "supplied", x0=np.arange(6.0))
        assert m.T == 1

    def test_line3_eigenvector(self):
        W = equal_neighbor(line_graph(3))
        np.testing.assert_allclose(slowest_mode(W), [1, 0, -1], atol=1e-12)
        m = measure_convergence_time(W, 1e-3)
        assert m.T == math.ceil(math.log(1e-3) / math.log(0.5)) == 10
        assert m.horizon >= 2 * m.T

    def test_definition_holds_after_T(self):
        rng = np.random.default_rng(0)
        W = equal_neighbor(line_graph(7))
        x0 = rng.random(7)
        m = measure_convergence_time(W, 1e-2, "supplied", x0=x0)
        pi = stationary_distribution(W)
        target = pi @ x0
        dev0 = np.abs(x0 - target).max()
        x = x0.copy()
        for t in range(1, 4 * m.T):
            x = W.a @ x
            if t >= m.T:
                assert np.abs(x - target).max() <= 1e-2 * dev0
            if t == m.T - 1:
                assert np.abs(x - target).max() > 1e-2 * dev0

    def test_constant_input(self):
        assert measure_convergence_time(equal_neighbor(line_graph(4)), 1e-3, "supplied", x0=np.ones(4)).T == 0

    def test_bad_args(self):
        W = equal_neighbor(line_graph(3))
        with pytest.raises(ValueError):
            measure_convergence_time(W, 1.5)
        with pytest.raises(ValueError):
            measure_convergence_time(W, 1e-3, "supplied")
        with pytest.raises(ValueError):
            measure_convergence_time(WeightMatrix(np.array([[0.5, 0.5, 0], [0, 0.5, 0.5], [0.5, 0, 0.5]])))

    def test_dumbbell_cubic_growth(self):
        ns = [12, 24, 48]
        T = [measure_convergence_time(equal_neighbor(dumbbell_graph(n))).T for n in ns]
        slope = np.polyfit(np.log(ns), np.log(T), 1)[0]
        assert abs(slope - 3) <= 0.4


class TestDecay:
    def test_entrywise_decay_law(self):
        rng = np.random.default_rng(5)
        checked = 0
        while checked < 12:
            n = int(rng.integers(2, 17))
            g = erdos_renyi(n, float(rng.uniform(0.2, 0.7)), rng)
            if not is_strongly_connected(g):
                continue
            W = equal_neighbor(g)
            pi = g.degrees / g.E
            rho = spectral_summary(W, pi).rho
            d = g.degrees.astype(float)
            bound = np.sqrt(d[None, :] / d[:, None])
            P = np.eye(n)
            for t in range(1, 201):
                P = P @ W.a
                assert np.all(np.abs(P - pi[None, :]) <= bound * rho ** t + 1e-12)
            checked += 1

    def test_rho_matches_contraction(self):
        for W in reversible_matrices(15, max_n=16, seed=6):
            s = spectral_summary(W)
            if s.rho < 1e-3:
                continue
            pi = stationary_distribution(W)
            x = slowest_mode(W, pi)
            x = x - pi @ x
            for _ in range(5):
                x = W.a @ x
            prev = np.linalg.norm(x)
            x = W.a @ x
            assert np.linalg.norm(x) / prev == pytest.approx(s.rho, rel=1e-2)

from __future__ import annotations

import itertools

import numpy as np
import pytest

from models.core.src.errors import SolverError
from models.core.src.types import ComparisonGraph, EdgeFlow, MethodTag, WeightMatrix
from models.hodgerank.src.graph import build_graph, connected_components
from models.hodgerank.src.solver import (
    SolverKind,
    conjugate_gradient,
    dense_min_norm,
    divergence,
    gradient,
    laplacian,
    solve_hodgerank,
    weighted_inner_product,
)
from tests.oracles import gradient_graph, graph_on, lstsq_scores, random_connected_pairs


def scores_of(result, graph: ComparisonGraph) -> np.ndarray:
    return np.array([result.scores[v] for v in graph.vertices])


def assert_solver_invariants(graph: ComparisonGraph, s: np.ndarray) -> None:
    lap = laplacian(graph)
    div = divergence(graph)
    assert np.abs(lap @ s + div).max(initial=0.0) <= 1e-8 * max(1.0, np.abs(div).max(initial=0.0))

    labeling = connected_components(graph)
    for label in range(labeling.count):
        assert abs(s[labeling.members(label)].mean()) <= 1e-10

    grad = gradient(s, graph).values
    residual = graph.edge_flow - grad
    flow_norm = float(np.sum(graph.edge_weights * graph.edge_flow**2))
    assert abs(float(np.sum(graph.edge_weights * grad * residual))) <= 1e-8 * max(flow_norm, 1e-300)


class TestOperators:
    def test_inner_product_single_edge(self):
        x = EdgeFlow.from_entries(2, [(0, 1, 2.0)])
        w = WeightMatrix.from_arrays(2, [0], [1], [3.0])
        assert weighted_inner_product(x, x, w) == 12.0

    def test_inner_product_disjoint_supports(self):
        x = EdgeFlow.from_entries(3, [(0, 1, 2.0)])
        z = EdgeFlow.from_entries(3, [(1, 2, 5.0)])
        w = WeightMatrix.from_arrays(3, [0, 1], [1, 2], [1.0, 1.0])
        assert weighted_inner_product(x, z, w) == 0.0

    def test_inner_product_cycle_flow(self, cycle_graph):
        assert weighted_inner_product(cycle_graph.flow, cycle_graph.flow, cycle_graph.weights) == 3.0

    def test_laplacian_of_triangle(self, cycle_graph):
        expected = np.array([[2.0, -1.0, -1.0], [-1.0, 2.0, -1.0], [-1.0, -1.0, 2.0]])
        np.testing.assert_array_equal(laplacian(cycle_graph).toarray(), expected)

    def test_laplacian_single_edge(self):
        graph = graph_on(np.array([[0, 1]]), 2, np.array([0.0]), np.array([5.0]))
        np.testing.assert_array_equal(laplacian(graph).toarray(), [[5.0, -5.0], [-5.0, 5.0]])

    def test_laplacian_two_disjoint_edges(self):
        graph = graph_on(np.array([[0, 1], [2, 3]]), 4, np.zeros(2))
        lap = laplacian(graph).toarray()
        assert np.all(lap[:2, 2:] == 0) and np.all(lap[2:, :2] == 0)
        eigenvalues = np.linalg.eigvalsh(lap)
        assert int(np.sum(np.abs(eigenvalues) < 1e-12)) == 2
        np.testing.assert_allclose(lap.sum(axis=1), 0.0)

    def test_divergence_of_cycle_flow(self, cycle_graph):
        np.testing.assert_array_equal(divergence(cycle_graph), [0.0, -2.0, 2.0])

    def test_divergence_of_single_edge_gradient(self):
        graph = graph_on(np.array([[0, 1]]), 2, np.array([1.0]))
        np.testing.assert_array_equal(divergence(graph), [1.0, -1.0])

    def test_divergence_of_zero_flow(self):
        graph = graph_on(np.array([[0, 1], [1, 2]]), 3, np.zeros(2))
        np.testing.assert_array_equal(divergence(graph), np.zeros(3))


class TestSolveHodgeRank:
    def test_three_cycle_counterexample(self, cycle_graph):
        result = solve_hodgerank(cycle_graph)
        assert result.method_tag == MethodTag.HODGERANK
        np.testing.assert_allclose(scores_of(result, cycle_graph), [0.0, 2 / 3, -2 / 3], atol=1e-9)
        assert result.residual_norm_sq / result.flow_norm_sq == pytest.approx(1 / 9, abs=1e-9)
        assert result.converged

    def test_three_cycle_counterexample_from_records(self, cycle_records):
        result = solve_hodgerank(build_graph(cycle_records))
        assert result.scores["s1"] == pytest.approx(0.0, abs=1e-9)
        assert result.scores["s2"] == pytest.approx(2 / 3, abs=1e-9)
        assert result.scores["s3"] == pytest.approx(-2 / 3, abs=1e-9)

    def test_consistent_triangle_recovers_centered_scores(self):
        s = np.array([1.0, 2.0, 3.0])
        pairs = np.array([[0, 1], [0, 2], [1, 2]])
        graph = graph_on(pairs, 3, s[pairs[:, 1]] - s[pairs[:, 0]], np.array([0.5, 2.0, 7.0]))
        result = solve_hodgerank(graph)
        np.testing.assert_allclose(scores_of(result, graph), [-1.0, 0.0, 1.0], atol=1e-10)
        assert result.residual_norm_sq == pytest.approx(0.0, abs=1e-18)

    def test_empty_edge_set(self):
        n = 3
        graph = ComparisonGraph.build(("a", "b", "c"), EdgeFlow.zeros(n), WeightMatrix.zeros(n))
        result = solve_hodgerank(graph)
        assert result.scores == {"a": 0.0, "b": 0.0, "c": 0.0}
        assert sorted(result.component_id.values()) == [0, 1, 2]

    def test_disconnected_graph_is_flagged_and_centered_per_component(self):
        pairs = np.array([[0, 1], [2, 3], [3, 4]])
        graph = graph_on(pairs, 5, np.array([4.0, 1.0, 2.0]))
        result = solve_hodgerank(graph)
        s = scores_of(result, graph)
        assert s[:2].sum() == pytest.approx(0.0, abs=1e-10)
        assert s[2:].sum() == pytest.approx(0.0, abs=1e-10)
        assert result.component_id == {"v0": 0, "v1": 0, "v2": 1, "v3": 1, "v4": 1}
        assert any("connected components" in w for w in result.warnings)

    def test_exact_recovery_on_random_connected_graphs(self):
        rng = np.random.default_rng(2024)
        for _ in range(100):
            n = int(rng.integers(2, 51))
            graph, s = gradient_graph(rng, n)
            result = solve_hodgerank(graph)
            recovered = scores_of(result, graph)
            assert np.abs(recovered - (s - s.mean())).max() <= 1e-8
            assert result.residual_norm_sq <= 1e-12 * result.flow_norm_sq
            assert_solver_invariants(graph, recovered)

    def test_matches_dense_oracle_on_small_graphs(self):
        cases = 0
        for n, k in itertools.product(range(2, 7), range(45)):
            rng = np.random.default_rng(1000 * n + k)
            pairs = random_connected_pairs(rng, n, extra=0.5)
            flow = rng.integers(-3, 4, len(pairs)).astype(float)
            weights = rng.integers(1, 4, len(pairs)).astype(float)
            graph = graph_on(pairs, n, flow, weights)
            s = scores_of(solve_hodgerank(graph), graph)
            np.testing.assert_allclose(s, lstsq_scores(graph), atol=1e-8)
            assert_solver_invariants(graph, s)
            cases += 1
        assert cases >= 200

    def test_dense_solver_agrees_with_cg(self):
        rng = np.random.default_rng(5)
        pairs = random_connected_pairs(rng, 20, extra=0.2)
        graph = graph_on(pairs, 20, rng.normal(0, 5, len(pairs)), rng.uniform(0.5, 2.0, len(pairs)))
        cg = scores_of(solve_hodgerank(graph, solver=SolverKind.CG), graph)
        dense = scores_of(solve_hodgerank(graph, solver=SolverKind.DENSE), graph)
        np.testing.assert_allclose(cg, dense, atol=1e-8)

    def test_scaling_weights_leaves_scores_unchanged(self):
        rng = np.random.default_rng(9)
        pairs = random_connected_pairs(rng, 15, extra=0.3)
        flow = rng.normal(0, 5, len(pairs))
        weights = rng.uniform(0.5, 2.0, len(pairs))
        base = graph_on(pairs, 15, flow, weights)
        scaled = graph_on(pairs, 15, flow, 37.0 * weights)
        np.testing.assert_allclose(
            scores_of(solve_hodgerank(base), base), scores_of(solve_hodgerank(scaled), scaled), atol=1e-8
        )

    def test_dense_solver_size_limit(self):
        n = 201
        pairs = np.column_stack([np.arange(n - 1), np.arange(1, n)])
        graph = graph_on(pairs, n, np.ones(n - 1))
        with pytest.raises(ValueError):
            solve_hodgerank(graph, solver=SolverKind.DENSE)


class TestConjugateGradient:
    def test_stalls_raise_with_achieved_residual(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=(8, 8))
        matrix = a @ a.T + 0.1 * np.eye(8)
        with pytest.raises(SolverError) as info:
            conjugate_gradient(lambda v: matrix @ v, rng.normal(size=8), max_iter=1)
        assert info.value.iterations == 1
        assert info.value.achieved_residual > 1e-10

    def test_zero_rhs(self):
        x, iterations = conjugate_gradient(lambda v: v, np.zeros(4), max_iter=10)
        assert iterations == 0
        np.testing.assert_array_equal(x, np.zeros(4))

    def test_dense_min_norm_picks_centered_solution(self, cycle_graph):
        lap = laplacian(cycle_graph).toarray()
        s = dense_min_norm(lap, -divergence(cycle_graph))
        np.testing.assert_allclose(s, [0.0, 2 / 3, -2 / 3], atol=1e-12)

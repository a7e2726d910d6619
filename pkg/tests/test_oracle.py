import numpy as np
import pytest

from conftest import make_game
from game.graph import build_interaction_graph
from game.potential import potential
from schemas import SolverParams
from services.bench_service import bench_cost_parity, random_game, random_strategy, verify_inner_problem
from services.oracle_service import (
    build_convexified_problem,
    build_stacked_problem,
    centralized_solve,
    dense_qp_solve,
    joint_backward_pass,
)
from services.solver_service import initial_strategy, solve, solve_inner
from utils.scenario_loader import get_default_scenario


def test_inner_admm_matches_dense_kkt(merging_pair):
    X = initial_strategy(merging_pair)
    graph = build_interaction_graph(merging_pair)
    problem = build_convexified_problem(merging_pair, graph, X)
    deltas, residuals = solve_inner(merging_pair, X, SolverParams(), iterations=3000, graph=graph, inner_tolerance=1e-9)
    exact = problem.objective(dense_qp_solve(problem))
    assert problem.objective(deltas) == pytest.approx(exact, rel=1e-4, abs=1e-4)
    assert residuals["lambda_sum"] <= 1e-10
    assert residuals["consensus"] <= 1e-4


def test_without_edges_each_vertex_solves_its_own_lqr():
    game = make_game([[0.0, 0.0, 0.0, 2.0]], [[3.0, 1.0]])
    X = initial_strategy(game)
    graph = build_interaction_graph(game)
    assert not graph.edges
    deltas, _ = solve_inner(game, X, SolverParams(), iterations=1, graph=graph)
    exact = dense_qp_solve(build_convexified_problem(game, graph, X))
    for key, delta in deltas.items():
        np.testing.assert_allclose(delta.du, exact[key].du, rtol=1e-7, atol=1e-9)
        np.testing.assert_allclose(delta.dx, exact[key].dx, rtol=1e-7, atol=1e-9)


def test_joint_riccati_matches_dense_kkt(rng):
    game = random_game(rng, n_agents=2, max_types=2, horizon=4)
    X = random_strategy(rng, game)
    graph = build_interaction_graph(game)
    problem = build_convexified_problem(game, graph, X)
    stacked = build_stacked_problem(problem)
    feedforward, gains = joint_backward_pass(stacked)
    n = stacked.A.shape[1]
    dx = np.zeros((game.horizon + 1, n))
    du = np.zeros_like(feedforward)
    for tau in range(game.horizon):
        du[tau] = gains[tau] @ dx[tau] + feedforward[tau]
        dx[tau + 1] = stacked.A[tau] @ dx[tau] + stacked.B[tau] @ du[tau]
    exact = dense_qp_solve(problem)
    for index, key in enumerate(problem.keys):
        np.testing.assert_allclose(du[:, 2 * index:2 * index + 2], exact[key].du, rtol=1e-6, atol=1e-8)


def test_inner_problem_suite_passes(rng):
    exactness, lambda_sum = verify_inner_problem(rng, 10)
    assert exactness.passed, exactness
    assert lambda_sum.passed, lambda_sum


def test_single_type_player_matches_centralized_ilqr():
    game = make_game([[0.0, 0.0, 0.0, 2.0]], [[3.0]])
    params = SolverParams(max_outer_iter=50, tolerance=1e-8)
    init = initial_strategy(game)
    distributed = solve(game, init=init, params=params)
    centralized = centralized_solve(game, init=init, params=params)
    assert distributed.potential == pytest.approx(centralized.potential, abs=1e-6)


def test_centralized_solve_descends(merging_pair):
    init = initial_strategy(merging_pair)
    result = centralized_solve(merging_pair, init=init, params=SolverParams(max_outer_iter=10))
    assert result.potential < potential(merging_pair, init)
    assert all(traj.feasible for _, traj in result.strategy.items())


# potencial final com uma amostra por modo (3 type-players no merge, 5 na interseção)
COST_BANDS = {"merging": 420.0, "intersection": 23.0}


@pytest.mark.slow
@pytest.mark.parametrize("scenario", ["merging", "intersection"])
def test_cost_parity_with_centralized_solver(scenario):
    cfg = get_default_scenario(scenario).model_copy(update={"samples_per_mode": 1})
    parity = bench_cost_parity(cfg)
    assert parity["relative_gap"] <= 0.02
    assert parity["distributed"] == pytest.approx(COST_BANDS[scenario], rel=0.15)
    assert parity["centralized"] == pytest.approx(COST_BANDS[scenario], rel=0.15)

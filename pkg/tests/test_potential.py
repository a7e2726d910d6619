import numpy as np
import pytest

from conftest import make_game
from game.models import JointStrategy
from game.potential import (
    bayesian_potential,
    best_type,
    expected_costs,
    expected_type_cost,
    potential,
    potential_identity_residual,
)
from services.bench_service import random_game, random_strategy, random_trajectory, verify_potential_identity
from services.oracle_service import brute_force_expected_cost, brute_force_pair_potential
from services.solver_service import initial_strategy
from utils.exceptions import ConfigurationError
from utils.dynamics import rollout


def test_unilateral_deviation_changes_potential_by_weighted_cost(small_game, small_strategy, rng):
    for player in small_game.players:
        alternative = random_trajectory(rng, small_game, player)
        residual = potential_identity_residual(small_game, small_strategy, player.key, alternative)
        assert residual <= 1e-8


def test_potential_identity_suite_passes(rng):
    result = verify_potential_identity(rng, 200)
    assert result.passed, result
    assert result.draws == 200


def test_marginalized_cost_matches_enumeration(rng):
    game = random_game(rng, n_agents=3, max_types=3, horizon=4)
    X = random_strategy(rng, game)
    for player in game.players:
        assert expected_type_cost(game, X, player.key) == pytest.approx(
            brute_force_expected_cost(game, X, player.key), rel=1e-10, abs=1e-12
        )


def test_potential_matches_termwise_sum(small_game, small_strategy):
    assert bayesian_potential(small_game, small_strategy) == pytest.approx(
        brute_force_pair_potential(small_game, small_strategy), rel=1e-12
    )
    # sem contingência o potencial é o potencial Bayesiano
    assert potential(small_game, small_strategy) == bayesian_potential(small_game, small_strategy)


def test_single_agent_potential_is_weighted_own_cost():
    game = make_game([[0.0, 0.0, 0.0, 2.0]], [[2.0, 3.0]], marginals=[[0.25, 0.75]])
    X = initial_strategy(game)
    costs = expected_costs(game, X, 0)
    assert costs[0] == 0.0
    assert potential(game, X) == pytest.approx(0.75 * costs[1])


def test_best_type_picks_lowest_expected_cost():
    game = make_game([[0.0, 0.0, 0.0, 2.0]], [[3.0, 2.0]])
    assert best_type(game, initial_strategy(game), 0).type_index == 1


def test_best_type_breaks_ties_by_index():
    game = make_game([[0.0, 0.0, 0.0, 2.0]], [[2.5, 2.5, 2.5]])
    assert best_type(game, initial_strategy(game), 0).type_index == 0


def test_incomplete_strategy_is_rejected(merging_pair):
    X = initial_strategy(merging_pair)
    partial = JointStrategy({key: traj for key, traj in X.items() if key != (1, 1)})
    with pytest.raises(ConfigurationError):
        bayesian_potential(merging_pair, partial)


def test_deviation_with_wrong_horizon_is_rejected(merging_pair):
    X = initial_strategy(merging_pair)
    short = rollout([0.0, 0.0, 0.0, 2.0], np.zeros((2, 2)), 0.1, 2.5)
    with pytest.raises(ConfigurationError):
        potential_identity_residual(merging_pair, X, (0, 0), short)

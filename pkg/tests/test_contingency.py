import numpy as np
import pytest

from game.contingency import (
    ContingencyPerturbation,
    Hypothesis,
    HypothesisSet,
    build_contingency_game,
    build_correlated_prior,
    contingency_identity_residual,
    mean_prebranch_lateral,
    prebranch_gap,
    snap_prebranch_controls,
)
from game.graph import COLLISION, CONSENSUS
from game.models import ContingencyConfig
from game.potential import bayesian_potential, potential
from services.bench_service import (
    random_game,
    random_hypotheses,
    random_strategy,
    random_trajectory,
    verify_contingency_identity,
)
from services.oracle_service import expanded_contingency_potential
from services.scenario_service import build_contingency_from_config, build_hypotheses
from services.solver_service import solve
from utils.costs import contingency_penalty
from utils.exceptions import ConfigurationError, PreconditionError
from utils.scenario_loader import get_default_scenario


@pytest.fixture
def contingency_setup(rng):
    base = random_game(rng, n_agents=3, max_types=1, horizon=6)
    H = random_hypotheses(rng, base, 3)
    cfg = ContingencyConfig(ego_agent=0, t_b=3, q_contingency=[50.0, 50.0, 100.0, 10.0])
    game, graph = build_contingency_game(H, cfg, base)
    return base, H, cfg, game, graph


def test_correlated_prior_is_block_diagonal(contingency_setup):
    _, H, _, game, _ = contingency_setup
    prior = build_correlated_prior(H)
    p = H.probabilities
    for i in H.agents:
        np.testing.assert_allclose(prior.marginals[i], p)
    for theta in range(len(H)):
        for other in range(len(H)):
            expected = p[theta] if theta == other else 0.0
            assert prior.pair(0, theta, 1, other) == pytest.approx(expected)
    assert prior.conditional(1, 2, 0, 2) == pytest.approx(1.0)


def test_graph_has_no_cross_hypothesis_edges(contingency_setup):
    _, H, _, game, graph = contingency_setup
    n = len(H)
    collision = [edge for edge in graph.edges if edge.kind == COLLISION]
    consensus = [edge for edge in graph.edges if edge.kind == CONSENSUS]
    assert all(edge.a[1] == edge.b[1] for edge in collision)
    # 3 pares de agentes por hipótese
    assert len(collision) == 3 * n
    assert len(consensus) == n * (n - 1) // 2
    assert all(edge.a[0] == 0 and edge.b[0] == 0 for edge in consensus)


def test_potential_equals_expanded_form(contingency_setup, rng):
    _, _, _, game, _ = contingency_setup
    X = random_strategy(rng, game)
    assert potential(game, X) == pytest.approx(expanded_contingency_potential(game, X), rel=1e-12)


def test_ego_stack_deviation_satisfies_identity(contingency_setup, rng):
    base, H, cfg, game, _ = contingency_setup
    X = random_strategy(rng, game)
    stack = ContingencyPerturbation(
        {player.key: random_trajectory(rng, game, player) for player in game.types_of(cfg.ego_agent)}
    )
    assert contingency_identity_residual(H, cfg, base, X, stack) <= 1e-8
    single = ContingencyPerturbation({(2, 1): random_trajectory(rng, game, game.player((2, 1)))})
    assert contingency_identity_residual(H, cfg, base, X, single) <= 1e-8


def test_invalid_perturbation_target_is_rejected(contingency_setup, rng):
    base, H, cfg, game, _ = contingency_setup
    X = random_strategy(rng, game)
    partial_stack = ContingencyPerturbation({(0, 0): random_trajectory(rng, game, game.player((0, 0)))})
    with pytest.raises(ConfigurationError):
        contingency_identity_residual(H, cfg, base, X, partial_stack)


def test_contingency_identity_suite_passes(rng):
    result = verify_contingency_identity(rng, 100)
    assert result.passed, result


def test_branch_at_zero_removes_penalty(rng):
    base = random_game(rng, n_agents=2, max_types=1, horizon=4)
    H = random_hypotheses(rng, base, 2)
    cfg = ContingencyConfig(ego_agent=0, t_b=0, q_contingency=[1.0, 1.0, 1.0, 1.0])
    game, _ = build_contingency_game(H, cfg, base)
    X = random_strategy(rng, game)
    assert potential(game, X) == bayesian_potential(game, X)


def test_branch_after_horizon_is_rejected(rng):
    base = random_game(rng, n_agents=2, max_types=1, horizon=4)
    H = random_hypotheses(rng, base, 2)
    cfg = ContingencyConfig(ego_agent=0, t_b=5, q_contingency=[1.0, 1.0, 1.0, 1.0])
    with pytest.raises(PreconditionError):
        build_contingency_game(H, cfg, base)


def test_zero_probability_hypothesis_is_rejected(rng):
    base = random_game(rng, n_agents=2, max_types=1, horizon=4)
    references = {agent: base.types_of(agent)[0].reference for agent in base.agents}
    with pytest.raises(PreconditionError):
        HypothesisSet((Hypothesis(1.0, references), Hypothesis(0.0, references)))


def test_snapped_plans_coincide_before_branch(contingency_setup, rng):
    _, _, cfg, game, _ = contingency_setup
    X = random_strategy(rng, game)
    assert prebranch_gap(game, X) > 0.0
    snapped = snap_prebranch_controls(game, X)
    assert prebranch_gap(game, snapped) == 0.0
    plans = [snapped[player.key] for player in game.types_of(cfg.ego_agent)]
    assert contingency_penalty(plans, cfg.t_b, cfg.q_contingency) == 0.0


def test_overtaking_hypotheses_follow_p_up():
    cfg = get_default_scenario("overtaking")
    H = build_hypotheses(cfg, p_up=0.8)
    lanes = cfg.contingency.lanes
    assert len(H) == len(cfg.contingency.velocities) * len(lanes)
    upper = [h.probability for h in H.hypotheses if h.label.startswith(f"faixa={max(lanes):g}")]
    assert sum(upper) == pytest.approx(0.8)


def test_overtaking_contingency_game_builds():
    cfg = get_default_scenario("overtaking")
    game, graph, H = build_contingency_from_config(cfg)
    assert len(game.players) == len(cfg.agents) * len(H)
    np.testing.assert_allclose(H.probabilities, 1.0 / len(H))
    assert game.contingency.t_b == cfg.contingency.t_b


def test_overtaking_hypotheses_cover_both_lanes_at_half_speed():
    H = build_hypotheses(get_default_scenario("overtaking"))
    assert [h.label for h in H.hypotheses] == ["faixa=0,v=0.5", "faixa=0.5,v=0.5"]


def test_mean_prebranch_lateral_needs_a_branching_step(contingency_setup):
    base, H, _, _, _ = contingency_setup
    game, _ = build_contingency_game(H, ContingencyConfig(ego_agent=0, t_b=0, q_contingency=[50, 50, 100, 10]), base)
    with pytest.raises(PreconditionError):
        mean_prebranch_lateral(game, random_strategy(np.random.default_rng(0), game))


def _overtaking_plan(p_up):
    cfg = get_default_scenario("overtaking")
    game, graph, _ = build_contingency_from_config(cfg, p_up=p_up)
    result = solve(game, graph=graph, params=cfg.solver)
    return game, result.strategy


@pytest.mark.slow
def test_prebranch_plan_moves_monotonically_with_p_up():
    lateral = []
    for p_up in (0.1, 0.5, 0.9):
        game, strategy = _overtaking_plan(p_up)
        assert prebranch_gap(game, strategy) <= 0.1
        lateral.append(mean_prebranch_lateral(game, snap_prebranch_controls(game, strategy)))
    steps = np.diff(lateral)
    assert np.all(steps <= 0.0) or np.all(steps >= 0.0)

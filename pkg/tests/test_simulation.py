import logging

import numpy as np
import pandas as pd
import pytest

from game.models import JointStrategy
from schemas import IntentModel
from services.scenario_service import build_game, reference_trajectory, sample_types
from services.simulation_service import (
    SETTINGS,
    Belief,
    ClosedLoopContext,
    bayes_update,
    closed_loop_run,
    draw_true_velocities,
    mean_longitudinal_speed,
    monte_carlo,
    open_loop_run,
    perturbed_condition,
    shift_controls,
)
from utils.dynamics import rollout
from utils.exceptions import ConfigurationError
from utils.scenario_loader import get_default_scenario
from utils.table_processor import TRAJECTORY_COLUMNS, validate_table_structure


def test_single_mode_samples_form_a_sigma_grid():
    velocities, probabilities = sample_types(IntentModel(weights=[1.0], means=[3.0], stds=[0.2]))
    np.testing.assert_allclose(velocities, [2.6, 2.8, 3.0, 3.2, 3.4])
    np.testing.assert_allclose(probabilities, probabilities[::-1])
    assert probabilities.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.argmax(probabilities) == 2


def test_symmetric_mixture_gives_symmetric_probabilities():
    velocities, probabilities = sample_types(IntentModel(weights=[0.5, 0.5], means=[3.5, 2.5], stds=[0.2, 0.2]), 3)
    assert velocities.size == 6
    # mistura simétrica em torno de 3.0
    np.testing.assert_allclose(probabilities[:3], probabilities[3:][::-1], rtol=1e-10)


def test_one_sample_per_mode_is_the_mean():
    velocities, probabilities = sample_types(IntentModel(weights=[0.9, 0.1], means=[3.5, 2.5], stds=[0.2, 0.2]), 1)
    np.testing.assert_allclose(velocities, [3.5, 2.5])
    assert probabilities[0] > probabilities[1]


def test_reference_follows_lane():
    reference = reference_trajectory([1.0, 2.0, 0.0, 3.0], 2.0, 4, 0.1, lane=0.5)
    np.testing.assert_allclose(reference[:, 1], 0.5)
    np.testing.assert_allclose(reference[:, 0], 1.0 + 0.2 * np.arange(5))
    np.testing.assert_allclose(reference[:, 3], 2.0)


def test_bayes_update_weights_by_gaussian_likelihood():
    sigma = 1.0
    distance = np.sqrt(2.0 * sigma**2 * np.log(4.0))
    posterior = bayes_update([0.5, 0.5], [0.0, 0.0], np.array([[0.0, 0.0], [distance, 0.0]]), sigma)
    np.testing.assert_allclose(posterior, [0.8, 0.2], rtol=1e-12)


def test_repeated_observations_concentrate_belief():
    belief = np.array([0.5, 0.5])
    predicted = np.array([[0.0, 0.0], [0.1, 0.0]])
    for _ in range(5):
        belief = bayes_update(belief, [0.0, 0.0], predicted, 0.1)
    assert belief[0] > 0.9


def test_floor_keeps_every_type_alive():
    belief = np.array([0.5, 0.5])
    predicted = np.array([[0.0, 0.0], [0.5, 0.0]])
    for _ in range(20):
        belief = bayes_update(belief, [0.0, 0.0], predicted, 0.1, floor=1e-4)
    assert belief[1] >= 0.99e-4
    assert belief.sum() == pytest.approx(1.0)


def test_underflow_keeps_prior(caplog):
    prior = [0.3, 0.7]
    with caplog.at_level(logging.WARNING):
        posterior = bayes_update(prior, [0.0, 0.0], np.array([[1e6, 0.0], [-1e6, 0.0]]), 0.1)
    np.testing.assert_allclose(posterior, prior)
    assert "prior" in caplog.text


def test_belief_rejects_unnormalized_vectors():
    with pytest.raises(ConfigurationError):
        Belief({1: [0.5, 0.6]})
    belief = Belief({1: [0.2, 0.8]})
    assert belief.most_likely(1) == 1


def _with_replan_every(cfg, replan_every):
    closed_loop = cfg.closed_loop.model_copy(update={"replan_every": replan_every})
    return cfg.model_copy(update={"closed_loop": closed_loop})


def test_shift_controls_repeats_last_control():
    traj = rollout([0.0, 0.0, 0.0, 1.0], [[0.0, 1.0], [0.0, 2.0], [0.0, 3.0]], 0.1, 2.5)
    warm = shift_controls(JointStrategy({(0, 0): traj}), 2)
    np.testing.assert_array_equal(warm[(0, 0)][:, 1], [3.0, 3.0, 3.0])


def test_context_counts_cycles(toy_cfg):
    context = ClosedLoopContext(cfg=toy_cfg, setting="BNE", true_velocities={1: 2.5}, params=toy_cfg.solver)
    assert context.total_steps == 10
    assert context.replan_every == 1
    assert context.n_cycles == 10
    periodic = ClosedLoopContext(
        cfg=_with_replan_every(toy_cfg, 4), setting="BNE", true_velocities={1: 2.5}, params=toy_cfg.solver
    )
    assert periodic.n_cycles == 3
    assert context.rivals == [1]
    assert not context.updates_belief
    with pytest.raises(ConfigurationError):
        ClosedLoopContext(cfg=toy_cfg, setting="Oracle", true_velocities={}, params=toy_cfg.solver)


def test_perturbed_conditions_are_reproducible(toy_cfg):
    first = perturbed_condition(toy_cfg, np.random.default_rng([7, 0]))
    second = perturbed_condition(toy_cfg, np.random.default_rng([7, 0]))
    assert first == second
    weights = first.agents[1].intent.weights
    assert 0.1 <= weights[0] <= 0.9
    assert sum(weights) == pytest.approx(1.0)
    assert set(draw_true_velocities(first, np.random.default_rng(1))) == {1}


def test_open_loop_run_writes_trajectory_table(toy_cfg, tmp_path):
    run = open_loop_run(toy_cfg, out_dir=tmp_path)
    assert (tmp_path / "trajectory.csv").exists()
    ok, missing = validate_table_structure(run.table, TRAJECTORY_COLUMNS)
    assert ok, missing
    assert len(run.table) == (toy_cfg.horizon + 1) * len(run.scenario.game.players)


@pytest.mark.slow
@pytest.mark.parametrize("replan_every", [1, 5])
@pytest.mark.parametrize("setting", SETTINGS)
def test_closed_loop_covers_the_whole_duration(toy_cfg, setting, replan_every):
    result = closed_loop_run(_with_replan_every(toy_cfg, replan_every), setting, {1: 2.5})
    assert sorted(result.trace["t"].unique()) == list(range(1, 11))
    assert result.metrics.min_distance > 0.0
    if setting.endswith("-Update"):
        assert len(result.beliefs) == 10 // replan_every
        assert all(sum(belief[1]) == pytest.approx(1.0) for belief in result.beliefs)


@pytest.mark.slow
def test_monte_carlo_reports_one_row_per_run(toy_cfg):
    runs, summary = monte_carlo(toy_cfg, settings=["MLE", "BNE"], n_conditions=1, n_type_draws=1, seed=3)
    assert len(runs) == 2
    assert list(runs["setting"]) == ["MLE", "BNE"]
    assert set(summary["setting"]) <= {"MLE", "BNE"}


def _merging_with_weights(weights):
    cfg = get_default_scenario("merging")
    rival = cfg.agents[1]
    agents = [cfg.agents[0], rival.model_copy(update={"intent": rival.intent.model_copy(update={"weights": weights})})]
    return cfg.model_copy(update={"agents": agents})


@pytest.mark.slow
def test_merging_speed_follows_the_belief():
    speeds = {}
    for label, weights in {"even": [0.5, 0.5], "fast": [0.9, 0.1], "slow": [0.1, 0.9]}.items():
        run = open_loop_run(_merging_with_weights(weights))
        speeds[label] = mean_longitudinal_speed(run.result.strategy, (0, 0))
    assert speeds["even"] == pytest.approx(3.0, abs=0.15)
    assert speeds["fast"] < 3.0
    assert speeds["slow"] > 3.0


def _with_rival_intent(cfg, **intent):
    rival = cfg.agents[1]
    agents = [cfg.agents[0], rival.model_copy(update={"intent": rival.intent.model_copy(update=intent)})]
    return cfg.model_copy(update={"agents": agents})


@pytest.mark.slow
def test_settings_coincide_when_the_rival_type_is_certain(toy_cfg):
    cfg = _with_rival_intent(toy_cfg, weights=[1.0], means=[2.5], stds=[0.2])
    cfg = cfg.model_copy(update={"samples_per_mode": 1})
    traces = {setting: closed_loop_run(cfg, setting, {1: 2.5}).trace for setting in SETTINGS}
    for setting in SETTINGS[1:]:
        pd.testing.assert_frame_equal(traces[setting], traces[SETTINGS[0]])


@pytest.mark.slow
def test_mle_brakes_harder_than_bne_when_the_likely_type_is_wrong():
    cfg = _merging_with_weights([0.51, 0.49]).model_copy(update={"samples_per_mode": 1})
    slow = cfg.agents[1].intent.means[1]
    peak = {}
    for setting in ("MLE", "BNE"):
        trace = closed_loop_run(cfg, setting, {1: slow}).trace
        peak[setting] = trace[trace["agent"] == 0]["a"].abs().max()
    assert peak["BNE"] < peak["MLE"]

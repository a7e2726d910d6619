import numpy as np
import pytest

from conftest import make_game
from game.potential import potential
from schemas import SolverParams
from services.solver_service import WORKERS_ENV, WorkerPool, default_workers, initial_strategy, solve
from utils.exceptions import ConfigurationError

PARAMS = SolverParams(max_outer_iter=8, tolerance=1e-3)


def test_solve_descends_on_the_potential(merging_pair):
    init = initial_strategy(merging_pair)
    result = solve(merging_pair, init=init, params=PARAMS)
    assert result.potential < potential(merging_pair, init)
    assert result.potential == pytest.approx(potential(merging_pair, result.strategy))
    accepted = [record.potential for record in result.diagnostics if record.accepted]
    assert accepted == sorted(accepted, reverse=True)


def test_solution_is_dynamically_feasible(merging_pair):
    result = solve(merging_pair, params=PARAMS)
    for key, traj in result.strategy.items():
        assert traj.feasible
        np.testing.assert_array_equal(traj.initial_state, merging_pair.player(key).initial_state)


def test_result_does_not_depend_on_worker_count(merging_pair):
    serial = solve(merging_pair, params=PARAMS, workers=1)
    parallel = solve(merging_pair, params=PARAMS, workers=3)
    assert serial.iterations == parallel.iterations
    assert serial.potential == parallel.potential
    for key, traj in serial.strategy.items():
        np.testing.assert_array_equal(traj.controls, parallel.strategy[key].controls)


def test_diagnostics_sink_gets_one_record_per_iteration(merging_pair):
    records = []
    result = solve(merging_pair, params=PARAMS, diagnostics_sink=records.append)
    assert records == result.diagnostics
    assert [record.iteration for record in records] == list(range(len(records)))


def test_single_type_player_tracks_its_reference():
    game = make_game([[0.0, 0.0, 0.0, 2.0]], [[3.0]])
    result = solve(game, params=SolverParams(max_outer_iter=50, tolerance=1e-8))
    assert result.potential < potential(game, initial_strategy(game))
    # acelera em direção a v_ref
    assert result.strategy[(0, 0)].states[-1, 3] > 2.0


def test_infeasible_warm_start_falls_back_to_zero_controls(merging_pair):
    horizon = merging_pair.horizon
    warm = {(0, 0): np.column_stack([np.full(horizon, 1.6), np.zeros(horizon)])}
    strategy = initial_strategy(merging_pair, warm)
    assert not np.any(strategy[(0, 0)].controls)


def test_default_workers_reads_environment(monkeypatch):
    monkeypatch.delenv(WORKERS_ENV, raising=False)
    assert default_workers() == 1
    monkeypatch.setenv(WORKERS_ENV, "4")
    assert default_workers() == 4
    monkeypatch.setenv(WORKERS_ENV, "0")
    with pytest.raises(ConfigurationError):
        default_workers()
    monkeypatch.setenv(WORKERS_ENV, "muitos")
    with pytest.raises(ConfigurationError):
        default_workers()


def test_worker_pool_preserves_order():
    with WorkerPool(3) as pool:
        assert pool.map(lambda value: value * value, list(range(10))) == [value * value for value in range(10)]
    with pytest.raises(ConfigurationError):
        WorkerPool(0)

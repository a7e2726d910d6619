import pandas as pd
import pytest

from conftest import make_game
from services.solver_service import initial_strategy
from utils.table_processor import METRICS_COLUMNS, TRAJECTORY_COLUMNS, summarize_by, trajectory_table, write_table


def test_trajectory_table_has_one_row_per_step_and_type_player():
    game = make_game([[0.0, 0.0, 0.0, 2.0], [0.0, 4.0, 0.0, 2.0]], [[2.0], [2.5, 1.5]])
    table = trajectory_table(game, initial_strategy(game))
    assert list(table.columns) == TRAJECTORY_COLUMNS
    assert len(table) == (game.horizon + 1) * len(game.players)
    # sem controle no último passo
    assert table[table["t"] == game.horizon]["delta"].isna().all()


def test_write_table_checks_required_columns(tmp_path):
    metrics = pd.DataFrame([{column: 0.5 for column in METRICS_COLUMNS}])
    path = write_table(metrics, tmp_path / "saida" / "metrics.csv", METRICS_COLUMNS)
    assert path.exists()
    assert list(pd.read_csv(path).columns) == METRICS_COLUMNS
    with pytest.raises(ValueError, match="min_distance"):
        write_table(metrics.drop(columns=["min_distance"]), tmp_path / "faltando.csv", METRICS_COLUMNS)
    assert not (tmp_path / "faltando.csv").exists()


def test_summarize_by_keeps_first_appearance_order():
    runs = pd.DataFrame({"setting": ["BNE", "MLE", "BNE"], "min_distance": [1.0, 4.0, 3.0]})
    summary = summarize_by(runs, "setting", ["min_distance"])
    assert list(summary["setting"]) == ["BNE", "MLE"]
    assert list(summary["min_distance"]) == [2.0, 4.0]

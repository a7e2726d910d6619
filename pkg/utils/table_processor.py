"""
Table Processor - Tabelas de saída (trajetórias, métricas, diagnósticos e bench)
"""
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from game.models import GameSpec, JointStrategy

TRAJECTORY_COLUMNS = ["t", "agent", "type", "p_x", "p_y", "theta", "v", "delta", "a", "probability"]
METRICS_COLUMNS = [
    "setting",
    "mean_speed_deviation",
    "mean_position_deviation",
    "mean_abs_steer",
    "mean_abs_accel",
    "min_distance",
]


def trajectory_table(game: GameSpec, strategy: JointStrategy) -> pd.DataFrame:
    """
    Uma linha por (passo, type-player)

    No último passo não há controle; δ e a ficam NaN.
    """
    frames = []
    for player in game.players:
        traj = strategy[player.key]
        steps = traj.states.shape[0]
        controls = np.full((steps, 2), np.nan)
        controls[:-1] = traj.controls
        frames.append(
            pd.DataFrame(
                {
                    "t": np.arange(steps),
                    "agent": player.agent,
                    "type": player.type_index,
                    "p_x": traj.states[:, 0],
                    "p_y": traj.states[:, 1],
                    "theta": traj.states[:, 2],
                    "v": traj.states[:, 3],
                    "delta": controls[:, 0],
                    "a": controls[:, 1],
                    "probability": game.probability(player.key),
                }
            )
        )
    table = pd.concat(frames, ignore_index=True)
    return table.sort_values(["t", "agent", "type"], kind="stable").reset_index(drop=True)[TRAJECTORY_COLUMNS]


def validate_table_structure(df: pd.DataFrame, required_fields: List[str]) -> Tuple[bool, List[str]]:
    """
    Valida se a tabela tem as colunas do schema documentado

    Returns:
        Tuple (is_valid, missing_fields)
    """
    missing = [field for field in required_fields if field not in df.columns]
    return len(missing) == 0, missing


def write_table(df: pd.DataFrame, path: Union[str, Path], required_fields: Optional[List[str]] = None) -> Path:
    """
    Grava CSV com formatação de ponto flutuante fixa (saídas reprodutíveis byte a byte)

    Args:
        df: Tabela a gravar
        path: Destino
        required_fields: Colunas obrigatórias do schema da tabela

    Raises:
        ValueError: Se faltar alguma coluna obrigatória
    """
    if required_fields is not None:
        is_valid, missing = validate_table_structure(df, required_fields)
        if not is_valid:
            raise ValueError(f"Tabela {Path(path).name} sem as colunas obrigatórias: {missing}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format="%.10g")
    return path


def summarize_by(df: pd.DataFrame, key: str, columns: List[str]) -> pd.DataFrame:
    """Média por grupo, preservando a ordem de primeira aparição dos grupos"""
    summary = df.groupby(key, sort=False)[columns].mean()
    return summary.reset_index()

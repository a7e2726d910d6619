"""
Validadores para probabilidades, pesos de custo e horizontes
"""
from typing import Sequence

import numpy as np

# Probabilidades abaixo disso violam a hipótese de marginais estritamente positivas
MIN_PROBABILITY = 1e-12
PROBABILITY_TOLERANCE = 1e-9


def validate_probability_vector(values: Sequence[float]) -> bool:
    """
    Valida um vetor de probabilidades marginais

    Args:
        values: Probabilidades de cada tipo de um agente

    Returns:
        True se todas as entradas são finitas, > 1e-12 e somam 1 (tol. 1e-9)
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        return False
    if not np.all(np.isfinite(arr)):
        return False
    if np.any(arr < MIN_PROBABILITY):
        return False
    return abs(float(arr.sum()) - 1.0) <= PROBABILITY_TOLERANCE


def validate_joint_table(table: np.ndarray, row_marginal: np.ndarray, col_marginal: np.ndarray) -> bool:
    """
    Valida uma tabela conjunta p(t_i, t_j) contra as marginais armazenadas

    Args:
        table: Matriz n_i x n_j com entradas não negativas
        row_marginal: Marginal do agente das linhas
        col_marginal: Marginal do agente das colunas

    Returns:
        True se as somas de linhas/colunas reproduzem as marginais (tol. 1e-9)
    """
    table = np.asarray(table, dtype=float)
    if table.shape != (len(row_marginal), len(col_marginal)):
        return False
    if not np.all(np.isfinite(table)) or np.any(table < 0.0):
        return False
    rows_ok = np.allclose(table.sum(axis=1), row_marginal, rtol=0.0, atol=PROBABILITY_TOLERANCE)
    cols_ok = np.allclose(table.sum(axis=0), col_marginal, rtol=0.0, atol=PROBABILITY_TOLERANCE)
    return bool(rows_ok and cols_ok)


def validate_diagonal_weights(values: Sequence[float], size: int) -> bool:
    """
    Valida a diagonal de uma matriz de pesos (Q ou R)

    Args:
        values: Entradas da diagonal
        size: Dimensão esperada (4 para estado, 2 para controle)

    Returns:
        True se há `size` entradas finitas e não negativas
    """
    arr = np.asarray(values, dtype=float)
    return arr.shape == (size,) and bool(np.all(np.isfinite(arr))) and bool(np.all(arr >= 0.0))


def validate_branching_step(t_b: int, horizon: int) -> bool:
    """Valida 0 <= t_b <= T"""
    return isinstance(t_b, (int, np.integer)) and 0 <= int(t_b) <= horizon

"""
Subproblema LQR de um vértice

Minimiza Σ_τ δxᵀQ'_τ δx + q_τᵀδx + Σ_τ δuᵀR̃ δu + r̃_τᵀδu sujeito a
δx_{τ+1} = A_τ δx_τ + B_τ δu_τ e δx_0 = 0, por recursão de Riccati com
V_τ(δx) = δxᵀP_τ δx + p_τᵀδx.
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from game.models import DoubleMatrix, LinearizedDynamics


@dataclass(frozen=True, eq=False)
class FeedbackPolicy:
    """Feedforward k_τ (T x 2) e ganhos K_τ (T x 2 x 4)"""

    feedforward: DoubleMatrix
    gains: DoubleMatrix

    def __post_init__(self) -> None:
        if self.feedforward.shape[0] != self.gains.shape[0]:
            raise ValueError("Política com comprimentos de k e K diferentes")

    @property
    def horizon(self) -> int:
        return self.feedforward.shape[0]


@dataclass(frozen=True, eq=False)
class TrajectoryDelta:
    """Solução δX = (δx: T+1 x 4, δu: T x 2) com δx_0 = 0"""

    dx: DoubleMatrix
    du: DoubleMatrix


def quadratic_objective(
    delta: TrajectoryDelta,
    state_hessian: DoubleMatrix,
    state_linear: DoubleMatrix,
    control_hessian: DoubleMatrix,
    control_linear: DoubleMatrix,
) -> float:
    """Valor de Σ δxᵀHδx + gᵀδx + Σ δuᵀRδu + rᵀδu"""
    value = np.einsum("ti,tij,tj->", delta.dx, state_hessian, delta.dx) + np.sum(state_linear * delta.dx)
    value += np.einsum("ti,tij,tj->", delta.du, control_hessian, delta.du) + np.sum(control_linear * delta.du)
    return float(value)


def riccati_solve(
    dynamics: LinearizedDynamics,
    state_hessian: DoubleMatrix,
    state_linear: DoubleMatrix,
    control_hessian: DoubleMatrix,
    control_linear: DoubleMatrix,
):
    """
    Recursão de Riccati para trás e passo para frente

    Args:
        dynamics: A_τ, B_τ
        state_hessian: Q'_τ (T+1 x n x n)
        state_linear: q_τ (T+1 x n)
        control_hessian: R̃_τ (T x m x m)
        control_linear: r̃_τ (T x m)

    Returns:
        (TrajectoryDelta minimizador, FeedbackPolicy)
    """
    A, B = dynamics.A, dynamics.B
    horizon, n, m = B.shape
    P = state_hessian[horizon].copy()
    p = state_linear[horizon].copy()
    gains = np.zeros((horizon, m, n))
    feedforward = np.zeros((horizon, m))

    for tau in range(horizon - 1, -1, -1):
        A_t, B_t = A[tau], B[tau]
        PB = P @ B_t
        Q_uu = control_hessian[tau] + B_t.T @ PB
        Q_ux = PB.T @ A_t
        Q_xx = state_hessian[tau] + A_t.T @ P @ A_t
        Q_u = control_linear[tau] + B_t.T @ p
        Q_x = state_linear[tau] + A_t.T @ p
        try:
            factor = cho_factor(0.5 * (Q_uu + Q_uu.T))
        except LinAlgError:
            raise AssertionError(f"Q_uu não é definida positiva no passo {tau}")
        K = -cho_solve(factor, Q_ux)
        k = -0.5 * cho_solve(factor, Q_u)
        gains[tau] = K
        feedforward[tau] = k
        P = Q_xx + Q_ux.T @ K
        P = 0.5 * (P + P.T)
        p = Q_x + K.T @ Q_u

    dx = np.zeros((horizon + 1, n))
    du = np.zeros((horizon, m))
    for tau in range(horizon):
        du[tau] = gains[tau] @ dx[tau] + feedforward[tau]
        dx[tau + 1] = A[tau] @ dx[tau] + B[tau] @ du[tau]
    return TrajectoryDelta(dx=dx, du=du), FeedbackPolicy(feedforward=feedforward, gains=gains)

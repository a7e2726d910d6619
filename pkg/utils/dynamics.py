"""
Modelo cinemático de bicicleta (single-track) em tempo discreto

    p_x' = p_x + f_r cos θ
    p_y' = p_y + f_r sin θ
    θ'   = θ + arcsin(τ_s v sin δ / b)
    v'   = v + τ_s a

com f_r(v, δ) = b + τ_s v cos δ − √(b² − (τ_s v sin δ)²). O heading não é
normalizado para (−π, π].
"""
from typing import Sequence, Tuple

import numpy as np

from game.models import CONTROL_DIM, STATE_DIM, DoubleMatrix, LinearizedDynamics, Trajectory
from utils.exceptions import InfeasibleControlError


def _lateral_term(v, delta, dt: float, wheelbase: float) -> Tuple[np.ndarray, np.ndarray]:
    lateral = dt * np.asarray(v, dtype=float) * np.sin(delta)
    slack = wheelbase * wheelbase - lateral * lateral
    if np.any(slack < 0.0):
        raise InfeasibleControlError(
            f"Raiz imaginária em f_r: b²={wheelbase * wheelbase:.6g} < (τ_s v sin δ)² para v={v}, δ={delta}",
            v=float(np.max(np.abs(v))),
            delta=float(np.max(np.abs(delta))),
        )
    return lateral, np.sqrt(slack)


def f_r(v: float, delta: float, dt: float, wheelbase: float) -> float:
    """
    Avanço ao longo do arco em um passo

    Usa a forma b − √(b² − s²) = s² / (b + √(b² − s²)), que é exata para δ = 0
    (f_r = τ_s v) e estável para s pequeno.

    Raises:
        InfeasibleControlError: Se b² < (τ_s v sin δ)²
    """
    lateral, root = _lateral_term(v, delta, dt, wheelbase)
    return float(dt * v * np.cos(delta) + lateral * lateral / (wheelbase + root))


def step(x: Sequence[float], u: Sequence[float], dt: float, wheelbase: float) -> DoubleMatrix:
    """
    Um passo exato da dinâmica

    Args:
        x: Estado [p_x, p_y, θ, v]
        u: Controle [δ, a]
        dt: τ_s
        wheelbase: b

    Returns:
        Próximo estado (array de 4 entradas)
    """
    p_x, p_y, theta, v = (float(value) for value in x)
    delta, accel = (float(value) for value in u)
    if abs(delta) >= np.pi / 2.0:
        raise InfeasibleControlError(f"|δ| deve ser < π/2: δ={delta}", v=v, delta=delta)
    lateral, root = _lateral_term(v, delta, dt, wheelbase)
    ratio = float(lateral) / wheelbase
    if abs(ratio) > 1.0:
        raise InfeasibleControlError(f"arcsin fora do domínio para v={v}, δ={delta}", v=v, delta=delta)
    advance = dt * v * np.cos(delta) + float(lateral) ** 2 / (wheelbase + float(root))
    return np.array(
        [
            p_x + advance * np.cos(theta),
            p_y + advance * np.sin(theta),
            theta + np.arcsin(ratio),
            v + dt * accel,
        ]
    )


def rollout(x0: Sequence[float], controls, dt: float, wheelbase: float) -> Trajectory:
    """
    Compõe step() a partir de x0

    Raises:
        InfeasibleControlError: Com o índice do passo que falhou
    """
    controls = np.asarray(controls, dtype=float).reshape(-1, CONTROL_DIM)
    states = np.empty((controls.shape[0] + 1, STATE_DIM))
    states[0] = np.asarray(x0, dtype=float)
    for tau, u in enumerate(controls):
        try:
            states[tau + 1] = step(states[tau], u, dt, wheelbase)
        except InfeasibleControlError as e:
            raise InfeasibleControlError(
                f"Passo {tau}: {e}", v=e.v, delta=e.delta, timestep=tau
            ) from e
    return Trajectory(states=states, controls=controls, feasible=True)


def linearize(traj: Trajectory, dt: float, wheelbase: float) -> LinearizedDynamics:
    """
    Jacobianos analíticos de step() ao longo da trajetória nominal

    Returns:
        LinearizedDynamics com A (T x 4 x 4) e B (T x 4 x 2)
    """
    horizon = traj.horizon
    theta = traj.states[:-1, 2]
    v = traj.states[:-1, 3]
    delta = traj.controls[:, 0]

    sin_d, cos_d = np.sin(delta), np.cos(delta)
    sin_t, cos_t = np.sin(theta), np.cos(theta)
    lateral, root = _lateral_term(v, delta, dt, wheelbase)
    advance = dt * v * cos_d + lateral * lateral / (wheelbase + root)

    dfr_dv = dt * cos_d + lateral * dt * sin_d / root
    dfr_ddelta = -dt * v * sin_d + lateral * dt * v * cos_d / root
    dtheta_dv = dt * sin_d / root
    dtheta_ddelta = dt * v * cos_d / root

    A = np.tile(np.eye(STATE_DIM), (horizon, 1, 1))
    A[:, 0, 2] = -advance * sin_t
    A[:, 0, 3] = dfr_dv * cos_t
    A[:, 1, 2] = advance * cos_t
    A[:, 1, 3] = dfr_dv * sin_t
    A[:, 2, 3] = dtheta_dv

    B = np.zeros((horizon, STATE_DIM, CONTROL_DIM))
    B[:, 0, 0] = dfr_ddelta * cos_t
    B[:, 1, 0] = dfr_ddelta * sin_t
    B[:, 2, 0] = dtheta_ddelta
    B[:, 3, 1] = dt
    return LinearizedDynamics(A=A, B=B)

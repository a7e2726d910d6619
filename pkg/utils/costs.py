"""
Custos do jogo de trajetórias

- custo de rastreamento do ego (quadrático)
- custo de colisão entre dois agentes (hinge sobre pares de círculos)
- convexificação de Gauss-Newton de ambos
- penalidade de consenso do jogo de contingência

Ordem dos pares de círculos por passo de tempo: (ff, fr, rf, rr), sempre
relativa à orientação canônica da aresta (vértice de menor chave primeiro).
"""
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from game.models import STATE_DIM, CollisionSpec, DoubleMatrix, FootprintModel, Trajectory
from utils.exceptions import ConfigurationError, PreconditionError
from utils.validators import validate_branching_step

PAIRS_PER_EDGE = 4


@dataclass(frozen=True, eq=False)
class EgoQuadraticModel:
    """
    Modelo exato ĉ(δX) = Σ_τ ‖x − x_ref + δx‖²_Q + ‖u + δu‖²_R

    Attributes:
        state_offsets: x − x_ref no nominal (T+1 x 4)
        controls: u nominal (T x 2)
        Q: Diagonal de Q
        R: Diagonal de R
    """

    state_offsets: DoubleMatrix
    controls: DoubleMatrix
    Q: DoubleMatrix
    R: DoubleMatrix

    def value(self, dx: DoubleMatrix = None, du: DoubleMatrix = None) -> float:
        dx = 0.0 if dx is None else dx
        du = 0.0 if du is None else du
        shifted_x = self.state_offsets + dx
        shifted_u = self.controls + du
        return float(np.sum(shifted_x * shifted_x * self.Q) + np.sum(shifted_u * shifted_u * self.R))

    def state_gradient(self) -> DoubleMatrix:
        return 2.0 * self.state_offsets * self.Q

    def control_gradient(self) -> DoubleMatrix:
        return 2.0 * self.controls * self.R

    def state_hessian(self) -> DoubleMatrix:
        return np.diag(2.0 * self.Q)

    def control_hessian(self) -> DoubleMatrix:
        return np.diag(2.0 * self.R)


@dataclass(frozen=True, eq=False)
class GaussNewtonCoupling:
    """
    Modelo Σ_τ ‖rows_a δx_a + rows_b δx_b + offsets‖² de um acoplamento

    Attributes:
        rows_a: ∂l/∂x do primeiro vértice (T+1 x 4 x 4): [τ, par, componente]
        rows_b: ∂l/∂x do segundo vértice (T+1 x 4 x 4)
        offsets: l no nominal (T+1 x 4)
    """

    rows_a: DoubleMatrix
    rows_b: DoubleMatrix
    offsets: DoubleMatrix

    def value(self, dx_a: DoubleMatrix = None, dx_b: DoubleMatrix = None) -> float:
        residual = self.residual(dx_a, dx_b)
        return float(np.sum(residual * residual))

    def residual(self, dx_a: DoubleMatrix = None, dx_b: DoubleMatrix = None) -> DoubleMatrix:
        residual = np.array(self.offsets, dtype=float)
        if dx_a is not None:
            residual += np.einsum("tpk,tk->tp", self.rows_a, dx_a)
        if dx_b is not None:
            residual += np.einsum("tpk,tk->tp", self.rows_b, dx_b)
        return residual

    def gradients(self):
        """Gradiente do modelo em δX = 0 para cada vértice (T+1 x 4)"""
        return (
            2.0 * np.einsum("tpk,tp->tk", self.rows_a, self.offsets),
            2.0 * np.einsum("tpk,tp->tk", self.rows_b, self.offsets),
        )

    def scaled(self, factor: float) -> "GaussNewtonCoupling":
        return GaussNewtonCoupling(
            rows_a=self.rows_a * factor, rows_b=self.rows_b * factor, offsets=self.offsets * factor
        )


def _check_lengths(traj: Trajectory, reference: DoubleMatrix) -> None:
    if reference.shape[0] != traj.states.shape[0]:
        raise ConfigurationError(
            f"Referência com {reference.shape[0]} estados para trajetória com {traj.states.shape[0]}"
        )


def ego_cost(traj: Trajectory, reference: DoubleMatrix, Q: Sequence[float], R: Sequence[float]) -> float:
    """
    Custo de rastreamento Σ_τ ‖x − x_ref‖²_Q + ‖u‖²_R

    Args:
        traj: Trajetória do type-player
        reference: Estados de referência (T+1 x 4)
        Q: Diagonal de Q
        R: Diagonal de R
    """
    reference = np.asarray(reference, dtype=float)
    _check_lengths(traj, reference)
    return convexify_ego(traj, reference, Q, R).value()


def convexify_ego(traj: Trajectory, reference: DoubleMatrix, Q: Sequence[float], R: Sequence[float]) -> EgoQuadraticModel:
    reference = np.asarray(reference, dtype=float)
    _check_lengths(traj, reference)
    return EgoQuadraticModel(
        state_offsets=traj.states - reference,
        controls=np.array(traj.controls),
        Q=np.asarray(Q, dtype=float),
        R=np.asarray(R, dtype=float),
    )


def circle_centers(x: Sequence[float], footprint: FootprintModel) -> DoubleMatrix:
    """
    Centros dos círculos (p_x + o cos θ, p_y + o sin θ) para cada offset o

    Aceita um estado (4,) ou uma pilha de estados (..., 4).

    Returns:
        Array (..., 2, 2): [círculo f/r, coordenada]
    """
    x = np.asarray(x, dtype=float)
    offsets = footprint.offsets
    heading = np.stack([np.cos(x[..., 2]), np.sin(x[..., 2])], axis=-1)
    return x[..., None, :2] + offsets[:, None] * heading[..., None, :]


def _pair_geometry(states_a: DoubleMatrix, states_b: DoubleMatrix, footprint_a: FootprintModel, footprint_b: FootprintModel):
    centers_a = circle_centers(states_a, footprint_a)
    centers_b = circle_centers(states_b, footprint_b)
    # (T+1, η, γ, 2) achatado para (T+1, 4, 2) na ordem ff, fr, rf, rr
    diff = (centers_a[:, :, None, :] - centers_b[:, None, :, :]).reshape(-1, PAIRS_PER_EDGE, 2)
    distance = np.linalg.norm(diff, axis=-1)
    return diff, distance


def collision_cost(
    traj_i: Trajectory,
    traj_j: Trajectory,
    footprint: FootprintModel,
    spec: CollisionSpec,
    footprint_j: FootprintModel = None,
) -> float:
    """
    Σ_τ Σ_{η,γ} l², com l = √β (d − d_safe) se d < d_safe e 0 caso contrário
    """
    if traj_i.horizon != traj_j.horizon:
        raise ConfigurationError(f"Horizontes diferentes: {traj_i.horizon} e {traj_j.horizon}")
    _, distance = _pair_geometry(traj_i.states, traj_j.states, footprint, footprint_j or footprint)
    gap = np.minimum(distance - spec.d_safe, 0.0)
    return float(spec.beta * np.sum(gap * gap))


def convexify_coupling(
    traj_i: Trajectory,
    traj_j: Trajectory,
    footprint: FootprintModel,
    spec: CollisionSpec,
    footprint_j: FootprintModel = None,
) -> GaussNewtonCoupling:
    """
    Aproximação de Gauss-Newton do custo de colisão

    Linhas e offsets são nulos para pares com d >= d_safe. Em d = 0 a direção
    é indefinida e as linhas ficam nulas.
    """
    if traj_i.horizon != traj_j.horizon:
        raise ConfigurationError(f"Horizontes diferentes: {traj_i.horizon} e {traj_j.horizon}")
    footprint_j = footprint_j or footprint
    diff, distance = _pair_geometry(traj_i.states, traj_j.states, footprint, footprint_j)
    active = distance < spec.d_safe
    sqrt_beta = np.sqrt(spec.beta)

    safe_distance = np.where(distance > 0.0, distance, 1.0)
    normal = np.where((active & (distance > 0.0))[..., None], diff / safe_distance[..., None], 0.0)

    offsets = np.where(active, sqrt_beta * (distance - spec.d_safe), 0.0)

    # par p = 2η + γ
    eta_offsets = np.repeat(footprint.offsets, 2)
    gamma_offsets = np.tile(footprint_j.offsets, 2)

    def rows(states: DoubleMatrix, circle_offsets: DoubleMatrix, sign: float) -> DoubleMatrix:
        theta = states[:, 2][:, None]
        d_center_d_theta = np.stack(
            [-circle_offsets[None, :] * np.sin(theta), circle_offsets[None, :] * np.cos(theta)], axis=-1
        )
        out = np.zeros(normal.shape[:2] + (STATE_DIM,))
        out[..., 0] = normal[..., 0]
        out[..., 1] = normal[..., 1]
        out[..., 2] = np.sum(normal * d_center_d_theta, axis=-1)
        return sign * sqrt_beta * out

    return GaussNewtonCoupling(
        rows_a=rows(traj_i.states, eta_offsets, 1.0),
        rows_b=rows(traj_j.states, gamma_offsets, -1.0),
        offsets=offsets,
    )


def contingency_penalty(plans: Sequence[Trajectory], t_b: int, q_contingency: Sequence[float]) -> float:
    """
    Σ_{θ ≠ θ'} Σ_{τ < t_b} ‖x^θ_τ − x^θ'_τ‖²_Qc sobre pares ordenados

    Raises:
        PreconditionError: Se t_b estiver fora de [0, T]
    """
    if not plans:
        return 0.0
    horizon = plans[0].horizon
    if any(plan.horizon != horizon for plan in plans):
        raise ConfigurationError("Planos de contingência com horizontes diferentes")
    if not validate_branching_step(t_b, horizon):
        raise PreconditionError(f"t_b={t_b} fora de [0, {horizon}]")
    weights = np.asarray(q_contingency, dtype=float)
    total = 0.0
    for a, plan_a in enumerate(plans):
        for b, plan_b in enumerate(plans):
            if a == b:
                continue
            gap = plan_a.states[:t_b] - plan_b.states[:t_b]
            total += float(np.sum(gap * gap * weights))
    return total


def convexify_consensus(traj_a: Trajectory, traj_b: Trajectory, t_b: int, q_contingency: Sequence[float]) -> GaussNewtonCoupling:
    """
    Forma exata da penalidade de consenso de uma aresta (par não ordenado)

    As linhas valem ±√2 √Qc para τ < t_b e zero depois, de modo que o modelo
    reproduz as duas parcelas ordenadas do par.
    """
    horizon = traj_a.horizon
    if not validate_branching_step(t_b, horizon):
        raise PreconditionError(f"t_b={t_b} fora de [0, {horizon}]")
    scale = np.sqrt(2.0) * np.sqrt(np.asarray(q_contingency, dtype=float))
    rows_a = np.zeros((horizon + 1, PAIRS_PER_EDGE, STATE_DIM))
    rows_a[:t_b] = np.diag(scale)
    offsets = np.zeros((horizon + 1, PAIRS_PER_EDGE))
    offsets[:t_b] = scale * (traj_a.states[:t_b] - traj_b.states[:t_b])
    return GaussNewtonCoupling(rows_a=rows_a, rows_b=-rows_a, offsets=offsets)

"""
Agente de vértice do solver distribuído

Cada type-player do grafo de interação é um VertexAgent. Ele só conhece a
própria trajetória nominal, as trajetórias dos vizinhos (para convexificar
as arestas adjacentes) e as mensagens E_{v',e} y_{v'} recebidas a cada
iteração do ADMM.
"""
import logging
from dataclasses import dataclass, replace
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from agents.consensus import (
    DualConsensusState,
    EdgeLayout,
    consensus_iteration,
    consensus_residual,
    outgoing_messages,
)
from agents.lqr import FeedbackPolicy, TrajectoryDelta, riccati_solve
from game.graph import InteractionGraph, edge_coupling
from game.models import (
    CONTROL_DIM,
    STATE_DIM,
    CostWeights,
    DoubleMatrix,
    GameSpec,
    LinearizedDynamics,
    Trajectory,
    TypePlayer,
    VertexKey,
)
from schemas import SolverParams
from utils.costs import PAIRS_PER_EDGE, EgoQuadraticModel, convexify_ego
from utils.dynamics import linearize, rollout, step

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AdmmVertexState:
    """
    Estado de um vértice

    Attributes:
        key: (agente, tipo)
        probability: p(t_i)
        layout: Fatias por aresta adjacente
        duals: y, z, s, λ (T+1 x 4·grau)
        nominal: Trajetória nominal atual
        dynamics: Linearização em torno do nominal
        ego_model: Modelo quadrático do custo próprio
        coupling_rows: Q_v empilhado (T+1 x 4·grau x 4)
        coupling_offsets: l empilhado (T+1 x 4·grau)
        r: Último r usado
        delta: Última solução δX
        policy: Última política de realimentação
    """

    key: VertexKey
    probability: float
    layout: EdgeLayout
    duals: DualConsensusState
    nominal: Trajectory
    dynamics: Optional[LinearizedDynamics] = None
    ego_model: Optional[EgoQuadraticModel] = None
    coupling_rows: Optional[DoubleMatrix] = None
    coupling_offsets: Optional[DoubleMatrix] = None
    r: Optional[DoubleMatrix] = None
    delta: Optional[TrajectoryDelta] = None
    policy: Optional[FeedbackPolicy] = None


def init_vertex_state(game: GameSpec, graph: InteractionGraph, key: VertexKey, nominal: Trajectory) -> AdmmVertexState:
    neighbors = tuple(neighbor for _, neighbor in graph.adjacent(key))
    layout = EdgeLayout(neighbors=neighbors, width=PAIRS_PER_EDGE)
    duals = DualConsensusState.zeros((game.horizon + 1, layout.size))
    return AdmmVertexState(
        key=key,
        probability=game.probability(key),
        layout=layout,
        duals=duals,
        nominal=nominal,
    )


def convexify_vertex(
    state: AdmmVertexState,
    game: GameSpec,
    graph: InteractionGraph,
    trajectories: Mapping[VertexKey, Trajectory],
    warm_start: bool = True,
) -> AdmmVertexState:
    """
    Lineariza a dinâmica e convexifica o custo próprio e as arestas adjacentes

    Todos os vértices calculam a mesma aresta na orientação canônica, então
    as duas cópias de l_e coincidem.
    """
    key = state.key
    nominal = trajectories[key]
    player: TypePlayer = game.player(key)
    weights: CostWeights = game.weights[key]
    horizon = game.horizon
    rows = np.zeros((horizon + 1, state.layout.size, STATE_DIM))
    offsets = np.zeros((horizon + 1, state.layout.size))
    for edge, neighbor in graph.adjacent(key):
        coupling = edge_coupling(game, edge, trajectories)
        sl = state.layout.slice_of(neighbor)
        rows[:, sl] = coupling.rows_a if key == edge.a else coupling.rows_b
        offsets[:, sl] = coupling.offsets
    duals = state.duals if warm_start else DualConsensusState.zeros(state.duals.y.shape)
    return replace(
        state,
        nominal=nominal,
        duals=duals,
        dynamics=linearize(nominal, game.dt, game.wheelbase),
        ego_model=convexify_ego(nominal, player.reference, weights.Q, weights.R),
        coupling_rows=rows,
        coupling_offsets=offsets,
    )


def subproblem_terms(state: AdmmVertexState, r: DoubleMatrix, params: SolverParams):
    """
    Termos quadráticos do subproblema LQR

    Q' = p·Q + Q_vᵀQ_v / (2(σ+ρ)),  q = 2p·Q(x − x_ref) + Q_vᵀr / (σ+ρ)
    R̃ = p·R,                         r̃ = 2p·R ū
    """
    p = state.probability
    c = params.sigma + params.rho
    model = state.ego_model
    rows = state.coupling_rows
    horizon = model.controls.shape[0]
    state_hessian = p * np.broadcast_to(np.diag(model.Q), (horizon + 1, STATE_DIM, STATE_DIM)) + np.einsum(
        "tmi,tmj->tij", rows, rows
    ) / (2.0 * c)
    state_linear = p * model.state_gradient() + np.einsum("tmi,tm->ti", rows, r) / c
    control_hessian = p * np.broadcast_to(np.diag(model.R), (horizon, CONTROL_DIM, CONTROL_DIM))
    control_linear = p * model.control_gradient()
    return state_hessian, state_linear, control_hessian, control_linear


def solve_lqr_subproblem(
    state: AdmmVertexState, params: SolverParams, r: Optional[DoubleMatrix] = None
) -> Tuple[TrajectoryDelta, FeedbackPolicy]:
    """
    Minimizador exato do subproblema do vértice sob a dinâmica linearizada

    Args:
        state: Estado já convexificado
        params: σ, ρ
        r: Termo r da iteração (zeros quando omitido)
    """
    if r is None:
        r = np.zeros_like(state.coupling_offsets)
    terms = subproblem_terms(state, r, params)
    return riccati_solve(state.dynamics, *terms)


def coupled_output(state: AdmmVertexState, delta: TrajectoryDelta) -> DoubleMatrix:
    """Q_v δx empilhado (T+1 x 4·grau)"""
    return np.einsum("tmi,ti->tm", state.coupling_rows, delta.dx)


def vertex_iteration(
    state: AdmmVertexState, messages: Mapping[VertexKey, DoubleMatrix], params: SolverParams
) -> Tuple[AdmmVertexState, TrajectoryDelta]:
    """
    Uma iteração do ADMM para um vértice

    Depende apenas do estado do vértice e das mensagens recebidas.

    Raises:
        SynchronizationError: Se faltar a mensagem de algum vizinho
    """

    def subproblem(r: DoubleMatrix):
        delta, policy = solve_lqr_subproblem(state, params, r)
        return (delta, policy), coupled_output(state, delta)

    duals, (delta, policy), r = consensus_iteration(
        state.duals,
        state.layout,
        messages,
        subproblem,
        state.coupling_offsets,
        params.sigma,
        params.rho,
    )
    return replace(state, duals=duals, r=r, delta=delta, policy=policy), delta


def line_search_rollout(
    state: AdmmVertexState,
    alpha: float,
    game: GameSpec,
) -> Trajectory:
    """
    u ← û + α k + K (x − x̂) com rollout pela dinâmica não linear

    Controles são saturados pelos limites opcionais do jogo.

    Raises:
        InfeasibleControlError: Se algum passo for inviável
    """
    nominal = state.nominal
    policy = state.policy
    if policy is None:
        return nominal
    horizon = nominal.horizon
    states = np.empty((horizon + 1, STATE_DIM))
    controls = np.empty((horizon, CONTROL_DIM))
    states[0] = nominal.states[0]
    for tau in range(horizon):
        u = nominal.controls[tau] + alpha * policy.feedforward[tau] + policy.gains[tau] @ (states[tau] - nominal.states[tau])
        controls[tau] = clip_controls(u, game)
        states[tau + 1] = step(states[tau], controls[tau], game.dt, game.wheelbase)
    return Trajectory(states=states, controls=controls, feasible=True)


def clip_controls(u: DoubleMatrix, game: GameSpec) -> DoubleMatrix:
    if game.max_steer is None and game.max_accel is None:
        return u
    u = np.array(u, dtype=float)
    if game.max_steer is not None:
        u[..., 0] = np.clip(u[..., 0], -game.max_steer, game.max_steer)
    if game.max_accel is not None:
        u[..., 1] = np.clip(u[..., 1], -game.max_accel, game.max_accel)
    return u


def zero_control_trajectory(player: TypePlayer, game: GameSpec) -> Trajectory:
    return rollout(player.initial_state, np.zeros((game.horizon, CONTROL_DIM)), game.dt, game.wheelbase)


class VertexAgent:
    """
    Agente de um type-player

    Guarda o AdmmVertexState e expõe as fases do solver: convexificar,
    publicar mensagens, iterar e gerar candidatos do line search.
    """

    def __init__(self, game: GameSpec, graph: InteractionGraph, key: VertexKey, nominal: Trajectory, params: SolverParams):
        self.game = game
        self.graph = graph
        self.params = params
        self.state = init_vertex_state(game, graph, key, nominal)

    @property
    def key(self) -> VertexKey:
        return self.state.key

    def convexify(self, trajectories: Mapping[VertexKey, Trajectory]) -> None:
        self.state = convexify_vertex(self.state, self.game, self.graph, trajectories, self.params.warm_start)

    def publish(self) -> Dict[VertexKey, DoubleMatrix]:
        return outgoing_messages(self.state.layout, self.state.duals.y)

    def iterate(self, messages: Mapping[VertexKey, DoubleMatrix]) -> TrajectoryDelta:
        self.state, delta = vertex_iteration(self.state, messages, self.params)
        return delta

    def candidate(self, alpha: float) -> Trajectory:
        return line_search_rollout(self.state, alpha, self.game)

    def consensus_residual(self, messages: Mapping[VertexKey, DoubleMatrix]) -> float:
        return consensus_residual(self.state.layout, self.state.duals.y, messages)

    def dual_residual(self) -> float:
        gap = self.state.duals.y - self.state.duals.z
        return float(np.max(np.abs(gap))) if gap.size else 0.0

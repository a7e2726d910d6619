"""
Oráculos centralizados

- centralized_solve: iLQR conjunto sobre o sistema empilhado de todos os
  type-players (dimensão 4V de estado, 2V de controle), sem o ADMM
- dense_qp_solve: KKT esparso do problema interno convexificado
- avaliadores por enumeração para os custos esperados e o potencial de
  contingência

Compartilham dinâmica e custos com o solver distribuído, nada além disso.
"""
import logging
import time
import warnings
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from agents.lqr import TrajectoryDelta
from agents.vertex_agent import clip_controls
from game.graph import Edge, InteractionGraph, build_interaction_graph, edge_coupling
from game.models import CONTROL_DIM, STATE_DIM, GameSpec, JointStrategy, LinearizedDynamics, Trajectory, VertexKey
from game.potential import pair_cost, potential, type_cost
from schemas import IterationRecord, SolverParams
from services.solver_service import SolveResult, initial_strategy
from utils.costs import EgoQuadraticModel, GaussNewtonCoupling, contingency_penalty, convexify_ego
from utils.dynamics import linearize, step
from utils.exceptions import InfeasibleControlError

logger = logging.getLogger(__name__)

KKT_REGULARIZATION = 1e-9


@dataclass
class ConvexifiedProblem:
    """
    Problema interno convexificado em torno de uma estratégia nominal

    Objetivo: Σ_v p_v ĉ_v(δX_v) + Σ_e ‖J_e δX + l_e‖², sujeito à dinâmica
    linearizada de cada vértice com δx_0 = 0.
    """

    keys: List[VertexKey]
    probabilities: Dict[VertexKey, float]
    dynamics: Dict[VertexKey, LinearizedDynamics]
    ego_models: Dict[VertexKey, EgoQuadraticModel]
    couplings: List[Tuple[Edge, GaussNewtonCoupling]]
    horizon: int

    def objective(self, deltas: Dict[VertexKey, TrajectoryDelta]) -> float:
        value = 0.0
        for key in self.keys:
            delta = deltas[key]
            value += self.probabilities[key] * self.ego_models[key].value(delta.dx, delta.du)
        for edge, coupling in self.couplings:
            value += coupling.value(deltas[edge.a].dx, deltas[edge.b].dx)
        return value


def build_convexified_problem(game: GameSpec, graph: InteractionGraph, strategy: JointStrategy) -> ConvexifiedProblem:
    trajectories = dict(strategy.items())
    keys = list(graph.vertices)
    dynamics, ego_models = {}, {}
    for key in keys:
        player = game.player(key)
        weights = game.weights[key]
        dynamics[key] = linearize(strategy[key], game.dt, game.wheelbase)
        ego_models[key] = convexify_ego(strategy[key], player.reference, weights.Q, weights.R)
    couplings = [(edge, edge_coupling(game, edge, trajectories)) for edge in graph.edges]
    return ConvexifiedProblem(
        keys=keys,
        probabilities={key: game.probability(key) for key in keys},
        dynamics=dynamics,
        ego_models=ego_models,
        couplings=couplings,
        horizon=game.horizon,
    )


def dense_qp_solve(problem: ConvexifiedProblem) -> Dict[VertexKey, TrajectoryDelta]:
    """
    Solução exata do QP convexificado pelo sistema KKT

    Variáveis por vértice: δx_1..δx_T seguidos de δu_0..δu_{T-1}.
    Sistema singular é regularizado com 1e-9 na diagonal (com aviso).
    """
    T = problem.horizon
    per_vertex = (STATE_DIM + CONTROL_DIM) * T
    offset = {key: index * per_vertex for index, key in enumerate(problem.keys)}
    n = per_vertex * len(problem.keys)

    def x_index(key: VertexKey, tau: int) -> int:
        return offset[key] + STATE_DIM * (tau - 1)

    def u_index(key: VertexKey, tau: int) -> int:
        return offset[key] + STATE_DIM * T + CONTROL_DIM * tau

    rows: List[int] = []
    cols: List[int] = []
    vals: List[float] = []
    gradient = np.zeros(n)

    def add_block(r0: int, c0: int, block: np.ndarray) -> None:
        block = np.atleast_2d(block)
        rr, cc = np.nonzero(block)
        rows.extend((r0 + rr).tolist())
        cols.extend((c0 + cc).tolist())
        vals.extend(block[rr, cc].tolist())

    for key in problem.keys:
        p = problem.probabilities[key]
        model = problem.ego_models[key]
        state_grad = model.state_gradient()
        control_grad = model.control_gradient()
        for tau in range(1, T + 1):
            i = x_index(key, tau)
            add_block(i, i, 2.0 * p * np.diag(model.Q))
            gradient[i:i + STATE_DIM] += p * state_grad[tau]
        for tau in range(T):
            i = u_index(key, tau)
            add_block(i, i, 2.0 * p * np.diag(model.R))
            gradient[i:i + CONTROL_DIM] += p * control_grad[tau]

    for edge, coupling in problem.couplings:
        for tau in range(1, T + 1):
            blocks = {edge.a: coupling.rows_a[tau], edge.b: coupling.rows_b[tau]}
            for key_r, J_r in blocks.items():
                i = x_index(key_r, tau)
                gradient[i:i + STATE_DIM] += 2.0 * J_r.T @ coupling.offsets[tau]
                for key_c, J_c in blocks.items():
                    add_block(i, x_index(key_c, tau), 2.0 * J_r.T @ J_c)

    hessian = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()

    c_rows: List[int] = []
    c_cols: List[int] = []
    c_vals: List[float] = []
    n_constraints = STATE_DIM * T * len(problem.keys)
    constraint = 0
    for key in problem.keys:
        A, B = problem.dynamics[key].A, problem.dynamics[key].B
        for tau in range(T):
            for r in range(STATE_DIM):
                c_rows.append(constraint + r)
                c_cols.append(x_index(key, tau + 1) + r)
                c_vals.append(1.0)
            if tau > 0:
                rr, cc = np.nonzero(A[tau])
                c_rows.extend((constraint + rr).tolist())
                c_cols.extend((x_index(key, tau) + cc).tolist())
                c_vals.extend((-A[tau][rr, cc]).tolist())
            rr, cc = np.nonzero(B[tau])
            c_rows.extend((constraint + rr).tolist())
            c_cols.extend((u_index(key, tau) + cc).tolist())
            c_vals.extend((-B[tau][rr, cc]).tolist())
            constraint += STATE_DIM
    C = sparse.coo_matrix((c_vals, (c_rows, c_cols)), shape=(n_constraints, n)).tocsr()

    rhs = np.concatenate([-gradient, np.zeros(n_constraints)])

    def kkt(regularization: float) -> np.ndarray:
        top = hessian + regularization * sparse.identity(n, format="csr")
        system = sparse.bmat([[top, C.T], [C, None]], format="csc")
        with warnings.catch_warnings():
            warnings.simplefilter("error", MatrixRankWarning)
            return spsolve(system, rhs)

    try:
        solution = kkt(0.0)
        if not np.all(np.isfinite(solution)):
            raise MatrixRankWarning("solução não finita")
    except MatrixRankWarning:
        logger.warning("Sistema KKT singular, regularizando com %.0e", KKT_REGULARIZATION)
        solution = kkt(KKT_REGULARIZATION)

    deltas: Dict[VertexKey, TrajectoryDelta] = {}
    for key in problem.keys:
        dx = np.zeros((T + 1, STATE_DIM))
        du = np.zeros((T, CONTROL_DIM))
        for tau in range(1, T + 1):
            i = x_index(key, tau)
            dx[tau] = solution[i:i + STATE_DIM]
        for tau in range(T):
            i = u_index(key, tau)
            du[tau] = solution[i:i + CONTROL_DIM]
        deltas[key] = TrajectoryDelta(dx=dx, du=du)
    return deltas


@dataclass
class StackedProblem:
    """Matrizes do sistema conjunto: estados 4V, controles 2V"""

    A: np.ndarray
    B: np.ndarray
    state_hessian: np.ndarray
    state_linear: np.ndarray
    control_hessian: np.ndarray
    control_linear: np.ndarray


def build_stacked_problem(problem: ConvexifiedProblem) -> StackedProblem:
    T = problem.horizon
    V = len(problem.keys)
    n, m = STATE_DIM * V, CONTROL_DIM * V
    position = {key: index for index, key in enumerate(problem.keys)}
    A = np.zeros((T, n, n))
    B = np.zeros((T, n, m))
    H_x = np.zeros((T + 1, n, n))
    g_x = np.zeros((T + 1, n))
    H_u = np.zeros((T, m, m))
    g_u = np.zeros((T, m))
    for key, index in position.items():
        xs = slice(STATE_DIM * index, STATE_DIM * (index + 1))
        us = slice(CONTROL_DIM * index, CONTROL_DIM * (index + 1))
        p = problem.probabilities[key]
        model = problem.ego_models[key]
        A[:, xs, xs] = problem.dynamics[key].A
        B[:, xs, us] = problem.dynamics[key].B
        H_x[:, xs, xs] += p * np.diag(model.Q)
        g_x[:, xs] += p * model.state_gradient()
        H_u[:, us, us] += p * np.diag(model.R)
        g_u[:, us] += p * model.control_gradient()
    for edge, coupling in problem.couplings:
        sa = slice(STATE_DIM * position[edge.a], STATE_DIM * (position[edge.a] + 1))
        sb = slice(STATE_DIM * position[edge.b], STATE_DIM * (position[edge.b] + 1))
        J = np.zeros((T + 1, coupling.offsets.shape[1], n))
        J[:, :, sa] = coupling.rows_a
        J[:, :, sb] = coupling.rows_b
        H_x += np.einsum("tpi,tpj->tij", J, J)
        g_x += 2.0 * np.einsum("tpi,tp->ti", J, coupling.offsets)
    return StackedProblem(A=A, B=B, state_hessian=H_x, state_linear=g_x, control_hessian=H_u, control_linear=g_u)


def joint_backward_pass(stacked: StackedProblem) -> Tuple[np.ndarray, np.ndarray]:
    """Recursão de Riccati densa sobre o sistema conjunto; retorna (k, K)"""
    T, n, m = stacked.B.shape
    P = stacked.state_hessian[T]
    p = stacked.state_linear[T]
    feedforward = np.zeros((T, m))
    gains = np.zeros((T, m, n))
    for tau in range(T - 1, -1, -1):
        A, B = stacked.A[tau], stacked.B[tau]
        Q_uu = stacked.control_hessian[tau] + B.T @ P @ B
        Q_ux = B.T @ P @ A
        Q_xx = stacked.state_hessian[tau] + A.T @ P @ A
        Q_u = stacked.control_linear[tau] + B.T @ p
        Q_x = stacked.state_linear[tau] + A.T @ p
        solved = np.linalg.solve(Q_uu, np.column_stack([Q_ux, Q_u]))
        K = -solved[:, :n]
        k = -0.5 * solved[:, n]
        gains[tau], feedforward[tau] = K, k
        P = Q_xx + Q_ux.T @ K
        P = 0.5 * (P + P.T)
        p = Q_x + K.T @ Q_u
    return feedforward, gains


def joint_rollout(
    game: GameSpec, keys: List[VertexKey], strategy: JointStrategy, feedforward: np.ndarray, gains: np.ndarray, alpha: float
) -> JointStrategy:
    T = game.horizon
    V = len(keys)
    nominal_x = np.stack([strategy[key].states for key in keys], axis=1)
    nominal_u = np.stack([strategy[key].controls for key in keys], axis=1)
    states = np.empty_like(nominal_x)
    controls = np.empty_like(nominal_u)
    states[0] = nominal_x[0]
    for tau in range(T):
        deviation = (states[tau] - nominal_x[tau]).reshape(-1)
        u = nominal_u[tau].reshape(-1) + alpha * feedforward[tau] + gains[tau] @ deviation
        u = clip_controls(u.reshape(V, CONTROL_DIM), game)
        controls[tau] = u
        for index in range(V):
            states[tau + 1, index] = step(states[tau, index], u[index], game.dt, game.wheelbase)
    return JointStrategy(
        {
            key: Trajectory(states=states[:, index], controls=controls[:, index], feasible=True)
            for index, key in enumerate(keys)
        }
    )


def centralized_solve(
    game: GameSpec,
    graph: Optional[InteractionGraph] = None,
    init: Optional[JointStrategy] = None,
    params: Optional[SolverParams] = None,
) -> SolveResult:
    """
    Minimiza o potencial por iLQR conjunto (complexidade centralizada)

    Mesmo critério de parada e mesmo line search do solver distribuído.
    """
    params = params or SolverParams()
    graph = graph or build_interaction_graph(game)
    strategy = init or initial_strategy(game)
    strategy.check_complete(game)
    current = potential(game, strategy)
    result = SolveResult(strategy=strategy, potential=current)
    stall_count = 0

    for iteration in range(params.max_outer_iter):
        started = time.perf_counter()
        problem = build_convexified_problem(game, graph, result.strategy)
        feedforward, gains = joint_backward_pass(build_stacked_problem(problem))
        accepted, value = None, None
        for alpha in params.line_search:
            try:
                candidate = joint_rollout(game, problem.keys, result.strategy, feedforward, gains, alpha)
            except InfeasibleControlError:
                continue
            value = potential(game, candidate)
            if value < current:
                accepted = alpha
                break
        result.diagnostics.append(
            IterationRecord(
                iteration=iteration,
                potential=value if accepted is not None else current,
                alpha=accepted,
                wall_ms=(time.perf_counter() - started) * 1e3,
                accepted=accepted is not None,
            )
        )
        logger.debug("centralizado iter %d: potencial %s, α=%s", iteration, value, accepted)
        if accepted is None:
            if value is not None and abs(value - current) < params.tolerance:
                result.converged = True
                break
            stall_count += 1
            if stall_count >= params.max_stall:
                logger.warning("Oráculo centralizado parado com potencial %.6g", current)
                result.stalled = True
                break
            continue
        stall_count = 0
        change = current - value
        current = value
        result.strategy = candidate
        result.potential = value
        if change < params.tolerance:
            result.converged = True
            break
    return result


def brute_force_expected_cost(game: GameSpec, X: JointStrategy, key: VertexKey) -> float:
    """
    C_{t_i} pela enumeração de todos os perfis t_{-i} sob o prior independente

    Avalia Σ_{t_-i} p(t_-i) [c_{t_i} + Σ_{j≠i} c_{t_i t_j}] termo a termo.
    """
    agent, type_index = key
    others = [a for a in game.agents if a != agent]
    own = type_cost(game, X, key)
    if not others:
        return own
    grids = np.meshgrid(*[np.arange(game.prior.num_types(a)) for a in others], indexing="ij")
    total = 0.0
    for profile in np.stack([grid.ravel() for grid in grids], axis=-1):
        weight = 1.0
        coupling = 0.0
        for other_agent, other_type in zip(others, profile):
            weight *= game.prior.marginal(other_agent, int(other_type))
            coupling += pair_cost(game, X, key, (other_agent, int(other_type)))
        total += weight * (own + coupling)
    return total


def brute_force_pair_potential(game: GameSpec, X: JointStrategy) -> float:
    """P(X) somando termo a termo todos os pares de agentes distintos"""
    total = sum(game.probability(player.key) * type_cost(game, X, player.key) for player in game.players)
    for a in game.players:
        for b in game.players:
            if a.agent < b.agent:
                total += game.prior.pair(a.agent, a.type_index, b.agent, b.type_index) * pair_cost(game, X, a.key, b.key)
    return total


def expanded_contingency_potential(game: GameSpec, X: JointStrategy) -> float:
    """
    Σ_θ p(θ) [Σ_i c_{t^θ_i} + Σ_{i<j} c_{t^θ_i t^θ_j}] + penalidade do ego
    """
    n_hypotheses = game.prior.num_types(game.agents[0])
    total = 0.0
    for theta in range(n_hypotheses):
        weight = game.prior.marginal(game.agents[0], theta)
        inner = sum(type_cost(game, X, (agent, theta)) for agent in game.agents)
        for index, i in enumerate(game.agents):
            for j in game.agents[index + 1:]:
                inner += pair_cost(game, X, (i, theta), (j, theta))
        total += weight * inner
    cfg = game.contingency
    plans = [X[(cfg.ego_agent, theta)] for theta in range(n_hypotheses)]
    return total + contingency_penalty(plans, cfg.t_b, cfg.q_contingency)

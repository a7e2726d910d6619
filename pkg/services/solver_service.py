"""
Solver distribuído do jogo Bayesiano potencial

Repete até convergir: convexificar em torno dos nominais, executar
`admm_max_iter` iterações do ADMM de consenso dual em todos os vértices e
atualizar as trajetórias por line search sobre o potencial verdadeiro.

Cada fase é bulk-synchronous: os vértices rodam num pool de workers e os
resultados são reduzidos na ordem fixa dos vértices, então a saída não
depende do número de workers.
"""
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from agents.lqr import TrajectoryDelta
from agents.vertex_agent import VertexAgent, zero_control_trajectory
from game.graph import InteractionGraph, build_interaction_graph
from game.models import GameSpec, JointStrategy, Trajectory, VertexKey
from game.potential import potential
from schemas import IterationRecord, SolverParams
from utils.dynamics import rollout
from utils.exceptions import ConfigurationError, InfeasibleControlError

logger = logging.getLogger(__name__)

WORKERS_ENV = "BAYESGAME_WORKERS"


def default_workers() -> int:
    """Número padrão de workers (variável BAYESGAME_WORKERS, padrão 1)"""
    raw = os.getenv(WORKERS_ENV, "1")
    try:
        workers = int(raw)
    except ValueError:
        raise ConfigurationError(f"{WORKERS_ENV} inválido: {raw!r}", field_path=WORKERS_ENV)
    if workers < 1:
        raise ConfigurationError(f"{WORKERS_ENV} deve ser >= 1: {workers}", field_path=WORKERS_ENV)
    return workers


class WorkerPool:
    """Map ordenado sobre um ThreadPoolExecutor (ou serial com 1 worker)"""

    def __init__(self, workers: int = 1):
        if workers < 1:
            raise ConfigurationError(f"Número de workers deve ser >= 1: {workers}")
        self.workers = workers
        self._executor = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def map(self, fn: Callable, items: Sequence) -> list:
        if self._executor is None:
            return [fn(item) for item in items]
        return list(self._executor.map(fn, items))

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)

    def __enter__(self) -> "WorkerPool":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


@dataclass
class SolveResult:
    strategy: JointStrategy
    potential: float
    diagnostics: List[IterationRecord] = field(default_factory=list)
    converged: bool = False
    stalled: bool = False

    @property
    def iterations(self) -> int:
        return len(self.diagnostics)


def initial_strategy(game: GameSpec, warm: Optional[Mapping[VertexKey, np.ndarray]] = None) -> JointStrategy:
    """
    Trajetórias iniciais: rollout dos controles de warm start quando houver,
    senão controles nulos a partir do estado inicial de cada type-player
    """
    trajectories: Dict[VertexKey, Trajectory] = {}
    for player in game.players:
        controls = None if warm is None else warm.get(player.key)
        if controls is not None:
            try:
                trajectories[player.key] = rollout(player.initial_state, controls, game.dt, game.wheelbase)
                continue
            except InfeasibleControlError:
                logger.debug("Warm start inviável para %s, usando controles nulos", player.key)
        trajectories[player.key] = zero_control_trajectory(player, game)
    return JointStrategy(trajectories)


def exchange(agents: Sequence[VertexAgent], pool: WorkerPool) -> Dict[VertexKey, Dict[VertexKey, np.ndarray]]:
    """Publica E_{v,e} y_v de todos os vértices e monta a caixa de entrada de cada um"""
    outboxes = pool.map(lambda agent: agent.publish(), agents)
    inboxes: Dict[VertexKey, Dict[VertexKey, np.ndarray]] = {agent.key: {} for agent in agents}
    for agent, outbox in zip(agents, outboxes):
        for neighbor, message in outbox.items():
            inboxes[neighbor][agent.key] = message
    return inboxes


def admm_residuals(agents: Sequence[VertexAgent], graph: InteractionGraph, pool: WorkerPool) -> Dict[str, float]:
    """
    Resíduos do problema interno convexificado

    consensus: max ‖E_{v,e} y_v − E_{v',e} y_{v'}‖∞
    dual: max ‖y_v − z_v‖∞
    primal: max ‖Σ_v Q_{v,e} δx_v + l_e − y_e/2‖∞ com y_e a média das duas cópias
    lambda_sum: max |λ_{a,e} + λ_{b,e}|
    """
    inboxes = exchange(agents, pool)
    by_key = {agent.key: agent for agent in agents}
    consensus = max((agent.consensus_residual(inboxes[agent.key]) for agent in agents), default=0.0)
    dual = max((agent.dual_residual() for agent in agents), default=0.0)
    primal = 0.0
    lambda_sum = 0.0
    for edge in graph.edges:
        a, b = by_key[edge.a].state, by_key[edge.b].state
        if a.delta is None or b.delta is None:
            continue
        slice_a, slice_b = a.layout.slice_of(edge.b), b.layout.slice_of(edge.a)
        coupled = np.einsum("tmi,ti->tm", a.coupling_rows[:, slice_a], a.delta.dx)
        coupled += np.einsum("tmi,ti->tm", b.coupling_rows[:, slice_b], b.delta.dx)
        y_edge = 0.5 * (a.duals.y[:, slice_a] + b.duals.y[:, slice_b])
        primal = max(primal, float(np.max(np.abs(coupled + a.coupling_offsets[:, slice_a] - 0.5 * y_edge))))
        lambda_sum = max(lambda_sum, float(np.max(np.abs(a.duals.lam[:, slice_a] + b.duals.lam[:, slice_b]))))
    return {"consensus": consensus, "dual": dual, "primal": primal, "lambda_sum": lambda_sum}


def run_admm_iterations(
    agents: Sequence[VertexAgent],
    graph: InteractionGraph,
    pool: WorkerPool,
    iterations: int,
    inner_tolerance: Optional[float] = None,
    on_iteration: Optional[Callable[[Dict[str, float]], None]] = None,
) -> int:
    """
    Executa até `iterations` iterações síncronas do ADMM

    Returns:
        Número de iterações executadas
    """
    for k in range(iterations):
        inboxes = exchange(agents, pool)
        pool.map(lambda agent: agent.iterate(inboxes[agent.key]), agents)
        if inner_tolerance is not None or on_iteration is not None:
            residuals = admm_residuals(agents, graph, pool)
            if on_iteration is not None:
                on_iteration(residuals)
            if inner_tolerance is not None and max(residuals["consensus"], residuals["dual"], residuals["primal"]) < inner_tolerance:
                return k + 1
    return iterations


def line_search_update(
    game: GameSpec,
    agents: Sequence[VertexAgent],
    pool: WorkerPool,
    current: float,
    schedule: Sequence[float],
) -> Tuple[Optional[float], Optional[JointStrategy], Optional[float]]:
    """
    Primeiro α do cronograma que reduz o potencial global

    Returns:
        (α aceito, estratégia, potencial) ou (None, None, potencial do último candidato viável)
    """
    last_potential = None
    for alpha in schedule:
        try:
            candidates = pool.map(lambda agent: agent.candidate(alpha), agents)
        except InfeasibleControlError as e:
            logger.debug("α=%s rejeitado: %s", alpha, e)
            continue
        strategy = JointStrategy({agent.key: traj for agent, traj in zip(agents, candidates)})
        value = potential(game, strategy)
        last_potential = value
        if value < current:
            return alpha, strategy, value
    return None, None, last_potential


def build_agents(game: GameSpec, graph: InteractionGraph, strategy: JointStrategy, params: SolverParams) -> List[VertexAgent]:
    return [VertexAgent(game, graph, key, strategy[key], params) for key in graph.vertices]


def solve(
    game: GameSpec,
    graph: Optional[InteractionGraph] = None,
    init: Optional[JointStrategy] = None,
    params: Optional[SolverParams] = None,
    workers: int = 1,
    diagnostics_sink: Optional[Callable[[IterationRecord], None]] = None,
) -> SolveResult:
    """
    Resolve o jogo pelo ADMM de consenso dual com line search

    Args:
        game: Jogo Bayesiano (ou de contingência)
        graph: Grafo de interação (construído do jogo quando omitido)
        init: Trajetórias iniciais dinamicamente viáveis (controles nulos quando omitido)
        params: Parâmetros do solver
        workers: Tamanho do pool de workers
        diagnostics_sink: Recebe um IterationRecord por iteração externa

    Returns:
        SolveResult com a melhor estratégia, potencial e diagnósticos
    """
    params = params or SolverParams()
    graph = graph or build_interaction_graph(game)
    strategy = init or initial_strategy(game)
    strategy.check_complete(game)
    current = potential(game, strategy)
    result = SolveResult(strategy=strategy, potential=current)
    stall_count = 0

    logger.info(
        "Iniciando solve: %d vértices, %d arestas, potencial inicial %.6g", len(graph.vertices), len(graph.edges), current
    )
    with WorkerPool(workers) as pool:
        agents = build_agents(game, graph, strategy, params)
        for iteration in range(params.max_outer_iter):
            started = time.perf_counter()
            trajectories = dict(result.strategy.items())
            pool.map(lambda agent: agent.convexify(trajectories), agents)
            run_admm_iterations(agents, graph, pool, params.admm_max_iter, params.inner_tolerance)
            residuals = admm_residuals(agents, graph, pool)
            alpha, candidate, value = line_search_update(game, agents, pool, current, params.line_search)

            record = IterationRecord(
                iteration=iteration,
                potential=value if alpha is not None else current,
                alpha=alpha,
                max_kkt_residual=max(residuals["consensus"], residuals["dual"], residuals["primal"]),
                consensus_residual=residuals["consensus"],
                wall_ms=(time.perf_counter() - started) * 1e3,
                accepted=alpha is not None,
            )
            result.diagnostics.append(record)
            if diagnostics_sink is not None:
                diagnostics_sink(record)
            logger.info(
                "iter %d: potencial %.6g, α=%s, resíduo %.3g", iteration, record.potential, alpha, record.max_kkt_residual
            )

            if alpha is None:
                if value is not None and abs(value - current) < params.tolerance:
                    result.converged = True
                    break
                stall_count += 1
                if stall_count >= params.max_stall:
                    logger.warning("Solver parado após %d iterações sem descida (potencial %.6g)", stall_count, current)
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

    logger.info("Solve terminado: potencial %.6g em %d iterações", result.potential, result.iterations)
    return result


def solve_inner(
    game: GameSpec,
    strategy: JointStrategy,
    params: SolverParams,
    iterations: int,
    graph: Optional[InteractionGraph] = None,
    inner_tolerance: Optional[float] = None,
    workers: int = 1,
    on_iteration: Optional[Callable[[Dict[str, float]], None]] = None,
) -> Tuple[Dict[VertexKey, TrajectoryDelta], Dict[str, float]]:
    """
    Resolve apenas o problema convexificado em torno de `strategy`

    Returns:
        (δX de cada vértice, resíduos finais)
    """
    graph = graph or build_interaction_graph(game)
    with WorkerPool(workers) as pool:
        agents = build_agents(game, graph, strategy, params)
        trajectories = dict(strategy.items())
        pool.map(lambda agent: agent.convexify(trajectories), agents)
        run_admm_iterations(agents, graph, pool, iterations, inner_tolerance, on_iteration)
        residuals = admm_residuals(agents, graph, pool)
    return {agent.key: agent.state.delta for agent in agents}, residuals

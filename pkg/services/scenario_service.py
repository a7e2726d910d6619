"""
Serviço de construção de cenários

Transforma um ScenarioConfig em GameSpec: amostra os tipos de cada agente a
partir da mistura de Gaussianas sobre v_ref, monta as trajetórias de
referência em faixas retas e, no cenário de ultrapassagem, o conjunto de
hipóteses do jogo de contingência.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from game.contingency import Hypothesis, HypothesisSet, build_contingency_game
from game.graph import InteractionGraph
from game.models import (
    BeliefPrior,
    CollisionSpec,
    ContingencyConfig,
    CostWeights,
    DoubleMatrix,
    FootprintModel,
    GameSpec,
    TypePlayer,
)
from schemas import AgentConfig, IntentModel, ScenarioConfig
from utils.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

# amplitude da grade de amostras, em desvios padrão
GRID_HALF_WIDTH = 2.0


@dataclass(frozen=True, eq=False)
class ScenarioGame:
    """
    Jogo montado a partir de um cenário

    Attributes:
        game: GameSpec pronto para o solver
        velocities: v_ref de cada tipo, por índice de agente
        names: Nome de cada agente, por índice
    """

    game: GameSpec
    velocities: Mapping[int, DoubleMatrix]
    names: Tuple[str, ...]

    def velocity_of(self, agent: int, type_index: int) -> float:
        return float(self.velocities[agent][type_index])


def sample_types(intent: IntentModel, samples_per_mode: int = 5) -> Tuple[DoubleMatrix, DoubleMatrix]:
    """
    Amostras determinísticas da mistura sobre v_ref

    Cada modo contribui `samples_per_mode` pontos igualmente espaçados em
    [μ − 2σ, μ + 2σ] (apenas μ quando for 1). A probabilidade de cada ponto
    é proporcional à densidade da mistura completa, normalizada para 1.

    Returns:
        (velocidades, probabilidades)

    Raises:
        ConfigurationError: Desvio padrão não positivo ou contagem inválida
    """
    if samples_per_mode < 1:
        raise ConfigurationError(f"samples_per_mode deve ser >= 1: {samples_per_mode}", field_path="samples_per_mode")
    stds = np.asarray(intent.stds, dtype=float)
    if np.any(stds <= 0.0):
        raise ConfigurationError(f"Desvio padrão degenerado na mistura: {intent.stds}", field_path="intent.stds")
    means = np.asarray(intent.means, dtype=float)
    weights = np.asarray(intent.weights, dtype=float)

    grid = np.linspace(-GRID_HALF_WIDTH, GRID_HALF_WIDTH, samples_per_mode) if samples_per_mode > 1 else np.zeros(1)
    velocities = (means[:, None] + stds[:, None] * grid[None, :]).ravel()
    density = np.sum(weights[:, None] * norm.pdf(velocities[None, :], loc=means[:, None], scale=stds[:, None]), axis=0)
    total = density.sum()
    if not total > 0.0:
        raise ConfigurationError("Densidade da mistura nula em todas as amostras", field_path="intent")
    return velocities, density / total


def reference_trajectory(
    initial_state: Sequence[float], v_ref: float, horizon: int, dt: float, lane: Optional[float] = None
) -> DoubleMatrix:
    """
    Referência de velocidade constante ao longo de uma faixa reta

    A faixa tem a direção do heading inicial; `lane` é a coordenada lateral
    (no eixo n = (−sin θ0, cos θ0)) da faixa. Sem `lane`, a faixa passa pelo
    estado inicial.

    Returns:
        Estados de referência (T+1 x 4): [p_x, p_y, θ0, v_ref]
    """
    x0 = np.asarray(initial_state, dtype=float)
    heading = x0[2]
    tangent = np.array([np.cos(heading), np.sin(heading)])
    normal = np.array([-np.sin(heading), np.cos(heading)])
    start = x0[:2].copy()
    if lane is not None:
        start = start + (lane - normal @ start) * normal
    distance = v_ref * dt * np.arange(horizon + 1)
    reference = np.empty((horizon + 1, 4))
    reference[:, :2] = start[None, :] + distance[:, None] * tangent[None, :]
    reference[:, 2] = heading
    reference[:, 3] = v_ref
    return reference


def agent_types(agent: AgentConfig, samples_per_mode: int) -> Tuple[DoubleMatrix, DoubleMatrix]:
    """Velocidades e probabilidades dos tipos de um agente (um único tipo sem intent)"""
    if agent.intent is None:
        return np.array([agent.v_ref], dtype=float), np.ones(1)
    return sample_types(agent.intent, samples_per_mode)


def build_game(
    cfg: ScenarioConfig,
    belief: Optional[Mapping[int, Sequence[float]]] = None,
    fixed_velocities: Optional[Mapping[int, float]] = None,
    initial_states: Optional[Mapping[int, Sequence[float]]] = None,
) -> ScenarioGame:
    """
    Monta o jogo Bayesiano de um cenário

    Args:
        cfg: Cenário validado
        belief: Marginais que substituem as do prior (ex: após filtragem)
        fixed_velocities: Agentes com v_ref conhecido (um único tipo)
        initial_states: Estados iniciais que substituem os do cenário

    Returns:
        ScenarioGame com o jogo e o v_ref de cada tipo
    """
    belief = belief or {}
    fixed_velocities = fixed_velocities or {}
    initial_states = initial_states or {}

    players: List[TypePlayer] = []
    weights: Dict = {}
    marginals: Dict[int, DoubleMatrix] = {}
    velocities: Dict[int, DoubleMatrix] = {}
    for agent_index, agent in enumerate(cfg.agents):
        if agent_index in fixed_velocities:
            v_types, probabilities = np.array([fixed_velocities[agent_index]], dtype=float), np.ones(1)
        else:
            v_types, probabilities = agent_types(agent, cfg.samples_per_mode)
        if agent_index in belief:
            probabilities = np.asarray(belief[agent_index], dtype=float)
            if probabilities.shape != v_types.shape:
                raise ConfigurationError(
                    f"Crença do agente {agent.name} tem {probabilities.size} entradas, esperado {v_types.size}"
                )
        x0 = np.asarray(initial_states.get(agent_index, agent.initial_state), dtype=float)
        for type_index, v_ref in enumerate(v_types):
            players.append(
                TypePlayer(
                    agent=agent_index,
                    type_index=type_index,
                    reference=reference_trajectory(x0, v_ref, cfg.horizon, cfg.dt, agent.lane),
                    initial_state=x0,
                    label=f"{agent.name}:v_ref={v_ref:.3f}",
                )
            )
            weights[(agent_index, type_index)] = CostWeights(Q=agent.Q, R=agent.R)
        marginals[agent_index] = probabilities
        velocities[agent_index] = v_types

    footprint = FootprintModel(*cfg.footprint_offsets) if cfg.footprint_offsets else None
    game = GameSpec(
        players=tuple(players),
        prior=BeliefPrior.independent(marginals),
        horizon=cfg.horizon,
        dt=cfg.dt,
        weights=weights,
        collision=CollisionSpec(d_safe=cfg.collision.d_safe, beta=cfg.collision.beta),
        wheelbase=cfg.wheelbase,
        footprint=footprint,
        max_steer=cfg.max_steer,
        max_accel=cfg.max_accel,
    )
    logger.debug("Cenário %s: %d type-players", cfg.name, len(game.players))
    return ScenarioGame(game=game, velocities=velocities, names=tuple(agent.name for agent in cfg.agents))


def with_samples_per_mode(cfg: ScenarioConfig, samples_per_mode: int) -> ScenarioConfig:
    return cfg.model_copy(update={"samples_per_mode": samples_per_mode})


def _hypothesis_probabilities(lanes: Sequence[float], p_up: Optional[float]) -> DoubleMatrix:
    """Uniforme, ou p_up dividido entre as hipóteses da faixa de cima"""
    lanes = np.asarray(lanes, dtype=float)
    if p_up is None:
        return np.full(lanes.size, 1.0 / lanes.size)
    upper = lanes == lanes.max()
    if upper.all():
        raise ConfigurationError("p_up exige hipóteses em mais de uma faixa", field_path="contingency.p_up")
    probabilities = np.where(upper, p_up / upper.sum(), (1.0 - p_up) / (~upper).sum())
    return probabilities


def build_hypotheses(
    cfg: ScenarioConfig, p_up: Optional[float] = None, velocities: Optional[Sequence[float]] = None
) -> HypothesisSet:
    """
    Hipóteses do cenário de ultrapassagem

    Uma hipótese por (faixa alvo, velocidade alvo) do agente incerto. Em cada
    uma o ego segue a faixa mais distante da faixa alvo com ego_v_ref; os
    demais agentes seguem a própria referência.

    Args:
        cfg: Cenário com bloco contingency
        p_up: Probabilidade total das hipóteses da faixa de cima (sobrepõe a do arquivo)
        velocities: Velocidades alvo (sobrepõe as do arquivo)
    """
    block = cfg.contingency
    if block is None:
        raise ConfigurationError(f"Cenário {cfg.name} não tem bloco contingency", field_path="contingency")
    p_up = block.p_up if p_up is None else p_up
    velocities = block.velocities if velocities is None else list(velocities)
    ego = cfg.agent_index(block.ego)
    other = cfg.agent_index(block.other)

    combos = list(itertools.product(velocities, block.lanes))
    probabilities = _hypothesis_probabilities([lane for _, lane in combos], p_up)
    hypotheses = []
    for (velocity, lane), probability in zip(combos, probabilities):
        ego_lane = max(block.lanes, key=lambda candidate: abs(candidate - lane))
        references = {}
        for agent_index, agent in enumerate(cfg.agents):
            if agent_index == other:
                references[agent_index] = reference_trajectory(agent.initial_state, velocity, cfg.horizon, cfg.dt, lane)
            elif agent_index == ego:
                references[agent_index] = reference_trajectory(
                    agent.initial_state, block.ego_v_ref, cfg.horizon, cfg.dt, ego_lane
                )
            else:
                v_ref = agent.v_ref if agent.v_ref is not None else float(np.dot(agent.intent.weights, agent.intent.means))
                references[agent_index] = reference_trajectory(agent.initial_state, v_ref, cfg.horizon, cfg.dt, agent.lane)
        hypotheses.append(
            Hypothesis(probability=float(probability), references=references, label=f"faixa={lane:g},v={velocity:g}")
        )
    return HypothesisSet(tuple(hypotheses))


def build_contingency_from_config(
    cfg: ScenarioConfig, p_up: Optional[float] = None, velocities: Optional[Sequence[float]] = None
) -> Tuple[GameSpec, InteractionGraph, HypothesisSet]:
    """Jogo de contingência completo do cenário (jogo, grafo, hipóteses)"""
    block = cfg.contingency
    hypotheses = build_hypotheses(cfg, p_up=p_up, velocities=velocities)
    base = build_game(cfg, fixed_velocities={i: 0.0 for i in range(len(cfg.agents))}).game
    config = ContingencyConfig(
        ego_agent=cfg.agent_index(block.ego), t_b=block.t_b, q_contingency=block.q_contingency
    )
    game, graph = build_contingency_game(hypotheses, config, base)
    logger.info("Jogo de contingência %s: %d hipóteses", cfg.name, len(hypotheses))
    return game, graph, hypotheses

"""
Jogo de contingência sobre a maquinaria do jogo Bayesiano potencial

Cada hipótese θ vira um tipo de cada agente. O prior correlacionado
p(t^θ1_i, t^θ2_j) = p(θ) se θ1 = θ2 e 0 caso contrário faz o potencial P'
conter apenas pares da mesma hipótese. O ego mantém um plano por hipótese,
acoplados pela penalidade de consenso antes de t_b.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Mapping, Sequence, Tuple

import numpy as np

from game.graph import InteractionGraph, build_interaction_graph
from game.models import (
    BeliefPrior,
    ContingencyConfig,
    DoubleMatrix,
    GameSpec,
    JointStrategy,
    Trajectory,
    TypePlayer,
    VertexKey,
)
from game.potential import bayesian_potential, expected_type_cost
from utils.dynamics import rollout
from utils.exceptions import ConfigurationError, PreconditionError
from utils.validators import MIN_PROBABILITY, validate_branching_step, validate_probability_vector

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Hypothesis:
    """
    Um desfecho possível θ

    Attributes:
        probability: p(θ)
        references: Referência de estados (T+1 x 4) de cada agente sob θ
        label: Descrição legível
    """

    probability: float
    references: Mapping[int, DoubleMatrix]
    label: str = ""


@dataclass(frozen=True, eq=False)
class HypothesisSet:
    hypotheses: Tuple[Hypothesis, ...]

    def __post_init__(self) -> None:
        if not self.hypotheses:
            raise ConfigurationError("Conjunto de hipóteses vazio")
        probabilities = self.probabilities
        if np.any(probabilities < MIN_PROBABILITY):
            raise PreconditionError(f"Hipótese com probabilidade nula: {probabilities.tolist()}")
        if not validate_probability_vector(probabilities):
            raise ConfigurationError(f"Probabilidades das hipóteses não somam 1: {probabilities.sum()}")
        agents = set(self.hypotheses[0].references)
        for hypothesis in self.hypotheses[1:]:
            if set(hypothesis.references) != agents:
                raise ConfigurationError("Todas as hipóteses devem cobrir os mesmos agentes")

    @property
    def probabilities(self) -> DoubleMatrix:
        return np.array([hypothesis.probability for hypothesis in self.hypotheses], dtype=float)

    @property
    def agents(self):
        return sorted(self.hypotheses[0].references)

    def __len__(self) -> int:
        return len(self.hypotheses)


@dataclass(frozen=True, eq=False)
class ContingencyPerturbation:
    """
    Desvio a testar: a pilha inteira de planos do ego, ou um único (i, θ) com i ≠ ego
    """

    trajectories: Mapping[VertexKey, Trajectory]


def build_correlated_prior(H: HypothesisSet) -> BeliefPrior:
    """
    Prior bloco-diagonal sobre as hipóteses

    Returns:
        BeliefPrior com marginais p(t^θ_i) = p(θ) e tabelas conjuntas diag(p)
    """
    probabilities = H.probabilities
    marginals = {agent: probabilities for agent in H.agents}
    joint = {}
    for index, i in enumerate(H.agents):
        for j in H.agents[index + 1:]:
            joint[(i, j)] = np.diag(probabilities)
    return BeliefPrior(marginals=marginals, joint=joint)


def build_contingency_game(H: HypothesisSet, cfg: ContingencyConfig, base: GameSpec) -> Tuple[GameSpec, InteractionGraph]:
    """
    Monta o jogo de contingência e seu grafo

    Args:
        H: Hipóteses com as referências de cada agente
        cfg: Agente ego, t_b e Q_contingency
        base: Jogo que fornece horizonte, τ_s, pesos por agente, colisão e estados iniciais

    Returns:
        (jogo com prior correlacionado e penalidade do ego, grafo com arestas de consenso)
    """
    if not validate_branching_step(cfg.t_b, base.horizon):
        raise PreconditionError(f"t_b={cfg.t_b} fora de [0, {base.horizon}]")
    if cfg.ego_agent not in H.agents:
        raise ConfigurationError(f"Agente ego {cfg.ego_agent} ausente das hipóteses")

    players = []
    weights = {}
    for agent in H.agents:
        template = base.types_of(agent)
        if not template:
            raise ConfigurationError(f"Agente {agent} das hipóteses não existe no jogo base")
        for theta, hypothesis in enumerate(H.hypotheses):
            players.append(
                TypePlayer(
                    agent=agent,
                    type_index=theta,
                    reference=hypothesis.references[agent],
                    initial_state=template[0].initial_state,
                    label=hypothesis.label or f"θ={theta}",
                )
            )
            weights[(agent, theta)] = base.weights[template[0].key]

    game = GameSpec(
        players=tuple(players),
        prior=build_correlated_prior(H),
        horizon=base.horizon,
        dt=base.dt,
        weights=weights,
        collision=base.collision,
        wheelbase=base.wheelbase,
        footprint=base.footprint,
        contingency=cfg,
        max_steer=base.max_steer,
        max_accel=base.max_accel,
    )
    graph = build_interaction_graph(game)
    logger.debug(
        "Jogo de contingência: %d hipóteses, %d vértices, %d arestas", len(H), len(game.players), len(graph.edges)
    )
    return game, graph


def contingency_identity_residual(
    H: HypothesisSet,
    cfg: ContingencyConfig,
    base: GameSpec,
    X: JointStrategy,
    perturbation: ContingencyPerturbation,
) -> float:
    """
    |ΔP' − Σ p(θ) ΔC| para um desvio da pilha do ego ou de um único (i, θ)

    Raises:
        ConfigurationError: Desvio com alvo inválido ou forma incompatível
    """
    game, _ = build_contingency_game(H, cfg, base)
    targets = sorted(perturbation.trajectories)
    ego_keys = [player.key for player in game.types_of(cfg.ego_agent)]
    if targets and targets != ego_keys:
        if len(targets) != 1 or targets[0][0] == cfg.ego_agent:
            raise ConfigurationError(f"Desvio deve ser a pilha do ego ou um único (i, θ) com i ≠ ego: {targets}")
    for key in targets:
        new, old = perturbation.trajectories[key], X[key]
        if new.states.shape != old.states.shape or new.controls.shape != old.controls.shape:
            raise ConfigurationError(f"Forma incompatível no desvio de {key}")

    deviated = X.replace(perturbation.trajectories)
    lhs = bayesian_potential(game, X) - bayesian_potential(game, deviated)
    rhs = 0.0
    for key in targets:
        rhs += game.probability(key) * (expected_type_cost(game, X, key) - expected_type_cost(game, deviated, key))
    return abs(lhs - rhs)


def snap_prebranch_controls(game: GameSpec, X: JointStrategy) -> JointStrategy:
    """
    Substitui os controles do ego antes de t_b pela média ponderada por p(θ)

    Os planos são re-simulados pela dinâmica, de modo que todos coincidem
    exatamente antes do ramo.
    """
    cfg = game.contingency
    if cfg is None:
        return X
    ego_players = game.types_of(cfg.ego_agent)
    weights = np.array([game.probability(player.key) for player in ego_players])
    stacked = np.stack([X[player.key].controls for player in ego_players])
    shared = np.tensordot(weights, stacked[:, : cfg.t_b], axes=1)
    updates: Dict[VertexKey, Trajectory] = {}
    for player, controls in zip(ego_players, stacked):
        snapped = np.array(controls)
        snapped[: cfg.t_b] = shared
        updates[player.key] = rollout(player.initial_state, snapped, game.dt, game.wheelbase)
    return X.replace(updates)


def prebranch_gap(game: GameSpec, X: JointStrategy) -> float:
    """Maior distância (p_x, p_y) entre planos do ego para τ < t_b"""
    cfg = game.contingency
    plans: Sequence[Trajectory] = [X[player.key] for player in game.types_of(cfg.ego_agent)]
    gap = 0.0
    for a in plans:
        for b in plans:
            if cfg.t_b > 0:
                diff = np.linalg.norm(a.states[: cfg.t_b, :2] - b.states[: cfg.t_b, :2], axis=-1)
                gap = max(gap, float(diff.max()))
    return gap


def mean_prebranch_lateral(game: GameSpec, X: JointStrategy) -> float:
    """p_y médio dos planos do ego para τ < t_b, ponderado por p(θ)"""
    cfg = game.contingency
    if cfg is None or cfg.t_b == 0:
        raise PreconditionError("Posição antes do ramo exige jogo de contingência com t_b > 0")
    ego_players = game.types_of(cfg.ego_agent)
    weights = np.array([game.probability(player.key) for player in ego_players])
    means = np.array([X[player.key].states[: cfg.t_b, 1].mean() for player in ego_players])
    return float(np.dot(weights, means) / weights.sum())

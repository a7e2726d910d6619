"""
Custos esperados e função potencial do jogo Bayesiano

    C_{t_i} = c_{t_i} + Σ_{j≠i} Σ_{t_j} p(t_j|t_i) c_{t_i t_j}
    P(X)    = Σ_i Σ_{t_i} p(t_i) c_{t_i} + Σ_{j>i} Σ_{t_i,t_j} p(t_i,t_j) c_{t_i t_j}

Para qualquer desvio unilateral de um type-player v, P muda exatamente
p(v) vezes a mudança de C_v.
"""
from typing import Dict, List

from game.models import GameSpec, JointStrategy, Trajectory, TypePlayer, VertexKey
from utils.costs import collision_cost, contingency_penalty, ego_cost
from utils.exceptions import ConfigurationError


def _key(v) -> VertexKey:
    return v.key if isinstance(v, TypePlayer) else tuple(v)


def type_cost(game: GameSpec, X: JointStrategy, v) -> float:
    """Custo próprio c_{t_i} (rastreamento) de um type-player"""
    key = _key(v)
    player = game.player(key)
    weights = game.weights[key]
    return ego_cost(X[key], player.reference, weights.Q, weights.R)


def pair_cost(game: GameSpec, X: JointStrategy, a, b) -> float:
    """Custo acoplado c_{t_i t_j} entre type-players de agentes distintos"""
    key_a, key_b = _key(a), _key(b)
    return collision_cost(X[key_a], X[key_b], game.footprint, game.collision)


def expected_type_cost(game: GameSpec, X: JointStrategy, v) -> float:
    """
    Custo esperado C_{t_i} na forma marginalizada

    Args:
        game: Jogo
        X: Estratégia conjunta completa
        v: Type-player (ou chave (agente, tipo))

    Returns:
        c_{t_i} + Σ_{j≠i} Σ_{t_j} p(t_j|t_i) c_{t_i t_j}
    """
    X.check_complete(game)
    agent, type_index = _key(v)
    total = type_cost(game, X, (agent, type_index))
    for other in game.players:
        if other.agent == agent:
            continue
        weight = game.prior.conditional(other.agent, other.type_index, agent, type_index)
        if weight == 0.0:
            continue
        total += weight * pair_cost(game, X, (agent, type_index), other.key)
    return total


def bayesian_potential(game: GameSpec, X: JointStrategy) -> float:
    """P(X) sem a penalidade de contingência (P' no jogo de contingência)"""
    X.check_complete(game)
    total = 0.0
    for player in game.players:
        total += game.probability(player.key) * type_cost(game, X, player.key)
    for index, a in enumerate(game.players):
        for b in game.players[index + 1:]:
            if a.agent == b.agent:
                continue
            weight = game.prior.pair(a.agent, a.type_index, b.agent, b.type_index)
            if weight == 0.0:
                continue
            total += weight * pair_cost(game, X, a.key, b.key)
    return total


def ego_plans(game: GameSpec, X: JointStrategy) -> List[Trajectory]:
    """Planos do agente ego, um por hipótese, na ordem dos tipos"""
    return [X[player.key] for player in game.types_of(game.contingency.ego_agent)]


def potential(game: GameSpec, X: JointStrategy) -> float:
    """
    Potencial do jogo

    Em jogos de contingência soma-se a penalidade de consenso do ego.
    """
    total = bayesian_potential(game, X)
    if game.contingency is not None:
        total += contingency_penalty(ego_plans(game, X), game.contingency.t_b, game.contingency.q_contingency)
    return total


def potential_identity_residual(game: GameSpec, X: JointStrategy, v, X_alt: Trajectory) -> float:
    """
    |ΔP − p(v) ΔC_v| para o desvio unilateral X[v] → X_alt

    Raises:
        ConfigurationError: Se X_alt não tiver a forma de X[v]
    """
    key = _key(v)
    current = X[key]
    if X_alt.states.shape != current.states.shape or X_alt.controls.shape != current.controls.shape:
        raise ConfigurationError(
            f"Trajetória alternativa com forma {X_alt.states.shape} para {key}, esperado {current.states.shape}"
        )
    deviated = X.replace({key: X_alt})
    lhs = bayesian_potential(game, X) - bayesian_potential(game, deviated)
    rhs = game.probability(key) * (expected_type_cost(game, X, key) - expected_type_cost(game, deviated, key))
    return abs(lhs - rhs)


def expected_costs(game: GameSpec, X: JointStrategy, agent: int) -> Dict[int, float]:
    return {player.type_index: expected_type_cost(game, X, player.key) for player in game.types_of(agent)}


def best_type(game: GameSpec, X_star: JointStrategy, agent: int) -> TypePlayer:
    """
    Tipo do agente com menor custo esperado (empate → menor type_index)

    Raises:
        ConfigurationError: Se o agente não tiver tipos
    """
    players = game.types_of(agent)
    if not players:
        raise ConfigurationError(f"Agente {agent} não tem tipos")
    costs = expected_costs(game, X_star, agent)
    chosen = min(players, key=lambda player: (costs[player.type_index], player.type_index))
    return chosen

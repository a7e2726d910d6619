"""
Grafo de interação do jogo em forma de agente

Vértices são type-players. Arestas de colisão ligam type-players de
agentes distintos com p(t_i, t_j) > 0; arestas de consenso ligam as
hipóteses do ego num jogo de contingência. Cada aresta é orientada
canonicamente (menor chave primeiro).
"""
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from game.models import GameSpec, Trajectory, VertexKey
from utils.costs import GaussNewtonCoupling, convexify_consensus, convexify_coupling
from utils.exceptions import ConfigurationError

COLLISION = "collision"
CONSENSUS = "consensus"


@dataclass(frozen=True)
class Edge:
    """
    Aresta (a, b) com a < b

    Attributes:
        a: Primeiro vértice
        b: Segundo vértice
        kind: "collision" ou "consensus"
        probability: p(t_a, t_b) para arestas de colisão (1.0 em consenso)
    """

    a: VertexKey
    b: VertexKey
    kind: str = COLLISION
    probability: float = 1.0

    def __post_init__(self) -> None:
        if not self.a < self.b:
            raise ConfigurationError(f"Aresta fora da orientação canônica: {self.a} -> {self.b}")
        if self.kind not in (COLLISION, CONSENSUS):
            raise ConfigurationError(f"Tipo de aresta desconhecido: {self.kind}")

    def other(self, v: VertexKey) -> VertexKey:
        if v == self.a:
            return self.b
        if v == self.b:
            return self.a
        raise ConfigurationError(f"Vértice {v} não pertence à aresta {(self.a, self.b)}")


@dataclass(frozen=True)
class InteractionGraph:
    """Grafo não direcionado (V, E); N_e = 2 para todas as arestas"""

    vertices: Tuple[VertexKey, ...]
    edges: Tuple[Edge, ...]

    def __post_init__(self) -> None:
        known = set(self.vertices)
        for edge in self.edges:
            if edge.a not in known or edge.b not in known:
                raise ConfigurationError(f"Aresta {(edge.a, edge.b)} usa vértice fora do grafo")
            if edge.kind == COLLISION and edge.a[0] == edge.b[0]:
                raise ConfigurationError(f"Aresta de colisão entre tipos do mesmo agente: {(edge.a, edge.b)}")

    def adjacent(self, v: VertexKey) -> List[Tuple[Edge, VertexKey]]:
        """Arestas de v em ordem crescente da chave do vizinho"""
        pairs = [(edge, edge.other(v)) for edge in self.edges if v in (edge.a, edge.b)]
        return sorted(pairs, key=lambda pair: pair[1])

    def degree(self, v: VertexKey) -> int:
        return sum(1 for edge in self.edges if v in (edge.a, edge.b))


def build_interaction_graph(game: GameSpec) -> InteractionGraph:
    """
    Constrói o grafo a partir do prior do jogo

    Pares com p(t_i, t_j) = 0 (hipóteses cruzadas do prior correlacionado)
    não geram arestas.
    """
    edges: List[Edge] = []
    players = game.players
    for index, a in enumerate(players):
        for b in players[index + 1:]:
            if a.agent == b.agent:
                continue
            weight = game.prior.pair(a.agent, a.type_index, b.agent, b.type_index)
            if weight > 0.0:
                edges.append(Edge(a=a.key, b=b.key, kind=COLLISION, probability=weight))
    if game.contingency is not None:
        ego_types = game.types_of(game.contingency.ego_agent)
        for index, a in enumerate(ego_types):
            for b in ego_types[index + 1:]:
                edges.append(Edge(a=a.key, b=b.key, kind=CONSENSUS))
    edges.sort(key=lambda edge: (edge.a, edge.b))
    return InteractionGraph(vertices=tuple(game.keys), edges=tuple(edges))


def edge_coupling(game: GameSpec, edge: Edge, trajectories: Dict[VertexKey, Trajectory]) -> GaussNewtonCoupling:
    """
    Modelo de Gauss-Newton da aresta já ponderado pelo prior

    Arestas de colisão são escaladas por √p(t_a, t_b); arestas de consenso
    usam a forma exata da penalidade do ego.
    """
    traj_a, traj_b = trajectories[edge.a], trajectories[edge.b]
    if edge.kind == CONSENSUS:
        cfg = game.contingency
        return convexify_consensus(traj_a, traj_b, cfg.t_b, cfg.q_contingency)
    coupling = convexify_coupling(traj_a, traj_b, game.footprint, game.collision)
    return coupling.scaled(np.sqrt(edge.probability))

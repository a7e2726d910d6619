"""
Núcleo genérico do ADMM de consenso dual

Cada vértice v guarda vetores empilhados y, z, s, λ com uma fatia de
`width` entradas por aresta adjacente (vizinhos em ordem crescente). Uma
iteração, dadas as mensagens E_{v',e} y_{v'} dos vizinhos:

    λ_{v,e} += (ρ/2)(y_{v,e} − y_{v',e})
    r        = σz − λ − s + (ρ/2)(y_{v,e} + y_{v',e})
    X        = argmin f_v(X) + ‖Q_v X + r‖² / (2(σ+ρ))
    y        = (Q_v X + r) / (σ+ρ)
    z        = (4s + 4σy + 2l) / (4σ+1)
    s       += σ(y − z)

para acoplamentos g_e(w) = ‖w + l_e‖². A atualização de λ usa as mensagens
recebidas no início da iteração seguinte, então há uma única troca de
mensagens por iteração e Σ_{v∈e} λ_{v,e} = 0 sempre.
"""
from dataclasses import dataclass, replace
from typing import Callable, Hashable, Mapping, Tuple

import numpy as np

from game.models import DoubleMatrix
from utils.exceptions import ConfigurationError, SynchronizationError

# vértices por aresta
EDGE_ARITY = 2


@dataclass(frozen=True)
class EdgeLayout:
    """Disposição das fatias de aresta no vetor empilhado de um vértice"""

    neighbors: Tuple[Hashable, ...]
    width: int = 4

    def __post_init__(self) -> None:
        if list(self.neighbors) != sorted(self.neighbors):
            raise ConfigurationError(f"Vizinhos fora de ordem: {self.neighbors}")

    @property
    def size(self) -> int:
        return self.width * len(self.neighbors)

    def slice_of(self, neighbor: Hashable) -> slice:
        try:
            position = self.neighbors.index(neighbor)
        except ValueError:
            raise ConfigurationError(f"Aresta com {neighbor} não é adjacente ao vértice")
        return slice(position * self.width, (position + 1) * self.width)


def selector_apply(layout: EdgeLayout, neighbor: Hashable, stacked: DoubleMatrix) -> DoubleMatrix:
    """E_{v,e} aplicado ao vetor empilhado (última dimensão)"""
    stacked = np.asarray(stacked)
    if stacked.shape[-1] != layout.size:
        raise ConfigurationError(f"Vetor empilhado com {stacked.shape[-1]} entradas, layout espera {layout.size}")
    return stacked[..., layout.slice_of(neighbor)]


def scatter(layout: EdgeLayout, neighbor: Hashable, edge_values: DoubleMatrix) -> DoubleMatrix:
    """E_{v,e}ᵀ: coloca a fatia da aresta num vetor empilhado nulo"""
    edge_values = np.asarray(edge_values, dtype=float)
    out = np.zeros(edge_values.shape[:-1] + (layout.size,))
    out[..., layout.slice_of(neighbor)] = edge_values
    return out


@dataclass(frozen=True, eq=False)
class DualConsensusState:
    """Variáveis y, z, s, λ de um vértice (mesma forma)"""

    y: DoubleMatrix
    z: DoubleMatrix
    s: DoubleMatrix
    lam: DoubleMatrix

    @classmethod
    def zeros(cls, shape) -> "DualConsensusState":
        return cls(y=np.zeros(shape), z=np.zeros(shape), s=np.zeros(shape), lam=np.zeros(shape))


def _received(layout: EdgeLayout, messages: Mapping[Hashable, DoubleMatrix], neighbor: Hashable) -> DoubleMatrix:
    try:
        return np.asarray(messages[neighbor], dtype=float)
    except KeyError:
        raise SynchronizationError(f"Mensagem ausente do vizinho {neighbor}")


def update_multipliers(
    state: DualConsensusState, layout: EdgeLayout, messages: Mapping[Hashable, DoubleMatrix], rho: float
) -> DualConsensusState:
    lam = np.array(state.lam, dtype=float)
    for neighbor in layout.neighbors:
        own = selector_apply(layout, neighbor, state.y)
        lam[..., layout.slice_of(neighbor)] += (rho / EDGE_ARITY) * (own - _received(layout, messages, neighbor))
    return replace(state, lam=lam)


def assemble_r(
    state: DualConsensusState,
    layout: EdgeLayout,
    messages: Mapping[Hashable, DoubleMatrix],
    sigma: float,
    rho: float,
) -> DoubleMatrix:
    average = np.array(state.y, dtype=float)
    for neighbor in layout.neighbors:
        own = selector_apply(layout, neighbor, state.y)
        average[..., layout.slice_of(neighbor)] = (own + _received(layout, messages, neighbor)) / EDGE_ARITY
    return sigma * state.z - state.lam - state.s + rho * average


def finish_iteration(
    state: DualConsensusState, coupled: DoubleMatrix, r: DoubleMatrix, offsets: DoubleMatrix, sigma: float, rho: float
) -> DualConsensusState:
    """Atualizações de y, z e s dado Q_v X"""
    y = (coupled + r) / (sigma + rho)
    weight = 2.0 * EDGE_ARITY
    z = (weight * state.s + weight * sigma * y + 2.0 * offsets) / (weight * sigma + 1.0)
    s = state.s + sigma * (y - z)
    return replace(state, y=y, z=z, s=s)


def consensus_iteration(
    state: DualConsensusState,
    layout: EdgeLayout,
    messages: Mapping[Hashable, DoubleMatrix],
    subproblem: Callable[[DoubleMatrix], tuple],
    offsets: DoubleMatrix,
    sigma: float,
    rho: float,
):
    """
    Uma iteração completa de um vértice

    Args:
        state: Variáveis duais do vértice
        layout: Fatias por aresta
        messages: E_{v',e} y_{v'} de cada vizinho
        subproblem: r -> (solução X, Q_v X)
        offsets: l empilhado do vértice
        sigma: σ > 0
        rho: ρ > 0

    Returns:
        (novo estado, solução X, r usado)
    """
    state = update_multipliers(state, layout, messages, rho)
    r = assemble_r(state, layout, messages, sigma, rho)
    solution, coupled = subproblem(r)
    return finish_iteration(state, coupled, r, offsets, sigma, rho), solution, r


def outgoing_messages(layout: EdgeLayout, y: DoubleMatrix) -> dict:
    """E_{v,e} y_v para cada vizinho"""
    return {neighbor: np.array(selector_apply(layout, neighbor, y)) for neighbor in layout.neighbors}


def consensus_residual(layout: EdgeLayout, y: DoubleMatrix, messages: Mapping[Hashable, DoubleMatrix]) -> float:
    """max ‖E_{v,e} y_v − E_{v',e} y_{v'}‖∞ sobre as arestas de v"""
    worst = 0.0
    for neighbor in layout.neighbors:
        gap = selector_apply(layout, neighbor, y) - _received(layout, messages, neighbor)
        if gap.size:
            worst = max(worst, float(np.max(np.abs(gap))))
    return worst

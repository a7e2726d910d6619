"""
Tipos de domínio do jogo Bayesiano em forma de agente

Cada par (agente, tipo) é um "type-player" independente. O prior comum
fornece marginais p(t_i), pares p(t_i, t_j) e condicionais p(t_j | t_i).
Todos os tipos são imutáveis após a construção e podem ser lidos por vários
workers simultaneamente.
"""
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Mapping, NamedTuple, Optional, Tuple

import numpy as np
import numpy.typing as npt

from utils.exceptions import ConfigurationError, PreconditionError
from utils.validators import (
    MIN_PROBABILITY,
    PROBABILITY_TOLERANCE,
    validate_diagonal_weights,
    validate_joint_table,
    validate_probability_vector,
)

DoubleMatrix = npt.NDArray[np.float64]

# (agente, índice do tipo)
VertexKey = Tuple[int, int]

STATE_DIM = 4
CONTROL_DIM = 2
PX, PY, THETA, VEL = range(STATE_DIM)
STEER, ACCEL = range(CONTROL_DIM)


def _frozen(values, shape: Tuple[int, ...], name: str) -> DoubleMatrix:
    arr = np.array(values, dtype=np.float64)
    if arr.shape != shape:
        raise ConfigurationError(f"{name}: forma {arr.shape} diferente da esperada {shape}")
    arr.setflags(write=False)
    return arr


class State(NamedTuple):
    """Estado do modelo de bicicleta [p_x, p_y, θ, v]"""

    p_x: float
    p_y: float
    theta: float
    v: float


class Control(NamedTuple):
    """Controle [δ, a]"""

    delta: float
    a: float


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Sequência de estados (T+1) e controles (T) de um type-player

    `feasible` indica que os estados foram produzidos por rollout dos controles.
    """

    states: DoubleMatrix
    controls: DoubleMatrix
    feasible: bool = False

    def __post_init__(self) -> None:
        controls = np.array(self.controls, dtype=np.float64).reshape(-1, CONTROL_DIM)
        horizon = controls.shape[0]
        object.__setattr__(self, "controls", _frozen(controls, (horizon, CONTROL_DIM), "controls"))
        object.__setattr__(self, "states", _frozen(self.states, (horizon + 1, STATE_DIM), "states"))
        if not np.all(np.isfinite(self.states)) or not np.all(np.isfinite(self.controls)):
            raise ConfigurationError("Trajetória contém valores não finitos")

    @property
    def horizon(self) -> int:
        return self.controls.shape[0]

    @property
    def initial_state(self) -> DoubleMatrix:
        return self.states[0]


@dataclass(frozen=True, eq=False)
class LinearizedDynamics:
    """Jacobianos A_τ (T x 4 x 4) e B_τ (T x 4 x 2) do passo discreto"""

    A: DoubleMatrix
    B: DoubleMatrix

    def __post_init__(self) -> None:
        horizon = np.shape(self.A)[0]
        object.__setattr__(self, "A", _frozen(self.A, (horizon, STATE_DIM, STATE_DIM), "A"))
        object.__setattr__(self, "B", _frozen(self.B, (horizon, STATE_DIM, CONTROL_DIM), "B"))


@dataclass(frozen=True, eq=False)
class CostWeights:
    """Diagonais de Q (estado) e R (controle)"""

    Q: DoubleMatrix
    R: DoubleMatrix

    def __post_init__(self) -> None:
        if not validate_diagonal_weights(self.Q, STATE_DIM):
            raise ConfigurationError(f"Q inválida (diagonal não negativa de 4 entradas): {self.Q}")
        if not validate_diagonal_weights(self.R, CONTROL_DIM):
            raise ConfigurationError(f"R inválida (diagonal não negativa de 2 entradas): {self.R}")
        object.__setattr__(self, "Q", _frozen(self.Q, (STATE_DIM,), "Q"))
        object.__setattr__(self, "R", _frozen(self.R, (CONTROL_DIM,), "R"))


@dataclass(frozen=True)
class CollisionSpec:
    """Parâmetros da penalidade de colisão (hinge) entre círculos"""

    d_safe: float
    beta: float

    def __post_init__(self) -> None:
        if not self.d_safe > 0.0:
            raise ConfigurationError(f"d_safe deve ser positivo: {self.d_safe}")
        if not self.beta > 0.0:
            raise ConfigurationError(f"beta deve ser positivo: {self.beta}")


@dataclass(frozen=True)
class FootprintModel:
    """Dois círculos alinhados ao eixo longitudinal (dianteiro f, traseiro r)"""

    front_offset: float
    rear_offset: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.front_offset) and np.isfinite(self.rear_offset)):
            raise ConfigurationError("Offsets dos círculos devem ser finitos")

    @classmethod
    def from_wheelbase(cls, wheelbase: float) -> "FootprintModel":
        return cls(front_offset=wheelbase / 4.0, rear_offset=-wheelbase / 4.0)

    @property
    def offsets(self) -> DoubleMatrix:
        return np.array([self.front_offset, self.rear_offset])


@dataclass(frozen=True, eq=False)
class TypePlayer:
    """
    Vértice do jogo em forma de agente: uma hipótese de intenção de um agente

    Attributes:
        agent: Índice do agente em [0, N)
        type_index: Índice do tipo dentro do agente
        reference: Trajetória de referência de estados (T+1 x 4)
        initial_state: Estado inicial compartilhado por todos os tipos do agente
        label: Descrição legível (ex: "v_ref=3.5")
    """

    agent: int
    type_index: int
    reference: DoubleMatrix
    initial_state: DoubleMatrix
    label: str = ""

    def __post_init__(self) -> None:
        if self.agent < 0 or self.type_index < 0:
            raise ConfigurationError(f"Índices negativos em type-player {self.key}")
        reference = np.array(self.reference, dtype=np.float64)
        object.__setattr__(self, "reference", _frozen(reference, (reference.shape[0], STATE_DIM), "reference"))
        object.__setattr__(self, "initial_state", _frozen(self.initial_state, (STATE_DIM,), "initial_state"))

    @property
    def key(self) -> VertexKey:
        return (self.agent, self.type_index)


@dataclass(frozen=True, eq=False)
class BeliefPrior:
    """
    Prior comum sobre os tipos

    Sem tabela conjunta, os pares seguem o produto das marginais
    (independência). Tabelas conjuntas são indexadas por (i, j) com i < j e
    têm forma n_i x n_j.
    """

    marginals: Mapping[int, DoubleMatrix]
    joint: Optional[Mapping[Tuple[int, int], DoubleMatrix]] = None

    def __post_init__(self) -> None:
        marginals: Dict[int, DoubleMatrix] = {}
        for agent, values in sorted(self.marginals.items()):
            arr = np.array(values, dtype=np.float64)
            if arr.ndim != 1 or arr.size == 0:
                raise ConfigurationError(f"Marginal do agente {agent} vazia ou malformada")
            if np.any(arr < MIN_PROBABILITY):
                raise PreconditionError(
                    f"Marginal do agente {agent} tem probabilidade nula ou negativa: {arr.tolist()}"
                )
            if not validate_probability_vector(arr):
                raise ConfigurationError(
                    f"Marginal do agente {agent} não soma 1 (tol. {PROBABILITY_TOLERANCE}): soma={arr.sum()}"
                )
            arr.setflags(write=False)
            marginals[agent] = arr
        object.__setattr__(self, "marginals", marginals)

        if self.joint is not None:
            joint: Dict[Tuple[int, int], DoubleMatrix] = {}
            for (i, j), table in sorted(self.joint.items()):
                if i >= j or i not in marginals or j not in marginals:
                    raise ConfigurationError(f"Par inválido na tabela conjunta: {(i, j)}")
                arr = np.array(table, dtype=np.float64)
                if not validate_joint_table(arr, marginals[i], marginals[j]):
                    raise ConfigurationError(f"Tabela conjunta {(i, j)} não marginaliza para as marginais")
                arr.setflags(write=False)
                joint[(i, j)] = arr
            object.__setattr__(self, "joint", joint)

    @classmethod
    def independent(cls, marginals: Mapping[int, DoubleMatrix]) -> "BeliefPrior":
        return cls(marginals=marginals)

    @property
    def agents(self) -> List[int]:
        return sorted(self.marginals)

    def num_types(self, agent: int) -> int:
        return self.marginals[agent].size

    def marginal(self, agent: int, type_index: int) -> float:
        return float(self.marginals[agent][type_index])

    def pair(self, i: int, t_i: int, j: int, t_j: int) -> float:
        """p(t_i, t_j) para agentes distintos"""
        if i == j:
            raise ConfigurationError(f"Par de tipos do mesmo agente {i} não tem probabilidade conjunta")
        if i > j:
            i, t_i, j, t_j = j, t_j, i, t_i
        if self.joint is not None and (i, j) in self.joint:
            return float(self.joint[(i, j)][t_i, t_j])
        return float(self.marginals[i][t_i] * self.marginals[j][t_j])

    def conditional(self, j: int, t_j: int, i: int, t_i: int) -> float:
        """p(t_j | t_i) = p(t_i, t_j) / p(t_i)"""
        return self.pair(i, t_i, j, t_j) / self.marginal(i, t_i)


@dataclass(frozen=True, eq=False)
class ContingencyConfig:
    """
    Configuração do jogo de contingência

    Attributes:
        ego_agent: Agente que mantém um plano por hipótese
        t_b: Passo de ramificação (planos coincidem para τ < t_b)
        q_contingency: Diagonal de Q_contingency
    """

    ego_agent: int
    t_b: int
    q_contingency: DoubleMatrix

    def __post_init__(self) -> None:
        if not validate_diagonal_weights(self.q_contingency, STATE_DIM):
            raise ConfigurationError(f"Q_contingency inválida: {self.q_contingency}")
        object.__setattr__(self, "q_contingency", _frozen(self.q_contingency, (STATE_DIM,), "q_contingency"))


@dataclass(frozen=True, eq=False)
class GameSpec:
    """
    Jogo Bayesiano de trajetórias

    Attributes:
        players: Todos os type-players
        prior: Prior comum
        horizon: T (número de controles por trajetória)
        dt: τ_s em segundos
        weights: Pesos Q/R por type-player
        collision: Parâmetros da penalidade de colisão
        wheelbase: b em metros
        footprint: Círculos de colisão (padrão ±b/4)
        contingency: Penalidade de consenso do ego, quando for um jogo de contingência
        max_steer: Limite opcional |δ|
        max_accel: Limite opcional |a|
    """

    players: Tuple[TypePlayer, ...]
    prior: BeliefPrior
    horizon: int
    dt: float
    weights: Mapping[VertexKey, CostWeights]
    collision: CollisionSpec
    wheelbase: float
    footprint: Optional[FootprintModel] = None
    contingency: Optional[ContingencyConfig] = None
    max_steer: Optional[float] = None
    max_accel: Optional[float] = None
    _index: Dict[VertexKey, TypePlayer] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if int(self.horizon) < 1:
            raise ConfigurationError(f"Horizonte deve ser >= 1: {self.horizon}")
        if not self.dt > 0.0:
            raise ConfigurationError(f"τ_s deve ser positivo: {self.dt}")
        if not self.wheelbase > 0.0:
            raise ConfigurationError(f"Entre-eixos deve ser positivo: {self.wheelbase}")
        if self.max_steer is not None and not 0.0 < self.max_steer < np.pi / 2.0:
            raise ConfigurationError(f"Limite de esterçamento fora de (0, π/2): {self.max_steer}")
        if self.footprint is None:
            object.__setattr__(self, "footprint", FootprintModel.from_wheelbase(self.wheelbase))

        players = tuple(sorted(self.players, key=lambda player: player.key))
        if not players:
            raise ConfigurationError("Jogo sem type-players")
        index: Dict[VertexKey, TypePlayer] = {}
        for player in players:
            if player.key in index:
                raise ConfigurationError(f"Type-player duplicado: {player.key}")
            if player.reference.shape[0] != self.horizon + 1:
                raise ConfigurationError(
                    f"Referência de {player.key} tem {player.reference.shape[0]} estados, esperado {self.horizon + 1}"
                )
            if player.key not in self.weights:
                raise ConfigurationError(f"Pesos ausentes para o type-player {player.key}")
            index[player.key] = player
        object.__setattr__(self, "players", players)
        object.__setattr__(self, "_index", index)

        agents = sorted({player.agent for player in players})
        if self.prior.agents != agents:
            raise ConfigurationError(f"Prior cobre agentes {self.prior.agents}, jogo tem {agents}")
        for agent in agents:
            indices = [player.type_index for player in players if player.agent == agent]
            if indices != list(range(self.prior.num_types(agent))):
                raise ConfigurationError(
                    f"Tipos do agente {agent} ({indices}) não batem com a marginal de tamanho {self.prior.num_types(agent)}"
                )
        if self.contingency is not None and self.contingency.ego_agent not in agents:
            raise ConfigurationError(f"Agente ego {self.contingency.ego_agent} não existe no jogo")

    @property
    def keys(self) -> List[VertexKey]:
        return [player.key for player in self.players]

    @property
    def agents(self) -> List[int]:
        return self.prior.agents

    def player(self, key: VertexKey) -> TypePlayer:
        try:
            return self._index[key]
        except KeyError:
            raise ConfigurationError(f"Type-player desconhecido: {key}")

    def types_of(self, agent: int) -> List[TypePlayer]:
        return [player for player in self.players if player.agent == agent]

    def probability(self, key: VertexKey) -> float:
        return self.prior.marginal(*key)


@dataclass(frozen=True, eq=False)
class JointStrategy:
    """Coleção X de trajetórias, uma por type-player"""

    trajectories: Mapping[VertexKey, Trajectory]

    def __post_init__(self) -> None:
        object.__setattr__(self, "trajectories", dict(sorted(self.trajectories.items())))
        horizons = {traj.horizon for traj in self.trajectories.values()}
        if len(horizons) > 1:
            raise ConfigurationError(f"Trajetórias com horizontes diferentes: {sorted(horizons)}")

    def __getitem__(self, key: VertexKey) -> Trajectory:
        try:
            return self.trajectories[key]
        except KeyError:
            raise ConfigurationError(f"Trajetória ausente para o type-player {key}")

    def __contains__(self, key: VertexKey) -> bool:
        return key in self.trajectories

    def __iter__(self) -> Iterator[VertexKey]:
        return iter(self.trajectories)

    def __len__(self) -> int:
        return len(self.trajectories)

    def items(self):
        return self.trajectories.items()

    def replace(self, updates: Mapping[VertexKey, Trajectory]) -> "JointStrategy":
        merged = dict(self.trajectories)
        merged.update(updates)
        return JointStrategy(merged)

    def check_complete(self, game: GameSpec) -> None:
        """Garante uma trajetória por type-player com o horizonte do jogo"""
        for key in game.keys:
            traj = self[key]
            if traj.horizon != game.horizon:
                raise ConfigurationError(
                    f"Trajetória de {key} tem horizonte {traj.horizon}, esperado {game.horizon}"
                )

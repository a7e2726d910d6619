"""
Schemas Pydantic dos arquivos de cenário (config/*.json)
"""
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

PROBABILITY_TOLERANCE = 1e-9


class SolverParams(BaseModel):
    """Parâmetros do solver distribuído (e do oráculo centralizado)"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    sigma: float = Field(1.0, gt=0.0)
    rho: float = Field(1.0, gt=0.0)
    admm_max_iter: int = Field(3, ge=1)
    tolerance: float = Field(0.1, gt=0.0)
    max_outer_iter: int = Field(100, ge=1)
    line_search: List[float] = Field(default_factory=lambda: [1.0, 0.5, 0.25, 0.125, 0.0625], min_length=1)
    max_stall: int = Field(3, ge=1)
    warm_start: bool = True
    inner_tolerance: Optional[float] = Field(None, gt=0.0)

    @field_validator("line_search")
    @classmethod
    def _steps_in_unit_interval(cls, values: List[float]) -> List[float]:
        for alpha in values:
            if not 0.0 < alpha <= 1.0:
                raise ValueError(f"passo de line search fora de (0, 1]: {alpha}")
        return values


class IntentModel(BaseModel):
    """Mistura de Gaussianas sobre v_ref"""
    model_config = ConfigDict(extra="forbid")

    weights: List[float] = Field(min_length=1)
    means: List[float] = Field(min_length=1)
    stds: List[float] = Field(min_length=1)

    @model_validator(mode="after")
    def _check_mixture(self) -> "IntentModel":
        if not len(self.weights) == len(self.means) == len(self.stds):
            raise ValueError("weights, means e stds devem ter o mesmo tamanho")
        if any(w < 0.0 for w in self.weights):
            raise ValueError(f"pesos negativos na mistura: {self.weights}")
        if abs(sum(self.weights) - 1.0) > PROBABILITY_TOLERANCE:
            raise ValueError(f"pesos da mistura somam {sum(self.weights)}, esperado 1")
        if any(s <= 0.0 for s in self.stds):
            raise ValueError(f"desvio padrão deve ser positivo: {self.stds}")
        return self


class AgentConfig(BaseModel):
    """Um agente do cenário"""
    model_config = ConfigDict(extra="forbid")

    name: str
    initial_state: List[float] = Field(min_length=4, max_length=4)
    v_ref: Optional[float] = None
    intent: Optional[IntentModel] = None
    lane: Optional[float] = None
    Q: List[float] = Field(min_length=4, max_length=4)
    R: List[float] = Field(min_length=2, max_length=2)

    @model_validator(mode="after")
    def _check_reference(self) -> "AgentConfig":
        if self.v_ref is None and self.intent is None:
            raise ValueError(f"agente {self.name}: informe v_ref ou intent")
        if any(q < 0.0 for q in self.Q) or any(r < 0.0 for r in self.R):
            raise ValueError(f"agente {self.name}: pesos Q/R devem ser não negativos")
        return self


class CollisionConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    d_safe: float = Field(gt=0.0)
    beta: float = Field(gt=0.0)


class ContingencyBlock(BaseModel):
    """
    Hipóteses do cenário de ultrapassagem

    Cada hipótese é um par (faixa alvo, velocidade alvo) do agente incerto;
    o ego segue a outra faixa com velocidade ego_v_ref.
    """
    model_config = ConfigDict(extra="forbid")

    ego: str
    other: str
    t_b: int = Field(ge=0)
    q_contingency: List[float] = Field(min_length=4, max_length=4)
    lanes: List[float] = Field(min_length=1)
    velocities: List[float] = Field(min_length=1)
    ego_v_ref: float
    p_up: Optional[float] = Field(None, gt=0.0, lt=1.0)


class ClosedLoopSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    duration: float = Field(10.0, gt=0.0)
    replan_every: int = Field(1, ge=1)
    obs_std: float = Field(0.1, gt=0.0)
    belief_floor: float = Field(1e-4, ge=0.0, lt=1.0)


class MonteCarloSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    position_jitter: float = Field(1.0, ge=0.0)
    mean_jitter: float = Field(0.2, ge=0.0)
    w1_range: List[float] = Field(default_factory=lambda: [0.1, 0.9], min_length=2, max_length=2)


class VerifySettings(BaseModel):
    """Tamanhos das suítes de propriedades executadas por `verify`"""
    model_config = ConfigDict(extra="forbid")

    potential_draws: int = Field(1000, ge=1)
    contingency_draws: int = Field(500, ge=1)
    jacobian_points: int = Field(100, ge=1)
    gradient_points: int = Field(100, ge=1)
    inner_instances: int = Field(50, ge=1)


class ScenarioConfig(BaseModel):
    """Arquivo de cenário completo"""
    model_config = ConfigDict(extra="forbid")

    name: str
    kind: Literal["merging", "intersection", "overtaking", "toy"]
    horizon: int = Field(ge=1)
    dt: float = Field(gt=0.0)
    wheelbase: float = Field(gt=0.0)
    footprint_offsets: Optional[List[float]] = Field(None, min_length=2, max_length=2)
    collision: CollisionConfig
    agents: List[AgentConfig] = Field(min_length=1)
    ego: str
    samples_per_mode: int = Field(5, ge=1)
    seed: int = 0
    max_steer: Optional[float] = Field(None, gt=0.0, lt=1.5707963267948966)
    max_accel: Optional[float] = Field(None, gt=0.0)
    solver: SolverParams = Field(default_factory=SolverParams)
    contingency: Optional[ContingencyBlock] = None
    closed_loop: ClosedLoopSettings = Field(default_factory=ClosedLoopSettings)
    monte_carlo: MonteCarloSettings = Field(default_factory=MonteCarloSettings)
    verify: VerifySettings = Field(default_factory=VerifySettings)

    @model_validator(mode="after")
    def _check_agents(self) -> "ScenarioConfig":
        names = [agent.name for agent in self.agents]
        if len(set(names)) != len(names):
            raise ValueError(f"nomes de agentes repetidos: {names}")
        if self.ego not in names:
            raise ValueError(f"agente ego '{self.ego}' não está em agents")
        if self.contingency is not None:
            for name in (self.contingency.ego, self.contingency.other):
                if name not in names:
                    raise ValueError(f"agente '{name}' do bloco contingency não existe")
            if self.contingency.t_b > self.horizon:
                raise ValueError(f"t_b={self.contingency.t_b} maior que o horizonte {self.horizon}")
        elif self.kind == "overtaking":
            raise ValueError("cenário overtaking exige o bloco contingency")
        return self

    def agent_index(self, name: str) -> int:
        return [agent.name for agent in self.agents].index(name)

    @property
    def ego_index(self) -> int:
        return self.agent_index(self.ego)

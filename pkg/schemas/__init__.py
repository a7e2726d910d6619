"""
Schemas Pydantic de configuração e registros
"""
from .records import IterationRecord, RunMetrics, VerifyResult
from .scenario import (
    AgentConfig,
    ClosedLoopSettings,
    CollisionConfig,
    ContingencyBlock,
    IntentModel,
    MonteCarloSettings,
    ScenarioConfig,
    SolverParams,
    VerifySettings,
)

__all__ = [
    'AgentConfig',
    'ClosedLoopSettings',
    'CollisionConfig',
    'ContingencyBlock',
    'IntentModel',
    'IterationRecord',
    'MonteCarloSettings',
    'RunMetrics',
    'ScenarioConfig',
    'SolverParams',
    'VerifyResult',
    'VerifySettings',
]

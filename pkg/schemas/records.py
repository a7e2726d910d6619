"""
Registros emitidos pelo solver, pela simulação e pelas suítes de verificação
"""
from typing import Optional

from pydantic import BaseModel, Field


class IterationRecord(BaseModel):
    """Uma iteração externa do solver (uma linha do JSON de diagnóstico)"""
    iteration: int
    potential: float
    alpha: Optional[float] = None
    max_kkt_residual: float = 0.0
    consensus_residual: float = 0.0
    wall_ms: float = 0.0
    accepted: bool = True


class RunMetrics(BaseModel):
    """Métricas de uma simulação em malha fechada"""
    mean_speed_deviation: float = Field(ge=0.0)
    mean_position_deviation: float = Field(ge=0.0)
    mean_abs_steer: float = Field(ge=0.0)
    mean_abs_accel: float = Field(ge=0.0)
    min_distance: float = Field(ge=0.0)


class VerifyResult(BaseModel):
    """Resultado de uma suíte de propriedades"""
    name: str
    passed: bool
    worst_residual: float
    threshold: float
    draws: int
    elapsed_s: float

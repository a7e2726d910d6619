"""
Utilitários: exceções, validadores, dinâmica, custos e E/S de tabelas

Apenas exceções e validadores são reexportados aqui; dynamics e costs
dependem de game.models e são importados pelos seus módulos.
"""

from .exceptions import (
    ConfigurationError,
    InfeasibleControlError,
    PreconditionError,
    SolverStallError,
    SynchronizationError,
)
from .validators import (
    validate_branching_step,
    validate_diagonal_weights,
    validate_joint_table,
    validate_probability_vector,
)

__all__ = [
    'ConfigurationError',
    'InfeasibleControlError',
    'PreconditionError',
    'SolverStallError',
    'SynchronizationError',
    'validate_branching_step',
    'validate_diagonal_weights',
    'validate_joint_table',
    'validate_probability_vector',
]

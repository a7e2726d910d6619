"""
Agentes de vértice do solver distribuído (um por type-player)
"""
from .consensus import DualConsensusState, EdgeLayout, consensus_iteration
from .lqr import FeedbackPolicy, TrajectoryDelta, riccati_solve
from .vertex_agent import AdmmVertexState, VertexAgent

__all__ = [
    'AdmmVertexState',
    'DualConsensusState',
    'EdgeLayout',
    'FeedbackPolicy',
    'TrajectoryDelta',
    'VertexAgent',
    'consensus_iteration',
    'riccati_solve',
]

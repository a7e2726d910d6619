"""
Núcleo do jogo Bayesiano em forma de agente

Só os tipos são reexportados aqui: utils.costs importa game.models, e
game.potential importa utils.costs.
"""
from .models import BeliefPrior, GameSpec, JointStrategy, Trajectory, TypePlayer

__all__ = ['BeliefPrior', 'GameSpec', 'JointStrategy', 'Trajectory', 'TypePlayer']

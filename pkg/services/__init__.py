"""
Services package - Solver, oráculos, cenários e simulação
"""
from .solver_service import SolveResult, solve

__all__ = ['SolveResult', 'solve']

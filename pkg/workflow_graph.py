"""
LangGraph Workflow - Orquestra uma simulação em horizonte retrocedente
"""
import logging
from functools import lru_cache
from typing import Any, Dict, List, Mapping, TypedDict

import numpy as np
from langgraph.graph import END, StateGraph

from services.simulation_service import (
    Belief,
    ClosedLoopContext,
    execute_controls,
    observe,
    plan_ego,
    plan_others,
)

logger = logging.getLogger(__name__)


class ClosedLoopState(TypedDict):
    """
    Estado do workflow de malha fechada
    """
    context: ClosedLoopContext
    states: Dict[int, np.ndarray]
    belief: Belief
    belief_history: List[Dict[int, List[float]]]
    others_warm: Dict[Any, np.ndarray]
    ego_warm: Dict[str, Dict[Any, np.ndarray]]
    plans: Dict[int, np.ndarray]
    predictions: Dict[int, np.ndarray]
    step: int
    cycle: int
    trace: List[dict]
    status: str


def plan_others_node(state: ClosedLoopState) -> ClosedLoopState:
    """
    Nó que planeja os rivais (NE com tipos verdadeiros)
    """
    plans, warm = plan_others(state['context'], state['states'], state['others_warm'])
    state['plans'] = plans
    state['others_warm'] = warm
    state['status'] = 'others_planned'
    return state


def plan_ego_node(state: ClosedLoopState) -> ClosedLoopState:
    """
    Nó que planeja o ego segundo a configuração (MLE / BNE / *-Update)
    """
    context = state['context']
    controls, predictions, warm = plan_ego(context, state['states'], state['belief'], state['ego_warm'])
    state['plans'] = {**state['plans'], context.ego: controls}
    state['predictions'] = predictions
    state['ego_warm'] = warm
    state['status'] = 'planned'
    return state


def execute_node(state: ClosedLoopState) -> ClosedLoopState:
    """
    Nó que executa os primeiros passos dos planos
    """
    states, rows, executed = execute_controls(state['context'], state['states'], state['plans'], state['step'])
    state['states'] = states
    state['trace'] = state['trace'] + rows
    state['step'] = state['step'] + executed
    state['status'] = 'executed'
    return state


def observe_node(state: ClosedLoopState) -> ClosedLoopState:
    """
    Nó que atualiza a crença sobre os rivais
    """
    belief = observe(state['context'], state['belief'], state['states'], state['predictions'])
    state['belief'] = belief
    state['belief_history'] = state['belief_history'] + [
        {agent: values.tolist() for agent, values in belief.as_dict().items()}
    ]
    state['cycle'] = state['cycle'] + 1
    state['status'] = 'observed'
    logger.debug("ciclo %d concluído (passo %d)", state['cycle'], state['step'])
    return state


def should_continue(state: ClosedLoopState) -> str:
    """
    Determina se há mais um ciclo de planejamento
    """
    if state['step'] >= state['context'].total_steps:
        return END
    return 'plan_others'


@lru_cache(maxsize=1)
def create_workflow_graph():
    """
    Cria o grafo de malha fechada usando LangGraph

    Fluxo de um ciclo:
    1. plan_others -> Rivais resolvem o jogo sem incerteza
    2. plan_ego -> Ego resolve o jogo da configuração
    3. execute -> Executa replan_every passos de cada plano
    4. observe -> Filtro Bayesiano (apenas nas configurações *-Update)
    """
    workflow = StateGraph(ClosedLoopState)

    workflow.add_node("plan_others", plan_others_node)
    workflow.add_node("plan_ego", plan_ego_node)
    workflow.add_node("execute", execute_node)
    workflow.add_node("observe", observe_node)

    workflow.set_entry_point("plan_others")

    workflow.add_edge("plan_others", "plan_ego")
    workflow.add_edge("plan_ego", "execute")
    workflow.add_edge("execute", "observe")
    workflow.add_conditional_edges("observe", should_continue)

    return workflow.compile()


def run_closed_loop(context: ClosedLoopContext, initial_states: Mapping[int, np.ndarray], belief: Belief) -> ClosedLoopState:
    """
    Executa uma simulação completa através do workflow

    Args:
        context: Cenário, configuração e tipos verdadeiros
        initial_states: Estado inicial de cada agente
        belief: Crença inicial do ego sobre os rivais

    Returns:
        Estado final (traço, histórico de crenças)
    """
    workflow = create_workflow_graph()

    initial_state: ClosedLoopState = {
        'context': context,
        'states': {agent: np.asarray(x, dtype=float) for agent, x in initial_states.items()},
        'belief': belief,
        'belief_history': [],
        'others_warm': {},
        'ego_warm': {},
        'plans': {},
        'predictions': {},
        'step': 0,
        'cycle': 0,
        'trace': [],
        'status': 'pending',
    }

    # quatro nós por ciclo
    limit = 4 * context.n_cycles + 10
    return workflow.invoke(initial_state, config={'recursion_limit': limit})

"""
Fixtures compartilhadas: jogos pequenos sorteados e cenários embarcados
"""
import numpy as np
import pytest

from game.models import BeliefPrior, CollisionSpec, CostWeights, GameSpec, TypePlayer
from services.bench_service import random_game, random_strategy
from services.scenario_service import reference_trajectory
from utils.scenario_loader import get_default_scenario

HORIZON = 6
DT = 0.1
WHEELBASE = 2.5


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_game(rng):
    return random_game(rng, n_agents=3, max_types=2, horizon=4)


@pytest.fixture
def small_strategy(rng, small_game):
    return random_strategy(rng, small_game)


@pytest.fixture
def toy_cfg():
    return get_default_scenario("toy")


def make_game(
    initial_states,
    velocities,
    marginals=None,
    horizon=HORIZON,
    d_safe=3.0,
    Q=(0.0, 1.0, 0.0, 2.0),
    R=(1.0, 0.1),
    lanes=None,
):
    """
    Jogo determinístico: agente i parte de initial_states[i] e tem um tipo
    por v_ref em velocities[i]
    """
    players, weights, prior = [], {}, {}
    for agent, (x0, v_types) in enumerate(zip(initial_states, velocities)):
        lane = None if lanes is None else lanes[agent]
        for type_index, v_ref in enumerate(v_types):
            players.append(
                TypePlayer(
                    agent=agent,
                    type_index=type_index,
                    reference=reference_trajectory(x0, v_ref, horizon, DT, lane),
                    initial_state=np.asarray(x0, dtype=float),
                )
            )
            weights[(agent, type_index)] = CostWeights(Q=Q, R=R)
        if marginals is None or marginals[agent] is None:
            prior[agent] = np.full(len(v_types), 1.0 / len(v_types))
        else:
            prior[agent] = np.asarray(marginals[agent], dtype=float)
    return GameSpec(
        players=tuple(players),
        prior=BeliefPrior.independent(prior),
        horizon=horizon,
        dt=DT,
        weights=weights,
        collision=CollisionSpec(d_safe=d_safe, beta=1.4),
        wheelbase=WHEELBASE,
    )


@pytest.fixture
def merging_pair():
    """Dois agentes lado a lado, o segundo com dois tipos"""
    return make_game(
        initial_states=[[0.0, 0.0, 0.0, 2.0], [0.0, 2.0, 0.0, 2.0]],
        velocities=[[2.0], [2.5, 1.5]],
        lanes=[0.0, 0.0],
    )

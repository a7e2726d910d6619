import numpy as np
import pytest

from agents.consensus import (
    DualConsensusState,
    EdgeLayout,
    consensus_iteration,
    consensus_residual,
    outgoing_messages,
    scatter,
    selector_apply,
)
from utils.exceptions import ConfigurationError, SynchronizationError

SIGMA = 1.0
RHO = 1.0


def scalar_subproblem(a, b, q):
    """min a X² + b X + (q X + r)² / (2(σ+ρ)) em forma fechada"""

    def solve(r):
        scale = SIGMA + RHO
        x = -(b + q * r / scale) / (2.0 * a + q * q / scale)
        return x, q * x

    return solve


def run_toy(params, l, iterations):
    """
    Dois vértices escalares numa aresta:
    min a1 X1² + b1 X1 + a2 X2² + b2 X2 + (q1 X1 + q2 X2 + l)²
    """
    layouts = {"u": EdgeLayout(neighbors=("v",), width=1), "v": EdgeLayout(neighbors=("u",), width=1)}
    states = {name: DualConsensusState.zeros((1,)) for name in layouts}
    solutions = {}
    lambda_sums = []
    for _ in range(iterations):
        outboxes = {name: outgoing_messages(layouts[name], states[name].y) for name in layouts}
        inbox = {"u": {"v": outboxes["v"]["u"]}, "v": {"u": outboxes["u"]["v"]}}
        for name, (a, b, q) in params.items():
            states[name], solutions[name], _ = consensus_iteration(
                states[name], layouts[name], inbox[name], scalar_subproblem(a, b, q), np.array([l]), SIGMA, RHO
            )
        lambda_sums.append(abs(float(states["u"].lam[0] + states["v"].lam[0])))
    return solutions, states, lambda_sums


def test_toy_problem_reaches_centralized_optimum():
    params = {"u": (1.0, -2.0, 1.0), "v": (2.0, 1.0, -1.0)}
    l = 0.5
    (a1, b1, q1), (a2, b2, q2) = params["u"], params["v"]
    # gradiente nulo do problema conjunto
    H = np.array([[2 * a1 + 2 * q1 * q1, 2 * q1 * q2], [2 * q1 * q2, 2 * a2 + 2 * q2 * q2]])
    g = np.array([b1 + 2 * q1 * l, b2 + 2 * q2 * l])
    expected = np.linalg.solve(H, -g)

    solutions, _, _ = run_toy(params, l, 3000)
    np.testing.assert_allclose([float(solutions["u"][0]), float(solutions["v"][0])], expected, atol=1e-6)


def test_multipliers_sum_to_zero_on_every_iteration():
    _, _, lambda_sums = run_toy({"u": (1.0, 0.3, 2.0), "v": (0.5, -1.0, 1.5)}, -1.0, 200)
    assert max(lambda_sums) <= 1e-12


def test_copies_agree_at_convergence():
    _, states, _ = run_toy({"u": (1.0, -2.0, 1.0), "v": (2.0, 1.0, -1.0)}, 0.5, 3000)
    layout = EdgeLayout(neighbors=("v",), width=1)
    residual = consensus_residual(layout, states["u"].y, {"v": states["v"].y})
    assert residual <= 1e-6


def test_missing_message_is_a_synchronization_error():
    layout = EdgeLayout(neighbors=("v", "w"), width=1)
    state = DualConsensusState.zeros((2,))
    with pytest.raises(SynchronizationError):
        consensus_iteration(state, layout, {"v": np.zeros(1)}, scalar_subproblem(1.0, 0.0, 1.0), np.zeros(2), SIGMA, RHO)


def test_selector_and_scatter_are_adjoint():
    layout = EdgeLayout(neighbors=(1, 2, 3), width=2)
    stacked = np.arange(12.0).reshape(2, 6)
    np.testing.assert_array_equal(selector_apply(layout, 2, stacked), [[2.0, 3.0], [8.0, 9.0]])
    values = np.array([[1.0, -1.0], [2.0, -2.0]])
    assert np.sum(selector_apply(layout, 3, stacked) * values) == pytest.approx(np.sum(stacked * scatter(layout, 3, values)))


def test_layout_requires_sorted_neighbors():
    with pytest.raises(ConfigurationError):
        EdgeLayout(neighbors=(2, 1))
    with pytest.raises(ConfigurationError):
        EdgeLayout(neighbors=(1, 2)).slice_of(5)

"""
Suítes de verificação e benchmarks usados pela CLI

As suítes sorteiam instâncias pequenas com um gerador semeado e comparam
cada identidade ou gradiente contra uma avaliação independente (diferenças
finitas, enumeração ou KKT denso). Os benchmarks medem medianas de tempo
de parede; nenhuma razão de tempo é imposta aqui, apenas reportada.
"""
import logging
import time
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from game.contingency import (
    ContingencyPerturbation,
    Hypothesis,
    HypothesisSet,
    build_contingency_game,
    contingency_identity_residual,
)
from game.graph import build_interaction_graph
from game.models import (
    BeliefPrior,
    CollisionSpec,
    ContingencyConfig,
    CostWeights,
    GameSpec,
    JointStrategy,
    Trajectory,
    TypePlayer,
)
from game.potential import bayesian_potential, potential_identity_residual
from schemas import ScenarioConfig, SolverParams, VerifyResult
from services.oracle_service import build_convexified_problem, centralized_solve, dense_qp_solve
from services.scenario_service import build_contingency_from_config, build_game, reference_trajectory, with_samples_per_mode
from services.solver_service import initial_strategy, solve, solve_inner
from utils.costs import collision_cost, convexify_coupling, convexify_ego, ego_cost
from utils.dynamics import linearize, rollout, step

logger = logging.getLogger(__name__)

POTENTIAL_THRESHOLD = 1e-8
JACOBIAN_THRESHOLD = 1e-5
GRADIENT_THRESHOLD = 1e-4
INNER_THRESHOLD = 1e-4
LAMBDA_SUM_THRESHOLD = 1e-10

CONTINGENCY_VELOCITIES = (0.0, 0.25, 0.5, 0.75, 1.0)


# --- geradores de instâncias -------------------------------------------------


def random_marginal(rng: np.random.Generator, size: int) -> np.ndarray:
    """Ponto do simplex afastado das bordas"""
    return 0.5 * rng.dirichlet(np.ones(size)) + 0.5 / size


def random_game(
    rng: np.random.Generator,
    n_agents: int = 2,
    max_types: int = 3,
    horizon: int = 5,
    dt: float = 0.1,
    wheelbase: float = 2.5,
    d_safe: float = 4.0,
) -> GameSpec:
    """
    Jogo pequeno com agentes próximos (colisões ativas) e prior independente
    """
    players, weights, marginals = [], {}, {}
    for agent in range(n_agents):
        x0 = np.array([rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-np.pi, np.pi), rng.uniform(0.5, 3.0)])
        n_types = int(rng.integers(1, max_types + 1))
        for type_index in range(n_types):
            players.append(
                TypePlayer(
                    agent=agent,
                    type_index=type_index,
                    reference=reference_trajectory(x0, rng.uniform(0.5, 4.0), horizon, dt),
                    initial_state=x0,
                )
            )
            weights[(agent, type_index)] = CostWeights(Q=rng.uniform(0.1, 2.0, 4), R=rng.uniform(0.1, 2.0, 2))
        marginals[agent] = random_marginal(rng, n_types)
    return GameSpec(
        players=tuple(players),
        prior=BeliefPrior.independent(marginals),
        horizon=horizon,
        dt=dt,
        weights=weights,
        collision=CollisionSpec(d_safe=d_safe, beta=1.4),
        wheelbase=wheelbase,
    )


def random_controls(rng: np.random.Generator, horizon: int) -> np.ndarray:
    return np.column_stack([rng.uniform(-0.3, 0.3, horizon), rng.uniform(-1.0, 1.0, horizon)])


def random_trajectory(rng: np.random.Generator, game: GameSpec, player: TypePlayer) -> Trajectory:
    return rollout(player.initial_state, random_controls(rng, game.horizon), game.dt, game.wheelbase)


def random_strategy(rng: np.random.Generator, game: GameSpec) -> JointStrategy:
    return JointStrategy({player.key: random_trajectory(rng, game, player) for player in game.players})


def random_hypotheses(rng: np.random.Generator, base: GameSpec, n_hypotheses: int) -> HypothesisSet:
    probabilities = random_marginal(rng, n_hypotheses)
    hypotheses = []
    for theta in range(n_hypotheses):
        references = {
            agent: reference_trajectory(
                base.types_of(agent)[0].initial_state, rng.uniform(0.5, 4.0), base.horizon, base.dt
            )
            for agent in base.agents
        }
        hypotheses.append(Hypothesis(probability=float(probabilities[theta]), references=references, label=f"θ={theta}"))
    return HypothesisSet(tuple(hypotheses))


# --- suítes ------------------------------------------------------------------


def _result(name: str, worst: float, threshold: float, draws: int, started: float) -> VerifyResult:
    passed = bool(worst <= threshold)
    result = VerifyResult(
        name=name,
        passed=passed,
        worst_residual=float(worst),
        threshold=threshold,
        draws=draws,
        elapsed_s=time.perf_counter() - started,
    )
    log = logger.info if passed else logger.warning
    log("Suíte %s: %s (pior resíduo %.3g, limite %.1g)", name, "ok" if passed else "FALHOU", worst, threshold)
    return result


def verify_potential_identity(rng: np.random.Generator, draws: int) -> VerifyResult:
    """|ΔP − p(t_i) ΔC_{t_i}| ≤ 1e-8 (1 + |ΔP|) para desvios unilaterais sorteados"""
    started = time.perf_counter()
    worst = 0.0
    for _ in range(draws):
        game = random_game(rng, n_agents=int(rng.integers(1, 5)), horizon=int(rng.integers(1, 11)))
        X = random_strategy(rng, game)
        player = game.players[int(rng.integers(len(game.players)))]
        alternative = random_trajectory(rng, game, player)
        residual = potential_identity_residual(game, X, player.key, alternative)
        change = bayesian_potential(game, X) - bayesian_potential(game, X.replace({player.key: alternative}))
        worst = max(worst, residual / (1.0 + abs(change)))
    return _result("potential_identity", worst, POTENTIAL_THRESHOLD, draws, started)


def verify_contingency_identity(rng: np.random.Generator, draws: int) -> VerifyResult:
    """Mesma identidade no jogo de contingência, desviando a pilha do ego ou um (i, θ)"""
    started = time.perf_counter()
    worst = 0.0
    for _ in range(draws):
        base = random_game(rng, n_agents=int(rng.integers(2, 4)), max_types=1, horizon=int(rng.integers(1, 11)))
        H = random_hypotheses(rng, base, int(rng.integers(1, 4)))
        cfg = ContingencyConfig(
            ego_agent=0, t_b=int(rng.integers(0, base.horizon + 1)), q_contingency=rng.uniform(0.1, 50.0, 4)
        )
        game, _ = build_contingency_game(H, cfg, base)
        X = random_strategy(rng, game)
        if rng.random() < 0.5:
            targets = [player for player in game.types_of(0)]
        else:
            agent = int(rng.integers(1, len(game.agents)))
            targets = [game.types_of(agent)[int(rng.integers(len(H)))]]
        perturbation = ContingencyPerturbation({player.key: random_trajectory(rng, game, player) for player in targets})
        residual = contingency_identity_residual(H, cfg, base, X, perturbation)
        change = bayesian_potential(game, X) - bayesian_potential(game, X.replace(perturbation.trajectories))
        worst = max(worst, residual / (1.0 + abs(change)))
    return _result("contingency_identity", worst, POTENTIAL_THRESHOLD, draws, started)


def _random_state_control(rng: np.random.Generator):
    x = np.array([rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-np.pi, np.pi), rng.uniform(0.5, 5.0)])
    u = np.array([rng.uniform(-0.5, 0.5), rng.uniform(-2.0, 2.0)])
    return x, u


def verify_jacobians(rng: np.random.Generator, points: int, dt: float = 0.1, wheelbase: float = 2.5) -> VerifyResult:
    """Jacobianos analíticos contra diferenças finitas centrais de step()"""
    started = time.perf_counter()
    h = 1e-6
    worst = 0.0
    for _ in range(points):
        x, u = _random_state_control(rng)
        dynamics = linearize(rollout(x, u[None, :], dt, wheelbase), dt, wheelbase)
        A_fd = np.empty((4, 4))
        B_fd = np.empty((4, 2))
        for k in range(4):
            e = np.zeros(4)
            e[k] = h
            A_fd[:, k] = (step(x + e, u, dt, wheelbase) - step(x - e, u, dt, wheelbase)) / (2 * h)
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            B_fd[:, k] = (step(x, u + e, dt, wheelbase) - step(x, u - e, dt, wheelbase)) / (2 * h)
        error = max(np.max(np.abs(dynamics.A[0] - A_fd)), np.max(np.abs(dynamics.B[0] - B_fd)))
        scale = 1.0 + max(np.max(np.abs(A_fd)), np.max(np.abs(B_fd)))
        worst = max(worst, error / scale)
    return _result("jacobians", worst, JACOBIAN_THRESHOLD, points, started)


def _fd_state_gradient(cost: Callable[[np.ndarray], float], states: np.ndarray, h: float = 1e-6) -> np.ndarray:
    gradient = np.zeros_like(states)
    for index in np.ndindex(*states.shape):
        plus, minus = states.copy(), states.copy()
        plus[index] += h
        minus[index] -= h
        gradient[index] = (cost(plus) - cost(minus)) / (2 * h)
    return gradient


def verify_gauss_newton_gradients(rng: np.random.Generator, points: int) -> VerifyResult:
    """
    Gradiente em δX = 0 dos modelos convexificados (colisão e custo próprio)
    contra diferenças finitas dos custos verdadeiros
    """
    started = time.perf_counter()
    worst = 0.0
    for _ in range(points):
        game = random_game(rng, n_agents=2, max_types=1, horizon=3, d_safe=6.0)
        X = random_strategy(rng, game)
        a, b = game.players
        traj_a, traj_b = X[a.key], X[b.key]
        coupling = convexify_coupling(traj_a, traj_b, game.footprint, game.collision)
        grad_a, grad_b = coupling.gradients()

        def cost_a(states):
            return collision_cost(Trajectory(states, traj_a.controls), traj_b, game.footprint, game.collision)

        def cost_b(states):
            return collision_cost(traj_a, Trajectory(states, traj_b.controls), game.footprint, game.collision)

        fd_a = _fd_state_gradient(cost_a, np.array(traj_a.states))
        fd_b = _fd_state_gradient(cost_b, np.array(traj_b.states))
        error = max(np.max(np.abs(grad_a - fd_a)), np.max(np.abs(grad_b - fd_b)))
        worst = max(worst, error / (1.0 + max(np.max(np.abs(fd_a)), np.max(np.abs(fd_b)))))

        weights = game.weights[a.key]
        model = convexify_ego(traj_a, a.reference, weights.Q, weights.R)
        fd_ego = _fd_state_gradient(
            lambda states: ego_cost(Trajectory(states, traj_a.controls), a.reference, weights.Q, weights.R),
            np.array(traj_a.states),
        )
        error = np.max(np.abs(model.state_gradient() - fd_ego))
        worst = max(worst, error / (1.0 + np.max(np.abs(fd_ego))))
    return _result("gauss_newton_gradients", worst, GRADIENT_THRESHOLD, points, started)


def verify_inner_problem(
    rng: np.random.Generator, instances: int, max_iterations: int = 3000
) -> List[VerifyResult]:
    """
    Solução interna do ADMM contra o KKT denso, e Σ λ por aresta em todas as iterações

    Returns:
        [resultado de exatidão, resultado de Σλ]
    """
    started = time.perf_counter()
    worst_objective = 0.0
    worst_lambda = 0.0
    params = SolverParams()
    for _ in range(instances):
        game = random_game(rng, n_agents=2, max_types=2, horizon=int(rng.integers(1, 6)))
        X = random_strategy(rng, game)
        lambda_sums: List[float] = []
        deltas, _ = solve_inner(
            game,
            X,
            params,
            iterations=max_iterations,
            inner_tolerance=1e-9,
            on_iteration=lambda residuals: lambda_sums.append(residuals["lambda_sum"]),
        )
        problem = build_convexified_problem(game, build_interaction_graph(game), X)
        exact = problem.objective(dense_qp_solve(problem))
        distributed = problem.objective(deltas)
        worst_objective = max(worst_objective, abs(distributed - exact) / (1.0 + abs(exact)))
        worst_lambda = max([worst_lambda] + lambda_sums)
    return [
        _result("inner_exactness", worst_objective, INNER_THRESHOLD, instances, started),
        _result("lambda_sum", worst_lambda, LAMBDA_SUM_THRESHOLD, instances, started),
    ]


def run_verify_suites(cfg: ScenarioConfig, seed: Optional[int] = None) -> List[VerifyResult]:
    """Executa todas as suítes com os tamanhos de cfg.verify"""
    settings = cfg.verify
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    results = [
        verify_potential_identity(rng, settings.potential_draws),
        verify_contingency_identity(rng, settings.contingency_draws),
        verify_jacobians(rng, settings.jacobian_points),
        verify_gauss_newton_gradients(rng, settings.gradient_points),
    ]
    results.extend(verify_inner_problem(rng, settings.inner_instances))
    return results


# --- benchmarks --------------------------------------------------------------


def _median_time(fn: Callable[[], object], repetitions: int) -> float:
    samples = []
    for _ in range(repetitions):
        started = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - started)
    return float(np.median(samples))


def bench_scalability(
    cfg: ScenarioConfig,
    samples_per_mode: Sequence[int] = (1, 2, 3, 4, 5, 6),
    repetitions: int = 5,
    workers: int = 4,
    params: Optional[SolverParams] = None,
) -> pd.DataFrame:
    """
    Medianas de tempo por número de type-players

    Returns:
        Linhas = variante (centralized, distributed-1, distributed-W),
        colunas = número de type-players
    """
    params = params or cfg.solver
    rows: List[Dict[str, object]] = []
    for k in samples_per_mode:
        game = build_game(with_samples_per_mode(cfg, k)).game
        n_players = len(game.players)
        variants = {
            "centralized": lambda: centralized_solve(game, params=params),
            "distributed-1": lambda: solve(game, params=params, workers=1),
            f"distributed-{workers}": lambda: solve(game, params=params, workers=workers),
        }
        for variant, fn in variants.items():
            median = _median_time(fn, repetitions)
            rows.append({"variant": variant, "type_players": n_players, "median_s": median})
            logger.info("bench %s com %d type-players: %.4f s", variant, n_players, median)
    table = pd.DataFrame(rows)
    return table.pivot(index="variant", columns="type_players", values="median_s").reindex(
        ["centralized", "distributed-1", f"distributed-{workers}"]
    )


def bench_contingency(
    cfg: ScenarioConfig,
    hypothesis_counts: Sequence[int] = (2, 4, 6, 8, 10),
    repetitions: int = 5,
    workers: int = 1,
    params: Optional[SolverParams] = None,
) -> pd.DataFrame:
    """
    Tempo do solve distribuído do jogo de contingência por número de hipóteses

    As hipóteses vêm das velocidades alvo {0, 0.25, ..., 1} nas duas faixas,
    com probabilidade uniforme.
    """
    params = params or cfg.solver
    lanes = len(cfg.contingency.lanes)
    rows = []
    for count in hypothesis_counts:
        velocities = CONTINGENCY_VELOCITIES[: max(1, count // lanes)]
        game, graph, H = build_contingency_from_config(cfg, p_up=None, velocities=velocities)
        median = _median_time(lambda: solve(game, graph=graph, params=params, workers=workers), repetitions)
        rows.append({"hypotheses": len(H), "median_s": median})
        logger.info("bench contingência com %d hipóteses: %.4f s", len(H), median)
    return pd.DataFrame(rows)


def bench_cost_parity(cfg: ScenarioConfig, params: Optional[SolverParams] = None, workers: int = 1) -> Dict[str, float]:
    """Potencial final do solver distribuído e do oráculo centralizado"""
    params = params or cfg.solver
    game = build_game(cfg).game
    init = initial_strategy(game)
    distributed = solve(game, init=init, params=params, workers=workers)
    centralized = centralized_solve(game, init=init, params=params)
    gap = abs(distributed.potential - centralized.potential) / max(abs(centralized.potential), 1e-12)
    return {"distributed": distributed.potential, "centralized": centralized.potential, "relative_gap": gap}

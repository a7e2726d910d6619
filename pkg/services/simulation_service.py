"""
Simulação de cenários

- open_loop_run: um solve do jogo do cenário, com saída em CSV
- bayes_update: filtro Bayesiano discreto sobre os tipos de um rival
- closed_loop_run: horizonte retrocedente nas configurações MLE, BNE,
  MLE-Update e BNE-Update (o laço é um grafo langgraph, ver workflow_graph)
- monte_carlo: estudo com condições iniciais e tipos verdadeiros sorteados

Os agentes rivais seguem o NE do jogo sem incerteza com os seus tipos
verdadeiros; só o ego planeja sob incerteza.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from game.models import GameSpec, JointStrategy, VertexKey
from game.potential import best_type
from schemas import IterationRecord, RunMetrics, ScenarioConfig, SolverParams
from services.scenario_service import ScenarioGame, agent_types, build_game, reference_trajectory
from services.solver_service import SolveResult, initial_strategy, solve
from utils.dynamics import rollout
from utils.exceptions import ConfigurationError, SolverStallError
from utils.table_processor import METRICS_COLUMNS, TRAJECTORY_COLUMNS, summarize_by, trajectory_table, write_table

logger = logging.getLogger(__name__)

SETTINGS = ("MLE", "BNE", "MLE-Update", "BNE-Update")


@dataclass(frozen=True, eq=False)
class Belief:
    """Vetor de probabilidades sobre os tipos amostrados de cada rival"""

    probabilities: Mapping[int, np.ndarray]

    def __post_init__(self) -> None:
        checked = {}
        for agent, values in sorted(self.probabilities.items()):
            arr = np.array(values, dtype=float)
            if np.any(arr < 0.0) or not math.isclose(arr.sum(), 1.0, abs_tol=1e-9):
                raise ConfigurationError(f"Crença do agente {agent} inválida: {arr.tolist()}")
            arr.setflags(write=False)
            checked[agent] = arr
        object.__setattr__(self, "probabilities", checked)

    def __getitem__(self, agent: int) -> np.ndarray:
        return self.probabilities[agent]

    def most_likely(self, agent: int) -> int:
        return int(np.argmax(self.probabilities[agent]))

    def as_dict(self) -> Dict[int, np.ndarray]:
        return dict(self.probabilities)


def bayes_update(
    prior: Sequence[float],
    observed: Sequence[float],
    predicted: np.ndarray,
    obs_std: float,
    floor: float = 1e-4,
) -> np.ndarray:
    """
    Posterior ∝ prior × exp(−‖o − ô_k‖² / 2σ²)

    Args:
        prior: Probabilidades atuais dos tipos
        observed: Posição observada do rival (p_x, p_y)
        predicted: Posição prevista por tipo (K x 2)
        obs_std: σ da observação
        floor: Piso aplicado antes da renormalização

    Returns:
        Posterior normalizada (o prior, se todas as verossimilhanças zerarem)
    """
    prior = np.asarray(prior, dtype=float)
    predicted = np.atleast_2d(np.asarray(predicted, dtype=float))
    if predicted.shape[0] != prior.size:
        raise ConfigurationError(f"{predicted.shape[0]} previsões para {prior.size} tipos")
    squared = np.sum((predicted - np.asarray(observed, dtype=float)[None, :]) ** 2, axis=1)
    likelihood = np.exp(-squared / (2.0 * obs_std**2))
    posterior = prior * likelihood
    total = posterior.sum()
    if not total > 0.0:
        logger.warning("Verossimilhanças nulas para todos os tipos; mantendo o prior")
        return prior.copy()
    posterior = np.maximum(posterior / total, floor)
    return posterior / posterior.sum()


@dataclass
class OpenLoopResult:
    scenario: ScenarioGame
    result: SolveResult
    table: pd.DataFrame


def open_loop_run(
    cfg: ScenarioConfig,
    belief: Optional[Mapping[int, Sequence[float]]] = None,
    params: Optional[SolverParams] = None,
    workers: int = 1,
    out_dir: Optional[Path] = None,
    diagnostics_sink: Optional[Callable[[IterationRecord], None]] = None,
) -> OpenLoopResult:
    """
    Resolve o jogo do cenário uma vez

    Com `out_dir`, grava trajectory.csv (colunas de TRAJECTORY_COLUMNS).
    """
    scenario = build_game(cfg, belief=belief)
    result = solve(scenario.game, params=params or cfg.solver, workers=workers, diagnostics_sink=diagnostics_sink)
    table = trajectory_table(scenario.game, result.strategy)
    if out_dir is not None:
        write_table(table, Path(out_dir) / "trajectory.csv", TRAJECTORY_COLUMNS)
    return OpenLoopResult(scenario=scenario, result=result, table=table)


def mean_longitudinal_speed(strategy: JointStrategy, key: VertexKey) -> float:
    return float(np.mean(strategy[key].states[:, 3]))


# --- malha fechada -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ClosedLoopContext:
    """
    Dados fixos de uma simulação em malha fechada

    Attributes:
        cfg: Cenário
        setting: MLE, BNE, MLE-Update ou BNE-Update
        true_velocities: v_ref verdadeiro de cada rival
        params: Parâmetros do solver
        workers: Pool do solver
    """

    cfg: ScenarioConfig
    setting: str
    true_velocities: Mapping[int, float]
    params: SolverParams
    workers: int = 1

    def __post_init__(self) -> None:
        if self.setting not in SETTINGS:
            raise ConfigurationError(f"Configuração desconhecida: {self.setting}. Use uma de {SETTINGS}")

    @property
    def ego(self) -> int:
        return self.cfg.ego_index

    @property
    def rivals(self) -> List[int]:
        return [index for index in range(len(self.cfg.agents)) if index != self.ego]

    @property
    def total_steps(self) -> int:
        return int(round(self.cfg.closed_loop.duration / self.cfg.dt))

    @property
    def replan_every(self) -> int:
        return self.cfg.closed_loop.replan_every

    @property
    def n_cycles(self) -> int:
        return math.ceil(self.total_steps / self.replan_every)

    @property
    def updates_belief(self) -> bool:
        return self.setting.endswith("-Update")

    @property
    def plans_with_mle(self) -> bool:
        return self.setting.startswith("MLE")


def prior_belief(cfg: ScenarioConfig, rivals: Sequence[int]) -> Belief:
    return Belief({agent: agent_types(cfg.agents[agent], cfg.samples_per_mode)[1] for agent in rivals})


def shift_controls(strategy: JointStrategy, shift: int) -> Dict[VertexKey, np.ndarray]:
    """Warm start do próximo ciclo: controles deslocados, repetindo o último"""
    warm = {}
    for key, traj in strategy.items():
        controls = traj.controls
        shifted = np.concatenate([controls[shift:], np.repeat(controls[-1:], min(shift, controls.shape[0]), axis=0)])
        warm[key] = shifted[: controls.shape[0]]
    return warm


def _solve_or_abort(game: GameSpec, warm: Mapping[VertexKey, np.ndarray], context: ClosedLoopContext, what: str) -> SolveResult:
    result = solve(game, init=initial_strategy(game, warm), params=context.params, workers=context.workers)
    if result.stalled:
        raise SolverStallError(f"Solver parado ao planejar {what} ({context.setting})")
    return result


def plan_others(
    context: ClosedLoopContext, states: Mapping[int, np.ndarray], warm: Mapping[VertexKey, np.ndarray]
) -> Tuple[Dict[int, np.ndarray], Dict[VertexKey, np.ndarray]]:
    """
    Rivais: NE do jogo sem incerteza com os tipos verdadeiros

    Returns:
        (controles planejados por rival, warm start do próximo ciclo)
    """
    scenario = build_game(context.cfg, fixed_velocities=context.true_velocities, initial_states=states)
    result = _solve_or_abort(scenario.game, warm, context, "rivais")
    plans = {agent: result.strategy[(agent, 0)].controls for agent in context.rivals}
    return plans, shift_controls(result.strategy, context.replan_every)


def _predictions(scenario: ScenarioGame, strategy: JointStrategy, rivals: Sequence[int], steps: int) -> Dict[int, np.ndarray]:
    """Posição de cada tipo de cada rival após `steps` passos do plano"""
    return {
        agent: np.array([strategy[player.key].states[steps, :2] for player in scenario.game.types_of(agent)])
        for agent in rivals
    }


def plan_ego(
    context: ClosedLoopContext,
    states: Mapping[int, np.ndarray],
    belief: Belief,
    warm: Mapping[str, Mapping[VertexKey, np.ndarray]],
) -> Tuple[np.ndarray, Dict[int, np.ndarray], Dict[str, Dict[VertexKey, np.ndarray]]]:
    """
    Plano do ego segundo a configuração

    MLE fixa cada rival no tipo mais provável; BNE resolve o jogo Bayesiano
    completo. Nas configurações com atualização, as previsões para o filtro
    vêm sempre da solução BNE (resolvida à parte em MLE-Update).

    Returns:
        (controles do ego, previsões por rival, warm starts por jogo)
    """
    steps = min(context.replan_every, context.cfg.horizon)
    predictions: Dict[int, np.ndarray] = {}
    new_warm: Dict[str, Dict[VertexKey, np.ndarray]] = {}

    if not context.plans_with_mle or context.updates_belief:
        bne = build_game(context.cfg, belief=belief.as_dict(), initial_states=states)
        bne_result = _solve_or_abort(bne.game, warm.get("BNE", {}), context, "ego (BNE)")
        new_warm["BNE"] = shift_controls(bne_result.strategy, context.replan_every)
        predictions = _predictions(bne, bne_result.strategy, context.rivals, steps)
        chosen = best_type(bne.game, bne_result.strategy, context.ego)
        controls = bne_result.strategy[chosen.key].controls

    if context.plans_with_mle:
        cfg = context.cfg
        fixed = {
            agent: float(agent_types(cfg.agents[agent], cfg.samples_per_mode)[0][belief.most_likely(agent)])
            for agent in context.rivals
            if belief[agent].size > 1
        }
        mle = build_game(context.cfg, fixed_velocities=fixed, initial_states=states)
        mle_result = _solve_or_abort(mle.game, warm.get("MLE", {}), context, "ego (MLE)")
        new_warm["MLE"] = shift_controls(mle_result.strategy, context.replan_every)
        chosen = best_type(mle.game, mle_result.strategy, context.ego)
        controls = mle_result.strategy[chosen.key].controls

    return controls, predictions, new_warm


def execute_controls(
    context: ClosedLoopContext,
    states: Mapping[int, np.ndarray],
    plans: Mapping[int, np.ndarray],
    step: int,
) -> Tuple[Dict[int, np.ndarray], List[dict], int]:
    """
    Executa os primeiros passos de cada plano pela dinâmica não linear

    Returns:
        (novos estados, linhas do traço, passos executados)
    """
    cfg = context.cfg
    n_steps = min(context.replan_every, context.total_steps - step, cfg.horizon)
    rows: List[dict] = []
    new_states = {}
    for agent in sorted(plans):
        controls = np.asarray(plans[agent][:n_steps], dtype=float)
        traj = rollout(states[agent], controls, cfg.dt, cfg.wheelbase)
        for k in range(n_steps):
            x = traj.states[k + 1]
            rows.append(
                {
                    "t": step + k + 1,
                    "agent": agent,
                    "p_x": x[0],
                    "p_y": x[1],
                    "theta": x[2],
                    "v": x[3],
                    "delta": controls[k, 0],
                    "a": controls[k, 1],
                }
            )
        new_states[agent] = traj.states[n_steps]
    return new_states, rows, n_steps


def observe(context: ClosedLoopContext, belief: Belief, states: Mapping[int, np.ndarray], predictions: Mapping[int, np.ndarray]) -> Belief:
    if not context.updates_belief or not predictions:
        return belief
    settings = context.cfg.closed_loop
    updated = belief.as_dict()
    for agent in context.rivals:
        if agent in predictions and updated[agent].size > 1:
            updated[agent] = bayes_update(
                updated[agent], states[agent][:2], predictions[agent], settings.obs_std, settings.belief_floor
            )
    return Belief(updated)


def compute_metrics(context: ClosedLoopContext, initial_states: Mapping[int, np.ndarray], trace: pd.DataFrame) -> RunMetrics:
    """
    ΔV e ΔX do ego em relação à sua referência global (a partir do instante 0),
    |δ| e |a| médios do ego e menor distância ego-rival ao longo da execução
    """
    cfg = context.cfg
    ego_cfg = cfg.agents[context.ego]
    ego = trace[trace["agent"] == context.ego].sort_values("t")
    reference = reference_trajectory(initial_states[context.ego], ego_cfg.v_ref, context.total_steps, cfg.dt, ego_cfg.lane)
    steps = ego["t"].to_numpy()
    positions = ego[["p_x", "p_y"]].to_numpy()
    speed_deviation = np.abs(ego["v"].to_numpy() - ego_cfg.v_ref)
    position_deviation = np.linalg.norm(positions - reference[steps, :2], axis=1)

    min_distance = np.inf
    ego_by_t = ego.set_index("t")[["p_x", "p_y"]]
    for agent in context.rivals:
        rival = trace[trace["agent"] == agent].set_index("t")[["p_x", "p_y"]]
        joined = ego_by_t.join(rival, rsuffix="_r", how="inner")
        gaps = np.hypot(joined["p_x"] - joined["p_x_r"], joined["p_y"] - joined["p_y_r"])
        if len(gaps):
            min_distance = min(min_distance, float(gaps.min()))
    return RunMetrics(
        mean_speed_deviation=float(speed_deviation.mean()),
        mean_position_deviation=float(position_deviation.mean()),
        mean_abs_steer=float(ego["delta"].abs().mean()),
        mean_abs_accel=float(ego["a"].abs().mean()),
        min_distance=float(min_distance if np.isfinite(min_distance) else 0.0),
    )


@dataclass
class ClosedLoopResult:
    metrics: RunMetrics
    trace: pd.DataFrame
    beliefs: List[Dict[int, List[float]]] = field(default_factory=list)


def closed_loop_run(
    cfg: ScenarioConfig,
    setting: str,
    true_velocities: Mapping[int, float],
    initial_states: Optional[Mapping[int, Sequence[float]]] = None,
    params: Optional[SolverParams] = None,
    workers: int = 1,
) -> ClosedLoopResult:
    """
    Simulação em horizonte retrocedente

    Args:
        cfg: Cenário (duração e período de replanejamento em cfg.closed_loop)
        setting: MLE, BNE, MLE-Update ou BNE-Update
        true_velocities: v_ref verdadeiro de cada rival
        initial_states: Estados iniciais (padrão: os do cenário)

    Raises:
        SolverStallError: Se algum solve parar no meio da execução
    """
    from workflow_graph import run_closed_loop

    if cfg.agents[cfg.ego_index].v_ref is None:
        raise ConfigurationError("Agente ego precisa de v_ref na malha fechada", field_path="agents.v_ref")
    context = ClosedLoopContext(
        cfg=cfg,
        setting=setting,
        true_velocities=dict(true_velocities),
        params=params or cfg.solver,
        workers=workers,
    )
    missing = [cfg.agents[agent].name for agent in context.rivals if agent not in context.true_velocities]
    if missing:
        raise ConfigurationError(f"Tipos verdadeiros ausentes para {missing}")
    start = {
        index: np.asarray((initial_states or {}).get(index, agent.initial_state), dtype=float)
        for index, agent in enumerate(cfg.agents)
    }
    logger.info("Malha fechada %s: %d ciclos", setting, context.n_cycles)
    final = run_closed_loop(context, start, prior_belief(cfg, context.rivals))
    trace = pd.DataFrame(final["trace"])
    return ClosedLoopResult(
        metrics=compute_metrics(context, start, trace),
        trace=trace,
        beliefs=final["belief_history"],
    )


# --- Monte Carlo -------------------------------------------------------------


def perturbed_condition(cfg: ScenarioConfig, rng: np.random.Generator) -> ScenarioConfig:
    """
    Condição inicial sorteada: posições ±position_jitter, médias da mistura
    ±mean_jitter e w_1 uniforme (misturas de dois modos)
    """
    settings = cfg.monte_carlo
    agents = []
    for agent in cfg.agents:
        x0 = list(agent.initial_state)
        jitter = rng.uniform(-settings.position_jitter, settings.position_jitter, size=2)
        x0[0] += float(jitter[0])
        x0[1] += float(jitter[1])
        update = {"initial_state": x0}
        if agent.intent is not None:
            means = [m + float(rng.uniform(-settings.mean_jitter, settings.mean_jitter)) for m in agent.intent.means]
            weights = list(agent.intent.weights)
            if len(weights) == 2:
                w1 = float(rng.uniform(*settings.w1_range))
                weights = [w1, 1.0 - w1]
            update["intent"] = agent.intent.model_copy(update={"means": means, "weights": weights})
        agents.append(agent.model_copy(update=update))
    return cfg.model_copy(update={"agents": agents})


def draw_true_velocities(cfg: ScenarioConfig, rng: np.random.Generator) -> Dict[int, float]:
    """v_ref verdadeiro de cada rival sorteado da mistura (ou o v_ref fixo)"""
    draws = {}
    for index, agent in enumerate(cfg.agents):
        if index == cfg.ego_index:
            continue
        if agent.intent is None:
            draws[index] = float(agent.v_ref)
            continue
        mode = int(rng.choice(len(agent.intent.weights), p=np.asarray(agent.intent.weights, dtype=float)))
        draws[index] = float(rng.normal(agent.intent.means[mode], agent.intent.stds[mode]))
    return draws


def _monte_carlo_task(task: Tuple[ScenarioConfig, str, Dict[int, float], int, int]) -> dict:
    cfg, setting, velocities, condition, draw = task
    row = {"condition": condition, "draw": draw, "setting": setting, "failed": False}
    try:
        result = closed_loop_run(cfg, setting, velocities)
        row.update(result.metrics.model_dump())
    except (SolverStallError, ValueError) as e:
        logger.warning("Execução %d/%d (%s) falhou: %s", condition, draw, setting, e)
        row.update({column: np.nan for column in METRICS_COLUMNS[1:]})
        row["failed"] = True
    return row


def monte_carlo(
    cfg: ScenarioConfig,
    settings: Sequence[str] = SETTINGS,
    n_conditions: int = 1,
    n_type_draws: int = 1,
    seed: Optional[int] = None,
    workers: int = 1,
) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Estudo Monte Carlo

    Cada (condição, sorteio) tem seu próprio gerador semeado por
    (seed, condição, sorteio), então os resultados não dependem da ordem
    das configurações nem do número de workers.

    Returns:
        (uma linha por execução, médias por configuração)
    """
    seed = cfg.seed if seed is None else seed
    tasks = []
    for condition in range(n_conditions):
        condition_cfg = perturbed_condition(cfg, np.random.default_rng([seed, condition]))
        for draw in range(n_type_draws):
            velocities = draw_true_velocities(condition_cfg, np.random.default_rng([seed, condition, draw]))
            for setting in settings:
                tasks.append((condition_cfg, setting, velocities, condition, draw))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(_monte_carlo_task, task) for task in tasks]
            rows = [future.result() for future in futures]
    else:
        rows = [_monte_carlo_task(task) for task in tasks]

    runs = pd.DataFrame(rows)
    failures = int(runs["failed"].sum())
    if failures:
        logger.warning("%d de %d execuções falharam", failures, len(runs))
    summary = summarize_by(runs[~runs["failed"]], "setting", METRICS_COLUMNS[1:])
    return runs, summary

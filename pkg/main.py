"""
CLI do solver de jogos Bayesianos potenciais

Subcomandos:
    solve        Resolve o jogo de um cenário (trajectory.csv, diagnostics.csv)
    simulate     Malha fechada ou Monte Carlo (metrics.csv)
    contingency  Jogo de contingência (um plano por hipótese)
    bench        Tempos medianos por número de type-players e de hipóteses
    verify       Suítes de identidades e resíduos

Códigos de saída: 0 sucesso, 1 suíte de verificação falhou,
2 configuração inválida, 3 solver parado.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd
from pydantic import ValidationError

from game.contingency import mean_prebranch_lateral, prebranch_gap, snap_prebranch_controls
from game.models import JointStrategy
from game.potential import potential
from schemas import IterationRecord, ScenarioConfig, SolverParams
from services.bench_service import bench_contingency, bench_scalability, run_verify_suites
from services.scenario_service import build_contingency_from_config
from services.simulation_service import SETTINGS, closed_loop_run, draw_true_velocities, monte_carlo, open_loop_run
from services.solver_service import default_workers, solve
from utils.exceptions import ConfigurationError, SolverStallError
from utils.scenario_loader import get_default_scenario, load_scenario
from utils.table_processor import METRICS_COLUMNS, trajectory_table, write_table

logger = logging.getLogger("bayesgame")

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_STALL = 3

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="Arquivo JSON ou nome de cenário embarcado")
    common.add_argument("--out", type=Path, default=Path("out"), help="Diretório de saída")
    common.add_argument("--workers", type=int, default=None, help="Tamanho do pool (padrão: BAYESGAME_WORKERS)")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--sigma", type=float, default=None)
    common.add_argument("--rho", type=float, default=None)
    common.add_argument("--json-diagnostics", action="store_true", help="Grava diagnostics.jsonl")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="bayes-game", description="Jogos de trajetória Bayesianos potenciais")
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("solve", parents=[common], help="Resolve o jogo do cenário")

    simulate = commands.add_parser("simulate", parents=[common], help="Simulação em malha fechada")
    simulate.add_argument("--setting", choices=list(SETTINGS) + ["all"], default="all")
    simulate.add_argument("--conditions", type=int, default=0, help="Condições iniciais do Monte Carlo (0: uma execução)")
    simulate.add_argument("--draws", type=int, default=1, help="Sorteios de tipos por condição")

    contingency = commands.add_parser("contingency", parents=[common], help="Jogo de contingência")
    contingency.add_argument("--p-up", type=float, default=None, help="Probabilidade das hipóteses da faixa de cima")

    bench = commands.add_parser("bench", parents=[common], help="Tempos medianos")
    bench.add_argument("--samples-per-mode", type=int, nargs="+", default=[1, 2, 3, 4, 5, 6])
    bench.add_argument("--hypotheses", type=int, nargs="+", default=[2, 4, 6, 8, 10])
    bench.add_argument("--repetitions", type=int, default=5)

    commands.add_parser("verify", parents=[common], help="Suítes de verificação")
    return parser.parse_args(argv)


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT)


def resolve_config(name: Optional[str], default_kind: str) -> ScenarioConfig:
    """Caminho de arquivo, nome de cenário embarcado ou o padrão do subcomando"""
    if name is None:
        return get_default_scenario(default_kind)
    path = Path(name)
    if path.suffix == ".json" or path.exists():
        return load_scenario(path)
    return get_default_scenario(name)


def apply_overrides(cfg: ScenarioConfig, args: argparse.Namespace) -> ScenarioConfig:
    """Aplica --seed, --sigma e --rho, validando os parâmetros resultantes"""
    solver = cfg.solver.model_dump()
    if args.sigma is not None:
        solver["sigma"] = args.sigma
    if args.rho is not None:
        solver["rho"] = args.rho
    try:
        params = SolverParams.model_validate(solver)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigurationError(f"Parâmetro do solver inválido: {first['msg']}", field_path="solver." + ".".join(map(str, first["loc"])))
    update = {"solver": params}
    if args.seed is not None:
        update["seed"] = args.seed
    return cfg.model_copy(update=update)


def _resolve_workers(args: argparse.Namespace) -> int:
    workers = default_workers() if args.workers is None else args.workers
    if workers < 1:
        raise ConfigurationError(f"--workers deve ser >= 1: {workers}", field_path="workers")
    return workers


class DiagnosticsWriter:
    """Acumula IterationRecords e grava CSV (e JSON por linha, opcional)"""

    def __init__(self, json_lines: bool):
        self.json_lines = json_lines
        self.records: List[IterationRecord] = []

    def __call__(self, record: IterationRecord) -> None:
        self.records.append(record)

    def write(self, out_dir: Path, prefix: str = "diagnostics") -> None:
        write_table(pd.DataFrame([record.model_dump() for record in self.records]), out_dir / f"{prefix}.csv")
        if self.json_lines:
            with open(out_dir / f"{prefix}.jsonl", "w", encoding="utf-8") as f:
                for record in self.records:
                    f.write(record.model_dump_json() + "\n")


def cmd_solve(args: argparse.Namespace) -> int:
    cfg = apply_overrides(resolve_config(args.config, "merging"), args)
    writer = DiagnosticsWriter(args.json_diagnostics)
    run = open_loop_run(cfg, workers=_resolve_workers(args), out_dir=args.out, diagnostics_sink=writer)
    writer.write(args.out)
    print(f"potencial final: {run.result.potential:.6f} ({run.result.iterations} iterações)")
    if run.result.stalled:
        print("solver parado sem convergir", file=sys.stderr)
        return EXIT_STALL
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = apply_overrides(resolve_config(args.config, "merging"), args)
    settings = list(SETTINGS) if args.setting == "all" else [args.setting]
    workers = _resolve_workers(args)
    if args.conditions > 0:
        runs, summary = monte_carlo(cfg, settings, args.conditions, args.draws, workers=workers)
        write_table(runs, args.out / "runs.csv")
        write_table(summary, args.out / "metrics.csv", METRICS_COLUMNS)
        print(summary.to_string(index=False))
        return EXIT_OK

    velocities = draw_true_velocities(cfg, np.random.default_rng(cfg.seed))
    rows = []
    for setting in settings:
        result = closed_loop_run(cfg, setting, velocities, workers=workers)
        write_table(result.trace, args.out / f"trace_{setting}.csv")
        rows.append({"setting": setting, **result.metrics.model_dump()})
    metrics = pd.DataFrame(rows)[METRICS_COLUMNS]
    write_table(metrics, args.out / "metrics.csv", METRICS_COLUMNS)
    print(metrics.to_string(index=False))
    return EXIT_OK


def cmd_contingency(args: argparse.Namespace) -> int:
    cfg = apply_overrides(resolve_config(args.config, "overtaking"), args)
    game, graph, hypotheses = build_contingency_from_config(cfg, p_up=args.p_up)
    writer = DiagnosticsWriter(args.json_diagnostics)
    result = solve(game, graph=graph, params=cfg.solver, workers=_resolve_workers(args), diagnostics_sink=writer)
    snapped: JointStrategy = snap_prebranch_controls(game, result.strategy)
    table = trajectory_table(game, snapped)
    for theta, hypothesis in enumerate(hypotheses.hypotheses):
        write_table(table[table["type"] == theta], args.out / f"plan_h{theta}.csv")
    writer.write(args.out)
    print(
        f"{len(hypotheses)} hipóteses, potencial {potential(game, snapped):.6f}, "
        f"gap antes do ramo {prebranch_gap(game, result.strategy):.4f} m, "
        f"p_y médio antes do ramo {mean_prebranch_lateral(game, snapped):.4f} m"
    )
    if result.stalled:
        print("solver parado sem convergir", file=sys.stderr)
        return EXIT_STALL
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = apply_overrides(resolve_config(args.config, "intersection"), args)
    workers = _resolve_workers(args)
    scalability = bench_scalability(cfg, args.samples_per_mode, args.repetitions, max(workers, 2))
    write_table(scalability.reset_index(), args.out / "bench.csv")
    print(scalability.to_string())

    contingency_cfg = cfg if cfg.contingency is not None else apply_overrides(get_default_scenario("overtaking"), args)
    timings = bench_contingency(contingency_cfg, args.hypotheses, args.repetitions, workers)
    write_table(timings, args.out / "bench_contingency.csv")
    print(timings.to_string(index=False))
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    cfg = apply_overrides(resolve_config(args.config, "toy"), args)
    results = run_verify_suites(cfg)
    table = pd.DataFrame([result.model_dump() for result in results])
    if args.out is not None:
        write_table(table, args.out / "verify.csv")
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        print(f"{status} {result.name}: pior {result.worst_residual:.3g} (limite {result.threshold:.1g}, {result.draws} sorteios)")
    return EXIT_OK if all(result.passed for result in results) else EXIT_VERIFY_FAILED


COMMANDS = {
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "contingency": cmd_contingency,
    "bench": cmd_bench,
    "verify": cmd_verify,
}


def run(argv: Optional[List[str]] = None) -> int:
    """Executa um subcomando e devolve o código de saída"""
    args = _parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as e:
        print(f"Erro de configuração: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverStallError as e:
        print(f"Solver parado: {e}", file=sys.stderr)
        return EXIT_STALL


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()

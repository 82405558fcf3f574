from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from .alm import al_solve
from .configuration import Configuration
from .dataclasses import ALConfig, AuxConfig, RunConfig, SCAConfig
from .dc_model import DCProgram, MultiIndex
from .diagnostics import kkt_report
from .enums import Command, InstanceKind, Method, StopReason
from .errors import DCOptError, InstanceFormatError
from .event_bus import EventBus, EventName
from .majorants import ALMode, PenaltyMode
from .penalty import penalty_solve
from .problems import (Instance, build_program, generate_instance, l1_ball_start, load_instance, one_dim_example,
                       one_dim_reference, quadratic_start, save_instance, sparse_spec)
from .reports import ALReport, OuterIteration, SolveReport
from .sca import verify_inexact_condition
from .utils import drop_none, format_number, text_to_vector, vector_to_text

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ['run', 'seed', 'method', 'stop_reason', 'objective', 'violation', 'rel_err', 'outer_iterations',
                   'subsolves']
SPARSE_EXPERIMENT_N = 1024
EXIT_VERIFY_FAILED = 1
EXIT_BAD_INPUT = 2
EXIT_NOT_CONVERGED = 3
EXAMPLE_PAIRS = [MultiIndex(j0, (j1,)) for j0 in range(2) for j1 in range(2)]
EXAMPLE_ETA = 1e-13
EXAMPLE_POLISH_TOL = 1e-14


@dataclass
class RunSummary:
    run: int
    seed: int
    method: Method
    stop_reason: str
    objective: float
    violation: float
    outer_iterations: int
    subsolves: int
    wall_time: float
    rel_err: Optional[float] = None

    @classmethod
    def from_report(cls, report: SolveReport, run: int, seed: int, x_star=None) -> RunSummary:
        rel_err = None
        if x_star is not None:
            rel_err = float(np.linalg.norm(report.x_final - x_star) / np.linalg.norm(x_star))

        return cls(run=run, seed=seed, method=report.method, stop_reason=report.stop_reason.value,
                   objective=report.objective, violation=report.violation,
                   outer_iterations=report.outer_iterations, subsolves=report.total_subsolves,
                   wall_time=report.wall_time, rel_err=rel_err)


def _mean(values: Iterable[Optional[float]]) -> Optional[float]:
    values = [v for v in values if v is not None]
    return sum(values) / len(values) if values else None


def emit_table(runs: Sequence[RunSummary], include_time: bool = True) -> str:
    """One CSV row per run plus a mean row per method; objectives with 17 significant digits, times with 3."""
    columns = SUMMARY_COLUMNS + (['time'] if include_time else [])
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(columns)

    if not runs:
        logger.warning('No runs to tabulate')
        return buffer.getvalue()

    def row(label, seed, method, stop_reason, objective, violation, rel_err, outer, subsolves, wall_time):
        values = [label, seed, method, stop_reason, format_number(objective), format_number(violation, 3),
                  '' if rel_err is None else format_number(rel_err, 3), outer, subsolves]
        if include_time:
            values.append(format_number(wall_time, 3))

        return values

    for run in runs:
        writer.writerow(row(run.run, run.seed, run.method.value, run.stop_reason, run.objective, run.violation,
                            run.rel_err, run.outer_iterations, run.subsolves, run.wall_time))

    if len(runs) == 1:
        return buffer.getvalue()

    for method in Method:
        group = [run for run in runs if run.method == method]
        if not group:
            continue

        writer.writerow(row('mean', '', method.value, '', _mean(r.objective for r in group),
                            _mean(r.violation for r in group), _mean(r.rel_err for r in group),
                            format_number(_mean(r.outer_iterations for r in group), 3),
                            format_number(_mean(r.subsolves for r in group), 3), _mean(r.wall_time for r in group)))

    return buffer.getvalue()


def make_run_dir(out: str, label: str) -> str:
    """Create a fresh directory; existing runs are never overwritten."""
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, label)
    suffix = 0
    while True:
        try:
            os.makedirs(path)
            return path
        except FileExistsError:
            suffix += 1
            path = os.path.join(out, f'{label}-{suffix}')


def write_csv(path: str, rows: List[dict]):
    with open(path, 'w', encoding='utf-8', newline='') as fp:
        if not rows:
            return

        writer = csv.DictWriter(fp, fieldnames=list(rows[0].keys()), lineterminator='\n')
        writer.writeheader()
        writer.writerows(rows)


def write_yaml(path: str, data: dict):
    with open(path, 'w', encoding='utf-8') as fp:
        yaml.safe_dump(data, fp, sort_keys=False)


def solve_program(prog: DCProgram, run_config: RunConfig, x0, events: Optional[EventBus] = None) -> SolveReport:
    cfg = run_config.solver_config()
    if run_config.method == Method.ALM:
        return al_solve(prog, cfg, x0, events)

    return penalty_solve(prog, cfg, x0, events)


def start_point(instance: Instance, prog: DCProgram, seed: int, run: int = 0) -> np.ndarray:
    if instance.kind == InstanceKind.QUADRATIC_DC:
        return quadratic_start(seed, run, prog.n)

    if instance.kind == InstanceKind.SPARSE_RECOVERY:
        return l1_ball_start(sparse_spec(instance))

    return np.zeros(prog.n)


def known_solution(instance: Instance) -> Optional[np.ndarray]:
    return instance.blocks.get('x_star') if instance.kind == InstanceKind.SPARSE_RECOVERY else None


def write_run(path: str, config_dict: dict, report: SolveReport, rows: List[dict], run_config: RunConfig,
              instance_path: Optional[str], summary: RunSummary):
    write_yaml(os.path.join(path, 'config.yml'), config_dict)
    write_csv(os.path.join(path, 'iterations.csv'), rows)

    with open(os.path.join(path, 'summary.csv'), 'w', encoding='utf-8') as fp:
        fp.write(emit_table([summary], include_time=False))

    if run_config.record_time:
        write_csv(os.path.join(path, 'timing.csv'), [{'wall_time': format_number(report.wall_time, 3)}])

    if isinstance(report, ALReport) and report.aux:
        write_csv(os.path.join(path, 'aux.csv'), [entry.to_row() for entry in report.aux])

    last: Optional[OuterIteration] = report.iterations[-1] if report.iterations else None
    write_yaml(os.path.join(path, 'solution.yml'), {
        'method': report.method.value,
        'instance': instance_path,
        'stop_reason': report.stop_reason.value,
        'objective': format_number(report.objective),
        'violation': format_number(report.violation),
        'rho': format_number(last.rho) if last else '',
        'eta': format_number(last.eta) if last else '',
        'eps': format_number(run_config.solver_config().eps),
        'lambda': vector_to_text(last.lam) if last is not None and last.lam is not None else '',
        'x': vector_to_text(report.x_final),
    })


def solve_instance(config: Configuration, instance: Instance, instance_path: Optional[str], run: int = 0,
                   label: Optional[str] = None) -> Tuple[SolveReport, RunSummary, str]:
    run_config = config.run
    prog = build_program(instance)
    x0 = start_point(instance, prog, run_config.seed, run)

    rows = []
    events = EventBus()
    events.subscribe(EventName.OUTER_ITERATION, lambda record: rows.append(record.to_row()))

    report = solve_program(prog, run_config, x0, events)
    summary = RunSummary.from_report(report, run, instance.seed, known_solution(instance))

    label = label or f'{run_config.command.value}-{run_config.method.value}-seed{run_config.seed}'
    path = make_run_dir(run_config.out, label)
    config_dict = config.as_dict()
    config_dict['method'] = run_config.method.value
    write_run(path, config_dict, report, rows, run_config, instance_path, summary)
    return report, summary, path


def _instance_for(config: Configuration) -> Tuple[Instance, Optional[str]]:
    run_config = config.run
    if run_config.instance:
        return load_instance(run_config.instance), os.path.abspath(run_config.instance)

    problem = run_config.problem
    _, instance, _ = generate_instance(InstanceKind(problem.kind), run_config.seed, n=problem.n, m=problem.m,
                                       K=problem.K, s=problem.s, noise=problem.noise)
    return instance, None


def command_gen(config: Configuration) -> int:
    run_config = config.run
    problem = run_config.problem
    _, instance, _ = generate_instance(InstanceKind(problem.kind), run_config.seed, n=problem.n, m=problem.m,
                                       K=problem.K, s=problem.s, noise=problem.noise)
    os.makedirs(run_config.out, exist_ok=True)
    path = os.path.join(run_config.out, f'{problem.kind}-seed{run_config.seed}.yml')
    if os.path.exists(path):
        raise InstanceFormatError(f'refusing to overwrite {path}', 'format')

    save_instance(instance, path)
    print(path)
    return 0


def command_solve(config: Configuration) -> int:
    instance, instance_path = _instance_for(config)
    report, summary, path = solve_instance(config, instance, instance_path)
    if instance_path is None:
        instance_path = os.path.join(path, 'instance.yml')
        save_instance(instance, instance_path)
        with open(os.path.join(path, 'solution.yml'), 'r', encoding='utf-8') as fp:
            solution = yaml.safe_load(fp)

        solution['instance'] = os.path.abspath(instance_path)
        write_yaml(os.path.join(path, 'solution.yml'), solution)

    sys.stdout.write(emit_table([summary]))
    print(path)

    if config.verify.enabled and verify_run(path, config) != 0:
        return EXIT_VERIFY_FAILED

    if report.stop_reason != StopReason.CONVERGED:
        logger.warning('Solve ended without convergence: %s', report.stop_reason.value)
        return EXIT_NOT_CONVERGED

    return 0


def verify_run(path: str, config: Configuration) -> int:
    """Check the inexactness condition of the last subproblem and report KKT residuals at the final point."""
    with open(os.path.join(path, 'solution.yml'), 'r', encoding='utf-8') as fp:
        solution = yaml.safe_load(fp)

    instance = load_instance(solution['instance'])
    prog = build_program(instance)
    x = text_to_vector(solution['x'])
    rho, eta, eps = float(solution['rho']), float(solution['eta']), float(solution['eps'])
    method = Method(solution['method'])
    if method == Method.ALM:
        mode = ALMode(text_to_vector(solution['lambda']))
    else:
        mode = PenaltyMode(1 if method == Method.PM1 else 2)

    settings = config.verify
    report = verify_inexact_condition(prog, rho, mode, x, eps, eta, n_samples=settings.samples,
                                      rng=np.random.default_rng(config.run.seed), delta=settings.delta,
                                      tol=settings.tol, cap=config.run.solver_config().sca.pair_cap)

    rows = [{'pair': index.label(), 'margin': format_number(margin, 3), 'ok': int(margin >= -settings.tol)}
            for index, margin in report.pair_margins.items()]
    try:
        kkt = kkt_report(prog, x, tol=settings.tol)
        rows.append({'pair': kkt.label, 'margin': format_number(kkt.worst_residual, 3), 'ok': int(kkt.verdict)})
    except DCOptError as e:
        logger.info('KKT residual skipped: %s', e)

    verify_path = os.path.join(path, 'verify.csv')
    suffix = 0
    while os.path.exists(verify_path):
        suffix += 1
        verify_path = os.path.join(path, f'verify-{suffix}.csv')

    write_csv(verify_path, rows)
    print(f'worst margin {format_number(report.worst_margin, 3)} over {len(report.pair_margins)} pairs')
    return 0 if report.ok else EXIT_VERIFY_FAILED


def reproduce_example_table(rows: int = 10, aux: Optional[AuxConfig] = None,
                            events: Optional[EventBus] = None) -> Tuple[ALReport, List[dict]]:
    """AL run on the one-dimensional example with its closed-form table for comparison."""
    cfg = ALConfig(eps=math.inf, rho0=0.1, sigma=2.0, alpha=1.0, eta0=EXAMPLE_ETA, eta_decay=1.0, eta_floor=0.0,
                   max_outer=rows, sca=SCAConfig(polish_tol=EXAMPLE_POLISH_TOL), aux=aux or AuxConfig(enabled=True))
    report = al_solve(one_dim_example(), cfg, np.zeros(1), events)

    table = []
    for record in report.iterations:
        reference = one_dim_reference(record.k, record.rho)
        entries = {entry.index: entry for entry in report.aux_for(record.k)}
        for position, index in enumerate(EXAMPLE_PAIRS):
            entry = entries.get(index)
            table.append({
                'k': record.k,
                'rho': format_number(record.rho),
                'x': format_number(float(record.x[0])),
                'x_ref': format_number(reference['x']),
                'lambda_next': format_number(float(record.lam_next[0])),
                'lambda_next_ref': format_number(reference['lam_next']),
                'pair': index.label(),
                'x_aux': '' if entry is None else format_number(float(entry.x[0])),
                'x_aux_ref': format_number(reference['aux_x'][position]),
                'lambda_aux': '' if entry is None else format_number(float(entry.lam[0])),
                'lambda_aux_ref': format_number(reference['aux_lam'][position]),
                'value_aux': '' if entry is None else format_number(entry.value),
                'value_aux_ref': format_number(reference['aux_value'][position]),
            })

    return report, table


def command_reproduce_example(config: Configuration, rows: int) -> int:
    run_config = config.run
    report, table = reproduce_example_table(rows, replace(config.aux, enabled=True))
    path = make_run_dir(run_config.out, 'reproduce-example')
    write_yaml(os.path.join(path, 'config.yml'), config.as_dict())
    write_csv(os.path.join(path, 'example.csv'), table)
    write_csv(os.path.join(path, 'iterations.csv'), [record.to_row() for record in report.iterations])

    buffer = io.StringIO()
    if table:
        writer = csv.DictWriter(buffer, fieldnames=list(table[0].keys()), lineterminator='\n')
        writer.writeheader()
        writer.writerows(table)

    sys.stdout.write(buffer.getvalue())
    print(path)
    return 0


def run_experiment(config: Configuration, methods: Sequence[Method]) -> List[RunSummary]:
    """Seeded runs of every method: one quadratic instance with fresh start points per run,
    or a fresh sparse recovery instance (seed + run) per run."""
    run_config = config.run
    problem = run_config.problem
    experiment_dir = make_run_dir(run_config.out, f'{run_config.experiment}-seed{run_config.seed}')

    def job(run: int, method: Method) -> RunSummary:
        if run_config.experiment == 'quadratic':
            _, instance, _ = generate_instance(InstanceKind.QUADRATIC_DC, run_config.seed, n=problem.n)
        else:
            _, instance, _ = generate_instance(InstanceKind.SPARSE_RECOVERY, run_config.seed + run, m=problem.m,
                                               n=problem.n, K=problem.K, s=problem.s, noise=problem.noise)

        source = config.as_dict()
        # each method fixes its own hinge exponent
        source['solver'].pop('p', None)
        method_config = Configuration(source_dict=source, overrides={'method': method.value}, use_env=False)
        _, summary, _ = solve_instance(method_config, instance, None, run=run,
                                       label=os.path.join(os.path.basename(experiment_dir), f'run{run}-{method.value}'))
        return summary

    jobs = [(run, method) for run in range(run_config.runs) for method in methods]
    if run_config.threads > 1:
        with ThreadPoolExecutor(max_workers=run_config.threads) as executor:
            summaries = list(executor.map(lambda args: job(*args), jobs))
    else:
        summaries = [job(run, method) for run, method in jobs]

    with open(os.path.join(experiment_dir, 'table.csv'), 'w', encoding='utf-8') as fp:
        fp.write(emit_table(summaries, include_time=False))

    return summaries


def command_reproduce_experiment(config: Configuration, methods: Sequence[Method]) -> int:
    summaries = run_experiment(config, methods)
    for method in methods:
        sys.stdout.write(emit_table([s for s in summaries if s.method == method]))

    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='YAML file merged over the built-in defaults')
    common.add_argument('--method', choices=[m.value for m in Method])
    common.add_argument('--eps', type=float)
    common.add_argument('--rho0', type=float)
    common.add_argument('--sigma', type=float)
    common.add_argument('--alpha', type=float)
    common.add_argument('--p', type=int, choices=[1, 2])
    common.add_argument('--max-outer', dest='max_outer', type=int)
    common.add_argument('--tol', type=float, help='relative-change stopping tolerance')
    common.add_argument('--backend', choices=['auto', 'dual', 'prox-gradient', 'subgradient'])
    common.add_argument('--seed', type=int)
    common.add_argument('--instance')
    common.add_argument('--out')
    common.add_argument('--kind', choices=[k.value for k in InstanceKind])
    common.add_argument('--n', type=int)
    common.add_argument('--m', type=int)
    common.add_argument('--K', type=int)
    common.add_argument('--s', type=float)
    common.add_argument('--verify', action='store_true', default=None)
    common.add_argument('--aux-multipliers', dest='aux_multipliers', action='store_true', default=None)
    common.add_argument('--log-level', dest='log_level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])

    parser = argparse.ArgumentParser(prog='dcopt', description='Penalty and augmented Lagrangian solvers for '
                                                               'DC-constrained DC programs')
    subparsers = parser.add_subparsers(dest='command', required=True)
    subparsers.add_parser(Command.GEN.value, parents=[common], help='generate an instance file')
    subparsers.add_parser(Command.SOLVE.value, parents=[common], help='solve an instance')

    verify = subparsers.add_parser(Command.VERIFY.value, parents=[common], help='verify a solve output')
    verify.add_argument('run_dir', help='directory written by solve')

    example = subparsers.add_parser(Command.REPRODUCE_EXAMPLE.value, parents=[common],
                                    help='AL iterations on the one-dimensional example')
    example.add_argument('--rows', type=int, default=10)

    experiment = subparsers.add_parser(Command.REPRODUCE_EXPERIMENT.value, parents=[common],
                                       help='seeded runs of the quadratic or sparse recovery experiment')
    experiment.add_argument('--experiment', choices=['quadratic', 'sparse'])
    experiment.add_argument('--runs', type=int)
    experiment.add_argument('--methods', default='pm1,pm2,alm')
    return parser


def overrides_from_args(args: argparse.Namespace) -> dict:
    n = args.n
    if n is None and getattr(args, 'experiment', None) == 'sparse':
        n = SPARSE_EXPERIMENT_N

    return drop_none({
        'command': args.command,
        'method': args.method,
        'seed': args.seed,
        'instance': args.instance,
        'out': args.out,
        'log_level': args.log_level,
        'runs': getattr(args, 'runs', None),
        'experiment': getattr(args, 'experiment', None),
        'problem': {'kind': args.kind, 'n': n, 'm': args.m, 'K': args.K, 's': args.s},
        'solver': {'eps': args.eps, 'rho0': args.rho0, 'sigma': args.sigma, 'alpha': args.alpha, 'p': args.p,
                   'max_outer': args.max_outer, 'outer_rel_tol': args.tol},
        'sca': {'backend': args.backend},
        'aux': {'enabled': args.aux_multipliers},
        'verify': {'enabled': args.verify},
    })


def run(config: Configuration, args: Optional[argparse.Namespace] = None) -> int:
    command = config.command
    if command == Command.GEN:
        return command_gen(config)

    if command == Command.SOLVE:
        return command_solve(config)

    if command == Command.VERIFY:
        return verify_run(args.run_dir, config)

    if command == Command.REPRODUCE_EXAMPLE:
        return command_reproduce_example(config, getattr(args, 'rows', 10))

    methods = [Method(name.strip()) for name in getattr(args, 'methods', 'pm1,pm2,alm').split(',') if name.strip()]
    return command_reproduce_experiment(config, methods)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        config = Configuration.from_file(args.config, overrides_from_args(args))
        logging.basicConfig(level=config.run.log_level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')
        return run(config, args)
    except (DCOptError, ValueError) as e:
        print(f'error: {type(e).__name__}: {e}', file=sys.stderr)
        return EXIT_BAD_INPUT

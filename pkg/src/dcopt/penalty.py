from __future__ import annotations

import logging
import time
from typing import List, Optional

from .dataclasses import PenaltyConfig, SCAConfig
from .dc_model import DCProgram, objective_value
from .diagnostics import feasibility_violation, relative_change
from .enums import Method, StopReason
from .errors import DCOptError, ModelError, SolverError
from .event_bus import EventBus, EventName, publish
from .majorants import Mode, PenaltyMode, merit_value
from .reports import OuterIteration, SolveReport
from .sca import SCAResult, sca_solve

logger = logging.getLogger(__name__)

STALL_FACTOR = 0.9


def solve_subproblem(prog: DCProgram, rho: float, mode: Mode, x, cfg: SCAConfig, report: SolveReport,
                     events: Optional[EventBus] = None) -> SCAResult:
    """Run SCA on one subproblem; failures carry the outer history gathered so far."""
    try:
        return sca_solve(prog, rho, mode, x, cfg, events)
    except DCOptError as e:
        report.stop_reason = None
        raise SolverError(f'outer iteration {report.outer_iterations} failed: {e}', report) from e


def check_start(prog: DCProgram, x0):
    x0 = prog.check_vector(x0)
    if not prog.X.contains(x0, 1e-8):
        raise ModelError('initial point lies outside X')

    return x0


def outer_stop(records: List[OuterIteration], result: SCAResult, cfg: PenaltyConfig) -> Optional[StopReason]:
    """Stop reason after the latest outer iteration, None to go on.

    A settled iterate (relative change within outer_rel_tol) counts as
    converged only within feas_tol of feasibility. It is reported as stalled
    when its violation shrank by less than STALL_FACTOR over the last
    stall_patience iterations.
    """
    if result.failed is not None:
        return StopReason.UNCERTIFIED

    if not result.terminated:
        return StopReason.INNER_LIMIT

    record = records[-1]
    if record.k == 0 or not record.rel_change <= cfg.outer_rel_tol:
        return None

    if record.violation <= cfg.feas_tol:
        return StopReason.CONVERGED

    if len(records) > cfg.stall_patience and \
            record.violation >= STALL_FACTOR * records[-1 - cfg.stall_patience].violation:
        logger.warning('Iterates settled at violation %.3e without getting closer to feasibility', record.violation)
        return StopReason.STALLED_INFEASIBLE

    return None


def finish(prog: DCProgram, report: SolveReport, stop_reason: StopReason, started: float):
    report.stop_reason = stop_reason
    report.objective = objective_value(prog, report.x_final)
    report.violation = feasibility_violation(prog, report.x_final)
    report.wall_time = time.perf_counter() - started
    logger.info('%s stopped (%s) after %d outer iterations: objective %.17g, violation %.3e',
                report.method.value, stop_reason.value, report.outer_iterations, report.objective, report.violation)


def penalty_solve(prog: DCProgram, cfg: PenaltyConfig, x0, events: Optional[EventBus] = None) -> SolveReport:
    """Penalty method: rho_k = rho0 sigma^k, each subproblem solved by SCA from the previous iterate."""
    started = time.perf_counter()
    x = check_start(prog, x0)
    mode = PenaltyMode(cfg.p)
    report = SolveReport(method=Method.PM1 if cfg.p == 1 else Method.PM2, x_final=x)

    stop_reason = StopReason.MAX_OUTER
    for k in range(cfg.max_outer):
        rho = cfg.rho0 * cfg.sigma ** k
        if rho > cfg.rho_cap:
            logger.warning('Penalty parameter %.3e exceeds cap %.3e', rho, cfg.rho_cap)
            stop_reason = StopReason.RHO_CAP
            break

        sca_cfg = cfg.sca_config(k)
        result = solve_subproblem(prog, rho, mode, x, sca_cfg, report, events)
        x_prev, x = x, result.x_final

        record = OuterIteration(
            k=k,
            rho=rho,
            x=x,
            objective=objective_value(prog, x),
            merit=merit_value(prog, rho, mode, x),
            violation=feasibility_violation(prog, x),
            eta=sca_cfg.eta,
            sca_moves=result.outer_iterations,
            subsolves=result.total_subsolves,
            sca_terminated=result.terminated,
        )
        if k > 0:
            record.rel_change = relative_change(x_prev, x).value

        report.iterations.append(record)
        report.x_final = x
        logger.info('k=%d rho=%.3e objective=%.17g violation=%.3e rel_change=%.3e', k, rho, record.objective,
                    record.violation, record.rel_change)
        publish(events, EventName.OUTER_ITERATION, record)

        reason = outer_stop(report.iterations, result, cfg)
        if reason is not None:
            stop_reason = reason
            break

    finish(prog, report, stop_reason, started)
    return report

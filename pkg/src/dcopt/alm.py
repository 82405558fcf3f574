from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence

import numpy as np

from .dataclasses import ALConfig, AuxConfig
from .dc_model import DCProgram, MultiIndex, constraint_values, eps_active_pairs, objective_value
from .diagnostics import feasibility_violation, relative_change
from .enums import AuxStrategy, Method, StopReason
from .errors import ModelError, UnsupportedError
from .event_bus import EventBus, EventName, publish
from .majorants import ALMode, MajorantInstance, al_value
from .penalty import check_start, finish, outer_stop, solve_subproblem
from .reports import ALReport, AuxEntry, OuterIteration
from .subsolver import solve_certified, stationarity_residual

logger = logging.getLogger(__name__)


def multiplier_update(lam, rho: float, values) -> np.ndarray:
    """[lam_i + rho c_i]_+ componentwise."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    values = np.atleast_1d(np.asarray(values, dtype=float))
    if np.any(lam < 0):
        raise ModelError('multipliers must be nonnegative')

    if not rho > 0:
        raise ModelError(f'penalty parameter must be positive, got {rho}')

    return np.maximum(lam + rho * values, 0.0)


def next_rho(rho: float, lam_next: np.ndarray, cfg: ALConfig) -> float:
    return max(cfg.sigma * rho, float(np.linalg.norm(lam_next)) ** (1.0 + cfg.alpha))


def _restricted_point(prog: DCProgram, rho: float, lam: np.ndarray, x_k: np.ndarray, index: MultiIndex,
                      cfg: AuxConfig):
    """Repeated majorization of the fixed pair, each model re-anchored at the last point."""
    y = x_k
    for step in range(1, cfg.max_iter + 1):
        m = MajorantInstance(prog, rho, y, index, lam=lam)
        y_new, _ = solve_certified(m, y, cfg.delta)
        moved = float(np.linalg.norm(y_new - y))
        y = y_new
        if moved <= cfg.tol * (1.0 + float(np.linalg.norm(y))):
            return y, step

    logger.warning('Pair %s majorization did not settle in %d steps', index.label(), cfg.max_iter)
    return y, cfg.max_iter


def _aux_entry(prog: DCProgram, rho: float, lam: np.ndarray, x_k: np.ndarray, index: MultiIndex, gamma: float,
               cfg: AuxConfig, k: int) -> AuxEntry:
    anchored = MajorantInstance(prog, rho, x_k, index, lam=lam)
    certificate = None
    steps = 0
    strategy = cfg.strategy

    if strategy == AuxStrategy.RESTRICTED:
        try:
            y, steps = _restricted_point(prog, rho, lam, x_k, index, cfg)
            residual = stationarity_residual(anchored, y)
        except UnsupportedError:
            logger.info('Exact residual unavailable for %s; using an anchored subsolve', index.label())
            strategy = AuxStrategy.ANCHORED

    if strategy == AuxStrategy.ANCHORED:
        y, certificate = solve_certified(anchored, x_k, gamma)
        residual = certificate.residual

    certified = residual <= gamma
    if not certified:
        logger.warning('Auxiliary point of %s not certified: residual %.3e > gamma %.3e', index.label(), residual,
                       gamma)

    return AuxEntry(
        k=k,
        index=index,
        x=y,
        lam=np.maximum(lam + rho * anchored.inner(y), 0.0),
        value=al_value(prog, rho, lam, y),
        residual=residual,
        certified=certified,
        steps=steps,
        certificate=certificate,
    )


def auxiliary_multipliers(prog: DCProgram, rho: float, lam, x_k, pairs: Sequence[MultiIndex], gamma: float,
                          cfg: Optional[AuxConfig] = None, k: int = 0) -> List[AuxEntry]:
    """Auxiliary points and multipliers for the given pairs at x_k.

    Each point is certified against the AL majorant anchored at x_k to a
    stationarity residual of at most gamma; the multipliers are
    [lam_i + rho (phi_hat_i + zeta_i - l_psi_i)]_+ at that point.
    Failures are flagged on the entry, not raised.
    """
    cfg = cfg or AuxConfig()
    x_k = prog.check_vector(x_k)
    lam = ALMode(lam).lam
    if not gamma > 0:
        raise ModelError(f'gamma must be positive, got {gamma}')

    def one(index):
        return _aux_entry(prog, rho, lam, x_k, index, gamma, cfg, k)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as executor:
            return list(executor.map(one, pairs))

    return [one(index) for index in pairs]


def al_solve(prog: DCProgram, cfg: ALConfig, x0, events: Optional[EventBus] = None) -> ALReport:
    """Augmented Lagrangian method with rho_{k+1} = max(sigma rho_k, ||lam_{k+1}||^(1 + alpha))."""
    started = time.perf_counter()
    x = check_start(prog, x0)
    lam = np.zeros(prog.I) if cfg.lambda0 is None else ALMode(cfg.lambda0).lam
    if lam.shape != (prog.I,):
        raise ModelError(f'expected {prog.I} initial multipliers, got {lam.shape[0]}')

    report = ALReport(method=Method.ALM, x_final=x)
    rho = cfg.rho0

    stop_reason = StopReason.MAX_OUTER
    for k in range(cfg.max_outer):
        if rho > cfg.rho_cap:
            logger.warning('Penalty parameter %.3e exceeds cap %.3e', rho, cfg.rho_cap)
            stop_reason = StopReason.RHO_CAP
            break

        mode = ALMode(lam)
        sca_cfg = cfg.sca_config(k)
        result = solve_subproblem(prog, rho, mode, x, sca_cfg, report, events)
        x_prev, x = x, result.x_final

        lam_next = multiplier_update(lam, rho, constraint_values(prog, x))
        record = OuterIteration(
            k=k,
            rho=rho,
            x=x,
            objective=objective_value(prog, x),
            merit=al_value(prog, rho, lam, x),
            violation=feasibility_violation(prog, x),
            eta=sca_cfg.eta,
            lam=lam,
            lam_next=lam_next,
            sca_moves=result.outer_iterations,
            subsolves=result.total_subsolves,
            sca_terminated=result.terminated,
        )
        if k > 0:
            record.rel_change = relative_change(x_prev, x).value

        if cfg.aux.enabled:
            pairs = list(eps_active_pairs(prog, x, cfg.eps, cfg.sca.pair_cap))
            report.aux.extend(auxiliary_multipliers(prog, rho, lam, x, pairs, cfg.gamma(rho), cfg.aux, k))

        report.iterations.append(record)
        report.x_final = x
        logger.info('k=%d rho=%.3e objective=%.17g violation=%.3e |lambda|=%.3e', k, rho, record.objective,
                    record.violation, float(np.linalg.norm(lam_next)))
        publish(events, EventName.OUTER_ITERATION, record)

        lam, rho = lam_next, next_rho(rho, lam_next, cfg)

        reason = outer_stop(report.iterations, result, cfg)
        if reason is not None:
            stop_reason = reason
            break

    finish(prog, report, stop_reason, started)
    return report

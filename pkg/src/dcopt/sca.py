from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .dataclasses import SCAConfig
from .dc_model import DCProgram, MultiIndex, eps_active_pairs
from .enums import SubsolveBackend
from .errors import CertificationError, ModelError
from .event_bus import EventBus, EventName, publish
from .majorants import MajorantInstance, Mode, merit_value
from .subsolver import SubsolveCertificate, fallback_methods, solve_certified
from .utils import chunked

logger = logging.getLogger(__name__)

# relative rounding allowance on merit values near a fixed point
POLISH_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class CertifiedPair:
    index: MultiIndex
    x: np.ndarray
    certificate: SubsolveCertificate
    decrease: float


@dataclass
class SCAResult:
    x_final: np.ndarray
    value: float
    certified_pairs: List[CertifiedPair] = field(default_factory=list)
    outer_iterations: int = 0
    total_subsolves: int = 0
    terminated: bool = False
    failed: Optional[CertifiedPair] = None
    polish_steps: int = 0

    @property
    def pairs_checked(self) -> int:
        return len(self.certified_pairs)


def _subsolve(prog: DCProgram, rho: float, mode: Mode, x: np.ndarray, index: MultiIndex, delta: float,
              cfg: SCAConfig) -> Tuple[np.ndarray, SubsolveCertificate]:
    m = MajorantInstance.build(prog, rho, x, index, mode)
    x_new, certificate = solve_certified(m, x, delta, max_iter=cfg.subsolve_max_iter, backend=cfg.backend)
    if certificate.certified or cfg.backend != SubsolveBackend.AUTO:
        return x_new, certificate

    for method in fallback_methods(m, certificate.method):
        logger.info('Retrying pair %s with the %s backend', index.label(), method.value)
        x_retry, retry = solve_certified(m, x, delta, max_iter=cfg.subsolve_max_iter, backend=method.value)
        if retry.certified:
            return x_retry, retry

    return x_new, certificate


def _polish(prog: DCProgram, rho: float, mode: Mode, x: np.ndarray, value: float, delta: float,
            cfg: SCAConfig) -> Tuple[np.ndarray, float, int, int]:
    """Majorize-minimize with the pair attaining every max until the steps stall or stop descending."""
    steps = subsolves = 0
    while steps < cfg.polish_max_iter:
        index = next(iter(eps_active_pairs(prog, x, 0.0, cfg.pair_cap)))
        x_new, certificate = _subsolve(prog, rho, mode, x, index, delta, cfg)
        subsolves += 1
        new_value = merit_value(prog, rho, mode, x_new)
        if not certificate.certified or new_value > value + POLISH_SLACK * (1.0 + abs(value)):
            break

        steps += 1
        moved = float(np.linalg.norm(x_new - x))
        x, value = x_new, new_value
        if moved <= cfg.polish_tol * (1.0 + float(np.linalg.norm(x))):
            break

    return x, value, steps, subsolves


def sca_solve(prog: DCProgram, rho: float, mode: Mode, x0, cfg: SCAConfig,
              events: Optional[EventBus] = None) -> SCAResult:
    """Successive convex approximation for one penalty or AL subproblem.

    Pairs of the eps-active product at the current iterate are tried in
    lexicographic order. A certified subsolution is accepted when
    F(x) - F(x_new) + delta^2/(2 L0) > eta, which empties the blocking set;
    otherwise the pair is blocked. The loop ends once every pair is blocked.
    With `polish_tol` set, the first time that happens the exact-argmax model
    is iterated to a fixed point and the pairs are checked again there.

    A subsolve that stays uncertified after the fallback backends stops the
    loop with `failed` set, or raises CertificationError under
    `raise_uncertified`.
    """
    x = prog.check_vector(x0).copy()
    if not prog.X.contains(x, 1e-8):
        raise ModelError('initial point lies outside X')

    L0 = prog.L0
    value = merit_value(prog, rho, mode, x)
    result = SCAResult(x_final=x, value=value)

    blocked: Dict[MultiIndex, CertifiedPair] = {}
    pairs = list(eps_active_pairs(prog, x, cfg.eps, cfg.pair_cap))
    polished = cfg.polish_tol is None
    executor = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None

    try:
        while result.failed is None:
            # Blocking leaves x unchanged, so the active product only changes after a move
            pending = [index for index in pairs if index not in blocked]
            if not pending and not polished:
                polished = True
                x_polished, value, result.polish_steps, subsolves = _polish(
                    prog, rho, mode, x, value, cfg.delta(result.outer_iterations, L0), cfg)
                result.total_subsolves += subsolves
                if result.polish_steps:
                    logger.debug('Polished the SCA point in %d steps (moved %.3e)', result.polish_steps,
                                 float(np.linalg.norm(x_polished - x)))
                    x = x_polished
                    blocked = {}
                    pairs = list(eps_active_pairs(prog, x, cfg.eps, cfg.pair_cap))
                    continue

            if not pending:
                result.terminated = True
                break

            if result.outer_iterations >= cfg.max_outer:
                logger.warning('SCA stopped after %d moves with %d pairs pending', cfg.max_outer, len(pending))
                break

            delta = cfg.delta(result.outer_iterations, L0)
            moved = False
            for batch in chunked(pending, cfg.workers):
                if executor is None:
                    solved = [_subsolve(prog, rho, mode, x, index, delta, cfg) for index in batch]
                else:
                    solved = list(executor.map(lambda index: _subsolve(prog, rho, mode, x, index, delta, cfg), batch))

                for index, (x_new, certificate) in zip(batch, solved):
                    result.total_subsolves += 1
                    new_value = merit_value(prog, rho, mode, x_new)
                    decrease = value - new_value
                    if not certificate.certified:
                        publish(events, EventName.SUBSOLVE_FAILED, index=index, certificate=certificate)
                        if cfg.raise_uncertified:
                            raise CertificationError(certificate)

                        logger.warning('SCA stopped: pair %s not certified (residual %.3e > delta %.3e)',
                                       index.label(), certificate.residual, certificate.delta)
                        result.failed = CertifiedPair(index, x_new, certificate, decrease)
                        break

                    if decrease + certificate.gap_bound > cfg.eta:
                        logger.debug('SCA move %d via %s: %.17g -> %.17g', result.outer_iterations, index.label(),
                                     value, new_value)
                        publish(events, EventName.SCA_MOVE, t=result.outer_iterations, index=index,
                                previous=value, value=new_value, delta=delta, gap_bound=certificate.gap_bound)
                        x, value = x_new, new_value
                        result.outer_iterations += 1
                        blocked = {}
                        pairs = list(eps_active_pairs(prog, x, cfg.eps, cfg.pair_cap))
                        moved = True
                        break

                    blocked[index] = CertifiedPair(index, x_new, certificate, decrease)

                if moved or result.failed is not None:
                    break
    finally:
        if executor is not None:
            executor.shutdown()

    result.x_final = x
    result.value = value
    result.certified_pairs = list(blocked.values())
    logger.debug('SCA finished: %d moves, %d subsolves, terminated=%s', result.outer_iterations,
                 result.total_subsolves, result.terminated)
    return result


@dataclass
class InexactReport:
    value: float
    eta: float
    worst_margin: float = math.inf
    pair_margins: Dict[MultiIndex, float] = field(default_factory=dict)
    sample_margin: float = math.inf
    violations: List[MultiIndex] = field(default_factory=list)
    uncertified: List[MultiIndex] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations and not self.uncertified


def verify_inexact_condition(prog: DCProgram, rho: float, mode: Mode, x, eps: float, eta: float,
                             n_samples: int = 20, rng: Optional[np.random.Generator] = None,
                             delta: float = 1e-7, tol: float = 1e-8, cap: int = 4096,
                             backend: str = 'auto') -> InexactReport:
    """Check F(x) <= min_X Q(.; x, j0, jj) + eta for every eps-active pair.

    The minimum is bounded below by Q(x_hat) - delta^2/(2 L0) from a certified
    subsolve; random points around x spot-check the same inequality.
    """
    x = prog.check_vector(x)
    if rng is None:
        rng = np.random.default_rng(0)

    value = merit_value(prog, rho, mode, x)
    report = InexactReport(value=value, eta=eta)
    scale = 1.0 + float(np.linalg.norm(x)) / math.sqrt(prog.n)

    for index in eps_active_pairs(prog, x, eps, cap):
        m = MajorantInstance.build(prog, rho, x, index, mode)
        x_hat, certificate = solve_certified(m, x, delta, backend=backend)
        if not certificate.certified:
            report.uncertified.append(index)

        margin = m.value(x_hat) - certificate.gap_bound - value + eta
        for _ in range(n_samples):
            z = prog.X.project(x + scale * rng.standard_normal(prog.n))
            sample = m.value(z) - value + eta
            report.sample_margin = min(report.sample_margin, sample)
            margin = min(margin, sample)

        report.pair_margins[index] = margin
        report.worst_margin = min(report.worst_margin, margin)
        if margin < -tol:
            report.violations.append(index)

    if report.violations:
        logger.warning('Inexactness violated for %d pairs (worst margin %.3e)', len(report.violations),
                       report.worst_margin)

    return report

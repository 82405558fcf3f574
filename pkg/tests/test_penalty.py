import math

import numpy as np
import pytest

from dcopt.dataclasses import PenaltyConfig, SCAConfig
from dcopt.dc_model import Constraint, DCProgram, MaxSmoothFn, SmoothConvexFn, box, zero_function
from dcopt.enums import Method, StopReason
from dcopt.errors import ModelError, SolverError
from dcopt.event_bus import EventBus, EventName
from dcopt.penalty import outer_stop, penalty_solve
from dcopt.reports import OuterIteration
from dcopt.sca import SCAResult


def example_config(**kwargs) -> PenaltyConfig:
    options = dict(eps=math.inf, rho0=0.1, sigma=2.0, eta0=1e-10, eta_decay=1.0, max_outer=20)
    options.update(kwargs)
    return PenaltyConfig(**options)


def test_convex_program_converges(convex_prog, convex_solution):
    events = EventBus()
    records = []
    events.subscribe(EventName.OUTER_ITERATION, records.append)

    report = penalty_solve(convex_prog, PenaltyConfig(rho0=1.0, eta0=1e-10), np.zeros(2), events)
    assert report.method == Method.PM2
    assert report.stop_reason == StopReason.CONVERGED
    assert report.outer_iterations == 2
    np.testing.assert_allclose(report.x_final, convex_solution, atol=1e-6)
    assert report.objective == pytest.approx(1.375)
    assert report.violation == 0.0
    assert records == report.iterations
    assert math.isnan(records[0].rel_change)
    assert report.rho_history == [1.0, 2.0]


def test_linear_penalty_method(convex_prog, convex_solution):
    report = penalty_solve(convex_prog, PenaltyConfig(p=1, rho0=1.0, eta0=1e-10), np.zeros(2))
    assert report.method == Method.PM1
    np.testing.assert_allclose(report.x_final, convex_solution, atol=1e-6)


def test_penalty_parameters_and_violation(example_prog):
    report = penalty_solve(example_prog, example_config(max_outer=6), [0.0])
    assert report.rho_history == pytest.approx([0.1 * 2.0 ** k for k in range(report.outer_iterations)])
    assert all(record.sca_terminated for record in report.iterations)
    assert all(record.eta == 1e-10 for record in report.iterations)
    # the last iterate is no worse than the first in feasibility
    assert report.iterations[-1].violation <= report.iterations[0].violation + 1e-9


def test_inner_limit(example_prog):
    cfg = example_config(sca=SCAConfig(max_outer=1))
    report = penalty_solve(example_prog, cfg, [0.0])
    assert report.stop_reason == StopReason.INNER_LIMIT
    assert report.outer_iterations == 1
    assert not report.iterations[0].sca_terminated


def test_rho_cap(example_prog):
    report = penalty_solve(example_prog, example_config(rho_cap=0.3), [0.0])
    assert report.stop_reason == StopReason.RHO_CAP
    assert report.outer_iterations == 2
    assert report.rho_history == pytest.approx([0.1, 0.2])


def test_max_outer(example_prog):
    report = penalty_solve(example_prog, example_config(max_outer=1), [0.0])
    assert report.stop_reason == StopReason.MAX_OUTER
    assert report.outer_iterations == 1


def test_start_outside_set():
    prog = DCProgram(n=1, phi0=SmoothConvexFn.quadratic([[1.0]], [0.0]), zeta0=zero_function(),
                     psi0=MaxSmoothFn((SmoothConvexFn.constant(1),)), X=box([0.0], [1.0]))
    with pytest.raises(ModelError):
        penalty_solve(prog, PenaltyConfig(), [-1.0])


def test_inner_failure_keeps_history(convex_prog):
    cfg = PenaltyConfig(sca=SCAConfig(backend='subgradient', subsolve_max_iter=1, raise_uncertified=True))
    with pytest.raises(SolverError) as e:
        penalty_solve(convex_prog, cfg, np.zeros(2))

    assert e.value.partial_report.outer_iterations == 0
    assert e.value.partial_report.stop_reason is None


def test_uncertified_subsolve_stops_outer_loop(convex_prog):
    cfg = PenaltyConfig(sca=SCAConfig(backend='subgradient', subsolve_max_iter=1))
    report = penalty_solve(convex_prog, cfg, np.zeros(2))
    assert report.stop_reason == StopReason.UNCERTIFIED
    assert report.outer_iterations == 1
    np.testing.assert_array_equal(report.x_final, np.zeros(2))


def test_example_iterates_reach_the_solution(example_prog):
    report = penalty_solve(example_prog, PenaltyConfig(eps=math.inf), [0.0])
    assert report.stop_reason in (StopReason.CONVERGED, StopReason.RHO_CAP, StopReason.MAX_OUTER)
    assert all(record.sca_terminated for record in report.iterations)
    assert abs(report.x_final[0]) <= 1e-6
    assert abs(report.objective) <= 1e-5


def halfplane_program(lower) -> DCProgram:
    """min ||x - (2, 2)||^2 s.t. x1 + x2 <= 1 over a box; (0.5, 0.5) when the box allows it."""
    a = np.array([2.0, 2.0])
    return DCProgram(
        n=2,
        phi0=SmoothConvexFn.quadratic(np.eye(2), -2.0 * a, float(a @ a)),
        zeta0=zero_function(),
        psi0=MaxSmoothFn((SmoothConvexFn.constant(2),)),
        constraints=(Constraint(SmoothConvexFn.affine([1.0, 1.0], -1.0), zero_function(),
                                MaxSmoothFn((SmoothConvexFn.constant(2),))),),
        X=box(lower, [3.0, 3.0]),
    )


def test_infeasible_start_in_box():
    prog = halfplane_program([-3.0, -3.0])
    report = penalty_solve(prog, PenaltyConfig(rho0=1.0, eta0=1e-10), [3.0, 3.0])
    assert report.iterations[0].violation > 0.1
    assert report.stop_reason == StopReason.CONVERGED
    assert report.violation <= 1e-6
    np.testing.assert_allclose(report.x_final, [0.5, 0.5], atol=1e-4)
    assert report.objective == pytest.approx(4.5, abs=1e-3)


def test_settled_infeasible_iterates_stall():
    # x1 + x2 - 1 >= 4 everywhere on the box
    prog = halfplane_program([2.5, 2.5])
    report = penalty_solve(prog, PenaltyConfig(rho0=1.0, eta0=1e-10), [2.5, 2.5])
    assert report.stop_reason == StopReason.STALLED_INFEASIBLE
    assert report.violation == pytest.approx(4.0)
    assert report.outer_iterations == PenaltyConfig().stall_patience + 1


def outer_record(k: int, violation: float, rel_change: float = 0.0) -> OuterIteration:
    return OuterIteration(k=k, rho=2.0 ** k, x=np.ones(1), objective=0.0, merit=0.0, violation=violation,
                          rel_change=math.nan if k == 0 else rel_change)


def test_outer_stop_requires_feasibility():
    cfg = PenaltyConfig(feas_tol=1e-6, stall_patience=2)
    done = SCAResult(np.ones(1), 0.0, terminated=True)

    assert outer_stop([outer_record(0, 0.0)], done, cfg) is None
    assert outer_stop([outer_record(0, 1.0), outer_record(1, 1e-7)], done, cfg) == StopReason.CONVERGED
    assert outer_stop([outer_record(0, 1.0), outer_record(1, 1e-7, rel_change=1.0)], done, cfg) is None

    settled = [outer_record(k, 0.5) for k in range(3)]
    assert outer_stop(settled[:2], done, cfg) is None
    assert outer_stop(settled, done, cfg) == StopReason.STALLED_INFEASIBLE

    shrinking = [outer_record(k, 0.5 ** k) for k in range(3)]
    assert outer_stop(shrinking, done, cfg) is None

    assert outer_stop(settled, SCAResult(np.ones(1), 0.0), cfg) == StopReason.INNER_LIMIT

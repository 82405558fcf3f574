import csv
import itertools
import os

import numpy as np
import pytest

from dcopt.cli import run_experiment
from dcopt.configuration import Configuration
from dcopt.dataclasses import PenaltyConfig
from dcopt.enums import Method, StopReason
from dcopt.penalty import penalty_solve
from dcopt.problems import gen_sparse_recovery, l1_ball_start

pytestmark = pytest.mark.slow


def experiment_config(tmp_path, experiment: str, runs: int, problem: dict, **solver) -> Configuration:
    return Configuration(overrides={'command': 'reproduce-experiment', 'out': str(tmp_path), 'runs': runs,
                                    'experiment': experiment, 'problem': problem, 'solver': solver}, use_env=False)


def test_quadratic_experiment(tmp_path):
    config = experiment_config(tmp_path, 'quadratic', 2, {'n': 5}, max_outer=30)
    summaries = run_experiment(config, [Method.PM1, Method.PM2, Method.ALM])
    assert len(summaries) == 6
    assert {s.method for s in summaries} == {Method.PM1, Method.PM2, Method.ALM}

    with open(os.path.join(str(tmp_path), 'quadratic-seed0', 'table.csv'), encoding='utf-8') as fp:
        rows = list(csv.DictReader(fp))

    assert len(rows) == 9
    assert [row['run'] for row in rows[6:]] == ['mean'] * 3
    assert [row['method'] for row in rows[6:]] == ['pm1', 'pm2', 'alm']


def test_quadratic_methods_agree(tmp_path):
    config = experiment_config(tmp_path, 'quadratic', 3, {'n': 10})
    summaries = run_experiment(config, [Method.PM1, Method.PM2, Method.ALM])

    for run in range(3):
        group = [s for s in summaries if s.run == run]
        assert len(group) == 3
        for s in group:
            assert s.stop_reason == StopReason.CONVERGED.value
            assert s.violation <= 1e-6

        for a, b in itertools.combinations(group, 2):
            assert abs(a.objective - b.objective) <= 1e-3 * max(abs(a.objective), abs(b.objective)), (a, b)


def test_sparse_recovery_reaches_the_noise_floor(tmp_path):
    problem = {'m': 64, 'n': 256, 'K': 5, 's': 0.1, 'noise': 1e-6}
    config = experiment_config(tmp_path, 'sparse', 2, problem)
    summaries = run_experiment(config, [Method.PM2, Method.ALM])

    for method in (Method.PM2, Method.ALM):
        group = [s for s in summaries if s.method == method]
        assert len(group) == 2
        assert np.mean([s.objective for s in group]) <= 1e-3
        assert np.mean([s.rel_err for s in group]) <= 1e-2
        for s in group:
            assert s.stop_reason != StopReason.CONVERGED.value or s.violation <= 1e-6


def test_sparse_recovery_pm2():
    prog, spec = gen_sparse_recovery(32, 128, 4, 0.1, 0)
    report = penalty_solve(prog, PenaltyConfig(max_outer=40), l1_ball_start(spec))
    assert report.stop_reason in (StopReason.CONVERGED, StopReason.STALLED_INFEASIBLE, StopReason.MAX_OUTER)
    assert report.violation <= 1e-3
    if report.stop_reason == StopReason.CONVERGED:
        assert report.violation <= PenaltyConfig().feas_tol

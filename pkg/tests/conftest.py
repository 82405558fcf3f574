import os

import hypothesis
import numpy as np
import pytest

from dcopt.dc_model import DCProgram, MaxSmoothFn, SmoothConvexFn, l1_norm
from dcopt.problems import gen_quadratic_dc, one_dim_example

np.seterr(divide='warn', over='warn', invalid='warn', under='ignore')

hypothesis.settings.register_profile('fast', max_examples=15, derandomize=True, deadline=None)
hypothesis.settings.register_profile('thorough', max_examples=200, deadline=None)
hypothesis.settings.register_profile('debugger', report_multiple_bugs=False, derandomize=True, deadline=None)
hypothesis.settings.load_profile(os.getenv('HYPOTHESIS_PROFILE', 'fast'))

# minimizer of ||x - a||^2 + 0.5 ||x||_1
CONVEX_TARGET = np.array([1.0, -2.0])
CONVEX_SOLUTION = np.array([0.75, -1.75])


def make_convex_program() -> DCProgram:
    a = CONVEX_TARGET
    return DCProgram(
        n=2,
        phi0=SmoothConvexFn.quadratic(np.eye(2), -2.0 * a, float(a @ a)),
        zeta0=l1_norm(0.5),
        psi0=MaxSmoothFn((SmoothConvexFn.constant(2),)),
        name='convex',
    )


@pytest.fixture
def example_prog():
    return one_dim_example()


@pytest.fixture
def convex_prog():
    return make_convex_program()


@pytest.fixture
def quadratic_prog():
    prog, _ = gen_quadratic_dc(3, 0)
    return prog


@pytest.fixture
def convex_solution():
    return CONVEX_SOLUTION.copy()

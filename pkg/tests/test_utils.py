import math

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given

from dcopt.errors import DimensionError
from dcopt.utils import (as_vector, chunked, deep_merge, drop_none, format_number, interval_distance, project_l1_ball,
                         project_simplex, soft_threshold, text_to_vector, vector_to_text)

vectors = st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=12).map(np.array)


def test_deep_merge_nested_and_none():
    base = {'solver': {'eps': 0.01, 'rho0': 0.1}, 'seed': 0}
    merged = deep_merge(base, {'solver': {'rho0': 1.0, 'eps': None}, 'seed': None, 'out': 'runs'})
    assert merged == {'solver': {'eps': 0.01, 'rho0': 1.0}, 'seed': 0, 'out': 'runs'}


def test_deep_merge_allow_none():
    assert deep_merge({'instance': 'a.yml'}, {'instance': None}, allow_none=True) == {'instance': None}


def test_deep_merge_skips_unset_new_keys():
    base = {'solver': {'eps': 0.01}}
    merged = deep_merge(base, {'solver': {'p': None, 'feas_tol': 1e-6}, 'extra': {'a': None}})
    assert merged == {'solver': {'eps': 0.01, 'feas_tol': 1e-6}, 'extra': {}}


def test_drop_none():
    data = {'method': None, 'seed': 3, 'solver': {'p': None, 'eps': 0.5}, 'sca': {'backend': None}}
    assert drop_none(data) == {'seed': 3, 'solver': {'eps': 0.5}}
    assert data['solver'] == {'p': None, 'eps': 0.5}


def test_as_vector():
    assert as_vector(3.0).shape == (1,)
    with pytest.raises(DimensionError):
        as_vector([1.0, 2.0], 3)

    with pytest.raises(DimensionError):
        as_vector(np.eye(2))


def test_soft_threshold():
    np.testing.assert_allclose(soft_threshold(np.array([3.0, -0.5, -2.0]), 1.0), [2.0, 0.0, -1.0])


def test_interval_distance():
    lower = np.array([-1.0, 2.0, -np.inf])
    upper = np.array([1.0, 3.0, -4.0])
    np.testing.assert_allclose(interval_distance(lower, upper), [0.0, 2.0, 4.0])


@given(vectors)
def test_project_simplex(v):
    z = project_simplex(v)
    assert np.all(z >= 0)
    assert math.isclose(float(np.sum(z)), 1.0, abs_tol=1e-9)


@given(vectors, st.floats(0.01, 50))
def test_project_l1_ball(v, tau):
    z = project_l1_ball(v, tau)
    assert np.linalg.norm(z, 1) <= tau * (1 + 1e-9) + 1e-9
    if np.linalg.norm(v, 1) <= tau:
        np.testing.assert_array_equal(z, v)


def test_project_l1_ball_example():
    np.testing.assert_allclose(project_l1_ball(np.array([3.0, -1.0, 0.5]), 2.0), [2.0, 0.0, 0.0])


def test_format_number():
    assert format_number(1 / 3) == '0.33333333333333331'
    assert format_number(1234.5678, 3) == '1.23e+03'
    assert format_number(math.nan) == ''
    assert format_number(None) == ''


def test_vector_text():
    x = np.array([0.1, -2.5, 7.0])
    assert vector_to_text(x) == '0.10000000000000001 -2.5 7'
    np.testing.assert_array_equal(text_to_vector(vector_to_text(x)), x)
    assert text_to_vector('  ').size == 0


def test_chunked():
    assert list(chunked(range(5), 2)) == [(0, 1), (2, 3), (4,)]
    assert list(chunked([], 3)) == []

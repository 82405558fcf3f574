import numpy as np
import pytest

from dcopt.dc_model import MultiIndex, constraint_values, objective_value
from dcopt.diagnostics import feasibility_violation
from dcopt.enums import InstanceKind
from dcopt.errors import ChecksumError, InstanceFormatError, ModelError, VersionError
from dcopt.problems import (build_program, dumps_instance, feasible_start, gen_quadratic_dc, gen_sparse_recovery,
                            generate_instance, h_separable, instance_from_quadratic, l1_ball_start, load_instance,
                            loads_instance, make_generator, one_dim_reference, quadratic_start, random_psd,
                            save_instance)
from dcopt.utils import project_l1_ball


def test_quadratic_generation_is_deterministic():
    _, first = gen_quadratic_dc(4, 7)
    _, second = gen_quadratic_dc(4, 7)
    _, other = gen_quadratic_dc(4, 8)
    for name, block in first.blocks().items():
        np.testing.assert_array_equal(block, second.blocks()[name])

    assert not np.array_equal(first.Q, other.Q)
    assert first.B.shape == (2, 2, 4, 4)
    assert first.b.shape == (2, 2, 4)


def test_quadratic_matrices_are_psd():
    _, spec = gen_quadratic_dc(5, 3)
    for M in spec.matrices:
        np.testing.assert_allclose(M, M.T)
        assert np.linalg.eigvalsh(M)[0] >= -1e-10
        assert np.linalg.eigvalsh(M)[-1] <= 20.0 + 1e-9


def test_random_psd_spectrum():
    M = random_psd(make_generator(0), 6, high=2.0)
    eigenvalues = np.linalg.eigvalsh(M)
    assert eigenvalues[0] >= -1e-12
    assert eigenvalues[-1] <= 2.0 + 1e-12


def test_quadratic_program_values():
    prog, spec = gen_quadratic_dc(3, 1)
    x = np.array([0.3, -1.0, 2.0])
    assert objective_value(prog, x) == pytest.approx(x @ spec.Q @ x + spec.q @ x)

    i = 1
    pieces = [x @ spec.B[i, j] @ x + spec.b[i, j] @ x + spec.d[i, j] for j in range(2)]
    expected = x @ spec.A[i] @ x + spec.a[i] @ x + spec.c[i] - max(pieces)
    assert constraint_values(prog, x)[i] == pytest.approx(expected)
    assert prog.I == 2

    with pytest.raises(ModelError):
        gen_quadratic_dc(1, 0)


def test_sparse_generation():
    prog, spec = gen_sparse_recovery(8, 32, 3, 0.1, 5)
    np.testing.assert_allclose(spec.A @ spec.A.T, np.eye(8), atol=1e-12)
    assert np.count_nonzero(spec.x_star) == 3
    assert set(np.abs(spec.x_star[spec.x_star != 0])) == {1.0}
    np.testing.assert_allclose(spec.b, spec.A @ spec.x_star + spec.xi)

    _, again = gen_sparse_recovery(8, 32, 3, 0.1, 5)
    np.testing.assert_array_equal(again.A, spec.A)

    # x* is feasible: ||x*||_1 - sum h = K - K (1 - s) = sK
    assert feasibility_violation(prog, spec.x_star) == pytest.approx(0.0, abs=1e-12)


def test_sparse_noise_level():
    _, exact = gen_sparse_recovery(8, 32, 3, 0.1, 5, noise=0.0)
    np.testing.assert_array_equal(exact.b, exact.A @ exact.x_star)

    _, quiet = gen_sparse_recovery(8, 32, 3, 0.1, 5, noise=1e-6)
    _, loud = gen_sparse_recovery(8, 32, 3, 0.1, 5)
    # same draws, scaled by the standard deviation
    np.testing.assert_allclose(loud.xi, np.sqrt(1e-3 / 1e-6) * quiet.xi)
    np.testing.assert_array_equal(loud.A, quiet.A)


@pytest.mark.parametrize('args', [(8, 32, 0, 0.1, 0), (8, 32, 33, 0.1, 0), (8, 32, 3, 0.0, 0), (40, 32, 3, 0.1, 0),
                                  (8, 32, 3, 0.1, 0, -1.0)])
def test_sparse_generation_validation(args):
    with pytest.raises(ModelError):
        gen_sparse_recovery(*args)


def test_h_separable():
    h = h_separable(3, 0.1)
    assert h.value(np.array([0.5, -0.05, -2.0])) == pytest.approx(0.4 + 0.0 + 1.9)
    assert list(h.active_choices(np.array([0.5, 0.0, -0.5]), 0.0)) == [(0, 1, 2)]


def test_l1_ball_start():
    _, spec = gen_sparse_recovery(8, 32, 3, 0.1, 2)
    x = l1_ball_start(spec)
    assert np.linalg.norm(x, 1) <= spec.s * spec.K + 1e-9

    # projected gradient fixed point
    step = x - spec.A.T @ (spec.A @ x - spec.b)
    np.testing.assert_allclose(project_l1_ball(step, spec.s * spec.K), x, atol=1e-8)


def test_feasible_start(example_prog):
    # feasible points of 2x - |x| <= 0 are the nonpositive reals
    x = feasible_start(example_prog, make_generator(0, 1))
    assert x[0] <= 0.0
    assert feasibility_violation(example_prog, x) == 0.0
    np.testing.assert_array_equal(quadratic_start(0, 1, 3), make_generator(0, 1).standard_normal(3))


def test_instance_round_trip(tmp_path):
    prog, spec = gen_quadratic_dc(3, 4)
    instance = instance_from_quadratic(spec)
    path = str(tmp_path / 'instance.yml')
    save_instance(instance, path)

    loaded = load_instance(path)
    assert loaded.kind == InstanceKind.QUADRATIC_DC
    assert loaded.seed == 4
    for name, block in instance.blocks.items():
        np.testing.assert_array_equal(loaded.blocks[name], block)

    rebuilt = build_program(loaded)
    x = np.array([1.0, -0.5, 0.25])
    assert objective_value(rebuilt, x) == objective_value(prog, x)
    np.testing.assert_array_equal(constraint_values(rebuilt, x), constraint_values(prog, x))


def test_sparse_instance_round_trip():
    _, instance, x_star = generate_instance(InstanceKind.SPARSE_RECOVERY, 1, n=16, m=4, K=2, s=0.2)
    loaded = loads_instance(dumps_instance(instance))
    np.testing.assert_array_equal(loaded.blocks['x_star'], x_star)
    assert loaded.params == {'s': 0.2, 'noise': 1e-3}
    assert loaded.dims == {'m': 4, 'n': 16, 'K': 2}


def test_example_instance():
    prog, instance, x_star = generate_instance(InstanceKind.ONE_DIM_EXAMPLE, 0)
    assert x_star is None
    assert prog.n == 1
    assert build_program(loads_instance(dumps_instance(instance))).name == 'one_dim_example'


@pytest.fixture
def instance_text():
    _, spec = gen_quadratic_dc(2, 3)
    return dumps_instance(instance_from_quadratic(spec))


def test_truncated_instance(instance_text):
    with pytest.raises(InstanceFormatError) as e:
        loads_instance(instance_text[:instance_text.index('checksum:')])

    assert e.value.section == 'checksum'


def test_tampered_instance(instance_text):
    with pytest.raises(ChecksumError):
        loads_instance(instance_text.replace('seed: 3', 'seed: 4'))


def test_instance_version(instance_text):
    with pytest.raises(VersionError) as e:
        loads_instance(instance_text.replace('version: 1', 'version: 2'))

    assert e.value.section == 'version'


def test_instance_format(instance_text):
    with pytest.raises(InstanceFormatError) as e:
        loads_instance(instance_text.replace('format: dcopt-instance', 'format: other'))

    assert e.value.section == 'format'

    with pytest.raises(InstanceFormatError):
        loads_instance('- just\n- a list\n')


def test_example_reference_values():
    reference = one_dim_reference(0, 0.1)
    assert reference['x'] == pytest.approx(50.0)
    assert reference['lam_next'] == 5.0
    assert len(reference['aux_x']) == 4
    assert MultiIndex(1, (0,)).label() == '(2,1)'

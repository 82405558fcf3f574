import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given

from dcopt.dc_model import (Constraint, DCProgram, MaxSmoothFn, MultiIndex, NonsmoothConvexFn, SmoothConvexFn,
                            eps_active_pairs, polyhedron, zero_function)
from dcopt.enums import SubsolveMethod
from dcopt.errors import ModelError, UnsupportedError
from dcopt.majorants import ALMode, MajorantInstance, PenaltyMode
from dcopt.problems import gen_quadratic_dc, make_generator
from dcopt.subsolver import fallback_methods, select_method, solve_certified, stationarity_residual


def constrained_polyhedral(p_mode):
    prog = DCProgram(
        n=2,
        phi0=SmoothConvexFn.quadratic(np.eye(2), np.array([-2.0, 0.0])),
        zeta0=zero_function(),
        psi0=MaxSmoothFn((SmoothConvexFn.constant(2),)),
        constraints=(Constraint(SmoothConvexFn.affine([1.0, 1.0], -0.5), zero_function(),
                                MaxSmoothFn((SmoothConvexFn.constant(2),))),),
        X=polyhedron([[1.0, 0.0]], [5.0]),
    )
    return MajorantInstance.build(prog, 1.0, np.zeros(2), MultiIndex(0, (0,)), p_mode)


@pytest.mark.parametrize('backend', ['auto', 'dual', 'prox-gradient', 'subgradient'])
def test_convex_program_backends(convex_prog, convex_solution, backend):
    m = MajorantInstance(convex_prog, 1.0, np.array([0.5, -1.0]), MultiIndex(0, ()))
    x, certificate = solve_certified(m, m.anchor, 1e-6, backend=backend)
    np.testing.assert_allclose(x, convex_solution, atol=1e-6)
    assert certificate.certified
    assert certificate.gap_bound == pytest.approx(1e-12 / 4.0)
    assert certificate.value == pytest.approx(1.375)
    assert stationarity_residual(m, x) <= 1e-5


def test_select_method(convex_prog, example_prog):
    anchored = MajorantInstance(convex_prog, 1.0, np.zeros(2), MultiIndex(0, ()))
    assert select_method(anchored) == SubsolveMethod.DUAL
    assert select_method(MajorantInstance(example_prog, 1.0, [0.0], MultiIndex(0, (1,)))) == SubsolveMethod.DUAL

    assert select_method(constrained_polyhedral(PenaltyMode(2))) == SubsolveMethod.PROX_GRADIENT
    assert select_method(constrained_polyhedral(ALMode([1.0]))) == SubsolveMethod.PROX_GRADIENT
    assert select_method(constrained_polyhedral(PenaltyMode(1))) == SubsolveMethod.SUBGRADIENT

    with pytest.raises(UnsupportedError):
        select_method(constrained_polyhedral(PenaltyMode(2)), 'dual')

    with pytest.raises(UnsupportedError):
        select_method(constrained_polyhedral(PenaltyMode(1)), 'prox-gradient')

    custom = DCProgram(
        n=1,
        phi0=SmoothConvexFn.quadratic([[1.0]], [0.0]),
        zeta0=NonsmoothConvexFn(lambda x: float(abs(x[0]) ** 3), lambda x: 3.0 * np.sign(x) * x ** 2),
        psi0=MaxSmoothFn((SmoothConvexFn.constant(1),)),
    )
    assert select_method(MajorantInstance(custom, 1.0, [1.0], MultiIndex(0, ()))) == SubsolveMethod.SUBGRADIENT


@pytest.mark.parametrize('mode', [PenaltyMode(1), PenaltyMode(2), ALMode([0.5])])
@pytest.mark.parametrize('anchor', [-1.0, 0.0, 2.0])
def test_dual_against_grid(example_prog, mode, anchor):
    m = MajorantInstance.build(example_prog, 1.0, [anchor], MultiIndex(0, (1,)), mode)
    x, certificate = solve_certified(m, [anchor], 1e-6)
    assert certificate.certified
    assert certificate.method == SubsolveMethod.DUAL

    grid = np.linspace(-20.0, 20.0, 8001)
    best = min(m.value(np.array([z])) for z in grid)
    assert m.value(x) <= best + certificate.gap_bound + 1e-12


def test_polyhedral_prox_gradient():
    m = constrained_polyhedral(ALMode([1.0]))
    x, certificate = solve_certified(m, np.zeros(2), 1e-6)
    assert certificate.method == SubsolveMethod.PROX_GRADIENT
    assert certificate.certified
    # augmented hinge derivative settles at 3/4
    np.testing.assert_allclose(x, [0.625, -0.375], atol=1e-5)


def test_uncertified_result_is_flagged(convex_prog):
    m = MajorantInstance(convex_prog, 1.0, np.zeros(2), MultiIndex(0, ()))
    _, certificate = solve_certified(m, np.zeros(2), 1e-6, max_iter=1, backend='subgradient')
    assert not certificate.certified
    assert certificate.residual > 1e-6


def test_input_validation(convex_prog):
    m = MajorantInstance(convex_prog, 1.0, np.zeros(2), MultiIndex(0, ()))
    with pytest.raises(ModelError):
        solve_certified(m, np.zeros(2), 0.0)

    with pytest.raises(UnsupportedError):
        stationarity_residual(constrained_polyhedral(PenaltyMode(2)), np.zeros(2))


def test_fallback_methods():
    smooth = constrained_polyhedral(PenaltyMode(2))
    assert fallback_methods(smooth, SubsolveMethod.DUAL) == [SubsolveMethod.PROX_GRADIENT, SubsolveMethod.SUBGRADIENT]
    assert fallback_methods(smooth, SubsolveMethod.PROX_GRADIENT) == [SubsolveMethod.SUBGRADIENT]

    kinked = constrained_polyhedral(PenaltyMode(1))
    assert fallback_methods(kinked, SubsolveMethod.DUAL) == [SubsolveMethod.SUBGRADIENT]
    assert fallback_methods(kinked, SubsolveMethod.SUBGRADIENT) == []


MODES = [PenaltyMode(1), PenaltyMode(2), ALMode([0.5, 1.0])]


def quadratic_majorant(seed: int, mode_position: int, n: int = 3, rho: float = 1.0) -> MajorantInstance:
    prog, _ = gen_quadratic_dc(n, seed)
    anchor = make_generator(seed, 5).standard_normal(n)
    index = next(iter(eps_active_pairs(prog, anchor, 0.0)))
    return MajorantInstance.build(prog, rho, anchor, index, MODES[mode_position])


@given(st.integers(0, 40), st.sampled_from([1, 2]))
def test_certificates_refine_with_delta(seed, mode_position):
    m = quadratic_majorant(seed, mode_position)
    solved = [solve_certified(m, m.anchor, delta) for delta in (1e-2, 1e-3, 1e-4)]
    assert all(certificate.certified for _, certificate in solved)

    bounds = [certificate.gap_bound for _, certificate in solved]
    assert bounds[0] > bounds[1] > bounds[2]
    for (x_coarse, coarse), (x_fine, fine) in zip(solved, solved[1:]):
        # both points lie within delta / L0 of the unique minimizer
        assert np.linalg.norm(x_fine - x_coarse) <= (coarse.delta + fine.delta) / m.L0 * (1.0 + 1e-9)
        assert fine.value <= coarse.value + fine.gap_bound + 1e-12 * (1.0 + abs(coarse.value))


@pytest.mark.parametrize('delta', [1e-2, 1e-4])
@given(st.integers(0, 40), st.sampled_from([1, 2]))
def test_two_dimensional_gap_against_grid(delta, seed, mode_position):
    m = quadratic_majorant(seed, mode_position, n=2)
    x, certificate = solve_certified(m, m.anchor, delta)
    assert certificate.certified

    axis = np.linspace(-1.0, 1.0, 61)
    best = min(m.value(x + np.array([u, v])) for u in axis for v in axis)
    assert m.value(x) <= best + certificate.gap_bound + 1e-12 * (1.0 + abs(best))


@pytest.mark.parametrize('seed', range(5))
@pytest.mark.parametrize('rho', [1.0, 10.0])
def test_linear_hinges_certify_on_quadratic_instances(seed, rho):
    m = quadratic_majorant(seed, 0, rho=rho)
    x, certificate = solve_certified(m, m.anchor, 1e-4)
    assert certificate.method == SubsolveMethod.DUAL
    assert certificate.certified
    assert m.value(x) <= m.value(m.anchor) + certificate.gap_bound

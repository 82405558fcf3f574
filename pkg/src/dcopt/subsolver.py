from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq, minimize, root

from .enums import HingeKind, NonsmoothKind, SetKind, SubsolveBackend, SubsolveMethod
from .errors import ModelError, UnsupportedError
from .majorants import MajorantInstance
from .utils import interval_distance, soft_threshold

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITER = {
    SubsolveMethod.DUAL: 500,
    SubsolveMethod.PROX_GRADIENT: 5000,
    SubsolveMethod.SUBGRADIENT: 20000,
}
KINK_TOL = 1e-12
KINK_BAND = 1e-6


@dataclass(frozen=True)
class SubsolveCertificate:
    delta: float
    gap_bound: float
    method: SubsolveMethod
    residual: float
    iterations: int
    certified: bool
    value: float = math.nan

    @classmethod
    def make(cls, *, delta: float, L0: float, method: SubsolveMethod, residual: float, iterations: int,
             value: float) -> SubsolveCertificate:
        return cls(
            delta=delta,
            gap_bound=delta ** 2 / (2.0 * L0),
            method=method,
            residual=float(residual),
            iterations=iterations,
            certified=bool(residual <= delta),
            value=value,
        )


def _box_family(m: MajorantInstance) -> bool:
    return m.prog.X.is_box_like and all(z.kind in (NonsmoothKind.ZERO, NonsmoothKind.L1) for z in m.zetas)


def _prox_friendly(m: MajorantInstance) -> bool:
    if m.prog.I > 0 and not m.hinges.smooth:
        return False

    if any(c.zeta.kind != NonsmoothKind.ZERO for c in m.prog.constraints):
        return False

    zeta0, X = m.prog.zeta0, m.prog.X
    if zeta0.kind == NonsmoothKind.ZERO:
        return True

    if X.kind == SetKind.WHOLE_SPACE:
        return zeta0.has_prox

    return zeta0.kind == NonsmoothKind.L1 and X.kind == SetKind.BOX


def select_method(m: MajorantInstance, backend: str = SubsolveBackend.AUTO) -> SubsolveMethod:
    if backend == SubsolveBackend.AUTO:
        if _box_family(m):
            return SubsolveMethod.DUAL

        if _prox_friendly(m):
            return SubsolveMethod.PROX_GRADIENT

        return SubsolveMethod.SUBGRADIENT

    method = SubsolveMethod(backend)
    if method == SubsolveMethod.DUAL and not _box_family(m):
        raise UnsupportedError('dual backend needs a box-like X and zero or l1 nonsmooth parts')

    if method == SubsolveMethod.PROX_GRADIENT and not _prox_friendly(m):
        raise UnsupportedError('prox-gradient backend needs smooth hinges and a prox for zeta0 plus X')

    return method


def fallback_methods(m: MajorantInstance, tried: SubsolveMethod) -> List[SubsolveMethod]:
    """Other backends that accept this majorant, in the order auto-selection would rank them."""
    candidates = [SubsolveMethod.PROX_GRADIENT] if _prox_friendly(m) else []
    candidates.append(SubsolveMethod.SUBGRADIENT)
    return [method for method in candidates if method != tried]


def stationarity_residual(m: MajorantInstance, x: np.ndarray, multipliers: Optional[np.ndarray] = None) -> float:
    """Distance from 0 to the subdifferential of the majorant plus the normal cone of X at x.

    Exact for box-like X and zero/l1 nonsmooth parts. `multipliers` picks the
    hinge derivative elements; by default the hinge derivative at x is used.
    """
    if not _box_family(m):
        raise UnsupportedError('stationarity residual needs a box-like X and zero or l1 nonsmooth parts')

    n = m.prog.n
    if multipliers is None:
        multipliers = m.hinges.derivative(m.inner(x))

    coefficients = np.concatenate(([1.0], multipliers))
    smooth = coefficients @ m.smooth_gradients(x)
    weights = coefficients @ np.array([z.l1_weights(n) for z in m.zetas])

    lower = smooth + np.where(x > 0, weights, -weights)
    upper = smooth + np.where(x < 0, -weights, weights)
    cone_lower, cone_upper = m.prog.X.normal_cone_bounds(x)
    distance = interval_distance(lower + cone_lower, upper + cone_upper)
    return float(np.linalg.norm(distance))


def solve_certified(m: MajorantInstance, x0, delta: float, max_iter: Optional[int] = None,
                    backend: str = SubsolveBackend.AUTO) -> Tuple[np.ndarray, SubsolveCertificate]:
    """Minimize the majorant over X until dist(0, subdifferential) <= delta is certified.

    Either certificate implies Q(x_hat) - min Q <= delta^2/(2 L0). A failed
    certificate is returned with `certified=False`; the caller decides.
    """
    if not delta > 0:
        raise ModelError(f'delta must be positive, got {delta}')

    if m.L0 <= 0:
        raise ModelError('majorant is not strongly convex')

    x0 = m.prog.check_vector(x0)
    if not m.prog.X.contains(x0, 1e-8):
        raise ModelError('initial point lies outside X')

    method = select_method(m, backend)
    if max_iter is None:
        max_iter = DEFAULT_MAX_ITER[method]

    if method == SubsolveMethod.DUAL:
        x, certificate = _DualSolver(m).solve(x0, delta, max_iter)
    elif method == SubsolveMethod.PROX_GRADIENT:
        x, certificate = _prox_gradient(m, x0, delta, max_iter)
    else:
        x, certificate = _subgradient(m, x0, delta, max_iter)

    if not certificate.certified:
        logger.warning('Subsolve (%s) not certified: residual %.3e > delta %.3e',
                       method.value, certificate.residual, delta)

    return x, certificate


class _DualSolver:
    """Maximize the concave dual over hinge multipliers; the inner minimizer is closed form.

    For multipliers mu the Lagrangian minimizer over the box is
    clip(soft_threshold(anchor - G/A, W/A)) with A, G, W the mu-weighted sums
    of curvatures, gradients and l1 weights of all parts.
    """

    def __init__(self, m: MajorantInstance):
        self.m = m
        n = m.prog.n
        self.weights = np.array([z.l1_weights(n) for z in m.zetas])
        self.lower, self.upper = m.prog.X.box_bounds()
        self.hinges = m.hinges
        self.evaluations = 0

    def argmin(self, mu: np.ndarray) -> np.ndarray:
        m = self.m
        coefficients = np.concatenate(([1.0], mu))
        A = float(coefficients @ m.lips)
        G = coefficients @ m.grads
        W = coefficients @ self.weights
        z = soft_threshold(m.anchor - G / A, W / A)
        return np.clip(z, self.lower, self.upper)

    def gradient(self, mu: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        self.evaluations += 1
        x = self.argmin(mu)
        return x, self.m.inner(x) - self.hinges.conjugate_derivative(mu)

    def negative_dual(self, mu: np.ndarray) -> Tuple[float, np.ndarray]:
        x, grad = self.gradient(mu)
        totals = self.m.smooth_values(x) + self.m.zeta_values(x)
        value = totals[0] + float(mu @ totals[1:]) - float(np.sum(self.hinges.conjugate(mu)))
        return -value, -grad

    def _scalar(self, max_iter: int) -> np.ndarray:
        def slope(value):
            return float(self.gradient(np.array([value]))[1][0])

        if slope(0.0) <= 0:
            return np.zeros(1)

        upper = self.hinges.upper
        if np.isinf(upper):
            upper = max(1.0, float(self.hinges.derivative(self.m.inner(self.argmin(np.zeros(1))))[0]))
            for _ in range(200):
                if slope(upper) <= 0:
                    break
                upper *= 2.0
            else:
                raise ModelError('dual slope stays positive; hinge multiplier is unbounded')
        elif slope(upper) >= 0:
            return np.array([upper])

        # rtol alone stops the search; a bracket-sized xtol is too coarse at large rho
        mu = brentq(slope, 0.0, upper, xtol=np.finfo(float).tiny, rtol=4 * np.finfo(float).eps, maxiter=max_iter,
                    disp=False)
        return np.array([mu])

    def _vector(self, x0: np.ndarray, max_iter: int) -> np.ndarray:
        I = self.m.prog.I
        start = np.clip(self.hinges.derivative(self.m.inner(x0)), 0.0, self.hinges.upper)
        bounds = [(0.0, None if np.isinf(self.hinges.upper) else self.hinges.upper)] * I
        result = minimize(self.negative_dual, start, jac=True, method='L-BFGS-B', bounds=bounds,
                          options={'maxiter': max_iter, 'ftol': 1e-16, 'gtol': 1e-14})
        mu = np.clip(result.x, 0.0, self.hinges.upper)

        if self.hinges.smooth:
            def fixed_point(value):
                return value - self.hinges.derivative(self.m.inner(self.argmin(np.maximum(value, 0.0))))

            polished = root(fixed_point, mu, method='hybr')
            candidate = np.maximum(polished.x, 0.0)
            if np.linalg.norm(fixed_point(candidate)) < np.linalg.norm(fixed_point(mu)):
                mu = candidate
        elif self.hinges.kind == HingeKind.LINEAR:
            mu = self._pin_kinks(mu)

        return mu

    def _pin_kinks(self, mu: np.ndarray) -> np.ndarray:
        """Re-solve the multipliers of constraints left just off their kink so that they sit on it exactly."""
        rho = self.hinges.rho
        x = self.argmin(mu)
        t = self.m.inner(x)
        pinned = (np.abs(t) <= KINK_BAND * self._kink_scale(x)) & (mu > 0.0) & (mu < rho)
        if not np.any(pinned):
            return mu

        def kinks(values):
            trial = mu.copy()
            trial[pinned] = np.clip(values, 0.0, rho)
            return self.m.inner(self.argmin(trial))[pinned]

        solved = root(kinks, mu[pinned], method='hybr')
        candidate = mu.copy()
        candidate[pinned] = np.clip(solved.x, 0.0, rho)
        return candidate if self.residual(candidate) < self.residual(mu) else mu

    def _kink_scale(self, x: np.ndarray) -> np.ndarray:
        return 1.0 + np.abs(self.m.smooth_values(x)[1:]) + self.m.zeta_values(x)[1:]

    def _element_multipliers(self, x: np.ndarray, mu: np.ndarray) -> np.ndarray:
        t = self.m.inner(x)
        multipliers = self.hinges.derivative(t)
        if self.hinges.kind == HingeKind.LINEAR:
            at_kink = np.abs(t) <= KINK_TOL * self._kink_scale(x)
            multipliers = np.where(at_kink, np.clip(mu, 0.0, self.hinges.rho), multipliers)

        return multipliers

    def residual(self, mu: np.ndarray) -> float:
        x = self.argmin(mu)
        return stationarity_residual(self.m, x, self._element_multipliers(x, mu))

    def solve(self, x0: np.ndarray, delta: float, max_iter: int) -> Tuple[np.ndarray, SubsolveCertificate]:
        m = self.m
        I = m.prog.I
        if I == 0:
            mu = np.zeros(0)
        elif I == 1:
            mu = self._scalar(max_iter)
        else:
            mu = self._vector(x0, max_iter)

        x = self.argmin(mu)
        value = m.value(x)
        residual = stationarity_residual(m, x, self._element_multipliers(x, mu)) if I else \
            stationarity_residual(m, x)

        if residual > delta and I:
            gap = float(np.sum(self.hinges.fenchel_gap(m.inner(x), mu)))
            residual = min(residual, math.sqrt(2.0 * m.L0 * max(gap, 0.0)))

        certificate = SubsolveCertificate.make(delta=delta, L0=m.L0, method=SubsolveMethod.DUAL,
                                               residual=residual, iterations=max(self.evaluations, 1), value=value)
        return x, certificate


def _prox_operator(m: MajorantInstance):
    zeta0, X = m.prog.zeta0, m.prog.X
    if zeta0.kind == NonsmoothKind.ZERO:
        return lambda v, step: X.project(v)

    if X.kind == SetKind.WHOLE_SPACE:
        return zeta0.prox

    lower, upper = X.box_bounds()
    weights = zeta0.l1_weights(m.prog.n)
    return lambda v, step: np.clip(soft_threshold(v, step * weights), lower, upper)


def _prox_gradient(m: MajorantInstance, x0: np.ndarray, delta: float,
                   max_iter: int) -> Tuple[np.ndarray, SubsolveCertificate]:
    """Accelerated proximal gradient with backtracking, step expansion and adaptive restart.

    The smooth part is u_0 + sum_i H_i(u_i); the residual
    M (y - x+) + grad f(x+) - grad f(y) is an exact subgradient element at x+.
    """
    hinges = m.hinges
    prox = _prox_operator(m)

    def f(x):
        u = m.smooth_values(x)
        return float(u[0] + np.sum(hinges.value(u[1:])))

    def grad_f(x):
        u = m.smooth_values(x)
        weights = np.concatenate(([1.0], hinges.derivative(u[1:])))
        return weights @ m.smooth_gradients(x)

    def local_bound(x):
        u = m.smooth_values(x)
        grads = m.smooth_gradients(x)
        bound = m.L0 + float(hinges.derivative(u[1:]) @ m.lips[1:])
        return bound + hinges.curvature() * float(np.sum(grads[1:] ** 2))

    x = y = x0.copy()
    theta = 1.0
    M = local_bound(x0)
    objective = f(x) + m.prog.zeta0.value(x)
    residual = math.inf

    iteration = 0
    for iteration in range(1, max_iter + 1):
        fy, gy = f(y), grad_f(y)
        for _ in range(80):
            x_new = prox(y - gy / M, 1.0 / M)
            diff = x_new - y
            if f(x_new) <= fy + float(gy @ diff) + 0.5 * M * float(diff @ diff) + 1e-15 * (1.0 + abs(fy)):
                break

            M *= 2.0

        residual = float(np.linalg.norm(M * (y - x_new) + grad_f(x_new) - gy))
        if residual <= delta:
            x = x_new
            break

        objective_new = f(x_new) + m.prog.zeta0.value(x_new)
        if objective_new > objective:
            theta = 1.0
            y = x_new.copy()
        else:
            theta_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta ** 2))
            y = x_new + ((theta - 1.0) / theta_next) * (x_new - x)
            theta = theta_next

        x, objective = x_new, objective_new
        M *= 0.9

    certificate = SubsolveCertificate.make(delta=delta, L0=m.L0, method=SubsolveMethod.PROX_GRADIENT,
                                           residual=residual, iterations=iteration, value=m.value(x))
    return x, certificate


def _subgradient(m: MajorantInstance, x0: np.ndarray, delta: float,
                 max_iter: int, check_every: int = 10) -> Tuple[np.ndarray, SubsolveCertificate]:
    """Projected subgradient with steps 2/(L0 (t+1)) and t-weighted averaging.

    Every visited point gives the global lower model
    Q(x_t) + g_t'(z - x_t) + L0/2 ||z - x_t||^2; their weighted average is an
    isotropic quadratic whose minimum over X is a rigorous lower bound on min Q.
    The running sums restart at powers of two and the best bound is kept.
    """
    X, L0, anchor = m.prog.X, m.L0, m.anchor
    gap_bound = delta ** 2 / (2.0 * L0)

    best_x, best_value = x0.copy(), m.value(x0)
    best_lower = -math.inf
    x = x0.copy()

    def reset():
        return 0.0, 0.0, np.zeros_like(x0), np.zeros_like(x0)

    sum_w, sum_c, sum_v, sum_x = reset()
    next_restart = 2
    iteration = 0
    for iteration in range(1, max_iter + 1):
        value = m.value(x)
        g = m.subgradient(x)
        if value < best_value:
            best_x, best_value = x.copy(), value

        offset = x - anchor
        w = float(iteration)
        sum_w += w
        sum_v += w * (g - L0 * offset)
        sum_c += w * (value - float(g @ offset) + 0.5 * L0 * float(offset @ offset))
        sum_x += w * x

        x = X.project(x - (2.0 / (L0 * (iteration + 1))) * g)

        if iteration % check_every == 0 or iteration == max_iter or iteration == next_restart:
            v = sum_v / sum_w
            z = X.project(anchor - v / L0) - anchor
            best_lower = max(best_lower, 0.5 * L0 * float(z @ z) + float(v @ z) + sum_c / sum_w)

            average = X.project(sum_x / sum_w)
            average_value = m.value(average)
            if average_value < best_value:
                best_x, best_value = average, average_value

            if best_value - best_lower <= gap_bound:
                break

        if iteration == next_restart:
            sum_w, sum_c, sum_v, sum_x = reset()
            next_restart *= 2

    gap = max(best_value - best_lower, 0.0)
    residual = math.sqrt(2.0 * L0 * gap) if math.isfinite(gap) else math.inf
    certificate = SubsolveCertificate.make(delta=delta, L0=L0, method=SubsolveMethod.SUBGRADIENT,
                                           residual=residual, iterations=iteration, value=best_value)
    return best_x, certificate

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .dc_model import DCProgram, MultiIndex, constraint_values, objective_value
from .enums import HingeKind
from .errors import ModelError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class HingeSet:
    """Outer penalty applied to each constraint value: rho[t]+, rho[t]+^2 or the shifted AL square."""
    kind: HingeKind
    rho: float
    lam: np.ndarray

    @property
    def smooth(self) -> bool:
        return self.kind != HingeKind.LINEAR

    @property
    def upper(self) -> float:
        """Upper end of the multiplier range (the conjugate's domain)."""
        return self.rho if self.kind == HingeKind.LINEAR else np.inf

    def value(self, t: np.ndarray) -> np.ndarray:
        if self.kind == HingeKind.LINEAR:
            return self.rho * np.maximum(t, 0.0)

        if self.kind == HingeKind.SQUARED:
            return self.rho * np.maximum(t, 0.0) ** 2

        return (np.maximum(self.lam + self.rho * t, 0.0) ** 2 - self.lam ** 2) / (2.0 * self.rho)

    def derivative(self, t: np.ndarray) -> np.ndarray:
        """Derivative, taking the 0-side element at the kink of the linear hinge."""
        if self.kind == HingeKind.LINEAR:
            return np.where(t > 0, self.rho, 0.0)

        if self.kind == HingeKind.SQUARED:
            return 2.0 * self.rho * np.maximum(t, 0.0)

        return np.maximum(self.lam + self.rho * t, 0.0)

    def curvature(self) -> float:
        if self.kind == HingeKind.SQUARED:
            return 2.0 * self.rho

        if self.kind == HingeKind.AUGMENTED:
            return self.rho

        return 0.0

    def conjugate(self, mu: np.ndarray) -> np.ndarray:
        if self.kind == HingeKind.LINEAR:
            return np.zeros_like(mu)

        if self.kind == HingeKind.SQUARED:
            return mu ** 2 / (4.0 * self.rho)

        return (mu - self.lam) ** 2 / (2.0 * self.rho)

    def conjugate_derivative(self, mu: np.ndarray) -> np.ndarray:
        if self.kind == HingeKind.LINEAR:
            return np.zeros_like(mu)

        if self.kind == HingeKind.SQUARED:
            return mu / (2.0 * self.rho)

        return (mu - self.lam) / self.rho

    def fenchel_gap(self, t: np.ndarray, mu: np.ndarray) -> np.ndarray:
        """H(t) - mu t + H*(mu), computed termwise so large values never cancel."""
        if self.kind == HingeKind.LINEAR:
            return (self.rho - mu) * np.maximum(t, 0.0) + mu * np.maximum(-t, 0.0)

        if self.kind == HingeKind.SQUARED:
            positive = self.rho * (t - mu / (2.0 * self.rho)) ** 2
            negative = -mu * t + mu ** 2 / (4.0 * self.rho)
            return np.where(t > 0, positive, negative)

        s = self.lam + self.rho * t
        positive = (s - mu) ** 2 / (2.0 * self.rho)
        negative = (mu ** 2 - 2.0 * mu * s) / (2.0 * self.rho)
        return np.where(s > 0, positive, negative)


@dataclass(frozen=True)
class PenaltyMode:
    p: int = 2

    def __post_init__(self):
        if self.p not in (1, 2):
            raise ModelError(f'penalty exponent must be 1 or 2, got {self.p}')

    @property
    def lam(self) -> None:
        return None

    def hinges(self, rho: float, n_constraints: int) -> HingeSet:
        kind = HingeKind.LINEAR if self.p == 1 else HingeKind.SQUARED
        return HingeSet(kind, rho, np.zeros(n_constraints))

    def describe(self) -> str:
        return f'penalty(p={self.p})'


@dataclass(frozen=True, eq=False)
class ALMode:
    lam: np.ndarray

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        if np.any(lam < 0):
            raise ModelError('multipliers must be nonnegative')

        object.__setattr__(self, 'lam', lam)

    @property
    def p(self) -> int:
        return 2

    def hinges(self, rho: float, n_constraints: int) -> HingeSet:
        if self.lam.shape != (n_constraints,):
            raise ModelError(f'expected {n_constraints} multipliers, got {self.lam.shape[0]}')

        return HingeSet(HingeKind.AUGMENTED, rho, self.lam)

    def describe(self) -> str:
        return 'al'


Mode = Union[PenaltyMode, ALMode]


def _check_rho(rho: float):
    if not rho > 0:
        raise ModelError(f'penalty parameter must be positive, got {rho}')


def merit_value(prog: DCProgram, rho: float, mode: Mode, x) -> float:
    """F_rho in penalty mode, the AL function in al mode."""
    _check_rho(rho)
    x = prog.check_vector(x)
    value = objective_value(prog, x)
    if prog.I == 0:
        return value

    hinges = mode.hinges(rho, prog.I)
    return value + float(np.sum(hinges.value(constraint_values(prog, x))))


def penalty_value(prog: DCProgram, rho: float, p: int, x) -> float:
    return merit_value(prog, rho, PenaltyMode(p), x)


def al_value(prog: DCProgram, rho: float, lam, x) -> float:
    return merit_value(prog, rho, ALMode(lam), x)


def pair_objective(prog: DCProgram, rho: float, mode: Mode, index: MultiIndex, x) -> float:
    """Merit function with every max term replaced by its selected piece."""
    _check_rho(rho)
    x = prog.check_vector(x)
    prog.check_index(index)
    value = prog.phi0.value(x) + prog.zeta0.value(x) - prog.psi0.selection_value(x, index.j0)
    if prog.I == 0:
        return value

    inner = np.array([
        c.phi.value(x) + c.zeta.value(x) - c.psi.selection_value(x, j)
        for c, j in zip(prog.constraints, index.jj)
    ])
    return value + float(np.sum(mode.hinges(rho, prog.I).value(inner)))


@dataclass(frozen=True, eq=False)
class MajorantInstance:
    """Strongly convex model at an anchor.

    Part i (0 for the objective) has the smooth model
    u_i(x) = const_i + grads_i'(x - anchor) + lips_i/2 ||x - anchor||^2,
    which is the quadratic upper model of phi_i minus the linearization of the
    selected psi piece. The majorant is u_0 + zeta_0 + sum_i H_i(u_i + zeta_i).
    """
    prog: DCProgram
    rho: float
    anchor: np.ndarray
    index: MultiIndex
    lam: Optional[np.ndarray] = None
    p: int = 2

    const: np.ndarray = field(init=False, repr=False)
    grads: np.ndarray = field(init=False, repr=False)
    lips: np.ndarray = field(init=False, repr=False)
    hinges: HingeSet = field(init=False, repr=False)

    def __post_init__(self):
        _check_rho(self.rho)
        prog = self.prog
        anchor = prog.check_vector(self.anchor)
        object.__setattr__(self, 'anchor', anchor)
        prog.check_index(self.index)

        if prog.L0 <= 0:
            raise ModelError('majorant is not strongly convex: phi0 has zero gradient Lipschitz constant '
                             '(normalize the program first)')

        if not prog.X.contains(anchor, 1e-8):
            raise ModelError('anchor lies outside X')

        if self.lam is not None:
            object.__setattr__(self, 'lam', np.atleast_1d(np.asarray(self.lam, dtype=float)))

        object.__setattr__(self, 'hinges', self.mode.hinges(self.rho, prog.I))

        const, grads, lips = [], [], []
        for i in [None] + list(range(prog.I)):
            phi, _, psi = prog.part(i)
            selection = self.index.selection(i)
            const.append(phi.value(anchor) - psi.selection_value(anchor, selection))
            grads.append(phi.gradient(anchor) - psi.selection_gradient(anchor, selection))
            lips.append(phi.lipschitz_grad)

        object.__setattr__(self, 'const', np.array(const))
        object.__setattr__(self, 'grads', np.array(grads).reshape(prog.I + 1, prog.n))
        object.__setattr__(self, 'lips', np.array(lips))

    @classmethod
    def build(cls, prog: DCProgram, rho: float, anchor, index: MultiIndex, mode: Mode) -> MajorantInstance:
        if isinstance(mode, ALMode):
            return cls(prog, rho, anchor, index, lam=mode.lam)

        return cls(prog, rho, anchor, index, p=mode.p)

    @property
    def mode(self) -> Mode:
        return PenaltyMode(self.p) if self.lam is None else ALMode(self.lam)

    @property
    def L0(self) -> float:
        return float(self.lips[0])

    @property
    def zetas(self):
        return [self.prog.zeta0] + [c.zeta for c in self.prog.constraints]

    def smooth_values(self, x: np.ndarray) -> np.ndarray:
        d = x - self.anchor
        return self.const + self.grads @ d + 0.5 * self.lips * float(d @ d)

    def smooth_gradients(self, x: np.ndarray) -> np.ndarray:
        return self.grads + np.outer(self.lips, x - self.anchor)

    def zeta_values(self, x: np.ndarray) -> np.ndarray:
        return np.array([zeta.value(x) for zeta in self.zetas])

    def inner(self, x: np.ndarray) -> np.ndarray:
        """Arguments of the hinges: u_i(x) + zeta_i(x) for each constraint."""
        return (self.smooth_values(x) + self.zeta_values(x))[1:]

    def value(self, x: np.ndarray) -> float:
        totals = self.smooth_values(x) + self.zeta_values(x)
        return float(totals[0] + np.sum(self.hinges.value(totals[1:])))

    def subgradient(self, x: np.ndarray) -> np.ndarray:
        gradients = self.smooth_gradients(x) + np.array([zeta.subgradient(x) for zeta in self.zetas])
        weights = np.concatenate(([1.0], self.hinges.derivative(self.inner(x))))
        return weights @ gradients


def majorant_value(m: MajorantInstance, x) -> float:
    return m.value(m.prog.check_vector(x))


def majorant_subgradient(m: MajorantInstance, x) -> np.ndarray:
    return m.subgradient(m.prog.check_vector(x))

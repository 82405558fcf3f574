from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize

from .enums import DescriptorKind, NonsmoothKind, SetKind
from .errors import CombinatorialBlowupError, DimensionError, IndexRangeError, ModelError, UnsupportedError
from .utils import as_vector, broadcast_weights, interval_distance, soft_threshold

logger = logging.getLogger(__name__)

Selection = Union[int, Tuple[int, ...]]

ACTIVATION_TOL = 1e-9
CLASSIFY_TOL = 1e-8
PAIR_CAP = 4096


@dataclass(frozen=True)
class SmoothConvexFn:
    value_fn: Callable[[np.ndarray], float]
    gradient_fn: Callable[[np.ndarray], np.ndarray]
    lipschitz_grad: float = 0.0
    is_affine: bool = False

    def __post_init__(self):
        if self.lipschitz_grad < 0:
            raise ModelError('gradient Lipschitz constant must be nonnegative')

        if self.is_affine and self.lipschitz_grad != 0:
            raise ModelError('affine functions carry a zero gradient Lipschitz constant')

    def value(self, x: np.ndarray) -> float:
        return float(self.value_fn(x))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.gradient_fn(x), dtype=float)

    def plus_half_square(self, weight: float = 1.0) -> SmoothConvexFn:
        value_fn, gradient_fn = self.value_fn, self.gradient_fn
        return SmoothConvexFn(
            value_fn=lambda x: value_fn(x) + 0.5 * weight * float(x @ x),
            gradient_fn=lambda x: np.asarray(gradient_fn(x), dtype=float) + weight * x,
            lipschitz_grad=self.lipschitz_grad + weight,
            is_affine=False,
        )

    @classmethod
    def quadratic(cls, Q, q, c: float = 0.0, lipschitz_grad: Optional[float] = None) -> SmoothConvexFn:
        """x'Qx + q'x + c for a symmetric positive semidefinite Q."""
        Q = np.asarray(Q, dtype=float)
        q = np.asarray(q, dtype=float)
        c = float(c)

        if not np.any(Q):
            return cls.affine(q, c)

        if lipschitz_grad is None:
            lipschitz_grad = 2.0 * max(float(np.linalg.eigvalsh(Q)[-1]), 0.0)

        return cls(
            value_fn=lambda x: float(x @ (Q @ x) + q @ x) + c,
            gradient_fn=lambda x: 2.0 * (Q @ x) + q,
            lipschitz_grad=lipschitz_grad,
        )

    @classmethod
    def affine(cls, a, c: float = 0.0) -> SmoothConvexFn:
        a = np.asarray(a, dtype=float)
        c = float(c)
        return cls(
            value_fn=lambda x: float(a @ x) + c,
            gradient_fn=lambda x: a.copy(),
            is_affine=True,
        )

    @classmethod
    def constant(cls, n: int, c: float = 0.0) -> SmoothConvexFn:
        return cls.affine(np.zeros(n), c)


@dataclass(frozen=True)
class SubdiffDescriptor:
    """Polytope description of a subdifferential: a box or the convex hull of vertex columns."""
    kind: DescriptorKind
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    vertices: Optional[np.ndarray] = None

    @classmethod
    def box(cls, lower, upper) -> SubdiffDescriptor:
        return cls(DescriptorKind.BOX, lower=np.asarray(lower, dtype=float), upper=np.asarray(upper, dtype=float))

    @classmethod
    def hull(cls, vertices) -> SubdiffDescriptor:
        return cls(DescriptorKind.VERTICES, vertices=np.atleast_2d(np.asarray(vertices, dtype=float)))

    def contains(self, v: np.ndarray, tol: float = 1e-10) -> bool:
        if self.kind == DescriptorKind.BOX:
            return bool(np.all(self.lower - tol <= v) and np.all(v <= self.upper + tol))

        raise UnsupportedError('membership test only implemented for box descriptors')


@dataclass(frozen=True)
class NonsmoothConvexFn:
    value_fn: Callable[[np.ndarray], float]
    subgradient_fn: Callable[[np.ndarray], np.ndarray]
    prox_fn: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    descriptor_fn: Optional[Callable[[np.ndarray], SubdiffDescriptor]] = None
    kind: NonsmoothKind = NonsmoothKind.CUSTOM
    weights: Union[float, np.ndarray, None] = None

    def value(self, x: np.ndarray) -> float:
        return float(self.value_fn(x))

    def subgradient(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.subgradient_fn(x), dtype=float)

    @property
    def has_prox(self) -> bool:
        return self.prox_fn is not None

    def prox(self, x: np.ndarray, step: float) -> np.ndarray:
        if self.prox_fn is None:
            raise UnsupportedError('nonsmooth part has no prox oracle')

        return np.asarray(self.prox_fn(x, step), dtype=float)

    def subdifferential(self, x: np.ndarray) -> SubdiffDescriptor:
        if self.descriptor_fn is None:
            raise UnsupportedError('nonsmooth part has no subdifferential descriptor')

        return self.descriptor_fn(x)

    def l1_weights(self, n: int) -> np.ndarray:
        """Weights w with value ||w * x||_1; zero for the zero function."""
        if self.kind == NonsmoothKind.ZERO:
            return np.zeros(n)

        if self.kind == NonsmoothKind.L1:
            return broadcast_weights(self.weights, n)

        raise UnsupportedError('only zero and weighted l1 parts expose weights')


def zero_function() -> NonsmoothConvexFn:
    return NonsmoothConvexFn(
        value_fn=lambda x: 0.0,
        subgradient_fn=lambda x: np.zeros_like(x),
        prox_fn=lambda x, step: np.array(x, dtype=float),
        descriptor_fn=lambda x: SubdiffDescriptor.box(np.zeros_like(x), np.zeros_like(x)),
        kind=NonsmoothKind.ZERO,
    )


def l1_norm(weights: Union[float, np.ndarray] = 1.0) -> NonsmoothConvexFn:
    """Weighted l1 norm ||w * x||_1 with w >= 0."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ModelError('l1 weights must be nonnegative')

    def descriptor(x):
        weight = np.broadcast_to(w, x.shape)
        lower = np.where(x > 0, weight, -weight)
        upper = np.where(x < 0, -weight, weight)
        return SubdiffDescriptor.box(lower, upper)

    return NonsmoothConvexFn(
        value_fn=lambda x: float(np.sum(w * np.abs(x))),
        subgradient_fn=lambda x: w * np.sign(x),
        prox_fn=lambda x, step: soft_threshold(x, step * w),
        descriptor_fn=descriptor,
        kind=NonsmoothKind.L1,
        weights=w if w.ndim else float(w),
    )


def combine_nonsmooth(first: NonsmoothConvexFn, second: NonsmoothConvexFn) -> NonsmoothConvexFn:
    """Sum of two nonsmooth parts; stays in the zero/l1 family when both operands do."""
    if first.kind == NonsmoothKind.ZERO:
        return second

    if second.kind == NonsmoothKind.ZERO:
        return first

    if first.kind == NonsmoothKind.L1 and second.kind == NonsmoothKind.L1:
        return l1_norm(np.asarray(first.weights) + np.asarray(second.weights))

    descriptor_fn = None
    if first.descriptor_fn is not None and second.descriptor_fn is not None:
        def descriptor_fn(x):
            a, b = first.subdifferential(x), second.subdifferential(x)
            if a.kind != DescriptorKind.BOX or b.kind != DescriptorKind.BOX:
                raise UnsupportedError('sum descriptor needs two box descriptors')

            return SubdiffDescriptor.box(a.lower + b.lower, a.upper + b.upper)

    return NonsmoothConvexFn(
        value_fn=lambda x: first.value(x) + second.value(x),
        subgradient_fn=lambda x: first.subgradient(x) + second.subgradient(x),
        descriptor_fn=descriptor_fn,
    )


class ChoiceSet:
    """Lazily enumerated set of piece selections of one max term."""

    def count(self, limit: int) -> int:
        raise NotImplementedError

    def __iter__(self) -> Iterator[Selection]:
        raise NotImplementedError

    def __contains__(self, selection) -> bool:
        raise NotImplementedError


class PieceChoices(ChoiceSet):
    def __init__(self, indices: Sequence[int]):
        self.indices = tuple(indices)

    def count(self, limit: int) -> int:
        return min(len(self.indices), limit + 1)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, selection) -> bool:
        return selection in self.indices

    def __repr__(self):
        return f'PieceChoices({self.indices})'


class SeparableChoices(ChoiceSet):
    """Selections whose summed per-block gaps stay within the budget eps."""

    def __init__(self, best: Tuple[int, ...], options: List[Tuple[int, List[Tuple[int, float]]]], eps: float):
        self.best = best
        # (block, [(piece, gap), ...] sorted by piece) for blocks with more than one candidate
        self.options = options
        self.eps = eps

    def count(self, limit: int) -> int:
        total = 0
        for _ in self._walk():
            total += 1
            if total > limit:
                break

        return total

    def _walk(self) -> Iterator[Tuple[Tuple[int, int], ...]]:
        def descend(depth: int, budget: float, chosen: Tuple[Tuple[int, int], ...]):
            if depth == len(self.options):
                yield chosen
                return

            block, candidates = self.options[depth]
            for piece, gap in candidates:
                if gap <= budget:
                    yield from descend(depth + 1, budget - gap, chosen + ((block, piece),))

        yield from descend(0, self.eps, ())

    def __iter__(self):
        for chosen in self._walk():
            selection = list(self.best)
            for block, piece in chosen:
                selection[block] = piece

            yield tuple(selection)

    def __contains__(self, selection) -> bool:
        return selection in set(self)


@dataclass(frozen=True)
class MaxSmoothFn:
    pieces: Tuple[SmoothConvexFn, ...]

    def __post_init__(self):
        object.__setattr__(self, 'pieces', tuple(self.pieces))
        if not self.pieces:
            raise ModelError('a max term needs at least one piece')

    @property
    def n_pieces(self) -> int:
        return len(self.pieces)

    def piece_values(self, x: np.ndarray) -> np.ndarray:
        return np.array([piece.value(x) for piece in self.pieces])

    def value(self, x: np.ndarray) -> float:
        return float(np.max(self.piece_values(x)))

    def active_choices(self, x: np.ndarray, eps: float) -> PieceChoices:
        values = self.piece_values(x)
        top = np.max(values)
        return PieceChoices(int(j) for j in np.flatnonzero(top <= values + eps))

    def check_selection(self, selection) -> None:
        if not isinstance(selection, (int, np.integer)) or not 0 <= selection < self.n_pieces:
            raise IndexRangeError(f'piece index {selection!r} outside 0..{self.n_pieces - 1}')

    def selection_value(self, x: np.ndarray, selection: int) -> float:
        return self.pieces[selection].value(x)

    def selection_gradient(self, x: np.ndarray, selection: int) -> np.ndarray:
        return self.pieces[selection].gradient(x)

    def selection_lipschitz(self, selection: int) -> float:
        return self.pieces[selection].lipschitz_grad

    def directional_derivative(self, x: np.ndarray, d: np.ndarray, tol: float = ACTIVATION_TOL) -> float:
        return max(float(self.pieces[j].gradient(x) @ d) for j in self.active_choices(x, tol))

    def with_half_square(self, weight: float = 1.0) -> MaxSmoothFn:
        return MaxSmoothFn(tuple(piece.plus_half_square(weight) for piece in self.pieces))

    @classmethod
    def affine(cls, slopes, offsets) -> MaxSmoothFn:
        slopes = np.atleast_2d(np.asarray(slopes, dtype=float))
        offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
        return cls(tuple(SmoothConvexFn.affine(a, c) for a, c in zip(slopes, offsets)))


@dataclass(frozen=True)
class SeparableMax:
    """Sum over coordinates k of max_j (curvature/2 x_k^2 + slopes[k, j] x_k + offsets[k, j])."""
    slopes: np.ndarray
    offsets: np.ndarray
    curvature: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'slopes', np.atleast_2d(np.asarray(self.slopes, dtype=float)))
        object.__setattr__(self, 'offsets', np.atleast_2d(np.asarray(self.offsets, dtype=float)))
        if self.slopes.shape != self.offsets.shape or self.slopes.shape[1] == 0:
            raise ModelError('separable max needs matching nonempty slope and offset tables')

    @property
    def n_pieces(self) -> int:
        return self.slopes.shape[1]

    def block_values(self, x: np.ndarray) -> np.ndarray:
        return 0.5 * self.curvature * (x ** 2)[:, None] + self.slopes * x[:, None] + self.offsets

    def value(self, x: np.ndarray) -> float:
        return float(np.sum(np.max(self.block_values(x), axis=1)))

    def active_choices(self, x: np.ndarray, eps: float) -> SeparableChoices:
        values = self.block_values(x)
        gaps = np.max(values, axis=1)[:, None] - values
        best = tuple(int(j) for j in np.argmin(gaps, axis=1))

        options = []
        for block in np.flatnonzero(np.sum(gaps <= eps, axis=1) > 1):
            candidates = [(int(j), float(gaps[block, j])) for j in np.flatnonzero(gaps[block] <= eps)]
            options.append((int(block), candidates))

        return SeparableChoices(best, options, eps)

    def check_selection(self, selection) -> None:
        if not isinstance(selection, tuple) or len(selection) != self.slopes.shape[0]:
            raise IndexRangeError('separable selection must give one piece per coordinate')

        if min(selection) < 0 or max(selection) >= self.n_pieces:
            raise IndexRangeError(f'piece index outside 0..{self.n_pieces - 1}')

    def _rows(self, selection) -> Tuple[np.ndarray, np.ndarray]:
        rows = np.arange(self.slopes.shape[0])
        cols = np.asarray(selection)
        return self.slopes[rows, cols], self.offsets[rows, cols]

    def selection_value(self, x: np.ndarray, selection) -> float:
        slopes, offsets = self._rows(selection)
        return float(np.sum(0.5 * self.curvature * x ** 2 + slopes * x + offsets))

    def selection_gradient(self, x: np.ndarray, selection) -> np.ndarray:
        slopes, _ = self._rows(selection)
        return self.curvature * x + slopes

    def selection_lipschitz(self, selection) -> float:
        return self.curvature

    def directional_derivative(self, x: np.ndarray, d: np.ndarray, tol: float = ACTIVATION_TOL) -> float:
        values = self.block_values(x)
        active = values >= np.max(values, axis=1)[:, None] - tol
        slopes = (self.curvature * x)[:, None] + self.slopes
        rates = np.where(active, slopes * d[:, None], -np.inf)
        return float(np.sum(np.max(rates, axis=1)))

    def with_half_square(self, weight: float = 1.0) -> SeparableMax:
        return SeparableMax(self.slopes, self.offsets, self.curvature + weight)


MaxTerm = Union[MaxSmoothFn, SeparableMax]


@dataclass(frozen=True)
class ConvexSet:
    kind: SetKind
    n: int
    project_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    contains_fn: Optional[Callable[[np.ndarray, float], bool]] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    A: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None

    def contains(self, x: np.ndarray, tol: float = 1e-10) -> bool:
        if self.kind == SetKind.WHOLE_SPACE:
            return True

        if self.kind == SetKind.BOX:
            return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

        if self.kind == SetKind.POLYHEDRAL:
            return bool(np.all(self.A @ x - self.b <= tol * (1.0 + np.abs(self.b))))

        return bool(self.contains_fn(x, tol))

    def project(self, x: np.ndarray) -> np.ndarray:
        if self.kind == SetKind.WHOLE_SPACE:
            return np.array(x, dtype=float)

        if self.kind == SetKind.BOX:
            return np.clip(x, self.lower, self.upper)

        if self.contains(x):
            return np.array(x, dtype=float)

        if self.kind == SetKind.POLYHEDRAL:
            return self._project_polyhedron(x)

        return np.asarray(self.project_fn(x), dtype=float)

    def _project_polyhedron(self, x: np.ndarray) -> np.ndarray:
        result = minimize(
            lambda z: 0.5 * float((z - x) @ (z - x)),
            x,
            jac=lambda z: z - x,
            constraints=[{'type': 'ineq', 'fun': lambda z: self.b - self.A @ z, 'jac': lambda z: -self.A}],
            method='SLSQP',
            options={'ftol': 1e-15, 'maxiter': 500},
        )
        if not result.success:
            logger.warning('Polyhedral projection stopped early: %s', result.message)

        return result.x

    @property
    def is_box_like(self) -> bool:
        return self.kind in (SetKind.WHOLE_SPACE, SetKind.BOX)

    def box_bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        if self.kind == SetKind.WHOLE_SPACE:
            return np.full(self.n, -np.inf), np.full(self.n, np.inf)

        if self.kind == SetKind.BOX:
            return self.lower, self.upper

        raise UnsupportedError(f'{self.kind.value} sets have no box bounds')

    def normal_cone_bounds(self, x: np.ndarray, tol: float = 1e-10) -> Tuple[np.ndarray, np.ndarray]:
        """Per-coordinate bounds of the normal cone of a box-like set at x."""
        lower, upper = self.box_bounds()

        def slack(bound):
            return tol * (1.0 + np.abs(np.where(np.isfinite(bound), bound, 0.0)))

        at_lower = x <= lower + slack(lower)
        at_upper = x >= upper - slack(upper)
        return np.where(at_lower, -np.inf, 0.0), np.where(at_upper, np.inf, 0.0)


def whole_space(n: int) -> ConvexSet:
    return ConvexSet(SetKind.WHOLE_SPACE, n)


def box(lower, upper) -> ConvexSet:
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.shape != upper.shape or np.any(lower > upper):
        raise ModelError('box bounds must match in shape and satisfy lower <= upper')

    return ConvexSet(SetKind.BOX, lower.size, lower=lower, upper=upper)


def polyhedron(A, b) -> ConvexSet:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return ConvexSet(SetKind.POLYHEDRAL, A.shape[1], A=A, b=np.asarray(b, dtype=float))


def custom_set(n: int, project: Callable, contains: Callable) -> ConvexSet:
    return ConvexSet(SetKind.CUSTOM, n, project_fn=project, contains_fn=contains)


@dataclass(frozen=True)
class Constraint:
    phi: SmoothConvexFn
    zeta: NonsmoothConvexFn
    psi: MaxTerm


@dataclass(frozen=True)
class MultiIndex:
    j0: Selection
    jj: Tuple[Selection, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'jj', tuple(self.jj))

    def selection(self, i: Optional[int]) -> Selection:
        return self.j0 if i is None else self.jj[i]

    def label(self) -> str:
        """1-based label such as (1,2); separable selections are abbreviated."""
        def one(selection):
            return str(selection + 1) if isinstance(selection, (int, np.integer)) else f'<{len(selection)}>'

        return '(' + ','.join([one(self.j0)] + [one(j) for j in self.jj]) + ')'


@dataclass(frozen=True)
class DCProgram:
    n: int
    phi0: SmoothConvexFn
    zeta0: NonsmoothConvexFn
    psi0: MaxTerm
    constraints: Tuple[Constraint, ...] = ()
    X: Optional[ConvexSet] = None
    activation_tol: float = ACTIVATION_TOL
    name: str = field(default='program', compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'constraints', tuple(self.constraints))
        if self.X is None:
            object.__setattr__(self, 'X', whole_space(self.n))

        if self.X.n != self.n:
            raise DimensionError(self.n, (self.X.n,))

    @property
    def I(self) -> int:
        return len(self.constraints)

    @property
    def L0(self) -> float:
        return self.phi0.lipschitz_grad

    def part(self, i: Optional[int]) -> Tuple[SmoothConvexFn, NonsmoothConvexFn, MaxTerm]:
        """Oracles of the objective (i is None) or of constraint i."""
        if i is None:
            return self.phi0, self.zeta0, self.psi0

        if not 0 <= i < self.I:
            raise IndexRangeError(f'constraint index {i} outside 0..{self.I - 1}')

        c = self.constraints[i]
        return c.phi, c.zeta, c.psi

    def check_vector(self, x) -> np.ndarray:
        return as_vector(x, self.n)

    def check_index(self, index: MultiIndex) -> None:
        if len(index.jj) != self.I:
            raise IndexRangeError(f'multi-index has {len(index.jj)} constraint entries, program has {self.I}')

        self.psi0.check_selection(index.j0)
        for c, j in zip(self.constraints, index.jj):
            c.psi.check_selection(j)

    def dimension_check(self, rng: np.random.Generator, samples: int = 3) -> None:
        """Evaluate every oracle on random vectors of dimension n."""
        for _ in range(samples):
            x = rng.standard_normal(self.n)
            for i in [None] + list(range(self.I)):
                phi, zeta, psi = self.part(i)
                for g in (phi.gradient(x), zeta.subgradient(x)):
                    if np.shape(g) != (self.n,):
                        raise DimensionError(self.n, np.shape(g))

                psi.value(x)


def constraint_value(prog: DCProgram, i: int, x) -> float:
    x = prog.check_vector(x)
    phi, zeta, psi = prog.part(i)
    return phi.value(x) + zeta.value(x) - psi.value(x)


def constraint_values(prog: DCProgram, x) -> np.ndarray:
    x = prog.check_vector(x)
    return np.array([constraint_value(prog, i, x) for i in range(prog.I)])


def objective_value(prog: DCProgram, x) -> float:
    x = prog.check_vector(x)
    return prog.phi0.value(x) + prog.zeta0.value(x) - prog.psi0.value(x)


def eps_active_obj(prog: DCProgram, x, eps: float) -> ChoiceSet:
    if eps < 0:
        raise ModelError('eps must be nonnegative')

    return prog.psi0.active_choices(prog.check_vector(x), eps)


class ActiveProduct:
    """Cartesian product of per-constraint choice sets in lexicographic order."""

    def __init__(self, choices: Sequence[ChoiceSet], cap: int):
        self.choices = tuple(choices)
        self.cap = cap
        self.cardinality = 1
        for choice in self.choices:
            self.cardinality *= choice.count(cap)
            if self.cardinality > cap:
                raise CombinatorialBlowupError(self.cardinality, cap)

    def __iter__(self) -> Iterator[Tuple[Selection, ...]]:
        return itertools.product(*self.choices)

    def __len__(self):
        return self.cardinality


def eps_active_constraints(prog: DCProgram, x, eps: float, cap: int = PAIR_CAP) -> ActiveProduct:
    if eps < 0:
        raise ModelError('eps must be nonnegative')

    x = prog.check_vector(x)
    return ActiveProduct([c.psi.active_choices(x, eps) for c in prog.constraints], cap)


def eps_active_pairs(prog: DCProgram, x, eps: float, cap: int = PAIR_CAP) -> Iterator[MultiIndex]:
    """All (j0, jj) of the eps-active product in lexicographic order, cap applied to the full product."""
    x = prog.check_vector(x)
    objective = eps_active_obj(prog, x, eps)
    n_obj = objective.count(cap)
    product = eps_active_constraints(prog, x, eps, cap)
    if n_obj * product.cardinality > cap:
        raise CombinatorialBlowupError(n_obj * product.cardinality, cap)

    for j0 in objective:
        for jj in product:
            yield MultiIndex(j0, jj)


class ConstraintClasses(NamedTuple):
    violated: Tuple[int, ...]
    active: Tuple[int, ...]
    inactive: Tuple[int, ...]


def classify_constraints(prog: DCProgram, x, tol: Optional[float] = None) -> ConstraintClasses:
    """Split constraints into I_gt, I_eq, I_lt; default tolerance 1e-8 (1 + |c_i|)."""
    violated, active, inactive = [], [], []
    for i, value in enumerate(constraint_values(prog, x)):
        slack = CLASSIFY_TOL * (1.0 + abs(value)) if tol is None else tol
        if abs(value) <= slack:
            active.append(i)
        elif value > 0:
            violated.append(i)
        else:
            inactive.append(i)

    return ConstraintClasses(tuple(violated), tuple(active), tuple(inactive))


def psi_directional_derivative(prog: DCProgram, i: Optional[int], x, d, tol: Optional[float] = None) -> float:
    x = prog.check_vector(x)
    d = prog.check_vector(d)
    _, _, psi = prog.part(i)
    return psi.directional_derivative(x, d, prog.activation_tol if tol is None else tol)


def normalize_L0(prog: DCProgram) -> DCProgram:
    """Add ||x||^2/2 to phi0 and to every psi0 piece when phi0 has a zero gradient Lipschitz constant."""
    if prog.L0 > 0:
        return prog

    return DCProgram(
        n=prog.n,
        phi0=prog.phi0.plus_half_square(1.0),
        zeta0=prog.zeta0,
        psi0=prog.psi0.with_half_square(1.0),
        constraints=prog.constraints,
        X=prog.X,
        activation_tol=prog.activation_tol,
        name=prog.name,
    )


def check_smooth_oracle(fn: SmoothConvexFn, n: int, rng: np.random.Generator, samples: int = 10,
                        step: float = 1e-6, rel_tol: float = 1e-5) -> None:
    for _ in range(samples):
        x, y, d = rng.standard_normal(n), rng.standard_normal(n), rng.standard_normal(n)

        slope = float(fn.gradient(x) @ d)
        estimate = (fn.value(x + step * d) - fn.value(x - step * d)) / (2.0 * step)
        if abs(slope - estimate) > rel_tol * (1.0 + abs(slope)):
            raise ModelError(f'gradient disagrees with finite differences: {slope} vs {estimate}')

        fx, fy = fn.value(x), fn.value(y)
        if fn.value(0.5 * (x + y)) > 0.5 * (fx + fy) + 1e-10 * (1.0 + abs(fx) + abs(fy)):
            raise ModelError('midpoint convexity violated')

    if fn.is_affine and fn.lipschitz_grad != 0:
        raise ModelError('affine function with nonzero Lipschitz constant')


def check_nonsmooth_oracle(fn: NonsmoothConvexFn, n: int, rng: np.random.Generator, samples: int = 10,
                           prox_tol: float = 1e-8) -> None:
    for _ in range(samples):
        x, y = rng.standard_normal(n), rng.standard_normal(n)

        fx = fn.value(x)
        lower = fx + float(fn.subgradient(x) @ (y - x))
        if fn.value(y) < lower - 1e-10 * (1.0 + abs(fx) + abs(lower)):
            raise ModelError('subgradient inequality violated')

        if fn.has_prox and fn.descriptor_fn is not None:
            step = float(rng.uniform(0.1, 2.0))
            z = fn.prox(x, step)
            descriptor = fn.subdifferential(z)
            if descriptor.kind == DescriptorKind.BOX:
                target = (x - z) / step
                miss = interval_distance(descriptor.lower - target, descriptor.upper - target)
                if math.sqrt(float(miss @ miss)) > prox_tol:
                    raise ModelError('prox output fails its optimality condition')

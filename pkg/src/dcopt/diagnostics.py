from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from .dc_model import (PAIR_CAP, DCProgram, MultiIndex, SubdiffDescriptor, classify_constraints, constraint_values,
                       eps_active_pairs)
from .enums import DescriptorKind
from .errors import ModelError, UnsupportedError
from .utils import interval_distance, project_simplex

logger = logging.getLogger(__name__)

KKT_MAX_ITER = 500


def feasibility_violation(prog: DCProgram, x) -> float:
    """max_i [c_i(x)]_+, zero for unconstrained programs."""
    values = constraint_values(prog, x)
    if values.size == 0:
        return 0.0

    return float(max(np.max(values), 0.0))


def penalty_total(prog: DCProgram, x, p: int = 2) -> float:
    return float(np.sum(np.maximum(constraint_values(prog, x), 0.0) ** p))


class RelativeChange(NamedTuple):
    value: float
    absolute: bool


def relative_change(x_prev, x_next) -> RelativeChange:
    """||x_next - x_prev|| / ||x_next||; the plain norm, flagged, when x_next is zero."""
    x_prev = np.asarray(x_prev, dtype=float)
    x_next = np.asarray(x_next, dtype=float)
    step = float(np.linalg.norm(x_next - x_prev))
    scale = float(np.linalg.norm(x_next))
    if scale == 0.0:
        return RelativeChange(step, True)

    return RelativeChange(step / scale, False)


@dataclass(eq=False)
class KKTSolution:
    index: MultiIndex
    lam: np.ndarray
    residual: float
    v0: np.ndarray
    v: List[Optional[np.ndarray]]
    w: np.ndarray
    complementarity: float
    iterations: int = 0


def inclusion_vector(prog: DCProgram, x, index: MultiIndex, lam, v0, v, w) -> np.ndarray:
    """grad phi0 + v0 - grad psi0_j0 + sum_i lam_i (grad phi_i + v_i - grad psi_i_ji) + w."""
    x = prog.check_vector(x)
    total = prog.phi0.gradient(x) + v0 - prog.psi0.selection_gradient(x, index.j0) + w
    for i, c in enumerate(prog.constraints):
        if lam[i] != 0:
            total = total + lam[i] * (c.phi.gradient(x) + v[i] - c.psi.selection_gradient(x, index.jj[i]))

    return total


def _descriptors(prog: DCProgram, x: np.ndarray,
                 descriptors: Optional[Sequence[SubdiffDescriptor]]) -> List[SubdiffDescriptor]:
    if descriptors is not None:
        if len(descriptors) != prog.I + 1:
            raise ModelError(f'expected {prog.I + 1} subdifferential descriptors, got {len(descriptors)}')

        return list(descriptors)

    return [prog.zeta0.subdifferential(x)] + [c.zeta.subdifferential(x) for c in prog.constraints]


def _check_active(prog: DCProgram, x: np.ndarray, index: MultiIndex):
    tol = prog.activation_tol
    if index.j0 not in prog.psi0.active_choices(x, tol):
        raise ModelError(f'objective piece of {index.label()} is not active at x')

    for i, c in enumerate(prog.constraints):
        if index.jj[i] not in c.psi.active_choices(x, tol):
            raise ModelError(f'piece of constraint {i} in {index.label()} is not active at x')


def kkt_residual(prog: DCProgram, x, index: MultiIndex, descriptors: Optional[Sequence[SubdiffDescriptor]] = None,
                 max_iter: int = KKT_MAX_ITER, active_tol: Optional[float] = None) -> KKTSolution:
    """Least-norm element of the KKT inclusion for one active pair.

    Minimizes over lam >= 0 (zero off the active constraints), v_0, v_i in the
    subdifferentials and w in the normal cone of a box-like X. For fixed
    multipliers the admissible vectors form a box, so the objective is the
    squared distance from 0 to that box; it is minimized by projected gradient
    from lam = 0. Vertex descriptors enter through nonnegative weights phi_i
    with lam_i = sum(phi_i); a vertex-described zeta_0 uses simplex weights.
    """
    x = prog.check_vector(x)
    prog.check_index(index)
    if not prog.X.is_box_like:
        raise UnsupportedError(f'KKT residual needs a whole-space or box X, got {prog.X.kind.value}')

    _check_active(prog, x, index)
    descriptors = _descriptors(prog, x, descriptors)
    active = classify_constraints(prog, x, active_tol).active
    n = prog.n

    center = prog.phi0.gradient(x) - prog.psi0.selection_gradient(x, index.j0)
    lower = np.zeros(n)
    upper = np.zeros(n)
    columns_lo, columns_hi, owners = [], [], []
    simplex = None

    d0 = descriptors[0]
    if d0.kind == DescriptorKind.BOX:
        lower, upper = lower + d0.lower, upper + d0.upper
    else:
        simplex = (len(owners), d0.vertices.shape[1])
        for j in range(d0.vertices.shape[1]):
            columns_lo.append(d0.vertices[:, j])
            columns_hi.append(d0.vertices[:, j])
            owners.append(('simplex', j))

    gradients = {}
    for i in active:
        c = prog.constraints[i]
        g = c.phi.gradient(x) - c.psi.selection_gradient(x, index.jj[i])
        gradients[i] = g
        d = descriptors[i + 1]
        if d.kind == DescriptorKind.BOX:
            columns_lo.append(g + d.lower)
            columns_hi.append(g + d.upper)
            owners.append(('box', i))
        else:
            for j in range(d.vertices.shape[1]):
                columns_lo.append(g + d.vertices[:, j])
                columns_hi.append(g + d.vertices[:, j])
                owners.append(('vertex', i))

    cone_lower, cone_upper = prog.X.normal_cone_bounds(x)
    Alo = np.array(columns_lo).reshape(len(owners), n).T
    Ahi = np.array(columns_hi).reshape(len(owners), n).T

    z = np.zeros(len(owners))
    if simplex is not None:
        start, size = simplex
        z[start:start + size] = 1.0 / size

    def bounds(z):
        return center + lower + Alo @ z + cone_lower, center + upper + Ahi @ z + cone_upper

    if not owners:
        max_iter = 0

    norm = float(np.sum(Alo ** 2) + np.sum(Ahi ** 2))
    step = 1.0 / norm if norm > 0 else 0.0
    iteration = 0
    for iteration in range(1, max_iter + 1):
        L, U = bounds(z)
        pos, neg = np.maximum(L, 0.0), np.minimum(U, 0.0)
        if not np.any(pos) and not np.any(neg):
            break

        z = z - step * (Alo.T @ pos + Ahi.T @ neg)
        if simplex is None:
            z = np.maximum(z, 0.0)
        else:
            start, size = simplex
            rest = np.ones(len(owners), dtype=bool)
            rest[start:start + size] = False
            z[start:start + size] = project_simplex(z[start:start + size])
            z[rest] = np.maximum(z[rest], 0.0)

    L, U = bounds(z)
    point = np.clip(0.0, L, U)
    residual = float(np.linalg.norm(interval_distance(L, U)))

    # Split the nearest point back into v_0, v_i and w
    finite_lower = center + lower + Alo @ z
    finite_upper = center + upper + Ahi @ z
    q = np.clip(point, finite_lower, finite_upper)
    w = point - q
    width = finite_upper - finite_lower
    theta = np.divide(q - finite_lower, width, out=np.zeros(n), where=width > 0)

    lam = np.zeros(prog.I)
    v: List[Optional[np.ndarray]] = [None] * prog.I
    vertex_sums = {}
    v0 = np.zeros(n)
    for position, (kind, owner) in enumerate(owners):
        if kind == 'simplex':
            v0 = v0 + z[position] * d0.vertices[:, owner]
        elif kind == 'box':
            lam[owner] = z[position]
            d = descriptors[owner + 1]
            v[owner] = d.lower + theta * (d.upper - d.lower)
        else:
            lam[owner] += z[position]
            vertex_sums[owner] = vertex_sums.get(owner, np.zeros(n)) + z[position] * (columns_lo[position] -
                                                                                        gradients[owner])

    if d0.kind == DescriptorKind.BOX:
        v0 = d0.lower + theta * (d0.upper - d0.lower)

    for owner, total in vertex_sums.items():
        v[owner] = total / lam[owner] if lam[owner] > 0 else descriptors[owner + 1].vertices[:, 0]

    values = constraint_values(prog, x)
    complementarity = float(np.max(np.abs(lam * values))) if prog.I else 0.0
    return KKTSolution(index=index, lam=lam, residual=residual, v0=v0, v=v, w=w,
                       complementarity=complementarity, iterations=iteration)


@dataclass(eq=False)
class KKTReport:
    """KKT residuals over the active product; a zero residual is evidence, not a B-stationarity certificate."""
    tol: float
    entries: List[KKTSolution] = field(default_factory=list)
    label: str = 'KKT residual'

    @property
    def worst_residual(self) -> float:
        return max((entry.residual for entry in self.entries), default=0.0)

    @property
    def worst_complementarity(self) -> float:
        return max((entry.complementarity for entry in self.entries), default=0.0)

    @property
    def verdict(self) -> bool:
        return self.worst_residual <= self.tol and self.worst_complementarity <= self.tol


def kkt_report(prog: DCProgram, x, tol: float = 1e-8, cap: int = PAIR_CAP,
               max_iter: int = KKT_MAX_ITER) -> KKTReport:
    x = prog.check_vector(x)
    report = KKTReport(tol=tol)
    for index in eps_active_pairs(prog, x, prog.activation_tol, cap):
        report.entries.append(kkt_residual(prog, x, index, max_iter=max_iter))

    if not report.verdict:
        logger.info('KKT residual %.3e above tolerance %.1e', report.worst_residual, tol)

    return report

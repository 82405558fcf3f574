from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .dc_model import MultiIndex
from .enums import Method, StopReason
from .subsolver import SubsolveCertificate
from .utils import format_number, vector_to_text


@dataclass(eq=False)
class OuterIteration:
    k: int
    rho: float
    x: np.ndarray
    objective: float
    merit: float
    violation: float
    rel_change: float = math.nan
    eta: float = math.nan
    lam: Optional[np.ndarray] = None
    lam_next: Optional[np.ndarray] = None
    sca_moves: int = 0
    subsolves: int = 0
    sca_terminated: bool = True

    def to_row(self) -> dict:
        return {
            'k': self.k,
            'rho': format_number(self.rho),
            'x_norm': format_number(float(np.linalg.norm(self.x))),
            'objective': format_number(self.objective),
            'merit': format_number(self.merit),
            'violation': format_number(self.violation),
            'rel_change': format_number(self.rel_change),
            'eta': format_number(self.eta),
            'lambda': '' if self.lam is None else vector_to_text(self.lam),
            'lambda_next': '' if self.lam_next is None else vector_to_text(self.lam_next),
            'sca_moves': self.sca_moves,
            'subsolves': self.subsolves,
            'sca_terminated': int(self.sca_terminated),
        }


@dataclass(eq=False)
class AuxEntry:
    """Auxiliary point and multipliers of one pair at one outer iteration."""
    k: int
    index: MultiIndex
    x: np.ndarray
    lam: np.ndarray
    value: float
    residual: float
    certified: bool
    steps: int = 0
    certificate: Optional[SubsolveCertificate] = None

    def to_row(self) -> dict:
        return {
            'k': self.k,
            'pair': self.index.label(),
            'x': vector_to_text(self.x) if self.x.size <= 8 else format_number(float(np.linalg.norm(self.x))),
            'lambda': vector_to_text(self.lam),
            'value': format_number(self.value),
            'residual': format_number(self.residual, 3),
            'certified': int(self.certified),
        }


@dataclass(eq=False)
class SolveReport:
    method: Method
    x_final: np.ndarray
    iterations: List[OuterIteration] = field(default_factory=list)
    stop_reason: Optional[StopReason] = None
    objective: float = math.nan
    violation: float = math.nan
    wall_time: float = 0.0

    @property
    def outer_iterations(self) -> int:
        return len(self.iterations)

    @property
    def total_subsolves(self) -> int:
        return sum(record.subsolves for record in self.iterations)

    @property
    def rho_history(self) -> List[float]:
        return [record.rho for record in self.iterations]


@dataclass(eq=False)
class ALReport(SolveReport):
    aux: List[AuxEntry] = field(default_factory=list)

    @property
    def lambda_history(self) -> List[np.ndarray]:
        """lambda^k for every recorded k followed by the final update."""
        history = [record.lam for record in self.iterations]
        if self.iterations:
            history.append(self.iterations[-1].lam_next)

        return history

    def aux_for(self, k: int) -> List[AuxEntry]:
        return [entry for entry in self.aux if entry.k == k]

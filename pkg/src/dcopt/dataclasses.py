from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional

from deepdiff import DeepDiff

from .enums import AuxStrategy, Command, Method, SubsolveBackend
from .errors import ConfigurationError


def _require(condition: bool, path: str, message: str):
    if not condition:
        raise ConfigurationError(message, path)


@dataclass
class SCAConfig:
    eps: float = field(default=0.01)
    eta: float = field(default=1e-3)

    delta0: float = field(default=0.1)
    delta_decay: float = field(default=0.1)
    delta_floor: float = field(default=1e-8)

    max_outer: int = field(default=100000)
    pair_cap: int = field(default=4096)
    subsolve_max_iter: Optional[int] = field(default=None)
    backend: str = field(default=SubsolveBackend.AUTO)
    workers: int = field(default=1)

    polish_tol: Optional[float] = field(default=None)
    polish_max_iter: int = field(default=1000)
    raise_uncertified: bool = field(default=False)

    def __post_init__(self):
        self.eps = float(self.eps)
        _require(self.eps > 0, 'sca.eps', 'must be positive')
        _require(self.eta > 0, 'sca.eta', 'must be positive')
        _require(self.delta0 > 0, 'sca.delta0', 'must be positive')
        _require(0 < self.delta_decay <= 1, 'sca.delta_decay', 'must lie in (0, 1]')
        _require(self.delta_floor >= 0, 'sca.delta_floor', 'must be nonnegative')
        _require(self.max_outer >= 1, 'sca.max_outer', 'must be at least 1')
        _require(self.pair_cap >= 1, 'sca.pair_cap', 'must be at least 1')
        _require(self.workers >= 1, 'sca.workers', 'must be at least 1')
        _require(self.polish_tol is None or self.polish_tol > 0, 'sca.polish_tol', 'must be positive')
        _require(self.polish_max_iter >= 1, 'sca.polish_max_iter', 'must be at least 1')
        _require(self.backend in (SubsolveBackend.AUTO, SubsolveBackend.DUAL, SubsolveBackend.PROX_GRADIENT,
                                  SubsolveBackend.SUBGRADIENT), 'sca.backend', f'unknown backend {self.backend!r}')

    def delta(self, t: int, L0: Optional[float] = None) -> float:
        """delta_t of the schedule, floored, and capped so that delta^2/(2 L0) <= eta/2."""
        value = max(self.delta0 * self.delta_decay ** t, self.delta_floor)
        if L0 is not None:
            value = min(value, math.sqrt(L0 * self.eta))

        return value


@dataclass
class AuxConfig:
    enabled: bool = field(default=False)
    strategy: str = field(default=AuxStrategy.RESTRICTED)
    tol: float = field(default=1e-10)
    max_iter: int = field(default=10000)
    delta: float = field(default=1e-9)
    workers: int = field(default=1)

    def __post_init__(self):
        _require(self.strategy in (AuxStrategy.RESTRICTED, AuxStrategy.ANCHORED), 'aux.strategy',
                 f'unknown strategy {self.strategy!r}')
        _require(self.tol > 0, 'aux.tol', 'must be positive')
        _require(self.delta > 0, 'aux.delta', 'must be positive')


@dataclass
class PenaltyConfig:
    eps: float = field(default=0.01)
    rho0: float = field(default=0.1)
    sigma: float = field(default=2.0)
    p: int = field(default=2)

    eta0: float = field(default=1e-3)
    eta_decay: float = field(default=0.1)
    eta_floor: float = field(default=1e-10)

    outer_rel_tol: float = field(default=1e-5)
    feas_tol: float = field(default=1e-6)
    stall_patience: int = field(default=3)
    max_outer: int = field(default=200)
    rho_cap: float = field(default=1e12)

    sca: SCAConfig = field(default_factory=SCAConfig)

    def __post_init__(self):
        if isinstance(self.sca, dict):
            self.sca = SCAConfig(**self.sca)

        self.eps = float(self.eps)
        _require(self.eps > 0, 'solver.eps', 'must be positive')
        _require(self.rho0 > 0, 'solver.rho0', 'must be positive')
        _require(self.sigma > 1, 'solver.sigma', 'must exceed 1')
        _require(self.p in (1, 2), 'solver.p', 'must be 1 or 2')
        _require(self.eta0 > 0, 'solver.eta0', 'must be positive')
        _require(0 < self.eta_decay <= 1, 'solver.eta_decay', 'must lie in (0, 1]')
        _require(self.eta_floor >= 0, 'solver.eta_floor', 'must be nonnegative')
        _require(self.outer_rel_tol >= 0, 'solver.outer_rel_tol', 'must be nonnegative')
        _require(self.feas_tol >= 0, 'solver.feas_tol', 'must be nonnegative')
        _require(self.stall_patience >= 1, 'solver.stall_patience', 'must be at least 1')
        _require(self.max_outer >= 1, 'solver.max_outer', 'must be at least 1')
        _require(self.rho_cap >= self.rho0, 'solver.rho_cap', 'must be at least rho0')

    def eta(self, k: int) -> float:
        return max(self.eta0 * self.eta_decay ** k, self.eta_floor)

    def sca_config(self, k: int) -> SCAConfig:
        return replace(self.sca, eps=self.eps, eta=self.eta(k))


@dataclass
class ALConfig(PenaltyConfig):
    alpha: float = field(default=1.05)
    lambda0: Optional[List[float]] = field(default=None)
    gamma_scale: float = field(default=10.0)

    aux: AuxConfig = field(default_factory=AuxConfig)

    def __post_init__(self):
        super().__post_init__()
        if isinstance(self.aux, dict):
            self.aux = AuxConfig(**self.aux)

        _require(self.alpha > 0, 'solver.alpha', 'must be positive')
        if self.lambda0 is not None:
            self.lambda0 = [float(v) for v in self.lambda0]
            _require(all(v >= 0 for v in self.lambda0), 'solver.lambda0', 'must be nonnegative')

    def gamma(self, rho: float) -> float:
        return self.gamma_scale / rho


@dataclass
class VerifyConfig:
    enabled: bool = field(default=False)
    tol: float = field(default=1e-8)
    samples: int = field(default=20)
    delta: float = field(default=1e-7)


@dataclass
class ProblemConfig:
    kind: str = field(default='quadratic_dc')
    n: int = field(default=50)
    m: int = field(default=256)
    K: int = field(default=20)
    s: float = field(default=0.1)
    noise: float = field(default=1e-3)


@dataclass
class RunConfig:
    command: Command = field(default=Command.SOLVE)
    method: Method = field(default=Method.PM2)
    seed: int = field(default=0)
    runs: int = field(default=1)
    instance: Optional[str] = field(default=None)
    out: str = field(default='runs')
    experiment: str = field(default='quadratic')
    threads: int = field(default=1)
    log_level: str = field(default='INFO')
    record_time: bool = field(default=True)

    problem: ProblemConfig = field(default_factory=ProblemConfig)
    solver: dict = field(default_factory=dict)
    sca: dict = field(default_factory=dict)
    aux: AuxConfig = field(default_factory=AuxConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)

    def __post_init__(self):
        self.command = Command(self.command)
        self.method = Method(self.method)
        if isinstance(self.problem, dict):
            self.problem = ProblemConfig(**self.problem)

        if isinstance(self.aux, dict):
            self.aux = AuxConfig(**self.aux)

        if isinstance(self.verify, dict):
            self.verify = VerifyConfig(**self.verify)

        _require(self.runs >= 1, 'runs', 'must be at least 1')
        _require(self.threads >= 1, 'threads', 'must be at least 1')

        # Validate the solver section now so bad values fail before any work starts
        self.solver_config()

    def solver_config(self, **overrides):
        options = dict(self.solver)
        options.update(overrides)
        options['sca'] = dict(self.sca)

        if self.method == Method.ALM:
            options.pop('p', None)
            return ALConfig(aux=self.aux, **options)

        expected = 1 if self.method == Method.PM1 else 2
        if options.get('p') not in (None, expected):
            raise ConfigurationError(f'method {self.method.value} implies p={expected}', 'solver.p')

        options['p'] = expected
        for key in ('alpha', 'lambda0', 'gamma_scale'):
            options.pop(key, None)

        return PenaltyConfig(**options)

    def as_dict(self) -> dict:
        data = asdict(self)
        data['command'] = self.command.value
        data['method'] = self.method.value
        return data

    def __eq__(self, other: RunConfig):
        return not DeepDiff(self.as_dict(), other.as_dict())

from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import jsonschema
import jsonschema.exceptions
import numpy as np
import yaml
from numpy.random import PCG64, Generator

from .dc_model import (Constraint, DCProgram, MaxSmoothFn, SeparableMax, SmoothConvexFn, l1_norm, normalize_L0,
                       zero_function)
from .diagnostics import feasibility_violation
from .enums import InstanceKind
from .errors import ChecksumError, InstanceFormatError, ModelError, VersionError
from .utils import project_l1_ball, sha256_text, text_to_vector, vector_to_text

logger = logging.getLogger(__name__)

FORMAT = 'dcopt-instance'
VERSION = 1
SECTIONS = ('format', 'version', 'kind', 'seed', 'dims', 'params', 'blocks', 'checksum')
NOISE_VARIANCE = 1e-3


def make_generator(*seed) -> Generator:
    return Generator(PCG64(list(seed) if len(seed) > 1 else seed[0]))


def random_psd(rng: Generator, n: int, high: float = 20.0) -> np.ndarray:
    """U diag(d) U' with d ~ U[0, high] and U an orthonormal basis of the range of a Gaussian matrix."""
    d = rng.uniform(0.0, high, n)
    U = np.linalg.qr(rng.standard_normal((n, n)))[0]
    M = (U * d) @ U.T
    return 0.5 * (M + M.T)


@dataclass(eq=False)
class QuadraticDCSpec:
    """Data of min x'Qx + q'x s.t. x'A_i x + a_i'x + c_i - max_j (x'B_ij x + b_ij'x + d_ij) <= 0, i = 1, 2."""
    n: int
    seed: int
    Q: np.ndarray
    A: np.ndarray
    B: np.ndarray
    q: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    @property
    def matrices(self):
        return [self.Q, *self.A, *self.B.reshape(-1, self.n, self.n)]

    def blocks(self) -> Dict[str, np.ndarray]:
        return {'Q': self.Q, 'A': self.A, 'B': self.B, 'q': self.q, 'a': self.a, 'b': self.b, 'c': self.c,
                'd': self.d}


@dataclass(eq=False)
class SparseRecoverySpec:
    """Data of min ||Ax - b||^2 s.t. ||x||_1 - sum_k max(x_k - s, 0, -x_k - s) <= sK."""
    m: int
    n: int
    K: int
    s: float
    seed: int
    A: np.ndarray
    b: np.ndarray
    x_star: np.ndarray
    xi: np.ndarray = field(default=None)
    noise: float = field(default=NOISE_VARIANCE)

    def blocks(self) -> Dict[str, np.ndarray]:
        return {'A': self.A, 'b': self.b, 'x_star': self.x_star, 'xi': self.xi}


def quadratic_program(spec: QuadraticDCSpec) -> DCProgram:
    constraints = []
    for i in range(2):
        pieces = tuple(SmoothConvexFn.quadratic(spec.B[i, j], spec.b[i, j], spec.d[i, j]) for j in range(2))
        constraints.append(Constraint(
            phi=SmoothConvexFn.quadratic(spec.A[i], spec.a[i], spec.c[i]),
            zeta=zero_function(),
            psi=MaxSmoothFn(pieces),
        ))

    return DCProgram(
        n=spec.n,
        phi0=SmoothConvexFn.quadratic(spec.Q, spec.q),
        zeta0=zero_function(),
        psi0=MaxSmoothFn((SmoothConvexFn.constant(spec.n),)),
        constraints=constraints,
        name=f'quadratic_dc(n={spec.n}, seed={spec.seed})',
    )


def gen_quadratic_dc(n: int, seed: int) -> Tuple[DCProgram, QuadraticDCSpec]:
    """Random quadratic DC instance with two constraints of two pieces each.

    Draw order from Generator(PCG64(seed)): the matrices Q, A_1, A_2, B_11,
    B_12, B_21, B_22 (each a uniform d then a Gaussian n x n), then the
    vectors q, a_1, a_2, b_11, b_12, b_21, b_22, then c (2) and d (2 x 2).
    """
    if n < 2:
        raise ModelError(f'quadratic instances need n >= 2, got {n}')

    rng = make_generator(seed)
    matrices = [random_psd(rng, n) for _ in range(7)]
    vectors = [rng.standard_normal(n) for _ in range(7)]
    c = rng.standard_normal(2)
    d = rng.standard_normal((2, 2))

    spec = QuadraticDCSpec(
        n=n,
        seed=seed,
        Q=matrices[0],
        A=np.array(matrices[1:3]),
        B=np.array(matrices[3:7]).reshape(2, 2, n, n),
        q=vectors[0],
        a=np.array(vectors[1:3]),
        b=np.array(vectors[3:7]).reshape(2, 2, n),
        c=c,
        d=d,
    )
    return quadratic_program(spec), spec


def h_separable(n: int, s: float) -> SeparableMax:
    """sum_k max(x_k - s, 0, -x_k - s) as per-coordinate three-piece maxima."""
    slopes = np.tile([1.0, 0.0, -1.0], (n, 1))
    offsets = np.tile([-s, 0.0, -s], (n, 1))
    return SeparableMax(slopes, offsets)


def sparse_program(spec: SparseRecoverySpec) -> DCProgram:
    A, b = spec.A, spec.b
    phi0 = SmoothConvexFn(
        value_fn=lambda x: float(np.sum((A @ x - b) ** 2)),
        gradient_fn=lambda x: 2.0 * (A.T @ (A @ x - b)),
        lipschitz_grad=2.0,
    )
    constraint = Constraint(
        phi=SmoothConvexFn.constant(spec.n, -spec.s * spec.K),
        zeta=l1_norm(1.0),
        psi=h_separable(spec.n, spec.s),
    )
    return DCProgram(
        n=spec.n,
        phi0=phi0,
        zeta0=zero_function(),
        psi0=MaxSmoothFn((SmoothConvexFn.constant(spec.n),)),
        constraints=(constraint,),
        name=f'sparse_recovery(m={spec.m}, n={spec.n}, K={spec.K}, seed={spec.seed})',
    )


def gen_sparse_recovery(m: int, n: int, K: int, s: float, seed: int,
                        noise: float = NOISE_VARIANCE) -> Tuple[DCProgram, SparseRecoverySpec]:
    """Sparse recovery instance with orthonormal-row A and b = A x* + xi.

    Draw order from Generator(PCG64(seed)): the support (K of n without
    replacement), the signs, the Gaussian m x n matrix, then xi with variance
    `noise` (1e-3 by default). The rows are orthonormalized through a QR
    factorization of A'.
    """
    if not 1 <= K <= n:
        raise ModelError(f'sparsity K must lie in 1..{n}, got {K}')

    if not s > 0:
        raise ModelError(f's must be positive, got {s}')

    if m > n:
        raise ModelError(f'orthonormal rows need m <= n, got m={m}, n={n}')

    if noise < 0:
        raise ModelError(f'noise variance must be nonnegative, got {noise}')

    rng = make_generator(seed)
    support = rng.choice(n, size=K, replace=False)
    x_star = np.zeros(n)
    x_star[support] = rng.choice([-1.0, 1.0], size=K)

    A = np.linalg.qr(rng.standard_normal((m, n)).T)[0].T
    xi = np.sqrt(noise) * rng.standard_normal(m)
    b = A @ x_star + xi

    spec = SparseRecoverySpec(m=m, n=n, K=K, s=s, seed=seed, A=A, b=b, x_star=x_star, xi=xi, noise=noise)
    return sparse_program(spec), spec


def one_dim_example() -> DCProgram:
    """min |x| - max(6x, x) s.t. 2x - max(-x, x) <= 0 over the real line, with L0 normalized to 1."""
    prog = DCProgram(
        n=1,
        phi0=SmoothConvexFn.constant(1),
        zeta0=l1_norm(1.0),
        psi0=MaxSmoothFn.affine([[6.0], [1.0]], [0.0, 0.0]),
        constraints=(Constraint(
            phi=SmoothConvexFn.affine([2.0]),
            zeta=zero_function(),
            psi=MaxSmoothFn.affine([[-1.0], [1.0]], [0.0, 0.0]),
        ),),
        name='one_dim_example',
    )
    return normalize_L0(prog)


def one_dim_rho(k: int, rho0: float = 0.1) -> float:
    """Penalty parameters of the AL run with alpha = 1, sigma = 2: rho0, 25, 50, 100, ..."""
    if k == 0:
        return rho0

    return 25.0 * 2.0 ** (k - 1)


def one_dim_reference(k: int, rho: float) -> dict:
    """Closed-form iterate, multiplier and per-pair auxiliary values at outer iteration k.

    Pairs are ordered (1,1), (1,2), (2,1), (2,2) in 1-based piece labels.
    """
    if k == 0:
        return {
            'x': 5.0 / rho,
            'lam_next': 5.0,
            'aux_x': [5.0 / (9.0 * rho), 5.0 / rho, 0.0, 0.0],
            'aux_lam': [5.0 / 3.0, 5.0, 0.0, 0.0],
            'aux_value': [-425.0 / (162.0 * rho), -25.0 / (2.0 * rho), 0.0, 0.0],
        }

    if k % 2 == 1:
        return {
            'x': -13.0 / (9.0 * rho),
            'lam_next': 2.0 / 3.0,
            'aux_x': [-8.0 / (9.0 * rho), 0.0, -13.0 / (9.0 * rho), -3.0 / rho],
            'aux_lam': [7.0 / 3.0, 5.0, 2.0 / 3.0, 2.0],
            'aux_value': [-8.0 / rho, 0.0, -169.0 / (18.0 * rho), -13.0 / (2.0 * rho)],
        }

    return {
        'x': 13.0 / (3.0 * rho),
        'lam_next': 5.0,
        'aux_x': [1.0 / (3.0 * rho), 13.0 / (3.0 * rho), 0.0, 0.0],
        'aux_lam': [5.0 / 3.0, 5.0, 2.0 / 3.0, 2.0 / 3.0],
        'aux_value': [-25.0 / (18.0 * rho), -169.0 / (18.0 * rho), 0.0, 0.0],
    }


def l1_ball_start(spec: SparseRecoverySpec, tol: float = 1e-10, max_iter: int = 20000) -> np.ndarray:
    """Minimizer of ||Ax - b||^2 over ||x||_1 <= sK by projected gradient with step 1/2."""
    A, b = spec.A, spec.b
    tau = spec.s * spec.K
    x = np.zeros(spec.n)
    for _ in range(max_iter):
        x_new = project_l1_ball(x - A.T @ (A @ x - b), tau)
        change = float(np.linalg.norm(x_new - x))
        x = x_new
        if change <= tol * max(float(np.linalg.norm(x)), 1.0):
            return x

    logger.warning('l1-ball start stopped after %d iterations', max_iter)
    return x


def feasible_start(prog: DCProgram, rng: Generator, max_tries: int = 1000) -> np.ndarray:
    """Redraw standard normal points until one is feasible."""
    for _ in range(max_tries):
        x = rng.standard_normal(prog.n)
        if feasibility_violation(prog, x) == 0.0:
            return x

    raise ModelError(f'no feasible standard normal point in {max_tries} draws')


def quadratic_start(seed: int, run: int, n: int) -> np.ndarray:
    return make_generator(seed, run).standard_normal(n)


@dataclass(eq=False)
class Instance:
    kind: InstanceKind
    seed: int = 0
    dims: Dict[str, int] = field(default_factory=dict)
    params: Dict[str, float] = field(default_factory=dict)
    blocks: Dict[str, np.ndarray] = field(default_factory=dict)

    def document(self) -> dict:
        return {
            'format': FORMAT,
            'version': VERSION,
            'kind': self.kind.value,
            'seed': int(self.seed),
            'dims': {key: int(value) for key, value in self.dims.items()},
            'params': {key: float(value) for key, value in self.params.items()},
            'blocks': {
                name: {'shape': [int(size) for size in np.shape(block)], 'data': vector_to_text(block)}
                for name, block in self.blocks.items()
            },
        }


def instance_from_quadratic(spec: QuadraticDCSpec) -> Instance:
    return Instance(InstanceKind.QUADRATIC_DC, seed=spec.seed, dims={'n': spec.n}, blocks=spec.blocks())


def instance_from_sparse(spec: SparseRecoverySpec) -> Instance:
    return Instance(InstanceKind.SPARSE_RECOVERY, seed=spec.seed, dims={'m': spec.m, 'n': spec.n, 'K': spec.K},
                    params={'s': spec.s, 'noise': spec.noise}, blocks=spec.blocks())


def _dump(document: dict) -> str:
    return yaml.safe_dump(document, sort_keys=False, width=2 ** 31 - 1)


def checksum(document: dict) -> str:
    body = {key: value for key, value in document.items() if key != 'checksum'}
    return sha256_text(_dump(body))


def dumps_instance(instance: Instance) -> str:
    document = instance.document()
    document['checksum'] = checksum(document)
    return _dump(document)


def save_instance(instance: Instance, path: str):
    with open(path, 'w', encoding='utf-8') as fp:
        fp.write(dumps_instance(instance))


def _schema() -> dict:
    script_dir = os.path.dirname(os.path.realpath(__file__))
    with open(os.path.join(script_dir, 'yaml', 'instance.schema.yml'), 'r', encoding='utf-8') as fp:
        return yaml.safe_load(fp)


def _missing_section(text: str) -> str:
    present = set(re.findall(r'^([A-Za-z_]+):', text, flags=re.MULTILINE))
    for section in SECTIONS:
        if section not in present:
            return section

    return SECTIONS[-1]


def loads_instance(text: str) -> Instance:
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise InstanceFormatError(f'unreadable instance file: {e}', _missing_section(text)) from e

    if not isinstance(document, dict):
        raise InstanceFormatError('instance file is not a mapping', SECTIONS[0])

    for section in SECTIONS:
        if section not in document:
            raise InstanceFormatError('section missing (truncated file?)', section)

    if document['format'] != FORMAT:
        raise InstanceFormatError(f'unknown format {document["format"]!r}', 'format')

    if document['version'] != VERSION:
        raise VersionError(f'version {document["version"]!r} is not supported (expected {VERSION})', 'version')

    try:
        jsonschema.validate(instance=document, schema=_schema())
    except jsonschema.exceptions.ValidationError as e:
        section = str(e.path[0]) if e.path else 'format'
        raise InstanceFormatError(e.message, section) from e

    if checksum(document) != document['checksum']:
        raise ChecksumError('content does not match its checksum', 'checksum')

    blocks = {}
    for name, block in document['blocks'].items():
        values = text_to_vector(block['data'])
        shape = tuple(block['shape'])
        if values.size != int(np.prod(shape)):
            raise InstanceFormatError(f'block {name} holds {values.size} numbers for shape {shape}', 'blocks')

        blocks[name] = values.reshape(shape)

    return Instance(
        kind=InstanceKind(document['kind']),
        seed=document['seed'],
        dims=dict(document['dims']),
        params=dict(document['params']),
        blocks=blocks,
    )


def load_instance(path: str) -> Instance:
    with open(path, 'r', encoding='utf-8') as fp:
        return loads_instance(fp.read())


def quadratic_spec(instance: Instance) -> QuadraticDCSpec:
    return QuadraticDCSpec(n=instance.dims['n'], seed=instance.seed, **instance.blocks)


def sparse_spec(instance: Instance) -> SparseRecoverySpec:
    dims = instance.dims
    return SparseRecoverySpec(m=dims['m'], n=dims['n'], K=dims['K'], s=instance.params['s'], seed=instance.seed,
                              noise=instance.params.get('noise', NOISE_VARIANCE), **instance.blocks)


def build_program(instance: Instance) -> DCProgram:
    if instance.kind == InstanceKind.QUADRATIC_DC:
        return quadratic_program(quadratic_spec(instance))

    if instance.kind == InstanceKind.SPARSE_RECOVERY:
        return sparse_program(sparse_spec(instance))

    return one_dim_example()


def generate_instance(kind: InstanceKind, seed: int, n: int = 50, m: int = 256, K: int = 20, s: float = 0.1,
                      noise: float = NOISE_VARIANCE) -> Tuple[DCProgram, Instance, Optional[np.ndarray]]:
    """Program, serializable instance and known solution (sparse recovery only) of one kind."""
    if kind == InstanceKind.QUADRATIC_DC:
        prog, spec = gen_quadratic_dc(n, seed)
        return prog, instance_from_quadratic(spec), None

    if kind == InstanceKind.SPARSE_RECOVERY:
        prog, spec = gen_sparse_recovery(m, n, K, s, seed, noise)
        return prog, instance_from_sparse(spec), spec.x_star

    return one_dim_example(), Instance(InstanceKind.ONE_DIM_EXAMPLE, seed=seed, dims={'n': 1}), None

from enum import Enum


class SetKind(Enum):
    WHOLE_SPACE = 'whole-space'
    BOX = 'box'
    POLYHEDRAL = 'polyhedral'
    CUSTOM = 'custom'


class NonsmoothKind(Enum):
    ZERO = 'zero'
    L1 = 'l1'
    CUSTOM = 'custom'


class DescriptorKind(Enum):
    BOX = 'box'
    VERTICES = 'vertices'


class HingeKind(Enum):
    LINEAR = 'linear'
    SQUARED = 'squared'
    AUGMENTED = 'augmented'


class SubsolveMethod(Enum):
    DUAL = 'dual'
    PROX_GRADIENT = 'prox-gradient'
    SUBGRADIENT = 'subgradient'


class Method(Enum):
    PM1 = 'pm1'
    PM2 = 'pm2'
    ALM = 'alm'


class StopReason(Enum):
    CONVERGED = 'converged'
    MAX_OUTER = 'max_outer'
    RHO_CAP = 'rho_cap'
    INNER_LIMIT = 'inner_limit'
    UNCERTIFIED = 'uncertified'
    STALLED_INFEASIBLE = 'stalled_infeasible'


class Command(Enum):
    GEN = 'gen'
    SOLVE = 'solve'
    VERIFY = 'verify'
    REPRODUCE_EXAMPLE = 'reproduce-example'
    REPRODUCE_EXPERIMENT = 'reproduce-experiment'


class InstanceKind(Enum):
    QUADRATIC_DC = 'quadratic_dc'
    SPARSE_RECOVERY = 'sparse_recovery'
    ONE_DIM_EXAMPLE = 'one_dim_example'


class AuxStrategy:
    RESTRICTED = 'restricted'
    ANCHORED = 'anchored'


class SubsolveBackend:
    AUTO = 'auto'
    DUAL = 'dual'
    PROX_GRADIENT = 'prox-gradient'
    SUBGRADIENT = 'subgradient'

from .alm import al_solve, auxiliary_multipliers
from .dc_model import DCProgram, MultiIndex
from .penalty import penalty_solve
from .sca import sca_solve

__version__ = '0.1.0'

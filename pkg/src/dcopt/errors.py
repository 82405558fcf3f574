from __future__ import annotations

from typing import Optional


class DCOptError(Exception):
    pass


class DimensionError(DCOptError):
    def __init__(self, expected: int, got):
        super().__init__(f'expected a vector of dimension {expected}, got shape {got}')
        self.expected = expected
        self.got = got


class IndexRangeError(DCOptError):
    pass


class ModelError(DCOptError):
    pass


class CombinatorialBlowupError(DCOptError):
    def __init__(self, cardinality: int, cap: int):
        super().__init__(f'active product has {cardinality} members, cap is {cap}')
        self.cardinality = cardinality
        self.cap = cap


class CertificationError(DCOptError):
    def __init__(self, certificate, message: Optional[str] = None):
        if message is None:
            message = (f'{certificate.method.value} subsolve not certified after {certificate.iterations} iterations '
                       f'(residual {certificate.residual:.3e}, delta {certificate.delta:.3e})')
        super().__init__(message)
        self.certificate = certificate


class UnsupportedError(DCOptError):
    pass


class ConfigurationError(DCOptError):
    def __init__(self, message: str, path: str = ''):
        super().__init__(f'{path}: {message}' if path else message)
        self.path = path


class InstanceFormatError(DCOptError):
    def __init__(self, message: str, section: str = ''):
        super().__init__(f'[{section}] {message}' if section else message)
        self.section = section


class ChecksumError(InstanceFormatError):
    pass


class VersionError(InstanceFormatError):
    pass


class SolverError(DCOptError):
    """Inner failure raised with whatever outer history was gathered before it."""

    def __init__(self, message: str, partial_report=None):
        super().__init__(message)
        self.partial_report = partial_report

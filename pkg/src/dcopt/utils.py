from __future__ import annotations

import hashlib
import math
from typing import Iterable, Optional, Tuple

import numpy as np

from .errors import DimensionError


def deep_merge(base: dict, override: dict, *, allow_none=False):
    """Merge override into base in place; None values leave base untouched unless allow_none."""
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            base[key] = deep_merge(base[key], value, allow_none=allow_none)
        elif isinstance(value, dict) and key not in base:
            base[key] = deep_merge({}, value, allow_none=allow_none)
        elif allow_none or value is not None:
            base[key] = value

    return base


def drop_none(data: dict) -> dict:
    """Copy of a nested mapping without None values and without the mappings that end up empty."""
    result = {}
    for key, value in data.items():
        if isinstance(value, dict):
            value = drop_none(value)
            if not value:
                continue

        if value is not None:
            result[key] = value

    return result


def as_vector(x, n: Optional[int] = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)

    if x.ndim != 1 or (n is not None and x.shape[0] != n):
        raise DimensionError(n if n is not None else -1, x.shape)

    return x


def broadcast_weights(weights, n: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.ndim == 0:
        return np.full(n, float(w))

    return w


def soft_threshold(v: np.ndarray, threshold) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - threshold, 0.0)


def interval_distance(lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Per-coordinate distance from 0 to [lower, upper] (bounds may be infinite)."""
    return np.maximum(np.maximum(lower, -upper), 0.0)


def project_simplex(v: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """Euclidean projection onto {z >= 0, sum(z) = radius}."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - radius
    ind = np.arange(1, v.size + 1)
    cond = u - css / ind > 0
    rho = ind[cond][-1]
    theta = css[cond][-1] / rho
    return np.maximum(v - theta, 0.0)


def project_l1_ball(b: np.ndarray, tau: float) -> np.ndarray:
    """Euclidean projection onto {z : ||z||_1 <= tau} by sorting the magnitudes."""
    if np.linalg.norm(b, 1) <= tau:
        return b.copy()

    if tau < np.spacing(1):
        return np.zeros_like(b)

    magnitude = np.abs(b)
    idx = np.argsort(magnitude)[::-1]
    sorted_b = magnitude[idx]

    csb = np.cumsum(sorted_b) - tau
    alpha = csb / (np.arange(b.size) + 1.0)
    hits = np.where(alpha >= sorted_b)[0]
    if hits.size == 0:
        shift = alpha[-1]
    elif hits[0] == 0:
        shift = 0.0
    else:
        shift = alpha[hits[0] - 1]

    return np.sign(b) * np.maximum(magnitude - shift, 0.0)


def format_number(value: float, digits: int = 17) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ''

    return format(float(value), f'.{digits}g')


def vector_to_text(values: np.ndarray) -> str:
    return ' '.join(format(float(v), '.17g') for v in np.ravel(values))


def text_to_vector(text: str) -> np.ndarray:
    if not text.strip():
        return np.zeros(0)

    return np.array([float(token) for token in text.split()], dtype=float)


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def chunked(items: Iterable, size: int) -> Iterable[Tuple]:
    batch = []
    for item in items:
        batch.append(item)
        if len(batch) == size:
            yield tuple(batch)
            batch = []

    if batch:
        yield tuple(batch)

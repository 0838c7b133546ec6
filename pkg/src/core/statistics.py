"""
Weighted empirical distributions
ECDFs with probability weights, Kolmogorov-Smirnov distances against a
closed-form CDF or a second weighted sample, and two-sample critical values.
"""
import logging
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.stats import kstwobign

from src.core.error_handler import InvalidArgumentError

logger = logging.getLogger(__name__)


def _normalized_weights(values: np.ndarray, weights: Optional[np.ndarray]) -> np.ndarray:
    if weights is None:
        return np.full(len(values), 1.0 / len(values))
    weights = np.asarray(weights, dtype=float)
    if weights.shape != values.shape:
        raise InvalidArgumentError(f"{len(weights)} weights for {len(values)} values")
    if np.any(weights < 0) or weights.sum() <= 0:
        raise InvalidArgumentError("weights must be non-negative with positive total")
    return weights / weights.sum()


def weighted_ecdf(values, weights=None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Distinct sorted support points and the right-continuous CDF at them.
    Ties are merged; the last CDF value is exactly 1.
    """
    values = np.asarray(values, dtype=float).ravel()
    if not len(values):
        raise InvalidArgumentError("empirical CDF of an empty sample")
    weights = _normalized_weights(values, weights)
    order = np.argsort(values, kind="stable")
    support, first = np.unique(values[order], return_index=True)
    mass = np.add.reduceat(weights[order], first)
    cdf = np.cumsum(mass)
    cdf[-1] = 1.0
    return support, cdf


def ecdf_at(support: np.ndarray, cdf: np.ndarray, x) -> np.ndarray:
    idx = np.searchsorted(support, np.asarray(x, dtype=float), side="right")
    return np.concatenate([[0.0], cdf])[idx]


def effective_size(weights: Optional[np.ndarray], n: int) -> float:
    """Kish effective sample size (sum w)^2 / sum w^2"""
    if weights is None:
        return float(n)
    w = np.asarray(weights, dtype=float)
    return float(w.sum() ** 2 / np.sum(w * w))


def weighted_ks_to_cdf(values, cdf: Callable, weights=None) -> float:
    """sup_x |F_emp(x) - F(x)| for a continuous reference CDF"""
    support, emp = weighted_ecdf(values, weights)
    ref = np.asarray(cdf(support), dtype=float)
    before = np.concatenate([[0.0], emp[:-1]])
    return float(max(np.abs(emp - ref).max(), np.abs(before - ref).max()))


def weighted_ks_2samp(x, y, wx=None, wy=None) -> float:
    """sup_t |F_x(t) - F_y(t)| between two weighted samples"""
    sx, cx = weighted_ecdf(x, wx)
    sy, cy = weighted_ecdf(y, wy)
    points = np.union1d(sx, sy)
    return float(np.abs(ecdf_at(sx, cx, points) - ecdf_at(sy, cy, points)).max())


def ks_two_sample_quantile(n: float, m: float, level: float = 0.99) -> float:
    """Asymptotic two-sample KS critical value at ``level`` for sizes n and m"""
    if n <= 0 or m <= 0:
        raise InvalidArgumentError(f"sample sizes must be positive, got {n}, {m}")
    if not 0.0 < level < 1.0:
        raise InvalidArgumentError(f"level must lie in (0, 1), got {level}")
    return float(kstwobign.ppf(level) / np.sqrt(n * m / (n + m)))

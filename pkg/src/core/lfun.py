"""
L-functions of weight 2 newforms
Smoothed partial sums on evaluation grids, the absolutely convergent
oracle for Re s > 1, and the functional-equation check that fixes the
root number convention.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from src.core.error_handler import IncompleteDataError, InconsistencyError, InvalidArgumentError
from src.core.grid import Ensemble, EvalGrid
from src.core.numkernel import cutoff_eval, divisor_counts, gamma, primes_up_to, smoothed_dirichlet_sum
from src.models.hecke import Eigenform, FamilySnapshot, with_epsilon_convention
from src.utils.decorators import timing_decorator

logger = logging.getLogger(__name__)

REFLECTION_PASS = 1e-3
REFLECTION_FAIL = 0.1


def default_smoothing(q: int) -> int:
    """N = max(2^14, 50 q)"""
    return max(1 << 14, 50 * q)


@dataclass
class LEvaluation:
    """L(f, s) for one form at every point of a grid (analytic normalization)"""

    form_id: int
    grid: EvalGrid
    values: np.ndarray
    method: str
    error_estimate: np.ndarray
    meta: Dict = field(default_factory=dict)

    def sup_distance(self, other_values: np.ndarray) -> float:
        return float(self.grid.sup_norm(self.values - other_values))


def _require_coefficients(form: Eigenform, N: int):
    if N < 1:
        raise InvalidArgumentError(f"smoothing length must be >= 1, got {N}")
    if form.nmax < 2 * N:
        raise IncompleteDataError(f"form {form.id} has a_n up to {form.nmax}, smoothing needs 2N = {2 * N}")


def eval_L_smoothed(form: Eigenform, s: complex, N: int) -> complex:
    """sum_{n <= 2N} lambda_f(n) phi(n/N) n^-s"""
    s = complex(s)
    if s.real <= 0.5:
        raise InvalidArgumentError(f"smoothed L needs Re s > 1/2, got {s}")
    _require_coefficients(form, N)
    value = complex(smoothed_dirichlet_sum(form.normalized()[: 2 * N + 1], [s], N)[0, 0])
    return complex(value.real, 0.0) if s.imag == 0 else value


def direct_series(form: Eigenform, s: complex, nterms: int) -> complex:
    """sum_{n <= nterms} lambda_f(n) n^-s, meaningful for Re s > 1"""
    s = complex(s)
    if s.real <= 1.0:
        raise InvalidArgumentError(f"direct series needs Re s > 1, got {s}")
    if form.nmax < nterms:
        raise IncompleteDataError(f"form {form.id} has a_n up to {form.nmax}, {nterms} requested")
    n = np.arange(1, nterms + 1, dtype=float)
    return complex(np.sum(form.normalized()[1 : nterms + 1] * np.exp(-s * np.log(n))))


def smoothing_bound(s: complex, N: int) -> float:
    """sum_{n <= 2N} d(n) (1 - phi(n/N)) n^-Re(s), dominating smoothed minus direct"""
    sigma = complex(s).real
    d = divisor_counts(2 * N, primes_up_to(max(2 * N, 2)))
    n = np.arange(1, 2 * N + 1, dtype=float)
    return float(np.sum(d[1:] * (1.0 - cutoff_eval(n / N)) * n**-sigma))


def direct_tail_bound(s: complex, nterms: int) -> float:
    """Upper bound for sum_{n > nterms} d(n) n^-Re(s) by partial summation"""
    sigma = complex(s).real
    if sigma <= 1.0:
        return float("inf")
    M = float(nterms)
    a = sigma - 1.0
    return sigma * M**-a * ((math.log(M) + 1.0) / a + 1.0 / a**2)


def reflection_factor(s: complex, q: int, epsilon: int) -> complex:
    """X(s) = eps q^(1-s) (2 pi)^(2s-2) Gamma(2-s) / Gamma(s), arithmetic normalization"""
    s = complex(s)
    return epsilon * q ** (1.0 - s) * (2.0 * math.pi) ** (2.0 * s - 2.0) * gamma(2.0 - s) / gamma(s)


def reflection_check(form: Eigenform, s: complex, N: int, convention: Optional[int] = None) -> float:
    """
    |L(s) - X(s) L(2 - s)| in the arithmetic normalization, both sides by
    smoothed sums. ``convention`` rebuilds a_q and the root number as
    convention * w_q before checking.
    """
    s = complex(s)
    if not 1.1 <= s.real <= 1.4:
        raise InvalidArgumentError(f"reflection check needs 1.1 <= Re s <= 1.4, got {s}")
    _require_coefficients(form, N)
    epsilon = form.root_number
    if convention is not None:
        form = with_epsilon_convention(form, convention)
        epsilon = convention * form.fricke_sign
    # arithmetic s is analytic s - 1/2
    left, right = smoothed_dirichlet_sum(form.normalized()[: 2 * N + 1], [s - 0.5, 1.5 - s], N)[0]
    residual = abs(left - reflection_factor(s, form.level, epsilon) * right)
    logger.debug(f"reflection at q={form.level} s={s} N={N} eps={epsilon}: {residual:.3e}")
    return float(residual)


def calibrate_epsilon_convention(form: Eigenform, s: complex = 1.2, N: int = 1 << 13) -> int:
    """The unique global sign c in a_q = eps = c * w_q passing the reflection check"""
    residuals = {c: reflection_check(form, s, N, convention=c) for c in (1, -1)}
    passing = [c for c, r in residuals.items() if r < REFLECTION_PASS]
    failing = [c for c, r in residuals.items() if r > REFLECTION_FAIL]
    if len(passing) != 1 or len(failing) != 1:
        raise InconsistencyError(f"cannot fix the root number convention at q={form.level}: residuals {residuals}")
    logger.info(f"🪞 level {form.level}: root number convention {passing[0]:+d} (residuals {residuals})")
    return passing[0]


def _smoothed_rows(snapshot: FamilySnapshot, points: np.ndarray, N: int) -> np.ndarray:
    if snapshot.nmax < 2 * N:
        raise IncompleteDataError(f"level {snapshot.level}: a_n up to {snapshot.nmax}, smoothing needs 2N = {2 * N}")
    return smoothed_dirichlet_sum(snapshot.normalized_matrix(2 * N), points, N)


@timing_decorator
def family_on_grid(snapshot: FamilySnapshot, grid: EvalGrid, N: Optional[int] = None) -> List[LEvaluation]:
    """
    One smoothed evaluation per form. The error estimate is the heuristic
    |L^(N) - L^(N/2)|, not a certified bound.
    """
    N = default_smoothing(snapshot.level) if N is None else N
    values = _smoothed_rows(snapshot, grid.points, N)
    coarse = _smoothed_rows(snapshot, grid.points, max(N // 2, 1))
    values[:, grid.real_mask] = values[:, grid.real_mask].real
    errors = np.abs(values - coarse)
    return [
        LEvaluation(
            form_id=form.id,
            grid=grid,
            values=values[i],
            method=f"smoothed({N})",
            error_estimate=errors[i],
            meta={"level": snapshot.level, "N": N, "weight": form.weight},
        )
        for i, form in enumerate(snapshot.forms)
    ]


def family_ensemble(snapshot: FamilySnapshot, grid: EvalGrid, N: Optional[int] = None, evaluations: Optional[List[LEvaluation]] = None) -> Ensemble:
    """The family as a harmonically weighted ensemble on ``grid``"""
    evaluations = family_on_grid(snapshot, grid, N) if evaluations is None else evaluations
    N = evaluations[0].meta["N"]
    return Ensemble(
        grid=grid,
        values=np.vstack([e.values for e in evaluations]),
        weights=snapshot.weights,
        meta={
            "level": snapshot.level,
            "N": N,
            "method": "family",
            "weighting": "harmonic",
            "form_ids": [e.form_id for e in evaluations],
        },
    )

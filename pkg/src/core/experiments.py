"""
Statistical experiments tying the family to the random model
Equidistribution of Hecke eigenvalues, Bagchi comparison, universality
counting, support probability, smoothing decay, growth and the Petersson
self-check of the harmonic weights.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.error_handler import (
    IncompleteDataError,
    InadmissibleTargetError,
    InvalidArgumentError,
)
from src.core.grid import Ensemble, EvalGrid
from src.core.lfun import LEvaluation, default_smoothing
from src.core.numkernel import (
    bessel_j1,
    kloosterman_factored,
    plancherel_cdf,
    primes_up_to,
    sato_tate_cdf,
    sato_tate_moment,
    smoothed_dirichlet_sum,
)
from src.core.randmodel import EnsembleGenerator, coefficient_rows_for, derive_seed, sample_values
from src.core.statistics import effective_size, weighted_ks_2samp, weighted_ks_to_cdf
from src.models.hecke import FamilySnapshot, normalized_petersson_ratio
from src.models.targets import TargetFunction
from src.utils.decorators import timing_decorator

logger = logging.getLogger(__name__)

FamilyInput = Union[Ensemble, Sequence[LEvaluation]]


def _family_values(family: FamilyInput) -> Tuple[EvalGrid, np.ndarray, Optional[np.ndarray], Dict]:
    """Grid, value matrix, harmonic weights and meta of a family input"""
    if isinstance(family, Ensemble):
        return family.grid, family.values, family.weights, dict(family.meta)
    family = list(family)
    if not family:
        raise InvalidArgumentError("empty family evaluation list")
    grid = family[0].grid
    if any(not e.grid.same_as(grid) for e in family):
        raise InvalidArgumentError("family evaluations are on different grids")
    weights = np.array([e.meta.get("weight", np.nan) for e in family])
    weights = None if np.any(np.isnan(weights)) else weights
    return grid, np.vstack([e.values for e in family]), weights, dict(family[0].meta)


def _check_prime(snapshot: FamilySnapshot, p: int):
    if p == snapshot.level:
        raise InvalidArgumentError(f"p={p} equals the level")
    if p not in primes_up_to(max(p, 2)):
        raise InvalidArgumentError(f"{p} is not prime")
    if p > snapshot.nmax:
        raise IncompleteDataError(f"level {snapshot.level}: a_{p} is beyond nmax={snapshot.nmax}")


# --- local equidistribution -------------------------------------------------


def sato_tate_test(snapshot: FamilySnapshot, p: int, weighting: str = "harmonic", reference: Optional[str] = None) -> float:
    """
    KS distance between the weighted law of lambda_f(p) and the Sato-Tate
    law (harmonic) or the p-adic Plancherel law (natural).
    """
    _check_prime(snapshot, p)
    reference = reference or ("sato-tate" if weighting == "harmonic" else "plancherel")
    if reference == "sato-tate":
        cdf = sato_tate_cdf
    elif reference == "plancherel":
        cdf = lambda t: plancherel_cdf(t, p)  # noqa: E731
    else:
        raise InvalidArgumentError(f"unknown reference law {reference!r}")
    lam = snapshot.normalized_matrix(p)[:, p]
    statistic = weighted_ks_to_cdf(lam, cdf, snapshot.weights_for(weighting))
    logger.info(f"📈 level {snapshot.level} p={p} {weighting}/{reference}: KS = {statistic:.4f}")
    return statistic


@dataclass
class JointMoment:
    primes: List[int]
    exponents: List[int]
    family: float
    model: float

    @property
    def gap(self) -> float:
        return abs(self.family - self.model)


def joint_moment_test(snapshot: FamilySnapshot, primes: Sequence[int], exponents: Sequence[int], weighting: str = "harmonic") -> JointMoment:
    """E_q(prod lambda_f(p_i)^k_i) against prod E(Y_p_i^k_i)"""
    primes, exponents = [int(p) for p in primes], [int(k) for k in exponents]
    if len(primes) != len(exponents) or not primes:
        raise InvalidArgumentError("one exponent per prime is required")
    if len(set(primes)) != len(primes):
        raise InvalidArgumentError(f"primes must be distinct, got {primes}")
    if any(k < 0 for k in exponents):
        raise InvalidArgumentError(f"exponents must be >= 0, got {exponents}")
    for p in primes:
        _check_prime(snapshot, p)
    lam = snapshot.normalized_matrix(max(primes))
    product = np.prod([lam[:, p] ** k for p, k in zip(primes, exponents)], axis=0)
    family = float(np.dot(snapshot.weights_for(weighting), product))
    model = float(np.prod([sato_tate_moment(k) for k in exponents]))
    return JointMoment(primes=primes, exponents=exponents, family=family, model=model)


# --- Bagchi comparison ------------------------------------------------------


@dataclass
class ComparisonReport:
    """Per-point marginal KS distances between a family and a model ensemble"""

    grid: EvalGrid
    ks_re: np.ndarray
    ks_im: np.ndarray
    ks_logabs: np.ndarray
    ks_re_natural: np.ndarray
    ks_im_natural: np.ndarray
    ks_logabs_natural: np.ndarray
    family_size: int
    model_size: int
    family_effective_size: float
    meta: Dict = field(default_factory=dict)

    @property
    def per_point(self) -> np.ndarray:
        return np.maximum.reduce([self.ks_re, self.ks_im, self.ks_logabs])

    @property
    def per_point_natural(self) -> np.ndarray:
        return np.maximum.reduce([self.ks_re_natural, self.ks_im_natural, self.ks_logabs_natural])

    @property
    def aggregate(self) -> float:
        return float(self.per_point.mean())

    @property
    def aggregate_natural(self) -> float:
        return float(self.per_point_natural.mean())

    def to_dict(self) -> Dict:
        return {
            "grid_hash": self.grid.hash,
            "family_size": self.family_size,
            "model_size": self.model_size,
            "family_effective_size": self.family_effective_size,
            "aggregate": self.aggregate,
            "aggregate_natural": self.aggregate_natural,
            "meta": self.meta,
        }

    def to_rows(self) -> List[Dict]:
        return [
            {
                "re_s": z.real,
                "im_s": z.imag,
                "ks_re": self.ks_re[i],
                "ks_im": self.ks_im[i],
                "ks_logabs": self.ks_logabs[i],
                "ks_re_natural": self.ks_re_natural[i],
                "ks_im_natural": self.ks_im_natural[i],
                "ks_logabs_natural": self.ks_logabs_natural[i],
            }
            for i, z in enumerate(self.grid.points)
        ]


def _log_modulus(values: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.abs(values))


def bagchi_compare(family: FamilyInput, model: Ensemble, grid: Optional[EvalGrid] = None) -> ComparisonReport:
    """
    KS distances of Re, Im and log|.| at every grid point, family side
    weighted harmonically and uniformly.
    """
    family_grid, values, weights, family_meta = _family_values(family)
    grid = grid or family_grid
    if not (family_grid.same_as(grid) and model.grid.same_as(grid)):
        raise InvalidArgumentError(
            f"grid mismatch: family {family_grid.hash[:12]}, model {model.grid.hash[:12]}, requested {grid.hash[:12]}"
        )

    components = {"re": np.real, "im": np.imag, "logabs": _log_modulus}
    distances: Dict[str, np.ndarray] = {}
    for weighting, w in (("", weights), ("_natural", None)):
        for name, part in components.items():
            fam, mod = part(values), part(model.values)
            distances[f"ks_{name}{weighting}"] = np.array(
                [weighted_ks_2samp(fam[:, j], mod[:, j], w, model.weights) for j in range(grid.n_points)]
            )

    report = ComparisonReport(
        grid=grid,
        family_size=len(values),
        model_size=model.size,
        family_effective_size=effective_size(weights, len(values)),
        meta={
            "family": {k: v for k, v in family_meta.items() if k != "form_ids"},
            "model": dict(model.meta),
        },
        **distances,
    )
    logger.info(f"📊 comparison: aggregate {report.aggregate:.4f} (natural {report.aggregate_natural:.4f})")
    return report


# --- universality -----------------------------------------------------------


@dataclass
class UniversalityCount:
    eps: float
    count: int
    genus: int
    harmonic_fraction: float
    natural_fraction: float
    distances: np.ndarray

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["distances"] = self.distances.tolist()
        return data


def universality_count(family: FamilyInput, target: TargetFunction, eps: float) -> UniversalityCount:
    """Forms with boundary sup |L(f,.) - phi| < eps, counted with both weightings"""
    if eps < 0:
        raise InvalidArgumentError(f"eps must be >= 0, got {eps}")
    grid, values, weights, _ = _family_values(family)
    target.validate_admissible(grid)
    distances = grid.sup_norm(values - target.on_grid(grid)[None, :])
    hits = distances < eps
    g = len(values)
    weights = np.full(g, 1.0 / g) if weights is None else weights / weights.sum()
    return UniversalityCount(
        eps=float(eps),
        count=int(hits.sum()),
        genus=g,
        harmonic_fraction=float(weights[hits].sum()),
        natural_fraction=int(hits.sum()) / g,
        distances=distances,
    )


@dataclass
class DensityBound:
    eta: float
    harmonic_probability: float
    small_ratio_probability: float
    lower_bound: float
    natural_fraction: float


def natural_density_bound(snapshot: FamilySnapshot, in_event: Sequence[bool], eta: float) -> DensityBound:
    """
    natural(A) >= eta (P_q(A) - P_q(1/(g w_f) < eta)), checked against the
    actual natural fraction.
    """
    if eta <= 0:
        raise InvalidArgumentError(f"eta must be > 0, got {eta}")
    in_event = np.asarray(in_event, dtype=bool)
    if len(in_event) != snapshot.genus:
        raise InvalidArgumentError(f"event has {len(in_event)} entries, family has {snapshot.genus} forms")
    weights = snapshot.weights
    ratio = normalized_petersson_ratio(snapshot)
    harmonic = float(weights[in_event].sum())
    small = float(weights[ratio < eta].sum())
    return DensityBound(
        eta=float(eta),
        harmonic_probability=harmonic,
        small_ratio_probability=small,
        lower_bound=eta * (harmonic - small),
        natural_fraction=float(in_event.mean()),
    )


# --- support probability ----------------------------------------------------


@dataclass
class SupportProbability:
    eps: float
    hits: int
    samples: int

    @property
    def estimate(self) -> float:
        return self.hits / self.samples

    @property
    def stderr(self) -> float:
        p = self.estimate
        return math.sqrt(p * (1.0 - p) / self.samples)

    def to_dict(self) -> Dict:
        return {"eps": self.eps, "hits": self.hits, "samples": self.samples, "estimate": self.estimate, "stderr": self.stderr}


def support_probability_from_ensemble(ensemble: Ensemble, target: TargetFunction, eps_list: Sequence[float]) -> List[SupportProbability]:
    distances = ensemble.grid.sup_norm(ensemble.values - target.on_grid(ensemble.grid)[None, :])
    return [SupportProbability(eps=float(e), hits=int(np.sum(distances < e)), samples=ensemble.size) for e in eps_list]


async def model_support_probability(
    target: TargetFunction,
    grid: EvalGrid,
    eps: Union[float, Sequence[float]],
    M: int,
    seed: int,
    N: int,
    threads: int = 4,
) -> List[SupportProbability]:
    """Monte Carlo P(||L_D^(N) - phi||_grid < eps) with binomial standard errors"""
    try:
        target.validate_admissible(grid)
    except InadmissibleTargetError as e:
        logger.warning(f"⚠️ target outside the support ({e.condition}): {e}")
    eps_list = [eps] if np.isscalar(eps) else list(eps)
    ensemble = await EnsembleGenerator(threads=threads).generate(seed, grid, N, M)
    return support_probability_from_ensemble(ensemble, target, eps_list)


# --- smoothing decay and growth ---------------------------------------------


@dataclass
class DecayTable:
    N_list: List[int]
    N_ref: int
    gaps: List[float]
    source: str

    @property
    def slope(self) -> float:
        """Least-squares slope of log gap against log N over the positive gaps"""
        N = np.asarray(self.N_list, dtype=float)
        gaps = np.asarray(self.gaps)
        keep = gaps > 0
        if keep.sum() < 2:
            return float("nan")
        return float(np.polyfit(np.log(N[keep]), np.log(gaps[keep]), 1)[0])

    def to_rows(self) -> List[Dict]:
        return [{"N": n, "mean_sup_gap": g} for n, g in zip(self.N_list, self.gaps)]


def _decay_gaps(rows: np.ndarray, weights: np.ndarray, grid: EvalGrid, N_list: Sequence[int], N_ref: int) -> List[float]:
    reference = smoothed_dirichlet_sum(rows, grid.points, N_ref)
    return [
        float(np.dot(weights, grid.sup_norm(reference - smoothed_dirichlet_sum(rows, grid.points, N))))
        for N in N_list
    ]


def _check_decay_args(N_list: Sequence[int], N_ref: Optional[int]) -> Tuple[List[int], int]:
    N_list = [int(n) for n in N_list]
    if not N_list or N_list != sorted(N_list):
        raise InvalidArgumentError(f"N_list must be ascending, got {N_list}")
    N_ref = 4 * N_list[-1] if N_ref is None else int(N_ref)
    if N_ref < N_list[-1]:
        raise InvalidArgumentError(f"reference N={N_ref} is below max(N_list)={N_list[-1]}")
    return N_list, N_ref


@timing_decorator
def smoothing_decay_model(grid: EvalGrid, N_list: Sequence[int], M: int, seed: int, N_ref: Optional[int] = None, batch_size: int = 64) -> DecayTable:
    """E||L_D^(N_ref) - L_D^(N)|| over M model samples sharing their Y_n across N"""
    N_list, N_ref = _check_decay_args(N_list, N_ref)
    table = primes_up_to(2 * N_ref)
    totals = np.zeros(len(N_list))
    for start in range(0, M, batch_size):
        seeds = [derive_seed(seed, i) for i in range(start, min(start + batch_size, M))]
        rows = coefficient_rows_for(seeds, 2 * N_ref, table)
        totals += np.array(_decay_gaps(rows, np.ones(len(seeds)), grid, N_list, N_ref))
    return DecayTable(N_list=N_list, N_ref=N_ref, gaps=(totals / M).tolist(), source="model")


@timing_decorator
def smoothing_decay_family(snapshot: FamilySnapshot, grid: EvalGrid, N_list: Sequence[int], N_ref: Optional[int] = None, weighting: str = "harmonic") -> DecayTable:
    """E_q||L^(N_ref) - L^(N)|| over the family"""
    N_list, N_ref = _check_decay_args(N_list, N_ref)
    if snapshot.nmax < 2 * N_ref:
        raise IncompleteDataError(f"level {snapshot.level}: a_n up to {snapshot.nmax}, reference needs {2 * N_ref}")
    rows = snapshot.normalized_matrix(2 * N_ref)
    gaps = _decay_gaps(rows, snapshot.weights_for(weighting), grid, N_list, N_ref)
    return DecayTable(N_list=N_list, N_ref=N_ref, gaps=gaps, source=f"family q={snapshot.level}")


def smoothing_decay_test(
    generator: Union[str, FamilySnapshot],
    N_list: Sequence[int],
    grid: EvalGrid,
    M: int = 200,
    seed: int = 0,
    N_ref: Optional[int] = None,
) -> DecayTable:
    """``generator`` is "model" or a family snapshot"""
    if isinstance(generator, FamilySnapshot):
        return smoothing_decay_family(generator, grid, N_list, N_ref)
    if generator != "model":
        raise InvalidArgumentError(f"unknown generator {generator!r}")
    return smoothing_decay_model(grid, N_list, M, seed, N_ref)


@dataclass
class GrowthTable:
    sigma: float
    t_list: List[float]
    family: List[float]
    model: List[float]

    @staticmethod
    def _exponent(t_list: Sequence[float], means: Sequence[float]) -> float:
        if len(means) < 2:
            return float("nan")
        x = np.log1p(np.abs(np.asarray(t_list, dtype=float)))
        return float(np.polyfit(x, np.log(np.asarray(means)), 1)[0])

    @property
    def family_exponent(self) -> float:
        return self._exponent(self.t_list, self.family) if self.family else float("nan")

    @property
    def model_exponent(self) -> float:
        return self._exponent(self.t_list, self.model) if self.model else float("nan")

    def to_rows(self) -> List[Dict]:
        rows = []
        for i, t in enumerate(self.t_list):
            row = {"t": t}
            if self.family:
                row["family_mean_abs"] = self.family[i]
            if self.model:
                row["model_mean_abs"] = self.model[i]
            rows.append(row)
        return rows


def moment_growth_test(
    snapshot: Optional[FamilySnapshot],
    sigma: float,
    t_list: Sequence[float],
    N: Optional[int] = None,
    M: int = 0,
    seed: int = 0,
    weighting: str = "harmonic",
) -> GrowthTable:
    """E|L(sigma + it)| per t for the family and, when M > 0, the model"""
    if sigma < 0.55:
        raise InvalidArgumentError(f"sigma must be >= 0.55, got {sigma}")
    t_list = [float(t) for t in t_list]
    points = np.array([complex(sigma, t) for t in t_list])
    family: List[float] = []
    if snapshot is not None:
        N_family = default_smoothing(snapshot.level) if N is None else N
        if snapshot.nmax < 2 * N_family:
            raise IncompleteDataError(f"level {snapshot.level}: a_n up to {snapshot.nmax}, growth needs {2 * N_family}")
        values = smoothed_dirichlet_sum(snapshot.normalized_matrix(2 * N_family), points, N_family)
        family = (snapshot.weights_for(weighting) @ np.abs(values)).tolist()
    model: List[float] = []
    if M > 0:
        N_model = (1 << 12) if N is None else N
        seeds = [derive_seed(seed, i) for i in range(M)]
        model = np.abs(sample_values(seeds, points, N_model)).mean(axis=0).tolist()
    return GrowthTable(sigma=float(sigma), t_list=t_list, family=family, model=model)


# --- Petersson self-check ---------------------------------------------------


@dataclass
class PeterssonReport:
    level: int
    c_factor: int
    sign: int
    alpha: float
    mass_estimate: Optional[float]
    rows: List[Dict]

    @property
    def max_residual(self) -> float:
        return max((r["residual"] for r in self.rows), default=0.0)

    def to_dict(self) -> Dict:
        return {**asdict(self), "max_residual": self.max_residual}


@timing_decorator
def kloosterman_side(m: int, n: int, q: int, c_factor: int) -> float:
    """sum_{c = q j, j <= c_factor} S(m,n;c)/c J_1(4 pi sqrt(mn)/c)"""
    moduli = q * np.arange(1, c_factor + 1)
    table = primes_up_to(max(int(moduli[-1]), 2))
    sums = np.array([kloosterman_factored(m, n, int(c), table) for c in moduli])
    return float(np.sum(sums / moduli * bessel_j1(4.0 * math.pi * math.sqrt(m * n) / moduli)))


def petersson_check(
    snapshot: FamilySnapshot,
    pairs: Sequence[Tuple[int, int]] = ((2, 2), (2, 3), (3, 5)),
    c_factor: int = 1000,
) -> PeterssonReport:
    """
    Harmonic weights against the Petersson formula. The total mass alpha and
    the sign of the Kloosterman term are fixed at (1, 1); the other pairs
    are residuals.
    """
    q = snapshot.level
    top = max(max(pair) for pair in pairs)
    lam = snapshot.normalized_matrix(top)
    weights = snapshot.weights

    base = kloosterman_side(1, 1, q, c_factor)
    candidates = {sign: 1.0 + sign * 2.0 * math.pi * base for sign in (1, -1)}
    mass_estimate = None
    if snapshot.raw_weights is not None:
        mass_estimate = 2.0 * math.pi**2 * float(np.sum(snapshot.raw_weights)) / q
        sign = min(candidates, key=lambda c: abs(candidates[c] - mass_estimate))
    else:
        sign = -1
    alpha = candidates[sign]

    rows = []
    for m, n in pairs:
        family = float(np.dot(weights, lam[:, m] * lam[:, n]))
        delta = (1.0 if m == n else 0.0) + sign * 2.0 * math.pi * kloosterman_side(m, n, q, c_factor)
        rows.append(
            {
                "m": m,
                "n": n,
                "family": family,
                "scaled_family": alpha * family,
                "petersson": delta,
                "residual": abs(alpha * family - delta),
            }
        )
    report = PeterssonReport(level=q, c_factor=c_factor, sign=sign, alpha=alpha, mass_estimate=mass_estimate, rows=rows)
    logger.info(f"⚖️ Petersson check q={q}: alpha={alpha:.6f} sign={sign:+d} max residual {report.max_residual:.3e}")
    return report


"""
Random Euler product model
Sato-Tate trace sampling through a counter-based hash, the multiplicative
coefficients Y_n, Euler-product and smoothed-series evaluation, and
ensemble generation on evaluation grids.
"""
import asyncio
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.core.error_handler import InvalidArgumentError, SingularFactorError
from src.core.grid import Ensemble, EvalGrid, HoloSample
from src.core.numkernel import (
    PrimeTable,
    chebyshev_u,
    multiplicative_table,
    primes_up_to,
    smoothed_dirichlet_sum,
)
from src.utils.decorators import timing_decorator

logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_TWO53 = 2.0**-53


def _splitmix64(x: np.ndarray) -> np.ndarray:
    z = x + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _uniforms(seeds: np.ndarray, primes: np.ndarray, counter: np.ndarray) -> np.ndarray:
    """Uniforms in [0,1) keyed on (seed, prime, counter), broadcasting"""
    with np.errstate(over="ignore"):
        key = _splitmix64(seeds ^ _splitmix64(primes.astype(np.uint64)))
        z = _splitmix64(key + counter.astype(np.uint64) * _GOLDEN)
    return (z >> np.uint64(11)).astype(np.float64) * _TWO53


def derive_seed(seed: int, index: int) -> int:
    """Seed of sample ``index`` in an ensemble rooted at ``seed``"""
    with np.errstate(over="ignore"):
        mixed = _splitmix64(np.array([seed & MASK64], dtype=np.uint64) ^ _splitmix64(np.array([index], dtype=np.uint64)))
    return int(mixed[0])


def trace_matrix(seeds: Sequence[int], primes: np.ndarray, max_rounds: int = 256) -> np.ndarray:
    """
    Sato-Tate traces t = 2cos(theta) for every (seed, prime) pair.

    Rejection sampling: theta uniform on [0, pi] is accepted with probability
    sin(theta)^2. Each pair runs its own counter stream, so the value only
    depends on (seed, p).
    """
    seed_arr = np.asarray([int(s) & MASK64 for s in seeds], dtype=np.uint64)[:, None]
    prime_arr = np.asarray(primes, dtype=np.int64)[None, :]
    shape = (seed_arr.shape[0], prime_arr.shape[1])
    traces = np.full(shape, np.nan)
    pending = np.ones(shape, dtype=bool)
    seed_grid = np.broadcast_to(seed_arr, shape)
    prime_grid = np.broadcast_to(prime_arr, shape)

    for round_index in range(max_rounds):
        s, p = seed_grid[pending], prime_grid[pending]
        theta = np.pi * _uniforms(s, p, np.full(len(s), 2 * round_index))
        accept = _uniforms(s, p, np.full(len(s), 2 * round_index + 1)) < np.sin(theta) ** 2
        rows, cols = np.nonzero(pending)
        traces[rows[accept], cols[accept]] = 2.0 * np.cos(theta[accept])
        pending[rows[accept], cols[accept]] = False
        if not pending.any():
            return traces
    raise RuntimeError(f"rejection sampler did not finish in {max_rounds} rounds")


@dataclass(frozen=True, eq=False)
class SU2Sample:
    """Traces of the random matrices X_p for primes p <= bound"""

    seed: Optional[int]
    bound: int
    primes: np.ndarray
    traces: np.ndarray

    def trace(self, p: int) -> float:
        i = np.searchsorted(self.primes, p)
        if i >= len(self.primes) or self.primes[i] != p:
            raise InvalidArgumentError(f"{p} is not a prime <= {self.bound}")
        return float(self.traces[i])

    def traces_for(self, primes: np.ndarray) -> np.ndarray:
        return self.traces[np.searchsorted(self.primes, primes)]

    def as_dict(self) -> Dict[int, float]:
        return dict(zip(self.primes.tolist(), self.traces.tolist()))

    @classmethod
    def constant(cls, value: float, bound: int) -> "SU2Sample":
        """Every X_p with trace ``value`` (2 is the identity matrix)"""
        primes = primes_up_to(bound).primes
        return cls(seed=None, bound=bound, primes=primes, traces=np.full(len(primes), float(value)))


def sample_traces(seed: int, bound: int) -> SU2Sample:
    table = primes_up_to(bound)
    traces = trace_matrix([seed], table.primes)[0]
    return SU2Sample(seed=seed, bound=bound, primes=table.primes, traces=traces)


@dataclass(frozen=True, eq=False)
class MultCoefficients:
    """Y_n for 1 <= n <= nmax (index 0 unused)"""

    nmax: int
    values: np.ndarray
    source: Optional[SU2Sample] = None

    def __getitem__(self, n: int) -> float:
        return float(self.values[n])


def coefficient_rows(traces: np.ndarray, primes: np.ndarray, nmax: int, table: PrimeTable) -> np.ndarray:
    """Y_n rows for a batch of trace vectors indexed like ``primes``"""
    traces = np.atleast_2d(traces)
    position = np.zeros(table.bound + 1, dtype=np.int64)
    position[primes] = np.arange(len(primes))
    return multiplicative_table(
        lambda p, k: chebyshev_u(k, traces[:, position[p]]),
        nmax,
        table,
        rows=traces.shape[0],
    )


def coefficient_rows_for(seeds: Sequence[int], nmax: int, table: PrimeTable) -> np.ndarray:
    """Y_n rows for the samples rooted at ``seeds``"""
    primes = table.primes[table.primes <= nmax]
    return coefficient_rows(trace_matrix(seeds, primes), primes, nmax, table)


def build_coefficients(sample: SU2Sample, nmax: int, table: PrimeTable) -> MultCoefficients:
    if nmax > sample.bound or nmax > table.bound:
        raise InvalidArgumentError(
            f"nmax={nmax} exceeds sample bound {sample.bound} or table bound {table.bound}"
        )
    values = coefficient_rows(sample.traces, sample.primes, nmax, table)[0]
    return MultCoefficients(nmax=nmax, values=values, source=sample)


@dataclass
class EulerProductValue:
    value: complex
    tail_bound: Optional[float]
    formal: bool


def eval_euler_product(sample: SU2Sample, s: complex, pmax: int) -> EulerProductValue:
    """
    Truncated product over p <= pmax of (1 - t_p p^-s + p^-2s)^-1.

    A tail estimate is only given for Re s > 1; inside the strip the
    truncation is formal.
    """
    s = complex(s)
    if s.real <= 0.5:
        raise InvalidArgumentError(f"Euler product needs Re s > 1/2, got {s}")
    if pmax > sample.bound:
        raise InvalidArgumentError(f"pmax={pmax} exceeds sample bound {sample.bound}")

    primes = sample.primes[sample.primes <= pmax]
    t = sample.traces[: len(primes)]
    ps = np.exp(-s * np.log(primes.astype(float)))
    factors = 1.0 - t * ps + ps * ps
    if np.any(np.abs(factors) < 1e-300):
        bad = primes[np.abs(factors) < 1e-300][0]
        raise SingularFactorError(f"local factor at p={bad} vanishes at s={s}")
    value = complex(np.exp(-np.sum(np.log(factors))))
    if s.imag == 0:
        value = complex(value.real, 0.0)

    if s.real > 1.0:
        tail = 2.0 * pmax ** (1.0 - s.real) / (s.real - 1.0)
        return EulerProductValue(value=value, tail_bound=tail, formal=False)
    return EulerProductValue(value=value, tail_bound=None, formal=True)


def eval_smoothed_series(coeffs: MultCoefficients, s: complex, N: int) -> complex:
    if 2 * N > coeffs.nmax:
        raise InvalidArgumentError(f"smoothed series needs 2N={2 * N} <= nmax={coeffs.nmax}")
    if complex(s).real <= 0.5:
        raise InvalidArgumentError(f"smoothed series needs Re s > 1/2, got {s}")
    return complex(smoothed_dirichlet_sum(coeffs.values, [s], N)[0, 0])


def sample_values(seeds: Sequence[int], points: np.ndarray, N: int, table: Optional[PrimeTable] = None) -> np.ndarray:
    """L_D^(N) at ``points`` for each seed; shape (len(seeds), len(points))"""
    nmax = 2 * N
    table = table if table is not None and table.bound >= nmax else primes_up_to(nmax)
    return smoothed_dirichlet_sum(coefficient_rows_for(seeds, nmax, table), points, N)


def sample_on_grid(seed: int, grid: EvalGrid, N: int) -> HoloSample:
    values = sample_values([seed], grid.points, N)[0]
    values[grid.real_mask] = values[grid.real_mask].real
    return HoloSample(grid=grid, values=values, meta={"seed": seed, "N": N, "method": "model"})


@dataclass
class MomentEstimate:
    u: int
    mean: float
    stderr: float
    expected: float


def second_moment_stat(sigma: float, u_list: Sequence[int], M: int, seed: int, batch_size: int = 128) -> List[MomentEstimate]:
    """
    Monte Carlo E|sum_{n<=u} Y_n n^-sigma|^2 for each u.

    ``expected`` is the exact value sum_{n<=u} n^-2sigma (the Y_n are
    orthonormal under the Sato-Tate law).
    """
    if not 0.5 < sigma < 1.0:
        raise InvalidArgumentError(f"sigma must lie in (1/2, 1), got {sigma}")
    u_sorted = sorted(int(u) for u in u_list)
    umax = max(u_sorted)
    table = primes_up_to(max(umax, 2))
    primes = table.primes[table.primes <= umax]
    n = np.arange(umax + 1, dtype=float)
    n[0] = 1.0
    decay = n**-sigma
    decay[0] = 0.0

    squares = np.empty((M, len(u_sorted)))
    for start in range(0, M, batch_size):
        seeds = [derive_seed(seed, i) for i in range(start, min(start + batch_size, M))]
        rows = coefficient_rows(trace_matrix(seeds, primes), primes, umax, table)
        partial = np.cumsum(rows * decay, axis=1)
        squares[start : start + len(seeds)] = partial[:, u_sorted] ** 2

    expected = np.cumsum(decay**2)
    return [
        MomentEstimate(
            u=u,
            mean=float(squares[:, j].mean()),
            stderr=float(squares[:, j].std(ddof=1) / math.sqrt(M)) if M > 1 else float("nan"),
            expected=float(expected[u]),
        )
        for j, u in enumerate(u_sorted)
    ]


def sample_log_euler_product(sample: SU2Sample, s: complex, pmax: int) -> Tuple[complex, complex]:
    """
    Split -sum_p log det(1 - X_p p^-s) over p <= pmax into the prime sum
    sum t_p p^-s and the remaining correction.
    """
    s = complex(s)
    primes = sample.primes[sample.primes <= pmax]
    t = sample.traces[: len(primes)]
    ps = np.exp(-s * np.log(primes.astype(float)))
    prime_sum = complex(np.sum(t * ps))
    total = complex(-np.sum(np.log(1.0 - t * ps + ps * ps)))
    return prime_sum, total - prime_sum


def correction_tail_bound(sigma: float, pmin: int, explicit_bound: int = 1 << 20) -> float:
    """
    Bound for sum_{p > pmin} |log det(1 - x_p p^-s)^-1 - Tr(x_p) p^-s|,
    uniform in the matrices x_p, for Re s >= sigma.
    """
    if sigma <= 0.5:
        raise InvalidArgumentError(f"tail bound needs sigma > 1/2, got {sigma}")
    table = primes_up_to(max(explicit_bound, pmin + 2))
    primes = table.primes_in(pmin, explicit_bound).astype(float)
    u = primes**-sigma
    if np.any(2.0 * u >= 1.0):
        return float("inf")
    w = u * u / (1.0 - 2.0 * u)
    if np.any(w >= 1.0):
        return float("inf")
    explicit = float(-np.sum(np.log1p(-w)))
    u_end = explicit_bound**-sigma
    slack = 1.0 / ((1.0 - 2.0 * u_end) * (1.0 - u_end * u_end / (1.0 - 2.0 * u_end)))
    integral = slack * explicit_bound ** (1.0 - 2.0 * sigma) / (2.0 * sigma - 1.0)
    return explicit + integral


def expected_smoothed_mean(grid: EvalGrid, N: int) -> np.ndarray:
    """E L_D^(N)(s) = phi(1/N) = 1 at every point (E Y_n = 0 for n > 1)"""
    return np.ones(grid.n_points, dtype=complex)


@dataclass
class EnsembleGenerator:
    """Generates model ensembles in index-ordered batches on a thread pool"""

    threads: int = 4
    batch_size: int = 64
    _executor: Optional[ThreadPoolExecutor] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.threads < 1:
            raise InvalidArgumentError(f"threads must be >= 1, got {self.threads}")
        logger.info(f"🎲 EnsembleGenerator initialized with {self.threads} threads")

    async def _run_batch(self, semaphore: asyncio.Semaphore, seeds: List[int], points: np.ndarray, N: int, table: PrimeTable) -> np.ndarray:
        async with semaphore:
            loop = asyncio.get_running_loop()
            return await loop.run_in_executor(self._executor, sample_values, seeds, points, N, table)

    @timing_decorator
    async def generate(self, seed: int, grid: EvalGrid, N: int, M: int) -> Ensemble:
        if M < 1:
            raise InvalidArgumentError(f"ensemble size must be >= 1, got {M}")
        table = primes_up_to(2 * N)
        seeds = [derive_seed(seed, i) for i in range(M)]
        semaphore = asyncio.Semaphore(self.threads)
        self._executor = ThreadPoolExecutor(max_workers=self.threads)
        try:
            batches = [seeds[i : i + self.batch_size] for i in range(0, M, self.batch_size)]
            logger.info(f"🎲 generating {M} model samples (N={N}, {len(batches)} batches)")
            results = await asyncio.gather(
                *(self._run_batch(semaphore, batch, grid.points, N, table) for batch in batches)
            )
        finally:
            self._executor.shutdown(wait=True)
            self._executor = None

        values = np.concatenate(results, axis=0)
        values[:, grid.real_mask] = values[:, grid.real_mask].real
        return Ensemble(
            grid=grid,
            values=values,
            meta={"seed": seed, "N": N, "method": "model", "batch_size": self.batch_size},
        )

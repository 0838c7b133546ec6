"""
Arithmetic and special-function kernel
Prime tables, Chebyshev recurrences, the smoothing cutoff, multiplicative
tables, Kloosterman sums, Bessel J1 and the Gamma function shared by all
other engines.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid

from src.core.error_handler import InvalidArgumentError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, complex, Sequence, np.ndarray]


@dataclass(frozen=True, eq=False)
class PrimeTable:
    """Primes up to ``bound`` with a smallest-prime-factor table"""

    bound: int
    primes: np.ndarray
    spf: np.ndarray

    def __contains__(self, n: int) -> bool:
        return 2 <= n <= self.bound and self.spf[n] == n

    def primes_in(self, low: int, high: int) -> np.ndarray:
        """Primes p with low < p <= high"""
        lo = np.searchsorted(self.primes, low, side="right")
        hi = np.searchsorted(self.primes, high, side="right")
        return self.primes[lo:hi]


@lru_cache(maxsize=8)
def primes_up_to(bound: int) -> PrimeTable:
    if bound < 2:
        raise InvalidArgumentError(f"prime table bound must be >= 2, got {bound}")

    spf = np.zeros(bound + 1, dtype=np.int64)
    for p in range(2, math.isqrt(bound) + 1):
        if spf[p] == 0:
            block = spf[p * p :: p]
            block[block == 0] = p
    rest = np.nonzero(spf == 0)[0]
    rest = rest[rest >= 2]
    spf[rest] = rest
    spf[1] = 1

    primes = rest
    primes.setflags(write=False)
    spf.setflags(write=False)
    logger.debug(f"🔢 sieved {len(primes)} primes up to {bound}")
    return PrimeTable(bound=bound, primes=primes, spf=spf)


_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact below 3.3e24"""
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def factor(n: int, table: PrimeTable) -> List[Tuple[int, int]]:
    if n < 1 or n > table.bound:
        raise InvalidArgumentError(f"cannot factor {n} with a table of bound {table.bound}")
    result: List[Tuple[int, int]] = []
    while n > 1:
        p = int(table.spf[n])
        nu = 0
        while n % p == 0:
            n //= p
            nu += 1
        result.append((p, nu))
    return result


def _as_output(values: np.ndarray, like) -> Union[float, np.ndarray]:
    return values.item() if np.ndim(like) == 0 else values


def chebyshev_u(nu: int, t: ArrayLike):
    """U_nu(t) by the three-term recurrence"""
    if nu < 0:
        raise InvalidArgumentError(f"Chebyshev index must be >= 0, got {nu}")
    x = np.asarray(t, dtype=float)
    u_prev, u = np.zeros_like(x), np.ones_like(x)
    for _ in range(nu):
        u_prev, u = u, x * u - u_prev
    return _as_output(u, t)


def chebyshev_table(nu_max: int, t: ArrayLike) -> np.ndarray:
    """Rows U_0(t), ..., U_nu_max(t)"""
    x = np.atleast_1d(np.asarray(t, dtype=float))
    table = np.empty((nu_max + 1,) + x.shape)
    table[0] = 1.0
    if nu_max >= 1:
        table[1] = x
    for nu in range(2, nu_max + 1):
        table[nu] = x * table[nu - 1] - table[nu - 2]
    return table


def _bump(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t)
    positive = t > 0
    out[positive] = np.exp(-1.0 / t[positive])
    return out


def cutoff_eval(x: ArrayLike):
    """The fixed smooth cutoff: 1 on [0,1], 0 on [2,inf), smooth bridge between"""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise InvalidArgumentError("cutoff is defined for x >= 0 only")
    out = np.where(arr <= 1.0, 1.0, 0.0)
    bridge = (arr > 1.0) & (arr < 2.0)
    if np.any(bridge):
        xb = arr[bridge]
        left, right = _bump(2.0 - xb), _bump(xb - 1.0)
        out[bridge] = left / (left + right)
    return _as_output(out.reshape(np.shape(x)), x)


def multiplicative_table(
    prime_power_values: Callable[[np.ndarray, int], np.ndarray],
    nmax: int,
    table: PrimeTable,
    rows: int = 1,
) -> np.ndarray:
    """
    Values of ``rows`` multiplicative functions at n = 0..nmax.

    ``prime_power_values(primes, k)`` returns an array of shape
    (rows, len(primes)) with the values at p**k. Column 0 is zero and
    column 1 is one. Composites are filled level by level in the number
    of distinct prime factors, as f(n) = f(p**k) * f(n / p**k).
    """
    if nmax > table.bound:
        raise InvalidArgumentError(f"nmax={nmax} exceeds prime table bound {table.bound}")
    values = np.zeros((rows, nmax + 1))
    if nmax >= 1:
        values[:, 1] = 1.0
    if nmax < 2:
        return values

    primes = table.primes[table.primes <= nmax]
    power = primes.copy()
    k = 1
    while len(power):
        values[:, power] = np.asarray(prime_power_values(primes, k), dtype=float).reshape(rows, -1)
        k += 1
        keep = power <= nmax // primes
        primes, power = primes[keep], power[keep] * primes[keep]

    n = np.arange(2, nmax + 1)
    spf = table.spf[2 : nmax + 1]
    ppow = spf.copy()
    while True:
        grow = (n // ppow) % spf == 0
        if not np.any(grow):
            break
        ppow[grow] *= spf[grow]
    cofactor = n // ppow

    pending = cofactor > 1
    done = np.zeros(nmax + 1, dtype=bool)
    done[1] = True
    done[ppow[~pending]] = True
    while np.any(pending):
        ready = pending & done[cofactor]
        idx = n[ready]
        values[:, idx] = values[:, ppow[ready]] * values[:, cofactor[ready]]
        done[idx] = True
        pending &= ~ready
    return values


def divisor_counts(nmax: int, table: PrimeTable) -> np.ndarray:
    """d(n) for n = 0..nmax (d(0) = 0)"""
    return multiplicative_table(lambda p, k: np.full((1, len(p)), k + 1.0), nmax, table)[0]


@lru_cache(maxsize=4)
def _dirichlet_kernel(points: Tuple[complex, ...], N: int, shift: float) -> np.ndarray:
    n = np.arange(1, 2 * N, dtype=float)
    weights = cutoff_eval(n / N)
    s = np.asarray(points, dtype=complex) + shift
    kernel = weights[:, None] * np.exp(-np.outer(np.log(n), s))
    kernel.setflags(write=False)
    return kernel


def smoothed_dirichlet_sum(coeff_rows: np.ndarray, points: ArrayLike, N: int, shift: float = 0.0) -> np.ndarray:
    """
    Sum_n c_n phi(n/N) n^-(s+shift) for each coefficient row and point.

    ``coeff_rows`` is indexed by n (column 0 ignored) and must reach 2N.
    Returns an array of shape (rows, points).
    """
    rows = np.atleast_2d(np.asarray(coeff_rows, dtype=float))
    if N < 1:
        raise InvalidArgumentError(f"smoothing length must be >= 1, got {N}")
    if rows.shape[1] - 1 < 2 * N:
        raise InvalidArgumentError(f"need coefficients up to 2N={2 * N}, have {rows.shape[1] - 1}")
    key = tuple(complex(s) for s in np.atleast_1d(np.asarray(points, dtype=complex)))
    kernel = _dirichlet_kernel(key, int(N), float(shift))
    return rows[:, 1 : 2 * N] @ kernel


def _powmod(base: np.ndarray, exponent: int, modulus: int) -> np.ndarray:
    """Elementwise base**exponent % modulus for modulus below 3e9"""
    result = np.ones_like(base)
    b = base % modulus
    while exponent:
        if exponent & 1:
            result = result * b % modulus
        b = b * b % modulus
        exponent >>= 1
    return result


def kloosterman(m: int, n: int, c: int) -> float:
    """S(m,n;c) by direct enumeration over units mod c"""
    if c < 1:
        raise InvalidArgumentError(f"Kloosterman modulus must be >= 1, got {c}")
    if c == 1:
        return 1.0
    x = np.arange(1, c, dtype=np.int64)
    x = x[np.gcd(x, c) == 1]
    inverses = np.array([pow(int(v), -1, c) for v in x], dtype=np.int64)
    phase = (m * x + n * inverses) % c
    angle = 2.0 * np.pi * phase / c
    imag = float(np.sin(angle).sum())
    if abs(imag) > 1e-9 * max(len(x), 1):
        logger.warning(f"⚠️ Kloosterman S({m},{n};{c}) has imaginary part {imag:.3e}")
    return float(np.cos(angle).sum())


@lru_cache(maxsize=65536)
def _kloosterman_prime_power(a: int, b: int, p: int, k: int) -> float:
    modulus = p**k
    x = np.arange(1, modulus, dtype=np.int64)
    if k > 1:
        x = x[x % p != 0]
    inverses = _powmod(x, modulus // p * (p - 1) - 1, modulus)
    phase = (a * x + b * inverses) % modulus
    return float(np.cos(2.0 * np.pi * phase / modulus).sum())


def kloosterman_factored(m: int, n: int, c: int, table: PrimeTable) -> float:
    """S(m,n;c) through twisted multiplicativity over the prime powers of c"""
    if c < 1:
        raise InvalidArgumentError(f"Kloosterman modulus must be >= 1, got {c}")
    value = 1.0
    for p, k in factor(c, table):
        r = p**k
        s = c // r
        s_inv = pow(s, -1, r) if r > 1 else 0
        value *= _kloosterman_prime_power(m % r, (n * s_inv * s_inv) % r, p, k)
        if s > 1:
            n = (n * pow(r, -1, s) ** 2) % s
            m = m % s
        c = s
    return value


_J1_SWITCH = 12.0
_J1_SERIES_TERMS = 60
_J1_ASYMPTOTIC_TERMS = 26


def _j1_asymptotic_coefficients() -> np.ndarray:
    mu = 4.0
    coeffs = [1.0]
    for k in range(1, _J1_ASYMPTOTIC_TERMS):
        coeffs.append(coeffs[-1] * (mu - (2 * k - 1) ** 2) / (k * 8.0))
    return np.array(coeffs)


_J1_A = _j1_asymptotic_coefficients()


def bessel_j1(x: ArrayLike):
    """J_1 by power series below 12 and the Hankel asymptotic expansion above"""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise InvalidArgumentError("bessel_j1 is implemented for x >= 0")
    flat = np.atleast_1d(arr).ravel()
    out = np.empty_like(flat)

    small = flat <= _J1_SWITCH
    if np.any(small):
        half = flat[small] / 2.0
        term = half.copy()
        total = term.copy()
        sq = half * half
        for k in range(1, _J1_SERIES_TERMS):
            term = -term * sq / (k * (k + 1))
            total += term
        out[small] = total

    large = ~small
    if np.any(large):
        z = flat[large]
        p = np.zeros_like(z)
        q = np.zeros_like(z)
        inv = 1.0 / z
        for k, a in enumerate(_J1_A):
            term = a * inv**k
            sign = -1.0 if (k // 2) % 2 else 1.0
            if k % 2 == 0:
                p += sign * term
            else:
                q += sign * term
        chi = z - 0.75 * np.pi
        out[large] = np.sqrt(2.0 / (np.pi * z)) * (p * np.cos(chi) - q * np.sin(chi))

    return _as_output(out.reshape(np.shape(arr)), x)


_LANCZOS_G = 7.0
_LANCZOS_COEFFS = np.array(
    [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ]
)


def _lanczos(z: np.ndarray) -> np.ndarray:
    z = z - 1.0
    acc = np.full_like(z, _LANCZOS_COEFFS[0])
    for i in range(1, len(_LANCZOS_COEFFS)):
        acc = acc + _LANCZOS_COEFFS[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return np.sqrt(2.0 * np.pi) * t ** (z + 0.5) * np.exp(-t) * acc


def gamma(z: ArrayLike):
    """Complex Gamma function (Lanczos, g=7) with reflection for Re z < 1/2"""
    arr = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.empty_like(arr)
    left = arr.real < 0.5
    if np.any(left):
        w = arr[left]
        out[left] = np.pi / (np.sin(np.pi * w) * _lanczos(1.0 - w))
    if np.any(~left):
        out[~left] = _lanczos(arr[~left])
    out = out.reshape(np.shape(z))
    return complex(out) if np.ndim(z) == 0 else out


def sato_tate_cdf(t: ArrayLike):
    """CDF of the trace of a Haar-random SU(2) matrix"""
    x = np.clip(np.asarray(t, dtype=float), -2.0, 2.0)
    out = 0.5 + x * np.sqrt(4.0 - x * x) / (4.0 * np.pi) + np.arcsin(x / 2.0) / np.pi
    return _as_output(np.clip(out, 0.0, 1.0), t)


def sato_tate_moment(k: int) -> float:
    """E(t^k): zero for odd k, the Catalan number C_{k/2} for even k"""
    if k < 0:
        raise InvalidArgumentError(f"moment order must be >= 0, got {k}")
    if k % 2:
        return 0.0
    m = k // 2
    return float(math.comb(2 * m, m) // (m + 1))


@lru_cache(maxsize=64)
def _plancherel_table(p: int) -> Tuple[np.ndarray, np.ndarray]:
    theta = np.linspace(0.0, np.pi, 8193)
    t = 2.0 * np.cos(theta)
    density = (2.0 / np.pi) * np.sin(theta) ** 2 * (p + 1) / ((math.sqrt(p) + 1 / math.sqrt(p)) ** 2 - t * t)
    # theta runs from t=2 down to t=-2; accumulate from the t=-2 end
    mass = cumulative_trapezoid(density[::-1], theta, initial=0.0)
    mass /= mass[-1]
    return t[::-1], mass


def plancherel_cdf(t: ArrayLike, p: int):
    """CDF of the p-adic Plancherel law, the natural-weight limit of lambda_f(p)"""
    grid, mass = _plancherel_table(int(p))
    out = np.interp(np.clip(np.asarray(t, dtype=float), -2.0, 2.0), grid, mass)
    return _as_output(np.asarray(out), t)

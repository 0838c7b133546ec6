"""
Hecke eigenforms of weight 2 and prime level
Eigensystem extraction from modular symbols, coefficient extension,
Fricke signs, harmonic (Petersson) weights and the family snapshot.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.core.error_handler import (
    DegenerateEigenspaceError,
    EmptyFamilyError,
    IncompleteDataError,
    InconsistencyError,
    InvalidArgumentError,
    WeightFailureError,
)
from src.core.numkernel import PrimeTable, chebyshev_u, multiplicative_table, primes_up_to
from src.models.modular_symbols import (
    ModSymSpace,
    build_space,
    fricke_operator,
    genus_x0,
    hecke_operator,
)
from src.utils.decorators import timing_decorator

logger = logging.getLogger(__name__)

# root number = EPSILON_CONVENTION * (Fricke eigenvalue on modular symbols);
# checked against the functional equation by lfun.calibrate_epsilon_convention
EPSILON_CONVENTION = -1

MIXING_PRIMES = (2, 3, 5, 7, 11, 13)
MIXING_SEED = 20240601
MIXING_RETRIES = 5
EIGENVALUE_GAP = 1e-6
DELIGNE_SLACK = 1e-6
ZETA2 = math.pi**2 / 6.0


@dataclass(frozen=True, eq=False)
class Eigenform:
    """
    One newform f in S_2(q): a_n for n <= nmax (index 0 unused, a_1 = 1),
    the Fricke eigenvalue w_q, and its normalized harmonic weight.
    """

    level: int
    coeffs: np.ndarray
    fricke_sign: int
    weight: float = float("nan")
    id: int = 0

    @property
    def nmax(self) -> int:
        return len(self.coeffs) - 1

    @property
    def root_number(self) -> int:
        return EPSILON_CONVENTION * self.fricke_sign

    def a(self, n: int) -> float:
        if n > self.nmax:
            raise IncompleteDataError(f"a_{n} requested, form {self.id} has coefficients up to {self.nmax}")
        return float(self.coeffs[n])

    def normalized(self) -> np.ndarray:
        """lambda_f(n) = a_n / sqrt(n)"""
        n = np.arange(self.nmax + 1, dtype=float)
        n[0] = 1.0
        lam = self.coeffs / np.sqrt(n)
        lam[0] = 0.0
        return lam

    def prime_coefficients(self, table: PrimeTable) -> Dict[int, float]:
        primes = table.primes[table.primes <= self.nmax]
        return dict(zip(primes.tolist(), self.coeffs[primes].tolist()))

    def check(self, table: PrimeTable):
        """Deligne bound, a_1 = 1 and a_q^2 = 1"""
        if abs(self.coeffs[1] - 1.0) > 1e-12:
            raise InconsistencyError(f"form {self.id}: a_1 = {self.coeffs[1]}")
        primes = table.primes[table.primes <= self.nmax]
        primes = primes[primes != self.level]
        excess = np.abs(self.coeffs[primes]) - 2.0 * np.sqrt(primes) - DELIGNE_SLACK
        if np.any(excess > 0):
            p = int(primes[np.argmax(excess)])
            raise InconsistencyError(f"form {self.id}: |a_{p}| = {abs(self.coeffs[p])} violates the Deligne bound")
        if self.level <= self.nmax and abs(self.coeffs[self.level] ** 2 - 1.0) > 1e-6:
            raise InconsistencyError(f"form {self.id}: a_q^2 = {self.coeffs[self.level] ** 2}")


def _prime_power_table(level: int, ap: Dict[int, float], epsilon: int) -> Callable[[np.ndarray, int], np.ndarray]:
    """a_{p^k} = p^{k/2} U_k(a_p / sqrt p) for p != q and a_{q^k} = epsilon^k"""

    def values(primes: np.ndarray, k: int) -> np.ndarray:
        out = np.empty(len(primes))
        for i, p in enumerate(primes.tolist()):
            if p == level:
                out[i] = float(epsilon) ** k
            else:
                if p not in ap:
                    raise IncompleteDataError(f"a_{p} is missing at level {level}")
                out[i] = p ** (k / 2.0) * chebyshev_u(k, ap[p] / math.sqrt(p))
        return out[None, :]

    return values


def _coefficients_from_primes(level: int, ap: Dict[int, float], epsilon: int, nmax: int) -> np.ndarray:
    return multiplicative_table(_prime_power_table(level, ap, epsilon), nmax, primes_up_to(max(nmax, 2)))[0]


def extend_coefficients(form: Eigenform, nmax: int) -> Eigenform:
    """Rebuild a_n for n <= nmax from the prime coefficients of ``form``"""
    table = primes_up_to(max(nmax, 2))
    missing = table.primes[(table.primes <= nmax) & (table.primes > form.nmax)]
    if len(missing):
        raise IncompleteDataError(
            f"form {form.id} knows a_p up to {form.nmax}; a_{int(missing[0])} is needed for nmax={nmax}"
        )
    ap = form.prime_coefficients(table)
    epsilon = int(round(ap.pop(form.level, form.root_number)))
    coeffs = _coefficients_from_primes(form.level, ap, epsilon, nmax)
    return replace(form, coeffs=coeffs)


def with_epsilon_convention(form: Eigenform, convention: int) -> Eigenform:
    """The same eigensystem with a_q = convention * w_q"""
    if convention not in (-1, 1):
        raise InvalidArgumentError(f"sign convention must be +1 or -1, got {convention}")
    table = primes_up_to(max(form.nmax, 2))
    ap = form.prime_coefficients(table)
    ap.pop(form.level, None)
    coeffs = _coefficients_from_primes(form.level, ap, convention * form.fricke_sign, form.nmax)
    return replace(form, coeffs=coeffs)


@dataclass
class EigenFunctionals:
    """Hecke eigen-functionals on raw Manin symbols, one row per form"""

    space: ModSymSpace
    functionals: np.ndarray
    anchor: int
    mixing_coefficients: np.ndarray

    @property
    def anchor_values(self) -> np.ndarray:
        return self.functionals[:, self.anchor]

    def eigenvalues(self, primes: Sequence[int]) -> Dict[int, np.ndarray]:
        """a_p for every form, through T_p applied to one anchor symbol"""
        primes = np.asarray([p for p in primes if p != self.space.level], dtype=np.int64)
        result: Dict[int, np.ndarray] = {}
        for chunk, raw in self.space.hecke_images(self.anchor, primes):
            values = (raw @ self.functionals.T) / self.anchor_values
            for p, row in zip(chunk.tolist(), values):
                result[p] = row
        return result

    def fricke_signs(self) -> np.ndarray:
        raw = self.space.raw_fricke()
        images = self.functionals @ raw
        signs = images[:, self.anchor] / self.anchor_values
        residual = np.abs(images - signs[:, None] * self.functionals).max(axis=1)
        scale = np.abs(self.functionals).max(axis=1)
        if np.any(np.abs(np.abs(signs) - 1.0) > 1e-6) or np.any(residual > 1e-6 * scale):
            raise InconsistencyError(f"eigenvectors are not Fricke eigenvectors (signs {signs})")
        return np.rint(signs).astype(int)


def _left_eigenvectors(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    eigenvalues, vectors = np.linalg.eig(matrix.T)
    vectors = vectors.T
    pivots = np.argmax(np.abs(vectors), axis=1)
    vectors = vectors / vectors[np.arange(len(vectors)), pivots][:, None]
    return eigenvalues.real, vectors.real


def min_eigenvalue_gap(eigenvalues: np.ndarray) -> float:
    """Smallest distance between two eigenvalues at different positions; inf for fewer than two"""
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    if len(eigenvalues) < 2:
        return float("inf")
    gaps = np.abs(eigenvalues[:, None] - eigenvalues[None, :])
    np.fill_diagonal(gaps, np.inf)
    return float(gaps.min())


def eigen_functionals(space: ModSymSpace, seed: int = MIXING_SEED) -> EigenFunctionals:
    """
    Diagonalize a random combination of T_p on the plus space, drop the
    Eisenstein line (a_2 = 3) and lift the cuspidal eigenvectors to raw
    functionals.
    """
    primes = [p for p in MIXING_PRIMES if p != space.level]
    plus = space.plus_basis
    operators = [space.restrict(space.hecke_full(p), plus) for p in primes]
    two = operators[0] if primes[0] == 2 else space.restrict(space.hecke_full(2), plus)

    for attempt in range(MIXING_RETRIES + 1):
        coefficients = np.random.default_rng(seed + attempt).standard_normal(len(primes))
        mixed = sum(c * op for c, op in zip(coefficients, operators))
        eigenvalues, vectors = _left_eigenvectors(mixed)
        gap = min_eigenvalue_gap(eigenvalues)
        if gap >= EIGENVALUE_GAP:
            break
        logger.warning(f"⚠️ level {space.level}: eigenvalue gap {gap:.2e}, remixing (attempt {attempt + 1})")
    else:
        raise DegenerateEigenspaceError(
            f"level {space.level}: eigenvalues still clustered after {MIXING_RETRIES} remixes"
        )

    a2 = np.einsum("ij,jk,ik->i", vectors, two, vectors) / np.einsum("ij,ij->i", vectors, vectors)
    cusp = np.abs(a2 - 3.0) > 1e-6
    if cusp.sum() != space.genus:
        raise InconsistencyError(f"level {space.level}: found {cusp.sum()} cusp forms, expected {space.genus}")

    functionals = space.plus_functionals(vectors[cusp])
    anchor = int(np.argmax(np.abs(functionals).min(axis=0)))
    return EigenFunctionals(space=space, functionals=functionals, anchor=anchor, mixing_coefficients=coefficients)


@timing_decorator
def decompose(space: ModSymSpace, nmax: int, seed: int = MIXING_SEED) -> List[Eigenform]:
    """The newforms of level q with coefficients up to nmax, sorted by (a_2, a_3, ...)"""
    if nmax < 2:
        raise InvalidArgumentError(f"nmax must be >= 2, got {nmax}")
    q = space.level
    if space.genus == 0:
        raise EmptyFamilyError(f"S_2({q}) is empty")

    basis = eigen_functionals(space, seed)
    table = primes_up_to(nmax)
    primes = table.primes[table.primes <= nmax]
    logger.info(f"🧮 level {q}: computing a_p for {len(primes)} primes up to {nmax}")
    eigenvalues = basis.eigenvalues(primes)
    signs = basis.fricke_signs()

    forms = []
    for i in range(space.genus):
        ap = {p: float(values[i]) for p, values in eigenvalues.items()}
        epsilon = EPSILON_CONVENTION * int(signs[i])
        coeffs = _coefficients_from_primes(q, ap, epsilon, nmax)
        forms.append(Eigenform(level=q, coeffs=coeffs, fricke_sign=int(signs[i])))

    key_primes = [p for p in table.primes[:12].tolist() if p <= nmax]
    forms.sort(key=lambda f: tuple(round(f.coeffs[p], 8) for p in key_primes))
    forms = [replace(f, id=i) for i, f in enumerate(forms)]
    for form in forms:
        form.check(table)
    return forms


def atkin_lehner_matrix(space: ModSymSpace) -> np.ndarray:
    """Fricke involution W_q on the cuspidal subspace"""
    return fricke_operator(space)


def atkin_lehner_sign(space: ModSymSpace, form: Eigenform) -> int:
    """
    Fricke eigenvalue w_q of ``form``, read off from the cuspidal Fricke
    matrix on the joint eigenvector of T_2 and T_3 matching the form.
    """
    if form.level != space.level:
        raise InvalidArgumentError(f"form of level {form.level} does not live on level {space.level}")
    primes = [p for p in (2, 3, 5, 7) if p != space.level][:2]
    target = sum((k + 1) * form.a(p) for k, p in enumerate(primes))
    operator = sum((k + 1) * hecke_operator(space, p) for k, p in enumerate(primes))
    fricke = atkin_lehner_matrix(space)
    eigenvalues, vectors = np.linalg.eig(operator)
    matched = np.abs(eigenvalues - target) < 1e-6
    if not np.any(matched):
        raise InconsistencyError(f"no eigenvector of level {space.level} matches form {form.id}")
    subspace = vectors[:, matched].real
    subspace, _ = np.linalg.qr(subspace)
    local = subspace.T @ fricke @ subspace
    residual = np.abs(fricke @ subspace - subspace @ local).max()
    signs = np.linalg.eigvals(local).real
    if residual > 1e-6 or np.any(np.abs(np.abs(signs) - 1.0) > 1e-6) or np.ptp(signs) > 1e-6:
        raise InconsistencyError(f"form {form.id}: eigenspace is not a Fricke eigenspace (signs {signs})")
    return int(np.rint(signs[0]))


def harmonic_horizon(q: int, factor: float = 30.0) -> float:
    """Default smoothing horizon X = factor * sqrt(q) * log q"""
    return factor * math.sqrt(q) * math.log(q)


def symmetric_square_proxy(form: Eigenform, X: float) -> float:
    """zeta(2) sum_{n <= 10X} lambda_f(n^2) e^{-n/X} / n"""
    limit = int(10 * X)
    if form.nmax < limit:
        raise IncompleteDataError(f"form {form.id}: weights need a_p up to {limit}, have {form.nmax}")
    table = primes_up_to(max(limit, 2))
    lam = form.normalized()
    q = form.level

    def square_values(primes: np.ndarray, k: int) -> np.ndarray:
        out = np.empty(len(primes))
        for i, p in enumerate(primes.tolist()):
            out[i] = float(q) ** -k if p == q else chebyshev_u(2 * k, lam[p])
        return out[None, :]

    squares = multiplicative_table(square_values, limit, table)[0]
    n = np.arange(1, limit + 1, dtype=float)
    return float(ZETA2 * np.sum(squares[1:] * np.exp(-n / X) / n))


@dataclass(frozen=True, eq=False)
class FamilySnapshot:
    """The newforms of one level with normalized harmonic weights"""

    level: int
    forms: Tuple[Eigenform, ...]
    nmax: int
    provenance: str = "computed"
    raw_weights: Optional[np.ndarray] = None
    horizon: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "forms", tuple(self.forms))
        if not self.forms:
            raise EmptyFamilyError(f"level {self.level} family is empty")
        weights = self.weights
        if np.any(~(weights > 0)) or abs(weights.sum() - 1.0) > 1e-12:
            raise WeightFailureError(f"level {self.level}: weights {weights} are not a probability vector")

    @property
    def genus(self) -> int:
        return len(self.forms)

    @property
    def weights(self) -> np.ndarray:
        return np.array([f.weight for f in self.forms])

    @property
    def fricke_signs(self) -> List[int]:
        return [f.fricke_sign for f in self.forms]

    def coefficient_matrix(self, nmax: Optional[int] = None) -> np.ndarray:
        nmax = self.nmax if nmax is None else nmax
        if nmax > self.nmax:
            raise IncompleteDataError(f"level {self.level}: coefficients known up to {self.nmax}, {nmax} requested")
        return np.vstack([f.coeffs[: nmax + 1] for f in self.forms])

    def normalized_matrix(self, nmax: Optional[int] = None) -> np.ndarray:
        nmax = self.nmax if nmax is None else nmax
        if nmax > self.nmax:
            raise IncompleteDataError(f"level {self.level}: coefficients known up to {self.nmax}, {nmax} requested")
        return np.vstack([f.normalized()[: nmax + 1] for f in self.forms])

    def weights_for(self, weighting: str = "harmonic") -> np.ndarray:
        if weighting == "harmonic":
            return self.weights
        if weighting == "natural":
            return np.full(self.genus, 1.0 / self.genus)
        raise InvalidArgumentError(f"unknown weighting {weighting!r}")

    def expectation(self, h: Callable[[Eigenform], float], weighting: str = "harmonic") -> float:
        """E_q(h) = sum_f weight_f h(f)"""
        return float(np.dot(self.weights_for(weighting), [h(f) for f in self.forms]))

    def truncated(self, nmax: int) -> "FamilySnapshot":
        if nmax > self.nmax:
            raise IncompleteDataError(f"level {self.level}: cannot extend {self.nmax} to {nmax} by truncation")
        forms = [replace(f, coeffs=f.coeffs[: nmax + 1].copy()) for f in self.forms]
        return replace(self, forms=tuple(forms), nmax=nmax)


def harmonic_weights(forms: Sequence[Eigenform], X: Optional[float] = None) -> FamilySnapshot:
    """Weights proportional to 1 / L(sym^2 f, 1), through the smoothed proxy"""
    if not forms:
        raise EmptyFamilyError("no forms to weight")
    q = forms[0].level
    X = harmonic_horizon(q) if X is None else X
    proxies = np.array([symmetric_square_proxy(f, X) for f in forms])
    if np.any(~(proxies > 0)):
        raise WeightFailureError(f"level {q}: symmetric square proxy not positive: {proxies}")
    raw = 1.0 / proxies
    weights = raw / raw.sum()
    weighted = [replace(f, weight=float(w)) for f, w in zip(forms, weights)]
    return FamilySnapshot(
        level=q,
        forms=tuple(weighted),
        nmax=min(f.nmax for f in forms),
        raw_weights=raw,
        horizon=X,
    )


def normalized_petersson_ratio(snapshot: FamilySnapshot) -> np.ndarray:
    """Uniform weight over harmonic weight, 1 / (g * weight_f), per form"""
    return 1.0 / (snapshot.genus * snapshot.weights)


@timing_decorator
def compute_family(q: int, nmax: int, X: Optional[float] = None, seed: int = MIXING_SEED) -> FamilySnapshot:
    """Modular symbols, eigenforms, harmonic weights, truncated to nmax"""
    X = harmonic_horizon(q) if X is None else X
    space = build_space(q)
    horizon = max(nmax, int(10 * X))
    forms = decompose(space, horizon, seed)
    snapshot = harmonic_weights(forms, X)
    if genus_x0(q) != snapshot.genus:
        raise InconsistencyError(f"level {q}: {snapshot.genus} forms, genus is {genus_x0(q)}")
    logger.info(f"✅ level {q}: {snapshot.genus} forms, weights {np.round(snapshot.weights, 6).tolist()}")
    return snapshot.truncated(nmax)

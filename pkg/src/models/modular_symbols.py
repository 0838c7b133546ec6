"""
Weight-2 modular symbols for Gamma_0(q), q prime
Manin symbols over P^1(Z/q), the quotient by the 2- and 3-term relations,
Hecke and Fricke operators, the star involution and the boundary map.
All linear algebra is floating point; exactness is left to the tests.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, Tuple

import numpy as np
from scipy.linalg import null_space

from src.core.error_handler import (
    EmptyFamilyError,
    InconsistencyError,
    InvalidArgumentError,
    WrongOperatorError,
)
from src.core.numkernel import is_prime
from src.utils.decorators import timing_decorator

logger = logging.getLogger(__name__)

MIN_LEVEL = 11
NULL_RCOND = 1e-9
CHUNK_FRACTIONS = 1 << 21


def genus_x0(q: int) -> int:
    """Genus of X_0(q) for prime q, i.e. dim S_2(Gamma_0(q))"""
    if not is_prime(q):
        raise InvalidArgumentError(f"level must be prime, got {q}")
    # 12g = q + 1 - 3 nu2 - 4 nu3 with two cusps
    nu2 = 1 if q == 2 else (2 if q % 4 == 1 else 0)
    nu3 = 1 if q == 3 else (2 if q % 3 == 1 else 0)
    return (q + 1 - 3 * nu2 - 4 * nu3) // 12


@dataclass(eq=False)
class ModSymSpace:
    """
    Manin symbols (c:d) in P^1(Z/q): index i < q is (1:i), index q is (0:1).

    ``relation_basis`` (Q) is an orthonormal basis of the complement of the
    relation span in the raw space; classes are represented by Q^T v.
    """

    level: int
    inverses: np.ndarray
    relation_basis: np.ndarray
    star: np.ndarray
    cuspidal_basis: np.ndarray
    plus_basis: np.ndarray
    genus: int
    _hecke_cache: Dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def n_symbols(self) -> int:
        return self.level + 1

    @property
    def dimension(self) -> int:
        return self.relation_basis.shape[1]

    @property
    def manin_basis(self) -> np.ndarray:
        """(c, d) representatives of all Manin symbols"""
        q = self.level
        reps = np.empty((q + 1, 2), dtype=np.int64)
        reps[:q, 0] = 1
        reps[:q, 1] = np.arange(q)
        reps[q] = (0, 1)
        return reps

    @property
    def projection(self) -> np.ndarray:
        """Raw symbol vector -> coordinates of its class"""
        return self.relation_basis.T

    def symbol_index(self, c: np.ndarray, d: np.ndarray) -> np.ndarray:
        q = self.level
        c = np.asarray(c, dtype=np.int64) % q
        d = np.asarray(d, dtype=np.int64) % q
        return np.where(c == 0, q, (d * self.inverses[c]) % q)

    def lifts(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """
        For each symbol g{0, oo} with g in SL_2(Z), the cusps alpha = g(0)
        and beta = g(oo) as numerator/denominator arrays.
        """
        q = self.level
        a_num = np.full(q + 1, -1, dtype=np.int64)
        a_den = np.arange(q + 1, dtype=np.int64)
        b_num = np.zeros(q + 1, dtype=np.int64)
        b_den = np.ones(q + 1, dtype=np.int64)
        # (0:1) is the identity: alpha = 0, beta = oo
        a_num[q], a_den[q] = 0, 1
        b_num[q], b_den[q] = 1, 0
        return a_num, a_den, b_num, b_den

    def expand(self, num: np.ndarray, den: np.ndarray, weight: np.ndarray, group: np.ndarray, n_groups: int) -> np.ndarray:
        """
        Sum of weight * {0, num/den} as raw Manin symbol vectors, one row per
        group, through the continued fraction expansion of num/den.
        """
        q = self.level
        num = np.asarray(num, dtype=np.int64).copy()
        den = np.asarray(den, dtype=np.int64).copy()
        flip = den < 0
        num[flip], den[flip] = -num[flip], -den[flip]
        weight = np.asarray(weight, dtype=float)
        group = np.asarray(group, dtype=np.int64)
        size = n_groups * (q + 1)

        # k = -1 term: (0:1) for every fraction
        out = np.bincount(group * (q + 1) + q, weights=weight, minlength=size)

        live = den != 0
        num, den, weight, group = num[live], den[live], weight[live], group[live]
        q_prev2 = np.ones(len(num), dtype=np.int64)
        q_prev1 = np.zeros(len(num), dtype=np.int64)
        sign = -1
        while len(num):
            quotient = num // den
            remainder = num - quotient * den
            q_k = (quotient % q * q_prev1 + q_prev2) % q
            symbols = self.symbol_index(sign * q_k, q_prev1)
            out += np.bincount(group * (q + 1) + symbols, weights=weight, minlength=size)

            keep = remainder != 0
            num, den = den[keep], remainder[keep]
            q_prev2, q_prev1 = q_prev1[keep], q_k[keep]
            weight, group = weight[keep], group[keep]
            sign = -sign
        return out.reshape(n_groups, q + 1)

    def _apply_matrices(self, matrices, columns: np.ndarray, group_of_column: np.ndarray, n_groups: int) -> np.ndarray:
        """
        sum over ``matrices`` of delta{alpha_j, beta_j} for the lifts of the
        given columns; each matrix is a function (num, den) -> (num, den).
        """
        a_num, a_den, b_num, b_den = (x[columns] for x in self.lifts())
        nums, dens, weights, groups = [], [], [], []
        for delta in matrices:
            bn, bd = delta(b_num, b_den)
            an, ad = delta(a_num, a_den)
            nums += [bn, an]
            dens += [bd, ad]
            weights += [np.ones(len(columns)), -np.ones(len(columns))]
            groups += [group_of_column, group_of_column]
        return self.expand(
            np.concatenate(nums), np.concatenate(dens), np.concatenate(weights), np.concatenate(groups), n_groups
        )

    @staticmethod
    def _hecke_matrices(p: int):
        matrices = [lambda n, d, r=r: (n + r * d, p * d) for r in range(p)]
        matrices.append(lambda n, d: (p * n, d))
        return matrices

    def raw_hecke(self, p: int) -> np.ndarray:
        """(q+1) x (q+1) raw matrix; column j is T_p applied to symbol j"""
        columns = np.arange(self.n_symbols)
        return self._apply_matrices(self._hecke_matrices(p), columns, columns, self.n_symbols).T

    def raw_fricke(self) -> np.ndarray:
        q = self.level
        columns = np.arange(self.n_symbols)
        # W(x) = -1/(q x)
        return self._apply_matrices([lambda n, d: (-d, q * n)], columns, columns, self.n_symbols).T

    def hecke_images(self, anchor: int, primes: np.ndarray) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        """
        Raw vectors T_p e_anchor for many primes, yielded in chunks as
        (primes_chunk, matrix of shape (len(chunk), q+1)).
        """
        primes = np.asarray(primes, dtype=np.int64)
        a_num, a_den, b_num, b_den = (int(x[anchor]) for x in self.lifts())
        start = 0
        while start < len(primes):
            stop = start + 1
            width = 2 * (int(primes[start]) + 1)
            while stop < len(primes) and width + 2 * (int(primes[stop]) + 1) <= CHUNK_FRACTIONS:
                width += 2 * (int(primes[stop]) + 1)
                stop += 1
            chunk = primes[start:stop]

            sizes = chunk + 1
            group = np.repeat(np.arange(len(chunk)), sizes)
            p_rep = np.repeat(chunk, sizes)
            offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
            r = np.arange(int(sizes.sum())) - np.repeat(offsets, sizes)
            is_inf = r == p_rep  # the last slot per prime holds [[p,0],[0,1]]

            bn = np.where(is_inf, p_rep * b_num, b_num + r * b_den)
            bd = np.where(is_inf, b_den, p_rep * b_den)
            an = np.where(is_inf, p_rep * a_num, a_num + r * a_den)
            ad = np.where(is_inf, a_den, p_rep * a_den)
            ones = np.ones(len(r))
            raw = self.expand(
                np.concatenate([bn, an]),
                np.concatenate([bd, ad]),
                np.concatenate([ones, -ones]),
                np.concatenate([group, group]),
                len(chunk),
            )
            yield chunk, raw
            start = stop

    def hecke_full(self, p: int) -> np.ndarray:
        """T_p on the whole quotient space (Eisenstein part included)"""
        if p % self.level == 0:
            raise WrongOperatorError(f"T_{p} at level {self.level}: use the Atkin-Lehner operator")
        if p not in self._hecke_cache:
            Q = self.relation_basis
            self._hecke_cache[p] = Q.T @ self.raw_hecke(p) @ Q
        return self._hecke_cache[p]

    def fricke_full(self) -> np.ndarray:
        Q = self.relation_basis
        return Q.T @ self.raw_fricke() @ Q

    def restrict(self, operator: np.ndarray, basis: np.ndarray) -> np.ndarray:
        return basis.T @ operator @ basis

    def plus_functionals(self, row_vectors: np.ndarray) -> np.ndarray:
        """Lift functionals on the plus space to functionals on raw symbols"""
        plus_projector = 0.5 * (np.eye(self.dimension) + self.star)
        return row_vectors @ self.plus_basis.T @ plus_projector @ self.projection


def _relations(q: int, inverses: np.ndarray) -> np.ndarray:
    index = np.arange(q + 1)
    c = np.where(index < q, 1, 0)
    d = np.where(index < q, index, 1)

    def to_index(cc, dd):
        cc, dd = cc % q, dd % q
        return np.where(cc == 0, q, (dd * inverses[cc]) % q)

    s_image = to_index(d, -c)
    t_image = to_index(d, -c - d)
    t2_image = to_index(-c - d, c)

    two_term = np.zeros((q + 1, q + 1))
    np.add.at(two_term, (index, index), 1.0)
    np.add.at(two_term, (index, s_image), 1.0)
    three_term = np.zeros((q + 1, q + 1))
    np.add.at(three_term, (index, index), 1.0)
    np.add.at(three_term, (index, t_image), 1.0)
    np.add.at(three_term, (index, t2_image), 1.0)
    return np.vstack([two_term, three_term])


@timing_decorator
def build_space(q: int) -> ModSymSpace:
    if not is_prime(q):
        raise InvalidArgumentError(f"level must be prime, got {q}")
    if q < MIN_LEVEL:
        raise EmptyFamilyError(f"S_2({q}) has no newforms; levels start at {MIN_LEVEL}")

    inverses = np.zeros(q, dtype=np.int64)
    units = np.arange(1, q, dtype=np.int64)
    inverses[1:] = [pow(int(u), -1, q) for u in units]

    Q = null_space(_relations(q, inverses), rcond=NULL_RCOND)

    index = np.arange(q + 1)
    star_image = np.where(index < q, (-index) % q, q)
    star_raw = np.zeros((q + 1, q + 1))
    star_raw[star_image, index] = 1.0
    star = Q.T @ star_raw @ Q

    boundary_raw = np.zeros((2, q + 1))
    # delta(c:d) = [cusp of c] - [cusp of d]; row 0 is the cusp 0, row 1 is oo
    boundary_raw[0, 0], boundary_raw[1, 0] = 1.0, -1.0
    boundary_raw[1, q], boundary_raw[0, q] = 1.0, -1.0
    cuspidal = null_space(boundary_raw @ Q, rcond=NULL_RCOND)

    eigenvalues, eigenvectors = np.linalg.eigh(0.5 * (star + star.T))
    plus = eigenvectors[:, eigenvalues > 0]

    g = genus_x0(q)
    space = ModSymSpace(
        level=q,
        inverses=inverses,
        relation_basis=Q,
        star=star,
        cuspidal_basis=cuspidal,
        plus_basis=plus,
        genus=g,
    )
    if cuspidal.shape[1] != 2 * g or plus.shape[1] != g + 1:
        raise InconsistencyError(
            f"level {q}: cuspidal dimension {cuspidal.shape[1]} and plus dimension "
            f"{plus.shape[1]} do not match genus {g}"
        )
    logger.info(f"📐 modular symbols for level {q}: dim {Q.shape[1]}, genus {g}")
    return space


def hecke_operator(space: ModSymSpace, p: int) -> np.ndarray:
    """T_p restricted to the cuspidal subspace"""
    if not is_prime(p):
        raise InvalidArgumentError(f"Hecke operators are indexed by primes, got {p}")
    if p == space.level:
        raise WrongOperatorError(f"T_{p} at level {p}: use atkin_lehner_sign / the Fricke involution")
    return space.restrict(space.hecke_full(p), space.cuspidal_basis)


def fricke_operator(space: ModSymSpace) -> np.ndarray:
    """The Fricke involution restricted to the cuspidal subspace"""
    return space.restrict(space.fricke_full(), space.cuspidal_basis)


def star_operator(space: ModSymSpace) -> np.ndarray:
    return space.restrict(space.star, space.cuspidal_basis)

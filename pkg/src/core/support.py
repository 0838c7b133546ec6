"""
Constructive support approximation
Greedy choice of SU(2) conjugacy classes (angles theta_p) so that the
prime sum sum_p 2 cos(theta_p) p^-s approximates log(phi) on a disc.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from src.core.error_handler import InvalidArgumentError
from src.core.grid import EvalGrid
from src.core.numkernel import primes_up_to
from src.core.randmodel import correction_tail_bound
from src.models.targets import TargetFunction

logger = logging.getLogger(__name__)

THETA_POINTS = 64
REFINEMENTS = 2


@dataclass
class SupportApproxTrace:
    """Chosen angles, residual history and tail data of one greedy run"""

    grid: EvalGrid
    target: TargetFunction
    n0: int
    pmax: int
    primes: np.ndarray
    thetas: np.ndarray
    residuals: List[float]
    initial_residual: float
    tail_bound: float
    euler_residual: float = float("nan")
    sweeps: int = 0
    meta: Dict = field(default_factory=dict)

    @property
    def final_residual(self) -> float:
        return self.residuals[-1] if self.residuals else self.initial_residual

    def log_approximant(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=complex))
        powers = np.exp(-np.outer(np.log(self.primes.astype(float)), s))
        return (2.0 * np.cos(self.thetas))[None, :] @ powers

    def approximant(self, s) -> np.ndarray:
        """exp of the prime sum, positive on the real axis"""
        return np.exp(self.log_approximant(s))[0]

    def euler_approximant(self, s) -> np.ndarray:
        """prod_{p <= pmax} (1 - 2 cos(theta_p) p^-s + p^-2s)^-1"""
        s = np.atleast_1d(np.asarray(s, dtype=complex))
        powers = np.exp(-np.outer(np.log(self.primes.astype(float)), s))
        traces = 2.0 * np.cos(self.thetas)[:, None]
        return np.exp(-np.sum(np.log(1.0 - traces * powers + powers * powers), axis=0))

    def to_dict(self) -> Dict:
        return {
            "target": self.target.to_dict(),
            "grid": self.grid.to_dict(),
            "n0": self.n0,
            "pmax": self.pmax,
            "sweeps": self.sweeps,
            "primes": self.primes.tolist(),
            "thetas": self.thetas.tolist(),
            "initial_residual": self.initial_residual,
            "residuals": self.residuals,
            "final_residual": self.final_residual,
            "tail_bound": self.tail_bound,
            "euler_residual": self.euler_residual,
        }


def _best_angle(residual: np.ndarray, direction: np.ndarray, current: float) -> float:
    """theta in [0, pi] minimizing sup |residual - cos(theta) direction|, never worse than ``current``"""

    def sup(thetas: np.ndarray) -> np.ndarray:
        return np.abs(residual[None, :] - np.cos(thetas)[:, None] * direction[None, :]).max(axis=1)

    candidates = np.append(np.linspace(0.0, np.pi, THETA_POINTS), [np.pi / 2, current])
    errors = sup(candidates)
    best = int(np.argmin(errors))
    theta, error = candidates[best], errors[best]
    step = np.pi / (THETA_POINTS - 1)
    for _ in range(REFINEMENTS):
        local = np.clip(np.linspace(theta - step, theta + step, THETA_POINTS), 0.0, np.pi)
        local_errors = sup(local)
        k = int(np.argmin(local_errors))
        if local_errors[k] < error:
            theta, error = local[k], local_errors[k]
        step = 2.0 * step / (THETA_POINTS - 1)
    return float(theta)


def greedy_support_approx(target: TargetFunction, grid: EvalGrid, pmax: int, n0: int, sweeps: int = 0) -> SupportApproxTrace:
    """
    theta_p = 0 for p <= n0, then one greedy pass over n0 < p <= pmax in
    increasing order, then ``sweeps`` coordinate-descent passes. Each step
    keeps the boundary sup-norm residual from growing.
    """
    if pmax < max(n0, 2):
        raise InvalidArgumentError(f"pmax={pmax} must be >= n0={n0} and >= 2")
    if sweeps < 0:
        raise InvalidArgumentError(f"sweeps must be >= 0, got {sweeps}")
    target.validate_admissible(grid)
    psi = target.log_branch(grid)[: grid.K]

    primes = primes_up_to(pmax).primes
    primes = primes[primes <= pmax]
    s = grid.boundary_points
    directions = 2.0 * np.exp(-np.outer(np.log(primes.astype(float)), s))

    fixed = primes <= n0
    thetas = np.full(len(primes), np.pi / 2)
    thetas[fixed] = 0.0
    residual = psi - directions[fixed].sum(axis=0)
    initial = float(np.abs(residual).max())
    residuals: List[float] = []

    free = np.nonzero(~fixed)[0]
    logger.info(f"🎯 greedy approximation of {target.label}: {len(free)} free primes up to {pmax}, {sweeps} sweeps")
    for sweep in range(sweeps + 1):
        for i in free:
            # residual with prime i removed; start of the first pass has theta = pi/2 (no contribution)
            last = residuals[-1] if residuals else initial
            base = residual + np.cos(thetas[i]) * directions[i]
            theta = _best_angle(base, directions[i], thetas[i])
            candidate = base - np.cos(theta) * directions[i]
            error = float(np.abs(candidate).max())
            if error <= last:
                thetas[i], residual = theta, candidate
            else:
                error = last
            residuals.append(error)
        logger.debug(f"sweep {sweep}: residual {residuals[-1] if residuals else initial:.4e}")

    trace = SupportApproxTrace(
        grid=grid,
        target=target,
        n0=n0,
        pmax=pmax,
        primes=primes,
        thetas=thetas,
        residuals=residuals,
        initial_residual=initial,
        tail_bound=correction_tail_bound(grid.sigma_min, pmax),
        sweeps=sweeps,
    )
    trace.euler_residual = float(np.abs(trace.euler_approximant(s) - target.evaluate(s)).max())
    logger.info(f"✅ greedy residual {trace.final_residual:.4e}, Euler product residual {trace.euler_residual:.4e}")
    return trace

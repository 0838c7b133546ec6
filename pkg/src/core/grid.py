"""
Evaluation grids and holomorphic samples
Discs inside the strip 1/2 < Re s < 1 sampled on their boundary, plus the
sample and ensemble containers shared by the model and the family.
"""
import hashlib
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional

import numpy as np

from src.core.error_handler import InvalidArgumentError

logger = logging.getLogger(__name__)

STRIP_LOW, STRIP_HIGH = 0.5, 1.0


@dataclass(frozen=True, eq=False)
class EvalGrid:
    """A disc with K equispaced boundary points and optional interior points"""

    center: complex
    radius: float
    K: int
    boundary_points: np.ndarray
    interior_points: np.ndarray

    @classmethod
    def disc(cls, center: complex = 0.75, radius: float = 0.2, K: int = 64, interior: Optional[List[complex]] = None) -> "EvalGrid":
        center = complex(center)
        if radius <= 0:
            raise InvalidArgumentError(f"grid radius must be > 0, got {radius}")
        if K < 4:
            raise InvalidArgumentError(f"grid needs at least 4 boundary points, got {K}")

        # conjugate-symmetric construction: point K-k is the exact conjugate of point k
        half = np.arange(K // 2 + 1)
        upper = radius * np.exp(2j * np.pi * half / K)
        boundary = np.empty(K, dtype=complex)
        boundary[: K // 2 + 1] = upper
        boundary[K // 2 + 1 :] = np.conj(upper[1 : (K + 1) // 2][::-1])
        boundary[0] = complex(radius, 0.0)
        if K % 2 == 0:
            boundary[K // 2] = complex(-radius, 0.0)
        boundary = boundary + center

        inner = np.asarray([center] if interior is None else interior, dtype=complex)
        grid = cls(center=center, radius=float(radius), K=int(K), boundary_points=boundary, interior_points=inner)
        grid.validate()
        return grid

    @classmethod
    def from_spec(cls, spec: str) -> "EvalGrid":
        """Parse ``<center>,<radius>,<K>``"""
        try:
            center, radius, K = spec.split(",")
            return cls.disc(complex(float(center)), float(radius), int(K))
        except ValueError as e:
            raise InvalidArgumentError(f"bad grid spec {spec!r}: expected <center>,<radius>,<K>") from e

    def validate(self):
        pts = self.points
        if np.any(pts.real <= STRIP_LOW) or np.any(pts.real >= STRIP_HIGH):
            raise InvalidArgumentError(
                f"grid center={self.center} radius={self.radius} leaves the strip {STRIP_LOW} < Re s < {STRIP_HIGH}"
            )

    @property
    def points(self) -> np.ndarray:
        return np.concatenate([self.boundary_points, self.interior_points])

    @property
    def n_points(self) -> int:
        return self.K + len(self.interior_points)

    @property
    def real_mask(self) -> np.ndarray:
        return self.points.imag == 0.0

    @property
    def is_real_centered(self) -> bool:
        return self.center.imag == 0.0

    def conjugate_index(self) -> np.ndarray:
        """Index of the conjugate of each boundary point (real-centered grids)"""
        return (-np.arange(self.K)) % self.K

    def real_diameter(self, n: int = 41) -> np.ndarray:
        return self.center.real + self.radius * np.linspace(-1.0, 1.0, n) + 0j

    @property
    def sigma_min(self) -> float:
        return float(self.points.real.min())

    def sup_norm(self, values: np.ndarray) -> np.ndarray:
        """Max modulus over boundary points, along the last axis"""
        return np.abs(np.asarray(values)[..., : self.K]).max(axis=-1)

    def refined(self) -> "EvalGrid":
        return EvalGrid.disc(self.center, self.radius, 2 * self.K, list(self.interior_points))

    @property
    def hash(self) -> str:
        digest = hashlib.sha256()
        for z in self.points:
            digest.update(f"{z.real:.17g},{z.imag:.17g};".encode())
        return digest.hexdigest()

    def same_as(self, other: "EvalGrid") -> bool:
        return self.hash == other.hash

    def to_dict(self) -> Dict:
        return {
            "center": [self.center.real, self.center.imag],
            "radius": self.radius,
            "K": self.K,
            "points": [[z.real, z.imag] for z in self.points],
            "hash": self.hash,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "EvalGrid":
        points = np.array([complex(re, im) for re, im in data["points"]], dtype=complex)
        K = int(data["K"])
        grid = cls(
            center=complex(*data["center"]),
            radius=float(data["radius"]),
            K=K,
            boundary_points=points[:K],
            interior_points=points[K:],
        )
        grid.validate()
        if "hash" in data and data["hash"] != grid.hash:
            raise InvalidArgumentError("grid hash does not match its point list")
        return grid


def adaptive_sup_norm(
    evaluate: Callable[[np.ndarray], np.ndarray],
    grid: EvalGrid,
    rtol: float = 0.01,
    max_doublings: int = 4,
) -> float:
    """Boundary sup-norm, doubling K until the estimate moves less than rtol"""
    estimate = float(grid.sup_norm(evaluate(grid.boundary_points)))
    for _ in range(max_doublings):
        grid = grid.refined()
        refined = float(grid.sup_norm(evaluate(grid.boundary_points)))
        if abs(refined - estimate) <= rtol * max(abs(refined), 1e-300):
            return refined
        estimate = refined
    logger.debug(f"sup-norm did not settle within {max_doublings} doublings (K={grid.K})")
    return estimate


@dataclass
class HoloSample:
    """One holomorphic function sampled at the points of a grid"""

    grid: EvalGrid
    values: np.ndarray
    meta: Dict = field(default_factory=dict)

    def sup_distance(self, other_values: np.ndarray) -> float:
        return float(self.grid.sup_norm(self.values - other_values))


@dataclass
class Ensemble:
    """M samples on a common grid, optionally weighted"""

    grid: EvalGrid
    values: np.ndarray
    weights: Optional[np.ndarray] = None
    meta: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=complex))
        if self.values.shape[1] != self.grid.n_points:
            raise InvalidArgumentError(
                f"ensemble has {self.values.shape[1]} values per sample, grid has {self.grid.n_points} points"
            )
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)
            if len(self.weights) != len(self.values):
                raise InvalidArgumentError("one weight per sample is required")

    @property
    def size(self) -> int:
        return len(self.values)

    def samples(self) -> Iterator[HoloSample]:
        for i, row in enumerate(self.values):
            yield HoloSample(self.grid, row, {**self.meta, "index": i})

    def to_dict(self) -> Dict:
        payload = {
            "meta": {**self.meta, "M": self.size, "grid": self.grid.to_dict()},
            "samples": [[[z.real, z.imag] for z in row] for row in self.values],
        }
        if self.weights is not None:
            payload["weights"] = self.weights.tolist()
        return payload

    @classmethod
    def from_dict(cls, data: Dict) -> "Ensemble":
        meta = dict(data["meta"])
        grid = EvalGrid.from_dict(meta.pop("grid"))
        meta.pop("M", None)
        raw = np.asarray(data["samples"], dtype=float)
        values = raw[..., 0] + 1j * raw[..., 1] if raw.size else np.zeros((0, grid.n_points), dtype=complex)
        weights = data.get("weights")
        return cls(grid=grid, values=values, weights=None if weights is None else np.asarray(weights), meta=meta)

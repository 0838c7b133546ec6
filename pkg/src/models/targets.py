"""
Universality targets
Holomorphic functions on an evaluation disc given as a constant, a real
polynomial in (s - center), or values tabulated on the disc boundary and
extended by a real least-squares polynomial fit.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence

import numpy as np

from src.core.error_handler import BranchError, InadmissibleTargetError, InvalidArgumentError
from src.core.grid import EvalGrid

logger = logging.getLogger(__name__)

DIAMETER_POINTS = 41
BRANCH_REFINEMENT = 8
MAX_FIT_DEGREE = 24


@dataclass(frozen=True, eq=False)
class TargetFunction:
    """
    phi(s) = sum_k coeffs[k] ((s - center) / scale)^k with real coefficients.

    Constants and polynomials are exact; tabulated targets keep the raw
    table for reference and evaluate through the fitted polynomial.
    """

    kind: str
    coeffs: np.ndarray
    center: float
    scale: float = 1.0
    table: Optional[np.ndarray] = None
    label: str = ""
    meta: Dict = field(default_factory=dict)

    @classmethod
    def constant(cls, value: float, center: float = 0.75) -> "TargetFunction":
        return cls(kind="const", coeffs=np.array([float(value)]), center=float(center), label=f"const:{value:g}")

    @classmethod
    def polynomial(cls, coeffs: Sequence[float], center: float = 0.75) -> "TargetFunction":
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.ndim != 1 or not len(coeffs):
            raise InvalidArgumentError("polynomial target needs at least one coefficient")
        label = "poly:" + ",".join(f"{c:g}" for c in coeffs)
        return cls(kind="poly", coeffs=coeffs, center=float(center), label=label)

    @classmethod
    def tabulated(cls, grid: EvalGrid, values: Sequence[complex], degree: Optional[int] = None) -> "TargetFunction":
        """Real-coefficient least-squares fit to values on the boundary of ``grid``"""
        values = np.asarray(values, dtype=complex)
        if len(values) != grid.K:
            raise InvalidArgumentError(f"tabulated target needs {grid.K} boundary values, got {len(values)}")
        if not grid.is_real_centered:
            raise InvalidArgumentError("tabulated targets need a real-centered grid")
        degree = min(grid.K // 2 - 1, MAX_FIT_DEGREE) if degree is None else degree
        u = (grid.boundary_points - grid.center) / grid.radius
        powers = u[:, None] ** np.arange(degree + 1)[None, :]
        system = np.vstack([powers.real, powers.imag])
        rhs = np.concatenate([values.real, values.imag])
        coeffs, *_ = np.linalg.lstsq(system, rhs, rcond=None)
        residual = float(np.abs(powers @ coeffs - values).max())
        if residual > 1e-6 * max(1.0, float(np.abs(values).max())):
            logger.warning(f"⚠️ tabulated target fit residual {residual:.3e} (degree {degree})")
        return cls(
            kind="tabulated",
            coeffs=coeffs,
            center=grid.center.real,
            scale=grid.radius,
            table=values.copy(),
            label=f"tabulated:K={grid.K}",
            meta={"fit_residual": residual, "degree": degree},
        )

    @classmethod
    def from_file(cls, path: str, grid: EvalGrid) -> "TargetFunction":
        """
        JSON with either {"coeffs": [...], "center": c} or {"values": [[re, im], ...]}
        tabulated on the boundary of ``grid``.
        """
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, ValueError) as e:
            raise InvalidArgumentError(f"cannot read target file {path}: {e}") from e
        if "coeffs" in data:
            return cls.polynomial(data["coeffs"], data.get("center", grid.center.real))
        if "values" in data:
            values = np.array([complex(re, im) for re, im in data["values"]])
            return cls.tabulated(grid, values)
        raise InvalidArgumentError(f"target file {path} has neither 'coeffs' nor 'values'")

    @classmethod
    def from_spec(cls, spec: str, grid: EvalGrid) -> "TargetFunction":
        """``const:<real>`` | ``poly:<c0,c1,...>`` | ``file:<path>``"""
        kind, _, body = spec.partition(":")
        try:
            if kind == "const":
                return cls.constant(float(body), grid.center.real)
            if kind == "poly":
                return cls.polynomial([float(c) for c in body.split(",")], grid.center.real)
        except ValueError as e:
            raise InvalidArgumentError(f"bad target spec {spec!r}") from e
        if kind == "file" and body:
            return cls.from_file(body, grid)
        raise InvalidArgumentError(f"bad target spec {spec!r}: expected const:, poly: or file:")

    def evaluate(self, s) -> np.ndarray:
        u = (np.asarray(s, dtype=complex) - self.center) / self.scale
        return np.polynomial.polynomial.polyval(u, self.coeffs)

    def on_grid(self, grid: EvalGrid) -> np.ndarray:
        return self.evaluate(grid.points)

    def validate_admissible(self, grid: EvalGrid):
        """Positive on the real diameter of ``grid`` and real-symmetric"""
        if not grid.is_real_centered:
            raise InadmissibleTargetError("target grid must be centered on the real axis", condition="real-structure")
        diameter = self.evaluate(grid.real_diameter(DIAMETER_POINTS))
        if float(diameter.real.min()) <= 0.0:
            raise InadmissibleTargetError(
                f"target {self.label} is not positive on the real diameter (min {diameter.real.min():.6g})",
                condition="positivity",
            )
        boundary = self.evaluate(grid.boundary_points)
        mirror = boundary[grid.conjugate_index()]
        if np.abs(boundary - np.conj(mirror)).max() > 1e-10 * max(1.0, float(np.abs(boundary).max())):
            raise InadmissibleTargetError(f"target {self.label} is not real-symmetric", condition="real-structure")

    def log_branch(self, grid: EvalGrid) -> np.ndarray:
        """
        log(phi) at the grid points, real on the real diameter and continuous
        along the boundary; interior points by the Cauchy integral.
        """
        fine = BRANCH_REFINEMENT * grid.K
        angles = 2.0 * np.pi * np.arange(fine + 1) / fine
        circle = self.evaluate(grid.center + grid.radius * np.exp(1j * angles))
        if np.any(np.abs(circle) == 0.0):
            raise BranchError(f"target {self.label} vanishes on the boundary")
        phase = np.unwrap(np.angle(circle))
        winding = (phase[-1] - phase[0]) / (2.0 * np.pi)
        if abs(winding) > 0.5:
            raise BranchError(f"target {self.label} winds {winding:+.0f} times around 0 on the boundary")
        if circle[0].real <= 0.0:
            raise BranchError(f"target {self.label} is not positive where the boundary meets the real axis")

        phase = phase[:-1:BRANCH_REFINEMENT] - phase[0]
        boundary = np.log(np.abs(circle[:-1:BRANCH_REFINEMENT])) + 1j * phase
        boundary[0] = boundary[0].real
        if grid.K % 2 == 0:
            boundary[grid.K // 2] = complex(boundary[grid.K // 2].real, 0.0)

        nodes = grid.boundary_points - grid.center
        inner = grid.interior_points - grid.center
        kernel = nodes[None, :] / (nodes[None, :] - inner[:, None])
        interior = (kernel * boundary[None, :]).mean(axis=1)
        interior[grid.interior_points.imag == 0.0] = interior[grid.interior_points.imag == 0.0].real
        return np.concatenate([boundary, interior])

    def to_dict(self) -> Dict:
        payload = {
            "kind": self.kind,
            "label": self.label,
            "center": self.center,
            "scale": self.scale,
            "coeffs": self.coeffs.tolist(),
        }
        if self.meta:
            payload["meta"] = self.meta
        return payload

"""
Family coefficient cache
One directory per level holding meta.json and coeffs.csv; the same format
is accepted from external sources on import.
"""
import io
import json
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional

import aiofiles
import numpy as np
import pandas as pd

from src.core.error_handler import FamilyValidationError
from src.core.numkernel import is_prime, primes_up_to
from src.models.hecke import DELIGNE_SLACK, Eigenform, FamilySnapshot, genus_x0

logger = logging.getLogger(__name__)

META_FILE = "meta.json"
COEFFS_FILE = "coeffs.csv"
CSV_HEADER = "form_id,n,a_n"
META_FIELDS = ("q", "g", "nmax", "fricke_signs", "weights", "provenance")
WEIGHT_SUM_TOLERANCE = 1e-12


def level_dir(cache_dir: Path, q: int) -> Path:
    return Path(cache_dir) / f"q{q}"


def _meta(snapshot: FamilySnapshot) -> Dict:
    meta = {
        "q": snapshot.level,
        "g": snapshot.genus,
        "nmax": snapshot.nmax,
        "fricke_signs": snapshot.fricke_signs,
        "weights": snapshot.weights.tolist(),
        "provenance": snapshot.provenance,
    }
    if snapshot.raw_weights is not None:
        meta["raw_weights"] = snapshot.raw_weights.tolist()
    if snapshot.horizon is not None:
        meta["horizon"] = snapshot.horizon
    return meta


def _coefficient_frame(snapshot: FamilySnapshot) -> pd.DataFrame:
    g, nmax = snapshot.genus, snapshot.nmax
    return pd.DataFrame(
        {
            "form_id": np.repeat(np.arange(g), nmax),
            "n": np.tile(np.arange(1, nmax + 1), g),
            "a_n": snapshot.coefficient_matrix()[:, 1:].ravel(),
        }
    )


async def export_family(snapshot: FamilySnapshot, path: Path) -> Path:
    """Write ``snapshot`` into directory ``path``"""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    async with aiofiles.open(path / META_FILE, "w", encoding="utf-8") as f:
        await f.write(json.dumps(_meta(snapshot), indent=2))
    text = _coefficient_frame(snapshot).to_csv(index=False, float_format="%.17g", lineterminator="\n")
    async with aiofiles.open(path / COEFFS_FILE, "w", encoding="utf-8") as f:
        await f.write(text)
    logger.info(f"💾 exported level {snapshot.level} ({snapshot.genus} forms, nmax={snapshot.nmax}) to {path}")
    return path


def _parse_meta(text: str) -> Dict:
    try:
        meta = json.loads(text)
    except ValueError as e:
        raise FamilyValidationError(f"{META_FILE} is not valid JSON: {e}", line=getattr(e, "lineno", None)) from e
    if not isinstance(meta, dict):
        raise FamilyValidationError(f"{META_FILE} must hold an object")
    for name in META_FIELDS[:5]:
        if name not in meta:
            raise FamilyValidationError(f"{META_FILE} lacks '{name}'", field_name=name)

    q, g, nmax = meta["q"], meta["g"], meta["nmax"]
    if not isinstance(q, int) or not is_prime(q):
        raise FamilyValidationError(f"level {q!r} is not prime", field_name="q")
    if g != genus_x0(q):
        raise FamilyValidationError(f"g={g} but dim S_2({q}) = {genus_x0(q)}", field_name="g")
    if not isinstance(nmax, int) or nmax < 2:
        raise FamilyValidationError(f"nmax must be an integer >= 2, got {nmax!r}", field_name="nmax")
    for name in ("fricke_signs", "weights"):
        if len(meta[name]) != g:
            raise FamilyValidationError(f"'{name}' has {len(meta[name])} entries, expected {g}", field_name=name)
    if any(s not in (1, -1) for s in meta["fricke_signs"]):
        raise FamilyValidationError("Fricke signs must be +1 or -1", field_name="fricke_signs")
    if any(not (isinstance(w, (int, float)) and w > 0) for w in meta["weights"]):
        raise FamilyValidationError("weights must be positive numbers", field_name="weights")
    total = float(np.sum(meta["weights"]))
    if abs(total - 1.0) > WEIGHT_SUM_TOLERANCE:
        raise FamilyValidationError(f"weights sum to {total!r}, not 1", field_name="weights")
    return meta


def _locate_bad_line(text: str) -> FamilyValidationError:
    for number, line in enumerate(text.splitlines()[1:], start=2):
        fields = line.split(",")
        if len(fields) != 3:
            return FamilyValidationError(f"expected 3 fields, got {len(fields)}", line=number)
        for name, value, kind in zip(CSV_HEADER.split(","), fields, (int, int, float)):
            try:
                kind(value)
            except ValueError:
                return FamilyValidationError(f"cannot parse {value!r}", line=number, field_name=name)
    return FamilyValidationError(f"{COEFFS_FILE} could not be parsed")


def _parse_coefficients(text: str, meta: Dict) -> np.ndarray:
    """(g, nmax + 1) coefficient matrix, with line-level diagnostics"""
    first = text.split("\n", 1)[0].strip()
    if first != CSV_HEADER:
        raise FamilyValidationError(f"header must be '{CSV_HEADER}', got '{first}'", line=1)
    try:
        frame = pd.read_csv(io.StringIO(text), dtype={"form_id": np.int64, "n": np.int64, "a_n": np.float64})
    except (ValueError, pd.errors.ParserError):
        raise _locate_bad_line(text)

    q, g, nmax = meta["q"], meta["g"], meta["nmax"]
    lines = np.arange(len(frame)) + 2
    expected_ids = np.repeat(np.arange(g), nmax)
    expected_n = np.tile(np.arange(1, nmax + 1), g)
    if len(frame) != g * nmax:
        raise FamilyValidationError(f"expected {g * nmax} rows for g={g}, nmax={nmax}, got {len(frame)}")
    for name, expected in (("form_id", expected_ids), ("n", expected_n)):
        wrong = np.nonzero(frame[name].to_numpy() != expected)[0]
        if len(wrong):
            i = wrong[0]
            raise FamilyValidationError(
                f"rows must be sorted by (form_id, n): expected {name}={expected[i]}, got {frame[name].iloc[i]}",
                line=int(lines[i]),
                field_name=name,
            )

    values = frame["a_n"].to_numpy()
    bad = np.nonzero(~np.isfinite(values))[0]
    if len(bad):
        raise FamilyValidationError("a_n must be finite", line=int(lines[bad[0]]), field_name="a_n")
    coeffs = np.zeros((g, nmax + 1))
    coeffs[:, 1:] = values.reshape(g, nmax)

    ones = np.nonzero(coeffs[:, 1] != 1.0)[0]
    if len(ones):
        raise FamilyValidationError("a_1 must be 1", line=int(2 + ones[0] * nmax), field_name="a_n")
    primes = primes_up_to(max(nmax, 2)).primes
    primes = primes[(primes <= nmax) & (primes != q)]
    excess = np.abs(coeffs[:, primes]) - 2.0 * np.sqrt(primes) - DELIGNE_SLACK
    if np.any(excess > 0):
        f, j = np.unravel_index(np.argmax(excess), excess.shape)
        p = int(primes[j])
        raise FamilyValidationError(
            f"|a_{p}| = {abs(coeffs[f, p]):g} exceeds the Deligne bound {2 * math.sqrt(p):g}",
            line=int(2 + f * nmax + p - 1),
            field_name="a_n",
        )
    return coeffs


async def import_family(path: Path) -> FamilySnapshot:
    """Read and validate a cached or external family directory"""
    path = Path(path)
    try:
        async with aiofiles.open(path / META_FILE, "r", encoding="utf-8") as f:
            meta = _parse_meta(await f.read())
        async with aiofiles.open(path / COEFFS_FILE, "r", encoding="utf-8") as f:
            coeffs = _parse_coefficients(await f.read(), meta)
    except FileNotFoundError as e:
        raise FamilyValidationError(f"missing family file: {e.filename}") from e

    q = meta["q"]
    forms: List[Eigenform] = [
        Eigenform(level=q, coeffs=coeffs[i], fricke_sign=int(meta["fricke_signs"][i]), weight=float(meta["weights"][i]), id=i)
        for i in range(meta["g"])
    ]
    raw = meta.get("raw_weights")
    snapshot = FamilySnapshot(
        level=q,
        forms=tuple(forms),
        nmax=meta["nmax"],
        provenance=meta.get("provenance", "imported"),
        raw_weights=None if raw is None else np.asarray(raw, dtype=float),
        horizon=meta.get("horizon"),
    )
    logger.info(f"📂 imported level {q} ({snapshot.genus} forms, nmax={snapshot.nmax}) from {path}")
    return snapshot


class FamilyCache:
    """Level-keyed coefficient cache under one directory"""

    def __init__(self, cache_dir: Path):
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        logger.info(f"🗄️ FamilyCache initialized at {self.cache_dir}")

    def path_for(self, q: int) -> Path:
        return level_dir(self.cache_dir, q)

    def has(self, q: int) -> bool:
        path = self.path_for(q)
        return (path / META_FILE).exists() and (path / COEFFS_FILE).exists()

    async def load(self, q: int, nmax: int) -> Optional[FamilySnapshot]:
        """The cached family truncated to nmax, or None on a miss"""
        if not self.has(q):
            return None
        snapshot = await import_family(self.path_for(q))
        if snapshot.nmax < nmax:
            logger.info(f"🗄️ cache for level {q} stops at {snapshot.nmax}, {nmax} requested")
            return None
        return snapshot.truncated(nmax) if snapshot.nmax > nmax else snapshot

    async def store(self, snapshot: FamilySnapshot) -> Path:
        return await export_family(snapshot, self.path_for(snapshot.level))

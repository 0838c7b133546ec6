"""
Report and ensemble files
JSON reports with the run configuration echoed, flat CSV tables for
plotting, and the shared ensemble JSON layout.
"""
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

import aiofiles
import numpy as np
import pandas as pd

from src.core.error_handler import InvalidArgumentError
from src.core.grid import Ensemble

logger = logging.getLogger(__name__)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, Path):
        return str(value)
    return value


def dumps(payload: Dict) -> str:
    return json.dumps(_jsonable(payload), indent=2, sort_keys=True)


class ReportWriter:
    """Writes one run's outputs next to ``out_path``"""

    def __init__(self, out_path: Optional[Path], config: Optional[Dict] = None):
        self.out_path = Path(out_path) if out_path else None
        self.config = config or {}

    async def _write(self, path: Path, text: str) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        async with aiofiles.open(path, "w", encoding="utf-8") as f:
            await f.write(text)
        logger.info(f"💾 wrote {path}")
        return path

    async def write_report(self, kind: str, report: Dict, rows: Optional[List[Dict]] = None) -> Dict:
        """
        JSON report with config echo and timestamp, plus ``<stem>.csv`` when
        rows are given. Without an output path the payload is only returned.
        """
        payload = {
            "kind": kind,
            "report": report,
            "config": self.config,
            "created": datetime.now(timezone.utc).isoformat(),
        }
        if self.out_path is not None:
            await self._write(self.out_path, dumps(payload))
            if rows:
                await self.write_csv(rows, self.out_path.with_suffix(".csv"))
        return payload

    async def write_csv(self, rows: List[Dict], path: Path) -> Path:
        text = pd.DataFrame(rows).to_csv(index=False, float_format="%.17g", lineterminator="\n")
        return await self._write(Path(path), text)

    async def write_ensemble(self, ensemble: Ensemble, path: Optional[Path] = None) -> Path:
        """Deterministic: no timestamp, so equal runs give equal files"""
        path = Path(path) if path else self.out_path
        if path is None:
            raise InvalidArgumentError("an output path is required for ensembles")
        payload = ensemble.to_dict()
        payload["config"] = self.config
        return await self._write(path, dumps(payload))


async def read_ensemble(path: Path) -> Ensemble:
    try:
        async with aiofiles.open(path, "r", encoding="utf-8") as f:
            data = json.loads(await f.read())
    except (OSError, ValueError) as e:
        raise InvalidArgumentError(f"cannot read ensemble {path}: {e}") from e
    if "meta" not in data or "samples" not in data:
        raise InvalidArgumentError(f"{path} is not an ensemble file")
    return Ensemble.from_dict(data)

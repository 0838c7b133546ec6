"""
Run configuration
Merges configs/settings.yaml, an optional user YAML and environment
overrides, and validates the per-run parameters echoed into every output.
"""
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from configs.config import Config
from src.core.grid import EvalGrid

MASK64 = (1 << 64) - 1


def load_config(user_path: Optional[str] = None) -> Dict[str, Any]:
    """Load configuration from files and environment variables"""
    load_dotenv()
    return Config(user_path=user_path).settings


class RunConfig(BaseModel):
    """Everything a run depends on; dumped into every output file"""

    model_config = ConfigDict(extra="forbid")

    command: str
    seed: int = 0
    levels: List[int] = Field(default_factory=list)
    nmax: Optional[int] = None
    N: Optional[int] = None
    M: Optional[int] = None
    grid: Optional[str] = None
    target: Optional[str] = None
    eps: Optional[List[float]] = None
    cache_dir: Optional[str] = None
    out: Optional[str] = None
    threads: int = 4
    extra: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("seed")
    @classmethod
    def mask_seed(cls, v: int) -> int:
        return v & MASK64

    @field_validator("nmax", "N", "M", "threads")
    @classmethod
    def positive(cls, v: Optional[int]) -> Optional[int]:
        if v is not None and v < 1:
            raise ValueError(f"must be >= 1, got {v}")
        return v

    @field_validator("eps")
    @classmethod
    def non_negative(cls, v: Optional[List[float]]) -> Optional[List[float]]:
        if v is not None and any(e < 0 for e in v):
            raise ValueError(f"eps must be >= 0, got {v}")
        return v

    @model_validator(mode="after")
    def grid_in_strip(self) -> "RunConfig":
        if self.grid is not None:
            EvalGrid.from_spec(self.grid)
        return self

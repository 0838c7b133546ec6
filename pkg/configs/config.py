"""
Configuration for the random Euler product toolkit
"""
import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

SETTINGS_PATH = Path(__file__).with_name("settings.yaml")


def merge_settings(base: Dict, override: Optional[Dict]) -> Dict:
    merged = dict(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_settings(merged[key], value)
        else:
            merged[key] = value
    return merged


class Config:
    """settings.yaml, an optional user YAML on top, then environment overrides"""

    def __init__(self, settings_path: Path = SETTINGS_PATH, user_path: Optional[Path] = None):
        with open(settings_path, "r", encoding="utf-8") as f:
            self.settings: Dict[str, Any] = yaml.safe_load(f) or {}
        if user_path:
            with open(Path(user_path), "r", encoding="utf-8") as f:
                self.settings = merge_settings(self.settings, yaml.safe_load(f) or {})

        run = self.settings.setdefault("run", {})
        logging_cfg = self.settings.setdefault("logging", {})
        if os.getenv("BAGCHI_SEED"):
            run["seed"] = int(os.getenv("BAGCHI_SEED"), 0)
        if os.getenv("BAGCHI_CACHE_DIR"):
            run["cache_dir"] = os.getenv("BAGCHI_CACHE_DIR")
        if os.getenv("BAGCHI_THREADS"):
            run["threads"] = int(os.getenv("BAGCHI_THREADS"))
        if os.getenv("LOG_LEVEL"):
            logging_cfg["level"] = os.getenv("LOG_LEVEL")
        if os.getenv("LOG_FILE"):
            logging_cfg["file"] = os.getenv("LOG_FILE")

        self.SEED = int(run.get("seed", 0))
        self.CACHE_DIR = run.get("cache_dir", "cache")
        self.THREADS = int(run.get("threads", 4))
        self.LOG_LEVEL = logging_cfg.get("level", "INFO")
        self.LOG_FILE = logging_cfg.get("file")

    def section(self, name: str) -> Dict[str, Any]:
        return dict(self.settings.get(name, {}))

"""
Sepsis Control Toolkit: Unified Configuration
Reads runtime settings from the environment (and an optional .env file) and
exposes the paths shared by every module.
"""

import os
from pathlib import Path
from typing import Any, Dict

from dotenv import load_dotenv

load_dotenv()

REPO_ROOT = Path(__file__).parent
CONFIGS_DIR = REPO_ROOT / "configs"
SCHEMAS_DIR = REPO_ROOT / "schemas"
PIPELINE_SCHEMA_FILE = SCHEMAS_DIR / "pipeline_config.schema.json"

# ── Logging ──────────────────────────────────────────────────────
LOG_LEVEL = os.getenv("SEPSIS_LOG_LEVEL", "INFO").upper()
LOG_FORMAT = "%(asctime)s | %(name)s | %(levelname)s | %(message)s"

# ── Exit codes ───────────────────────────────────────────────────
EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_NUMERIC_ERROR = 3


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name, str(default))
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"Environment variable {name} must be an integer, got {raw!r}")


class PipelineSettings:
    """Process-wide defaults; command-line flags override these per run."""

    LOG_LEVEL = LOG_LEVEL
    OUTPUT_DIR = Path(os.getenv("SEPSIS_OUTPUT_DIR", "runs"))
    WORKERS = _int_env("SEPSIS_WORKERS", 1)
    SEED = _int_env("SEPSIS_SEED", 0)

    def as_dict(self) -> Dict[str, Any]:
        return {
            "log_level": self.LOG_LEVEL,
            "output_dir": str(self.OUTPUT_DIR),
            "workers": self.WORKERS,
            "seed": self.SEED,
        }


settings = PipelineSettings()

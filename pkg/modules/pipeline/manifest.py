"""
Run directories: output files with content hashes, pinned inputs and the
manifest that lets a run be replayed.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import pandas as pd
from pydantic import ValidationError

from modules.errors import ConfigError
from modules.pipeline.config import CSV_FLOAT_FORMAT, MANIFEST_NAME
from modules.pipeline.models import ArtifactRef, Command, PipelineConfig, RunManifest

logger = logging.getLogger(__name__)


def file_sha256(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return "sha256:" + digest.hexdigest()


def _normalize_hash(value: str) -> str:
    return value if value.startswith("sha256:") else "sha256:" + value


def load_config_data(path: Union[str, Path]) -> Tuple[Dict[str, Any], Optional[str]]:
    """Raw config dict from a config file or a previous run's manifest.

    Returns the config and, for a manifest, the command it recorded.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Config file {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a JSON object")
    if "manifest_version" in data:
        try:
            manifest = RunManifest.model_validate(data)
        except ValidationError as exc:
            raise ConfigError(f"{path} looks like a manifest but does not validate: {exc}")
        logger.info("Replaying the %s run recorded in %s", manifest.command.value, path)
        return dict(manifest.config), manifest.command.value
    return data, None


class RunRecorder:
    """Collects the outputs of one command run and writes its manifest."""

    def __init__(self, command: Command, cfg: PipelineConfig, out_dir: Union[str, Path]) -> None:
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.manifest = RunManifest(command=command, config=cfg.model_dump(mode="json"), seed=cfg.seed)
        self._started = time.perf_counter()

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def record(self, name: str) -> Path:
        """Hash a file already written under the run directory."""
        path = self.path(name)
        self.manifest.outputs[name] = file_sha256(path)
        return path

    def csv(self, name: str, frame: pd.DataFrame) -> Path:
        frame.to_csv(self.path(name), index=False, float_format=CSV_FLOAT_FORMAT)
        return self.record(name)

    def json(self, name: str, payload: Any) -> Path:
        self.path(name).write_text(json.dumps(payload, indent=2, sort_keys=True, default=str))
        return self.record(name)

    def input(self, ref: Optional[ArtifactRef], what: str) -> Path:
        """Existing input file, checked against its pinned hash."""
        if ref is None:
            raise ConfigError(f"No {what} given")
        path = Path(ref.path)
        if not path.is_file():
            raise ConfigError(f"{what.capitalize()} not found: {path}")
        actual = file_sha256(path)
        if ref.sha256 and _normalize_hash(ref.sha256) != actual:
            raise ConfigError(f"{what.capitalize()} {path} has hash {actual}, config pins {ref.sha256}")
        self.manifest.inputs[str(path)] = actual
        return path

    def finish(self, **metrics: Any) -> RunManifest:
        self.manifest.metrics.update(metrics)
        self.manifest.metrics["wall_seconds"] = time.perf_counter() - self._started
        self.manifest.write(self.path(MANIFEST_NAME))
        logger.info("Wrote %d outputs and %s to %s", len(self.manifest.outputs), MANIFEST_NAME, self.out_dir)
        return self.manifest

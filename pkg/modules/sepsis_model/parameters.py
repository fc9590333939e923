"""
ParameterSet persistence and overrides.

The on-disk form is a flat JSON object keyed by parameter symbol. Unknown
keys are rejected; missing keys are filled from the registry defaults and
reported back as warnings.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Mapping, Tuple, Union

from pydantic import ValidationError

from modules.errors import ConfigError
from modules.sepsis_model.config import PARAMETER_NAMES, PARAMETER_REGISTRY
from modules.sepsis_model.models import ParameterSet

logger = logging.getLogger(__name__)


def _validate(data: Mapping[str, Any], enforce_table_ranges: bool) -> ParameterSet:
    return ParameterSet.model_validate(
        dict(data), context={"enforce_table_ranges": enforce_table_ranges}
    )


def load_parameter_set(
    data: Mapping[str, Any],
    enforce_table_ranges: bool = True,
) -> Tuple[ParameterSet, List[str]]:
    """Build a ParameterSet from a flat mapping.

    Returns the validated set and one warning per symbol filled from defaults.
    Raises ConfigError on unknown symbols; range violations surface as
    pydantic ValidationError.
    """
    unknown = sorted(set(data) - set(PARAMETER_NAMES))
    if unknown:
        raise ConfigError(f"Unknown parameter symbols: {', '.join(unknown)}")
    warnings = [
        f"{symbol} missing; using default {PARAMETER_REGISTRY[symbol].default}"
        for symbol in PARAMETER_NAMES
        if symbol not in data
    ]
    for message in warnings:
        logger.warning(message)
    return _validate(data, enforce_table_ranges), warnings


def load_parameter_file(path: Union[str, Path], enforce_table_ranges: bool = True) -> Tuple[ParameterSet, List[str]]:
    """Read a parameter JSON file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"Parameter file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Parameter file {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError(f"Parameter file {path} must hold a JSON object")
    return load_parameter_set(data, enforce_table_ranges)


def dump_parameter_set(params: ParameterSet) -> Dict[str, float]:
    """Flat symbol → value mapping in registry order."""
    return {symbol: float(getattr(params, symbol)) for symbol in PARAMETER_NAMES}


def save_parameter_file(params: ParameterSet, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(dump_parameter_set(params), indent=2))
    return path


def with_overrides(
    params: ParameterSet,
    overrides: Mapping[str, float],
    enforce_table_ranges: bool = True,
) -> ParameterSet:
    """Copy of ``params`` with some symbols replaced, re-validated."""
    if not overrides:
        return params
    unknown = sorted(set(overrides) - set(PARAMETER_NAMES))
    if unknown:
        raise ConfigError(f"Unknown parameter symbols in overrides: {', '.join(unknown)}")
    merged = dump_parameter_set(params)
    merged.update({k: float(v) for k, v in overrides.items()})
    try:
        return _validate(merged, enforce_table_ranges)
    except ValidationError:
        logger.error("Overrides %s produce an invalid parameter set", dict(overrides))
        raise

"""
Model files: JSON with an architecture header, normalization statistics and
row-major weight arrays with explicit shapes.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from modules.errors import ModelFileError
from modules.rnn_surrogate.config import MODEL_FORMAT, MODEL_VERSION, PARAM_NAMES
from modules.rnn_surrogate.models import RnnModel, param_shapes

logger = logging.getLogger(__name__)


def model_to_dict(model: RnnModel) -> Dict[str, Any]:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "architecture": {
            "cell": "elman_tanh",
            "in_dim": model.in_dim,
            "hidden": model.hidden,
            "out_dim": model.out_dim,
            "d": model.d,
            "n_params": model.n_params,
        },
        "plant": {
            "kind": model.plant,
            "scenario": model.scenario,
            "channel": model.channel,
            "channels": list(model.channels),
            "bounds": model.bounds.tolist(),
            "step": model.step,
            "base_params": model.base_params,
            "objective": model.objective,
            "integrator": model.integrator,
        },
        "features": {
            "override_keys": list(model.override_keys),
            "override_defaults": model.override_defaults,
            "mean": model.feature_mean.tolist(),
            "scale": model.feature_scale.tolist(),
        },
        "weights": {
            name: {"shape": list(model.weights[name].shape), "values": model.weights[name].ravel().tolist()}
            for name in PARAM_NAMES
        },
    }


def model_from_dict(data: Dict[str, Any]) -> RnnModel:
    if data.get("format") != MODEL_FORMAT:
        raise ModelFileError(f"not a control predictor file (format={data.get('format')!r})")
    if data.get("version") != MODEL_VERSION:
        raise ModelFileError(f"unsupported model version {data.get('version')!r}, expected {MODEL_VERSION}")
    try:
        arch = data["architecture"]
        plant = data["plant"]
        features = data["features"]
        in_dim, hidden, out_dim, d = (int(arch[k]) for k in ("in_dim", "hidden", "out_dim", "d"))
        shapes = param_shapes(in_dim, hidden, out_dim)
        weights = {}
        for name in PARAM_NAMES:
            entry = data["weights"][name]
            if tuple(entry["shape"]) != shapes[name]:
                raise ModelFileError(f"weight {name} has shape {entry['shape']}, architecture needs {list(shapes[name])}")
            weights[name] = np.asarray(entry["values"], dtype=float).reshape(shapes[name])
        model = RnnModel(
            in_dim=in_dim,
            hidden=hidden,
            out_dim=out_dim,
            d=d,
            weights=weights,
            feature_mean=np.asarray(features["mean"], dtype=float),
            feature_scale=np.asarray(features["scale"], dtype=float),
            bounds=np.asarray(plant["bounds"], dtype=float).reshape(2, 2),
            channels=tuple(int(c) for c in plant["channels"]),
            plant=plant["kind"],
            scenario=plant["scenario"],
            channel=plant["channel"],
            step=float(plant["step"]),
            override_keys=list(features["override_keys"]),
            override_defaults={k: float(v) for k, v in features["override_defaults"].items()},
            base_params={k: float(v) for k, v in plant["base_params"].items()},
            objective=dict(plant["objective"]),
            integrator=dict(plant["integrator"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"malformed model file: {exc}")

    if model.feature_mean.shape != (in_dim,) or model.feature_scale.shape != (in_dim,):
        raise ModelFileError("normalization statistics do not match the input dimension")
    if np.any(model.feature_scale == 0):
        raise ModelFileError("normalization scales must be nonzero")
    if not all(np.all(np.isfinite(w)) for w in weights.values()):
        raise ModelFileError("model weights must be finite")
    return model


def save_model(model: RnnModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model_to_dict(model)))
    logger.info("Saved %d-parameter model to %s", model.n_params, path)
    return path


def load_model(path: Union[str, Path]) -> RnnModel:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ModelFileError(f"Model file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"Model file {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ModelFileError(f"Model file {path} must hold a JSON object")
    return model_from_dict(data)

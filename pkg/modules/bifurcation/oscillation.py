"""
Sustained-oscillation detection and phase-space exports.
"""

from __future__ import annotations

import logging
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.signal import find_peaks

from modules.bifurcation.config import DIRECTION_MARK_COUNT, MIN_CYCLES
from modules.bifurcation.models import LimitCycleReport, OscillationConfig, VariableOscillation
from modules.errors import DomainError
from modules.integrator.models import Trajectory

logger = logging.getLogger(__name__)


def _analyze(name: str, times: np.ndarray, x: np.ndarray, scale: float,
             cfg: OscillationConfig) -> VariableOscillation:
    tail = slice(len(x) // 2, None)
    xt, tt = x[tail], times[tail]
    peaks, _ = find_peaks(xt)
    if len(peaks) < 3:
        amplitude = float(np.ptp(xt)) if len(xt) else 0.0
        return VariableOscillation(name, False, amplitude, None, None, int(len(peaks)))

    # Amplitude of a cycle: its closing peak above the lowest point since the previous peak.
    amplitudes = np.array([
        xt[peaks[k]] - np.min(xt[peaks[k - 1]:peaks[k] + 1]) for k in range(1, len(peaks))
    ])
    last, previous = float(amplitudes[-1]), float(amplitudes[-2])
    decay = last / previous if previous > 0 else (1.0 if last == 0 else float("inf"))
    period = float(np.mean(np.diff(tt[peaks])))
    oscillating = last > cfg.floor * scale and decay >= cfg.sustain_threshold
    return VariableOscillation(name, bool(oscillating), last, decay, period, int(len(peaks)))


def detect_limit_cycle(
    traj: Trajectory,
    variables: Optional[Sequence[str]] = None,
    cfg: Optional[OscillationConfig] = None,
    scales: Optional[Dict[str, float]] = None,
) -> LimitCycleReport:
    """Peak-to-peak verdict on the trailing half of ``traj``.

    A component oscillates when its last cycle amplitude exceeds
    ``floor * scale`` and is at least ``sustain_threshold`` times the
    previous one. The overall verdict needs every analyzed component to
    oscillate. Fewer than four peaks over the whole run flags the report as
    low confidence.
    """
    cfg = cfg or OscillationConfig()
    names = list(variables) if variables else list(traj.state_names)
    scales = scales or {}

    per_var: Dict[str, VariableOscillation] = {}
    low_confidence = False
    for name in names:
        x = traj.column(name)
        scale = scales.get(name) or max(float(np.max(np.abs(x))), 1e-300)
        per_var[name] = _analyze(name, traj.times, x, scale, cfg)
        if len(find_peaks(x)[0]) < MIN_CYCLES:
            low_confidence = True

    verdicts = [v.oscillating for v in per_var.values()]
    oscillating = bool(verdicts) and all(verdicts)
    periods = [v.period for v in per_var.values() if v.oscillating and v.period]
    decays = [v.decay_ratio for v in per_var.values() if v.decay_ratio is not None]
    report = LimitCycleReport(
        oscillating=oscillating,
        amplitudes={n: v.amplitude for n, v in per_var.items()},
        period=float(np.median(periods)) if periods else None,
        amplitude_decay_ratio=float(min(decays)) if decays else None,
        variables=per_var,
        low_confidence=low_confidence,
    )
    logger.info(
        "Oscillation check on %s: oscillating=%s period=%s low_confidence=%s",
        ",".join(names), report.oscillating, report.period, report.low_confidence,
    )
    return report


# ---------------------------------------------------------------------------
# Phase exports
# ---------------------------------------------------------------------------

def phase_export(traj: Trajectory, variables: Sequence[str],
                 mark_count: int = DIRECTION_MARK_COUNT) -> pd.DataFrame:
    """Trajectory projected on 2 or 3 components, in time order.

    ``d_<name>`` columns hold the unit direction of motion (in coordinates
    scaled by each component's range) and ``mark`` flags evenly spaced
    points to draw direction arrows at.
    """
    variables = list(variables)
    if len(variables) not in (2, 3):
        raise DomainError(f"phase export needs 2 or 3 variables, got {len(variables)}")
    unknown = [v for v in variables if v not in traj.state_names]
    if unknown:
        raise DomainError(f"Unknown state variables: {unknown}")

    points = np.column_stack([traj.column(v) for v in variables])
    frame = pd.DataFrame(points, columns=variables)
    frame.insert(0, "time", traj.times)

    span = np.ptp(points, axis=0) if len(points) else np.ones(len(variables))
    span = np.where(span > 0, span, 1.0)
    delta = np.diff(points, axis=0) / span
    if len(delta):
        delta = np.vstack([delta, delta[-1:]])
    else:
        delta = np.zeros((len(points), len(variables)))
    norm = np.linalg.norm(delta, axis=1, keepdims=True)
    unit = np.divide(delta, norm, out=np.zeros_like(delta), where=norm > 0)
    for j, name in enumerate(variables):
        frame[f"d_{name}"] = unit[:, j]

    stride = max(1, len(points) // max(mark_count, 1))
    frame["mark"] = (np.arange(len(points)) % stride) == 0
    return frame


def loop_closure(frame: pd.DataFrame, variables: Sequence[str], period: float,
                 scales: Optional[Dict[str, float]] = None) -> float:
    """Scaled distance between the last point and the point one period earlier."""
    times = frame["time"].to_numpy()
    t_end = times[-1]
    if period <= 0 or t_end - period < times[0]:
        raise DomainError("trajectory is shorter than one period")
    scales = scales or {}
    gaps = []
    for name in variables:
        x = frame[name].to_numpy()
        scale = scales.get(name) or max(float(np.ptp(x)), 1e-300)
        earlier = np.interp(t_end - period, times, x)
        gaps.append(abs(x[-1] - earlier) / scale)
    return float(max(gaps))

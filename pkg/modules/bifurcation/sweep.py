"""
One-parameter equilibrium sweeps.

Every grid point is solved independently (in a thread pool when
``workers > 1``) and the results are merged in grid order. A bifurcation is
reported wherever adjacent grid points differ in branch count or in the
stability labels of their branches; each such bracket is narrowed by
bisection.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from modules.bifurcation.equilibria import equilibria_with_stability
from modules.bifurcation.models import (
    BifurcationBracket,
    BifurcationDiagram,
    ClassifyConfig,
    DynamicalSystem,
    Equilibrium,
    SearchConfig,
)
from modules.bifurcation.systems import sepsis_system
from modules.errors import DomainError
from modules.sepsis_model.config import PARAMETER_NAMES, get_parameter_spec
from modules.sepsis_model.models import ParameterSet, SubsystemId
from modules.sepsis_model.parameters import with_overrides

logger = logging.getLogger(__name__)

SystemFactory = Callable[[float], DynamicalSystem]
Signature = Tuple[str, ...]


def signature(point: Sequence[Equilibrium]) -> Signature:
    """Branch structure at one parameter value: one stability label per branch."""
    return tuple(eq.stability.value if eq.stability else "unknown" for eq in point)


def solve_point(factory: SystemFactory, value: float, search: SearchConfig,
                classify: ClassifyConfig) -> List[Equilibrium]:
    return equilibria_with_stability(factory(value), search, classify, param_value=float(value))


def sweep_points(
    factory: SystemFactory,
    values: Sequence[float],
    search: SearchConfig,
    classify: ClassifyConfig,
    workers: int = 1,
) -> List[List[Equilibrium]]:
    """Equilibria at each value, returned in the order of ``values``."""
    values = [float(v) for v in values]
    if workers <= 1:
        return [solve_point(factory, v, search, classify) for v in values]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda v: solve_point(factory, v, search, classify), values))


def refine_bracket(
    factory: SystemFactory,
    low: float,
    high: float,
    before: Signature,
    after: Signature,
    search: SearchConfig,
    classify: ClassifyConfig,
    width: float,
) -> BifurcationBracket:
    """Bisect until the bracket is narrower than ``width``.

    The lower end keeps the signature of the left grid point; anything else
    moves the upper end.
    """
    while high - low > width:
        mid = 0.5 * (low + high)
        if signature(solve_point(factory, mid, search, classify)) == before:
            low = mid
        else:
            high = mid
    return BifurcationBracket(low=low, high=high, estimate=0.5 * (low + high), before=before, after=after)


def sweep_family(
    factory: SystemFactory,
    label: str,
    param_name: str,
    value_range: Tuple[float, float],
    n_points: int,
    search: Optional[SearchConfig] = None,
    classify: Optional[ClassifyConfig] = None,
    workers: int = 1,
    refine: bool = True,
) -> BifurcationDiagram:
    """Sweep of a parameterized family of systems over an ascending grid."""
    lo, hi = float(value_range[0]), float(value_range[1])
    if not lo < hi:
        raise DomainError(f"sweep range must be ascending, got {value_range}")
    if n_points < 2:
        raise DomainError("a sweep needs at least two grid points")
    search = search or SearchConfig()
    classify = classify or ClassifyConfig()

    grid = np.linspace(lo, hi, n_points)
    equilibria = sweep_points(factory, grid, search, classify, workers)
    for value, point in zip(grid, equilibria):
        logger.info("%s %s=%.6g: %d branches %s", label, param_name, value, len(point), signature(point))

    brackets: List[BifurcationBracket] = []
    width = classify.refine_fraction * (hi - lo)
    for k in range(n_points - 1):
        before, after = signature(equilibria[k]), signature(equilibria[k + 1])
        if before == after:
            continue
        if refine:
            bracket = refine_bracket(factory, grid[k], grid[k + 1], before, after, search, classify, width)
        else:
            bracket = BifurcationBracket(grid[k], grid[k + 1], 0.5 * (grid[k] + grid[k + 1]), before, after)
        logger.info("%s: branch change in [%.6g, %.6g] (%s -> %s)", label, bracket.low, bracket.high, before, after)
        brackets.append(bracket)

    return BifurcationDiagram(
        subsystem=label,
        param_name=param_name,
        grid=grid,
        equilibria=equilibria,
        detected_bifurcations=[b.estimate for b in brackets],
        brackets=brackets,
    )


def sepsis_family(
    subsystem: SubsystemId,
    params: ParameterSet,
    param_name: str,
    enforce_table_ranges: bool = True,
) -> SystemFactory:
    """Subsystem with one parameter replaced by the sweep value."""
    subsystem = SubsystemId(subsystem)

    def factory(value: float) -> DynamicalSystem:
        varied = with_overrides(params, {param_name: value}, enforce_table_ranges=enforce_table_ranges)
        return sepsis_system(subsystem, varied)

    return factory


def sweep(
    subsystem: SubsystemId,
    params: ParameterSet,
    param_name: str,
    value_range: Tuple[float, float],
    n_points: int,
    search: Optional[SearchConfig] = None,
    classify: Optional[ClassifyConfig] = None,
    workers: int = 1,
    enforce_table_ranges: bool = True,
) -> BifurcationDiagram:
    """Bifurcation diagram of a sepsis subsystem in one parameter.

    The range must lie within the tabulated bounds of the parameter unless
    ``enforce_table_ranges`` is False.
    """
    if param_name not in PARAMETER_NAMES:
        raise DomainError(f"Unknown parameter: {param_name}")
    spec = get_parameter_spec(param_name)
    if enforce_table_ranges and spec.ranged:
        if not (spec.contains(value_range[0]) and spec.contains(value_range[1])):
            raise DomainError(
                f"sweep range {value_range} leaves the tabulated range "
                f"[{spec.low}, {spec.high}] of {param_name}"
            )
    factory = sepsis_family(subsystem, params, param_name, enforce_table_ranges)
    return sweep_family(
        factory,
        SubsystemId(subsystem).value,
        param_name,
        value_range,
        n_points,
        search,
        classify,
        workers,
    )

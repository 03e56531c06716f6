"""
Measured constants of pointwise inequalities.

Responsible for:
- plain ratio certificates lhs <= C rhs
- fitted certificates lhs <= c_base base + sum_i c_i D_i, with the derivative
  weights searched on a geometric lattice
- inner box constants and the worst points kept for CSV export
"""
import itertools
import logging

import numpy as np

from hypocert.const import CONSTANT_CAP, TOP_POINTS, WEIGHT_LATTICE
from hypocert.models import InequalityCertificate, PointwiseRegion
from hypocert.sampling import inner_mask

_LOGGER = logging.getLogger(__name__)


def pointwise_ratio(lhs: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """lhs / rhs where lhs > 0, infinity where lhs > 0 but rhs <= 0, zero elsewhere."""
    ratio = np.zeros_like(lhs, dtype=float)
    active = lhs > 0.0
    positive = active & (rhs > 0.0)
    ratio[positive] = lhs[positive] / rhs[positive]
    ratio[active & ~positive] = np.inf
    return ratio


def _top_rows(points: np.ndarray, lhs: np.ndarray, rhs: np.ndarray, ratio: np.ndarray, count: int) -> list[list[float]]:
    if ratio.size == 0:
        return []
    order = np.argsort(-ratio, kind="stable")[:count]
    return [points[i].tolist() + [float(lhs[i]), float(rhs[i]), float(ratio[i])] for i in order]


def measure_ratio(
    name: str,
    points: np.ndarray,
    lhs: np.ndarray,
    rhs: np.ndarray,
    region: PointwiseRegion | None = None,
    constant_name: str = "c",
    cap: float = CONSTANT_CAP,
    notes: str | None = None,
) -> InequalityCertificate:
    """Smallest C with lhs <= C rhs on every sample point."""
    ratio = pointwise_ratio(lhs, rhs)
    if ratio.size == 0:
        return InequalityCertificate(name, {constant_name: 0.0}, None, 0.0, True, region, notes="no sample points")

    worst = int(np.argmax(ratio))
    constant = float(ratio[worst])
    inner = {}
    if region is not None:
        mask = inner_mask(points, region)
        inner[constant_name] = float(ratio[mask].max()) if np.any(mask) else 0.0
    passed = bool(np.isfinite(constant) and constant <= cap)
    if not passed:
        _LOGGER.warning("Certificate %s failed with constant %s", name, constant)
    return InequalityCertificate(
        name=name,
        measured_constants={constant_name: constant},
        worst_point=points[worst].tolist() if constant > 0.0 else None,
        worst_ratio=constant,
        passed=passed,
        grid=region,
        inner_constants=inner,
        top_points=_top_rows(points, lhs, rhs, ratio, TOP_POINTS),
        notes=notes,
    )


def fit_constants(
    name: str,
    points: np.ndarray,
    lhs: np.ndarray,
    base: np.ndarray,
    derivatives: dict[str, np.ndarray],
    region: PointwiseRegion | None = None,
    base_name: str = "c_base",
    cap: float = CONSTANT_CAP,
    lattice: tuple[float, ...] = WEIGHT_LATTICE,
    notes: str | None = None,
) -> InequalityCertificate:
    """
    Fit lhs <= c_base base + sum_i c_i derivatives[i].

    Every weight vector on the lattice fixes the c_i; c_base is then the
    smallest value making the inequality hold. The fit with the least
    c_base + sum_i c_i wins, ties going to the first in lattice order.
    """
    names = sorted(derivatives)
    best = None
    for weights in itertools.product(lattice, repeat=len(names)):
        residual = lhs.copy()
        for weight, key in zip(weights, names):
            residual -= weight * derivatives[key]
        c_base = float(pointwise_ratio(residual, base).max(initial=0.0))
        objective = c_base + sum(weights)
        if best is None or objective < best[0]:
            best = (objective, c_base, weights)

    _, c_base, weights = best
    supplied = np.zeros_like(lhs)
    for weight, key in zip(weights, names):
        supplied += weight * derivatives[key]
    residual = lhs - supplied
    ratio = pointwise_ratio(residual, base)
    constants = {base_name: c_base}
    constants.update({key: float(weight) for key, weight in zip(names, weights)})

    inner = {}
    if region is not None:
        mask = inner_mask(points, region)
        inner[base_name] = float(ratio[mask].max()) if np.any(mask) else 0.0
    worst = int(np.argmax(ratio)) if ratio.size else 0
    passed = bool(np.isfinite(c_base) and c_base <= cap)
    if not passed:
        _LOGGER.warning("Certificate %s failed with constant %s", name, c_base)
    return InequalityCertificate(
        name=name,
        measured_constants=constants,
        worst_point=points[worst].tolist() if ratio.size and c_base > 0.0 else None,
        worst_ratio=c_base,
        passed=passed,
        grid=region,
        inner_constants=inner,
        top_points=_top_rows(points, residual, base, ratio, TOP_POINTS),
        notes=notes,
    )

"""
Combinators for MultiplierSymbol and the finite difference check of their derivatives.
"""
import logging

import numpy as np

from hypocert.const import FD_BAND
from hypocert.models import MultiplierSymbol, as_points

_LOGGER = logging.getLogger(__name__)


def zero_symbol(field: np.ndarray, description: str = "zero") -> MultiplierSymbol:
    def evaluate(xi: np.ndarray) -> np.ndarray:
        return np.zeros(xi.shape[0])

    def terms(xi: np.ndarray) -> dict[str, np.ndarray]:
        return {"main": np.zeros(xi.shape[0])}

    return MultiplierSymbol(description, field, evaluate, terms)


def linear_combination(
    symbols: list[MultiplierSymbol],
    weights: list[float],
    description: str,
    labels: list[str] | None = None,
) -> MultiplierSymbol:
    """sum_i weights[i] symbols[i]; derivative terms are prefixed with the labels."""
    if not symbols:
        raise ValueError("a combination needs at least one symbol")
    labels = labels or [f"s{i}" for i in range(len(symbols))]
    field = symbols[0].field

    def evaluate(xi: np.ndarray) -> np.ndarray:
        total = np.zeros(xi.shape[0])
        for symbol, weight in zip(symbols, weights):
            if weight != 0:
                total = total + weight * symbol.eval(xi)
        return total

    def terms(xi: np.ndarray) -> dict[str, np.ndarray]:
        combined = {}
        for symbol, weight, label in zip(symbols, weights, labels):
            if weight == 0:
                continue
            for name, values in symbol.terms(xi).items():
                combined[f"{label}.{name}"] = weight * values
        return combined

    def arguments(xi: np.ndarray) -> list:
        found = []
        for symbol, weight in zip(symbols, weights):
            if weight != 0:
                found.extend(symbol.arguments(xi))
        return found

    return MultiplierSymbol(description, field, evaluate, terms, arguments)


ARGUMENT_STEP = 1e-5
MIN_REL_STEP = 1e-8
STEP_REFINEMENTS = 3


def _width(breakpoints: tuple[float, ...]) -> float:
    return max(breakpoints) - min(breakpoints) if len(breakpoints) > 1 else max(breakpoints)


def difference_steps(symbol: MultiplierSymbol, points: np.ndarray, direction: np.ndarray, rel_step: float = 1e-5) -> np.ndarray:
    """
    Step along `direction` at each point for the central differences.

    Starts from rel_step (1 + |xi|) and shrinks until no cutoff argument moves by
    more than ARGUMENT_STEP times the width of its transition per step, never
    going below MIN_REL_STEP (1 + |xi|).
    """
    size = 1.0 + np.linalg.norm(points, axis=1)
    step = rel_step * size
    floor = MIN_REL_STEP * size
    base = symbol.arguments(points)
    if not base:
        return step
    for _ in range(STEP_REFINEMENTS):
        moved = symbol.arguments(points + step[:, None] * direction)
        limit = step.copy()
        with np.errstate(invalid="ignore", divide="ignore"):
            for (values, breakpoints), (shifted, _) in zip(base, moved):
                rate = np.abs(np.abs(shifted) - np.abs(values)) / step
                limit = np.fmin(limit, ARGUMENT_STEP * _width(breakpoints) / rate)
        step = np.maximum(limit, floor)
    return step


def finite_difference_check(symbol: MultiplierSymbol, points: np.ndarray, band: float = FD_BAND, rel_step: float = 1e-5) -> dict:
    """
    Compare the analytic derivative along B^T xi with a fourth order central difference.

    Points whose cutoff arguments lie within a relative band of a breakpoint, or
    where the field vanishes, are skipped. Steps follow difference_steps. The
    error at each point is |fd - an| / (|an| + 1e-4 (|g| + 1) |B^T xi| / (1 + |xi|)).
    """
    points, _ = as_points(points)
    field_xi = symbol.transport(points)
    speed = np.linalg.norm(field_xi, axis=1)
    keep = speed > 0.0
    with np.errstate(invalid="ignore"):
        for values, breakpoints in symbol.arguments(points):
            for breakpoint in breakpoints:
                keep &= ~(np.abs(np.abs(values) - breakpoint) <= band * breakpoint)
    excluded = int(np.sum(~keep))
    points, field_xi, speed = points[keep], field_xi[keep], speed[keep]
    if points.shape[0] == 0:
        return {"max_error": 0.0, "checked": 0, "excluded": excluded}

    direction = field_xi / speed[:, None]
    step = difference_steps(symbol, points, direction, rel_step)
    offset = step[:, None] * direction

    def at(k: float) -> np.ndarray:
        return symbol.eval(points + k * offset)

    slope = (8.0 * (at(1.0) - at(-1.0)) - (at(2.0) - at(-2.0))) / (12.0 * step)
    numeric = slope * speed
    analytic = symbol.directional_derivative(points)
    value = symbol.eval(points)
    scale = np.abs(analytic) + 1e-4 * (np.abs(value) + 1.0) * speed / (1.0 + np.linalg.norm(points, axis=1))
    errors = np.abs(numeric - analytic) / scale
    worst = int(np.argmax(errors))
    _LOGGER.debug("Finite differences for %s: max error %s over %s points", symbol.description, errors[worst], len(errors))
    return {
        "max_error": float(errors[worst]),
        "checked": int(points.shape[0]),
        "excluded": excluded,
        "worst_point": points[worst].tolist(),
    }

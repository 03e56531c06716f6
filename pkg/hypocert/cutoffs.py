"""
Smooth cutoff functions psi and w.

psi equals 1 on |x| <= psi_inner and vanishes for |x| >= psi_outer; w vanishes
on |x| <= w_inner and equals 1 for |x| >= w_outer. Both are built from the
C-infinity step s(t) = expit(1/(1 - t) - 1/t), which is exactly 0 for t <= 0
and exactly 1 for t >= 1, so the plateaus hold to the last bit.
"""
import logging

import numpy as np
from scipy.special import expit

from hypocert.errors import IncompatibleSupports
from hypocert.models import CutoffSpec, DominanceCertificate

_LOGGER = logging.getLogger(__name__)

MIN_DOMINANCE_GRID = 10_000


def _apply(t, interior):
    values = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.where(values >= 1.0, 1.0, 0.0)
    inside = (values > 0.0) & (values < 1.0)
    out[inside] = interior(values[inside])
    return out


def _unwrap(x, values):
    return float(values[0]) if np.ndim(x) == 0 else values.reshape(np.shape(x))


def smooth_step(t):
    """The step s(t)."""
    values = _apply(t, lambda v: expit(1.0 / (1.0 - v) - 1.0 / v))
    return _unwrap(t, values)


def smooth_step_prime(t):
    """s'(t) = s (1 - s) (1/t^2 + 1/(1 - t)^2) inside (0, 1), zero elsewhere."""
    def interior(v):
        step = expit(1.0 / (1.0 - v) - 1.0 / v)
        weight = step * (1.0 - step)
        result = np.zeros_like(v)
        # the step saturates long before 1/t^2 overflows
        live = weight > 0.0
        result[live] = weight[live] * (1.0 / v[live] ** 2 + 1.0 / (1.0 - v[live]) ** 2)
        return result

    values = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros_like(values)
    inside = (values > 0.0) & (values < 1.0)
    out[inside] = interior(values[inside])
    return _unwrap(t, out)


def _psi_argument(spec: CutoffSpec, x):
    return (np.abs(np.asarray(x, dtype=float)) - spec.psi_inner) / (spec.psi_outer - spec.psi_inner)


def _w_argument(spec: CutoffSpec, x):
    return (np.abs(np.asarray(x, dtype=float)) - spec.w_inner) / (spec.w_outer - spec.w_inner)


def eval_psi(spec: CutoffSpec, x):
    return _unwrap(x, 1.0 - np.atleast_1d(smooth_step(_psi_argument(spec, x))))


def eval_one_minus_psi(spec: CutoffSpec, x):
    """1 - psi computed directly from the step, without cancellation."""
    return smooth_step(_psi_argument(spec, x))


def eval_psi_prime(spec: CutoffSpec, x):
    slope = np.atleast_1d(smooth_step_prime(_psi_argument(spec, x)))
    sign = np.atleast_1d(np.sign(np.asarray(x, dtype=float)))
    return _unwrap(x, -slope * sign / (spec.psi_outer - spec.psi_inner))


def eval_w(spec: CutoffSpec, x):
    return smooth_step(_w_argument(spec, x))


def eval_w_prime(spec: CutoffSpec, x):
    slope = np.atleast_1d(smooth_step_prime(_w_argument(spec, x)))
    sign = np.atleast_1d(np.sign(np.asarray(x, dtype=float)))
    return _unwrap(x, slope * sign / (spec.w_outer - spec.w_inner))


def default_dominance_grid(spec_psi: CutoffSpec, spec_w: CutoffSpec, points: int = 20_001) -> np.ndarray:
    return np.linspace(0.0, 2.0 * max(spec_psi.psi_outer, spec_w.w_outer), points)


def _ratio_max(lhs: np.ndarray, rhs: np.ndarray) -> float:
    active = lhs > 0.0
    if not np.any(active):
        return 0.0
    if np.any(rhs[active] <= 0.0):
        return float("inf")
    return float(np.max(lhs[active] / rhs[active]))


def dominance_certificate(spec_psi: CutoffSpec, spec_w: CutoffSpec, grid: np.ndarray | None = None) -> DominanceCertificate:
    """
    Measure c1 and c2 with 1 - psi <= c1 w and |psi'| <= c2 w on a fine 1D grid.

    The grid must cover [0, 2 max(psi_outer, w_outer)] with at least 10^4 points.
    Raises IncompatibleSupports when either constant is infinite.
    """
    if grid is None:
        grid = default_dominance_grid(spec_psi, spec_w)
    grid = np.asarray(grid, dtype=float)
    cover = 2.0 * max(spec_psi.psi_outer, spec_w.w_outer)
    if grid.size < MIN_DOMINANCE_GRID or grid.min() > 0.0 or grid.max() < cover:
        raise ValueError(f"dominance grid must hold {MIN_DOMINANCE_GRID} points covering [0, {cover}]")

    weight = eval_w(spec_w, grid)
    c_one_minus_psi = _ratio_max(eval_one_minus_psi(spec_psi, grid), weight)
    c_psi_prime = _ratio_max(np.abs(eval_psi_prime(spec_psi, grid)), weight)
    if not (np.isfinite(c_one_minus_psi) and np.isfinite(c_psi_prime)):
        raise IncompatibleSupports(
            "1 - psi or psi' does not vanish where w does",
            c_one_minus_psi=c_one_minus_psi,
            c_psi_prime=c_psi_prime,
        )
    _LOGGER.debug("Dominance constants c1=%s c2=%s", c_one_minus_psi, c_psi_prime)
    return DominanceCertificate(c_one_minus_psi, c_psi_prime, grid.size)

"""
Seeded ensembles of smooth, rapidly decaying test functions.

Every member is a Gaussian envelope of width sigma times either a random
trigonometric polynomial ("band-limited-gaussian") or a random product of
Hermite functions ("gaussian-hermite"). Every `adversarial_every`-th member
concentrates its oscillation at the highest mode of a single axis. Members
whose mass near the box boundary exceeds half the tail limit are redrawn.
"""
import logging

import numpy as np
from scipy.special import eval_hermite, factorial

from hypocert.const import TAIL_LIMIT
from hypocert.models import TestFunctionSpec
from hypocert.spectral.grid import SpectralGrid

_LOGGER = logging.getLogger(__name__)

TRIGONOMETRIC_TERMS = 4
HERMITE_MAX_DEGREE = 3
MAX_DRAWS = 16


def _envelope(grid: SpectralGrid, width: float) -> np.ndarray:
    radius2 = sum(grid.axis_coordinate(axis) ** 2 for axis in range(grid.dim))
    return np.exp(-radius2 / (2.0 * width ** 2))


def _band_limited_member(grid: SpectralGrid, spec: TestFunctionSpec, rng: np.random.Generator, adversarial_axis: int | None) -> np.ndarray:
    phase_field = np.zeros(grid.shape)
    if adversarial_axis is not None:
        modes = np.zeros((1, grid.dim))
        modes[0, adversarial_axis] = spec.max_mode
        amplitudes = np.ones(1)
    else:
        modes = rng.integers(-spec.max_mode, spec.max_mode + 1, size=(TRIGONOMETRIC_TERMS, grid.dim))
        amplitudes = rng.standard_normal(TRIGONOMETRIC_TERMS)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=len(amplitudes))
    for mode, amplitude, phase in zip(modes, amplitudes, phases):
        argument = sum(2.0 * np.pi * mode[axis] * grid.axis_coordinate(axis) / grid.box_length for axis in range(grid.dim))
        phase_field = phase_field + amplitude * np.cos(argument + phase)
    return _envelope(grid, spec.envelope_width) * phase_field


def _hermite_function(degree: int, x: np.ndarray, width: float) -> np.ndarray:
    t = x / width
    normalization = 1.0 / np.sqrt(2.0 ** degree * factorial(degree) * np.sqrt(np.pi))
    return normalization * eval_hermite(degree, t) * np.exp(-t ** 2 / 2.0)


def _hermite_member(grid: SpectralGrid, spec: TestFunctionSpec, rng: np.random.Generator, adversarial_axis: int | None) -> np.ndarray:
    max_degree = min(spec.max_mode, HERMITE_MAX_DEGREE)
    # keeps the widest Hermite function inside the same envelope
    width = spec.envelope_width / np.sqrt(1.0 + max_degree)
    member = np.zeros(grid.shape)
    for _ in range(2):
        degrees = rng.integers(0, max_degree + 1, size=grid.dim)
        if adversarial_axis is not None:
            degrees[:] = 0
            degrees[adversarial_axis] = max_degree
        factor = np.ones(grid.shape)
        for axis in range(grid.dim):
            factor = factor * _hermite_function(int(degrees[axis]), grid.axis_coordinate(axis), width)
        member = member + rng.standard_normal() * factor
    return member


def generate_ensemble(spec: TestFunctionSpec, grid: SpectralGrid) -> list[np.ndarray]:
    """The `spec.size` members of the ensemble on `grid`, reproducible from the seed."""
    rng = np.random.default_rng(spec.seed)
    members = []
    for index in range(spec.size):
        adversarial = (index + 1) % spec.adversarial_every == 0
        axis = grid.x_axes[index % len(grid.x_axes)] if adversarial else None
        draw = _band_limited_member if spec.kind == "band-limited-gaussian" else _hermite_member
        for attempt in range(MAX_DRAWS):
            member = draw(grid, spec, rng, axis)
            # redraw members whose mass leans towards the box boundary
            if grid.tail_fraction(member, grid.x_axes) <= 0.5 * TAIL_LIMIT:
                break
            _LOGGER.debug("Redrawing ensemble member %s (attempt %s)", index, attempt + 1)
        else:
            _LOGGER.warning(
                "Ensemble member %s still leans towards the box boundary after %s draws (tail fraction %s)",
                index, MAX_DRAWS, grid.tail_fraction(member, grid.x_axes),
            )
        scale = grid.norm(member)
        members.append(member / scale if scale > 0.0 else member)
    _LOGGER.debug("Generated %s %s members on %s", len(members), spec.kind, grid.describe())
    return members

"""
Fourier multipliers and the transport part of L on a SpectralGrid.

Responsible for:
- applying m(D) for any symbol callable on (m, n) frequency arrays
- applying Bx . grad (plus d_t on time dependent grids) with the tail guard
- bracket symbols <M xi>^p used by the estimate norms
"""
import logging
from typing import Callable

import numpy as np

from hypocert.const import TAIL_LIMIT
from hypocert.errors import TailViolation
from hypocert.models import OperatorSpec
from hypocert.spectral.grid import SpectralGrid

_LOGGER = logging.getLogger(__name__)

Symbol = Callable[[np.ndarray], np.ndarray]


def frequency_points(grid: SpectralGrid) -> tuple[np.ndarray, tuple[int, ...]]:
    """Angular frequencies 2 pi xi of the spatial axes as an (m, n) array, and the broadcast shape."""
    axes = grid.x_axes
    mesh = np.meshgrid(*[2.0 * np.pi * grid.frequencies(axis) for axis in axes], indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    shape = ((1,) if grid.time_axis else ()) + tuple(grid.axis_points(axis) for axis in axes)
    return points, shape


def symbol_on_grid(grid: SpectralGrid, symbol: Symbol) -> np.ndarray:
    """
    Symbol values on the frequency grid, broadcastable against fftn output.

    At Nyquist frequencies the value is averaged with the one at the opposite
    frequency, so odd symbols vanish there.
    """
    points, shape = frequency_points(grid)
    values = np.asarray(symbol(points), dtype=complex)
    nyquist = np.isclose(np.abs(points), np.pi / grid.spacing)
    on_nyquist = np.any(nyquist, axis=1)
    if np.any(on_nyquist):
        mirrored = np.where(nyquist, -points, points)[on_nyquist]
        values[on_nyquist] = 0.5 * (values[on_nyquist] + np.asarray(symbol(mirrored), dtype=complex))
    return values.reshape(shape)


def apply_multiplier(grid: SpectralGrid, u: np.ndarray, symbol: Symbol) -> np.ndarray:
    """m(D) u; the result is complex."""
    return grid.inverse(grid.transform(u) * symbol_on_grid(grid, symbol))


def bracket_symbol(matrix: np.ndarray | None, power: float) -> Symbol:
    """xi -> <M xi>^power, with M the identity when matrix is None."""
    def symbol(points: np.ndarray) -> np.ndarray:
        image = points if matrix is None else points @ matrix.T
        return (1.0 + np.einsum("ij,ij->i", image, image)) ** (power / 2.0)

    return symbol


def block_projector(dim: int, start: int, stop: int) -> np.ndarray:
    projector = np.zeros((dim, dim))
    projector[np.arange(start, stop), np.arange(start, stop)] = 1.0
    return projector


def _check_dimensions(spec: OperatorSpec, grid: SpectralGrid) -> None:
    expected = spec.dim + (1 if spec.time_dependent else 0)
    if grid.dim != expected or grid.time_axis != spec.time_dependent:
        raise ValueError(f"grid of dimension {grid.dim} does not fit operator of dimension {spec.dim}")


def transport_axes(spec: OperatorSpec, grid: SpectralGrid) -> list[int]:
    """Grid axes x_j entering Bx, i.e. the columns of B that are not identically zero."""
    columns = np.flatnonzero(np.any(spec.B != 0.0, axis=0))
    return [grid.x_axes[j] for j in columns]


def check_tail(spec: OperatorSpec, grid: SpectralGrid, u: np.ndarray, limit: float = TAIL_LIMIT) -> float:
    fraction = grid.tail_fraction(u, transport_axes(spec, grid))
    if fraction > limit:
        raise TailViolation("test function carries mass near the box boundary", tail_fraction=fraction, limit=limit)
    return fraction


def spectral_derivative(grid: SpectralGrid, u_hat: np.ndarray, axis: int) -> np.ndarray:
    """d/dx_axis u from its transform, with the Nyquist mode dropped."""
    factor = 2j * np.pi * grid.axis_frequency(axis)
    factor = np.where(grid.nyquist_mask(axis), 0.0, factor)
    return grid.inverse(u_hat * factor)


def apply_transport(spec: OperatorSpec, grid: SpectralGrid, u: np.ndarray, check: bool = True) -> np.ndarray:
    """(d_t +) Bx . grad u on a real field u."""
    _check_dimensions(spec, grid)
    if check:
        check_tail(spec, grid, u)
    u_hat = grid.transform(u)
    out = np.zeros(u.shape)
    x_axes = grid.x_axes
    for i in range(spec.dim):
        if not np.any(spec.B[i] != 0.0):
            continue
        coefficient = sum(spec.B[i, j] * grid.axis_coordinate(x_axes[j]) for j in range(spec.dim) if spec.B[i, j] != 0.0)
        out = out + coefficient * spectral_derivative(grid, u_hat, x_axes[i]).real
    if grid.time_axis:
        out = out + spectral_derivative(grid, u_hat, 0).real
    return out


def skew_adjointness_defect(spec: OperatorSpec, grid: SpectralGrid, u: np.ndarray) -> float:
    """|Re <Lu, u> + Tr(B) / 2 |u|^2| / |u|^2, which vanishes for exact transport."""
    lu = apply_transport(spec, grid, u)
    mass = grid.norm(u) ** 2
    if mass == 0.0:
        return 0.0
    return abs(grid.inner(lu, u).real + 0.5 * np.trace(spec.B) * mass) / mass

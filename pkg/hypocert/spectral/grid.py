"""
Periodic box used for spectral verification.

Coordinates are x_k = (k - N/2) L / N on every axis, frequencies come from
fftfreq(N, L / N) and a Fourier multiplier m(D) acts through m(2 pi xi).
The centering phase of the transform is dropped: it cancels in every
multiplier application and does not change any modulus.
"""
import logging

import numpy as np
import scipy.fft

from hypocert.const import BOX_LENGTH, TAIL_BAND
from hypocert.errors import ConfigError

_LOGGER = logging.getLogger(__name__)


class SpectralGrid:
    """
    An N^d periodic grid of side L; with time_axis, axis 0 is time and the rest are space.

    axis_factors stretches single axes to f N points over a side f L, keeping the
    spacing L / N on every axis.
    """

    dim: int
    box_length: float
    points_per_axis: int
    time_axis: bool
    axis_factors: tuple[int, ...]

    def __init__(
        self,
        dim: int,
        box_length: float = BOX_LENGTH,
        points_per_axis: int = 64,
        time_axis: bool = False,
        axis_factors: tuple[int, ...] | None = None,
    ) -> None:
        n = int(points_per_axis)
        if n < 2 or n & (n - 1):
            raise ConfigError("grid_points", points_per_axis=n)
        self.dim = int(dim)
        self.box_length = float(box_length)
        self.points_per_axis = n
        self.time_axis = bool(time_axis)
        factors = tuple(int(f) for f in axis_factors) if axis_factors is not None else (1,) * self.dim
        if len(factors) != self.dim or min(factors) < 1:
            raise ValueError(f"axis factors {factors} do not fit a grid of dimension {self.dim}")
        self.axis_factors = factors

    @property
    def spacing(self) -> float:
        return self.box_length / self.points_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.points_per_axis * f for f in self.axis_factors)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def x_axes(self) -> list[int]:
        return list(range(1, self.dim)) if self.time_axis else list(range(self.dim))

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    def axis_points(self, axis: int) -> int:
        return self.points_per_axis * self.axis_factors[axis]

    def axis_length(self, axis: int) -> float:
        return self.box_length * self.axis_factors[axis]

    def coordinates(self, axis: int = 0) -> np.ndarray:
        n = self.axis_points(axis)
        return (np.arange(n) - n // 2) * self.spacing

    def frequencies(self, axis: int = 0) -> np.ndarray:
        return scipy.fft.fftfreq(self.axis_points(axis), d=self.spacing)

    def _along(self, axis: int, values: np.ndarray) -> np.ndarray:
        shape = [1] * self.dim
        shape[axis] = values.size
        return values.reshape(shape)

    def axis_coordinate(self, axis: int) -> np.ndarray:
        """Coordinate of `axis`, shaped to broadcast over the grid."""
        return self._along(axis, self.coordinates(axis))

    def axis_frequency(self, axis: int) -> np.ndarray:
        return self._along(axis, self.frequencies(axis))

    def nyquist_mask(self, axis: int) -> np.ndarray:
        n = self.axis_points(axis)
        mask = np.zeros(n, dtype=bool)
        mask[n // 2] = True
        return self._along(axis, mask)

    def transform(self, u: np.ndarray) -> np.ndarray:
        return scipy.fft.fftn(u, workers=1) * self.cell_volume

    def inverse(self, u_hat: np.ndarray) -> np.ndarray:
        return scipy.fft.ifftn(u_hat, workers=1) / self.cell_volume

    def inner(self, u: np.ndarray, v: np.ndarray) -> complex:
        """<u, v> = sum u conj(v) dx."""
        return complex(np.vdot(v, u) * self.cell_volume)

    def norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(np.sum(np.abs(u) ** 2) * self.cell_volume))

    def fourier_weight(self) -> float:
        """Quadrature weight of one frequency cell, the product of 1 / L_axis."""
        return 1.0 / float(np.prod([self.axis_length(axis) for axis in range(self.dim)]))

    def fourier_norm(self, u_hat: np.ndarray) -> float:
        return float(np.sqrt(np.sum(np.abs(u_hat) ** 2) * self.fourier_weight()))

    def plancherel_error(self, u: np.ndarray) -> float:
        """Relative mismatch between the physical and the Fourier side L^2 norms."""
        physical = self.norm(u)
        if physical == 0.0:
            return 0.0
        return abs(self.fourier_norm(self.transform(u)) - physical) / physical

    def tail_fraction(self, u: np.ndarray, axes: list[int]) -> float:
        """Share of |u|^2 lying in the band |x_j| >= 7 L_j / 16 along any of the given axes."""
        total = float(np.sum(np.abs(u) ** 2))
        if total == 0.0 or not axes:
            return 0.0
        band = np.zeros(u.shape, dtype=bool)
        for axis in axes:
            band |= np.abs(self.axis_coordinate(axis)) >= TAIL_BAND * self.axis_length(axis)
        return float(np.sum(np.abs(u[band]) ** 2)) / total

    def _stretch(self, factor: int, axes: list[int] | None) -> tuple[int, ...]:
        axes = range(self.dim) if axes is None else axes
        return tuple(f * factor if axis in axes else f for axis, f in enumerate(self.axis_factors))

    def padded(self, factor: int, axes: list[int] | None = None) -> "SpectralGrid":
        """The grid stretched `factor` times along `axes` (default: every axis)."""
        return SpectralGrid(self.dim, self.box_length, self.points_per_axis, self.time_axis, self._stretch(factor, axes))

    def _window(self, factor: int, axes: list[int] | None) -> tuple[slice, ...]:
        window = []
        for axis, stretched in enumerate(self._stretch(factor, axes)):
            n = self.axis_points(axis)
            offset = (self.points_per_axis * stretched) // 2 - n // 2
            window.append(slice(offset, offset + n))
        return tuple(window)

    def embed(self, u: np.ndarray, factor: int, axes: list[int] | None = None) -> np.ndarray:
        """Zero pad u into the grid padded(factor, axes), keeping x = 0 at the same node."""
        out = np.zeros(self.padded(factor, axes).shape, dtype=u.dtype)
        out[self._window(factor, axes)] = u
        return out

    def restrict(self, u: np.ndarray, factor: int, axes: list[int] | None = None) -> np.ndarray:
        return u[self._window(factor, axes)]

    def describe(self) -> dict:
        description = {
            "dim": self.dim,
            "box_length": self.box_length,
            "points_per_axis": self.points_per_axis,
            "time_axis": self.time_axis,
        }
        if any(f != 1 for f in self.axis_factors):
            description["axis_factors"] = list(self.axis_factors)
        return description

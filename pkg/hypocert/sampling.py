"""
Deterministic point sets for pointwise verification.

Responsible for:
- log spaced radii and low discrepancy unit directions
- isotropic and block product frequency grids for a PointwiseRegion
"""
import itertools
import logging

import numpy as np
from scipy.stats import norm, qmc

from hypocert.errors import InvalidRegion
from hypocert.models import PointwiseRegion

_LOGGER = logging.getLogger(__name__)

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


def log_radii(r_min: float, r_max: float, count: int) -> np.ndarray:
    return np.geomspace(r_min, r_max, count)


def sphere_directions(dim: int, count: int) -> np.ndarray:
    """
    Deterministic, well spread unit vectors in R^dim.

    dim 1 gives the two signs, dim 2 equally spaced angles, dim 3 a Fibonacci
    lattice, higher dimensions an unscrambled Halton sequence pushed through the
    normal quantile function and normalized.
    """
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    index = np.arange(count, dtype=float)
    if dim == 2:
        angles = 2.0 * np.pi * (index + 0.5) / count
        return np.column_stack([np.cos(angles), np.sin(angles)])
    if dim == 3:
        z = 1.0 - (2.0 * index + 1.0) / count
        radius = np.sqrt(1.0 - z * z)
        phi = GOLDEN_ANGLE * index
        return np.column_stack([radius * np.cos(phi), radius * np.sin(phi), z])

    sampler = qmc.Halton(d=dim, scramble=False)
    uniform = sampler.random(count + 1)[1:]
    gaussian = norm.ppf(np.clip(uniform, 1e-12, 1.0 - 1e-12))
    return gaussian / np.linalg.norm(gaussian, axis=1, keepdims=True)


def _block_directions(blocks: list[int], count: int) -> list[np.ndarray]:
    """Per block unit directions; blocks of size one use all sign patterns."""
    if all(size == 1 for size in blocks):
        signs = np.array(list(itertools.product([1.0, -1.0], repeat=len(blocks))))
        return [signs[:, [i]] for i in range(len(blocks))]

    sampler = qmc.Halton(d=sum(blocks), scramble=False)
    gaussian = norm.ppf(np.clip(sampler.random(count + 1)[1:], 1e-12, 1.0 - 1e-12))
    directions = []
    start = 0
    for size in blocks:
        part = gaussian[:, start:start + size]
        directions.append(part / np.linalg.norm(part, axis=1, keepdims=True))
        start += size
    return directions


def region_points(region: PointwiseRegion, dim: int) -> np.ndarray:
    """Every sample frequency of the region, as a (m, dim) array."""
    if region.blocks is None:
        radii = log_radii(region.r_min, region.r_max, region.n_radial)
        directions = sphere_directions(dim, region.n_angular)
        points = (radii[:, None, None] * directions[None, :, :]).reshape(-1, dim)
    else:
        if sum(region.blocks) != dim:
            raise InvalidRegion("region_blocks", blocks=region.blocks, dim=dim)
        radii = log_radii(region.r_min, region.r_max, region.n_radial)
        if region.include_zero:
            radii = np.concatenate([[0.0], radii])
        directions = _block_directions(region.blocks, region.n_angular)
        n_dirs = directions[0].shape[0]

        # radius tuples x direction tuples, one radius per block
        radius_grid = np.array(list(itertools.product(range(len(radii)), repeat=len(region.blocks))))
        chunks = []
        for d in range(n_dirs):
            columns = [
                radii[radius_grid[:, b]][:, None] * directions[b][d][None, :]
                for b in range(len(region.blocks))
            ]
            chunks.append(np.hstack(columns))
        points = np.vstack(chunks)
        points = points[np.any(points != 0.0, axis=1)]

    if region.constraint is not None:
        points = points[region.constraint(points)]
    _LOGGER.debug("Region %s produced %s points", region.to_dict(), len(points))
    return points


def inner_mask(points: np.ndarray, region: PointwiseRegion) -> np.ndarray:
    """Points of the inner sub box |xi| <= r_max / 10, used for drift diagnostics."""
    return np.linalg.norm(points, axis=1) <= region.r_max / 10.0

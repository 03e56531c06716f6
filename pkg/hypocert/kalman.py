"""
Kalman rank condition for the pair (B, Q).

Responsible for:
- the iterated directions Q (B^T)^j
- the Kalman index r, the least j for which the stacked directions span R^n
- the coercivity constant of sum_j |Q (B^T)^j xi|^2 on the unit sphere
"""
import logging

import numpy as np
import scipy.linalg

from hypocert.errors import NotControllable
from hypocert.models import IteratedDirections, OperatorSpec
from hypocert.sampling import sphere_directions

_LOGGER = logging.getLogger(__name__)


def iterated_directions(spec: OperatorSpec, count: int | None = None) -> IteratedDirections:
    """Return Q (B^T)^j for j = 0 .. count - 1 (count defaults to n)."""
    count = spec.dim if count is None else count
    mats = [spec.Q.copy()]
    for _ in range(1, count):
        mats.append(mats[-1] @ spec.B.T)
    return IteratedDirections(mats=mats, rank_tol=spec.rank_tol)


def stacked_rank(mats: list[np.ndarray], rank_tol: float) -> int:
    """Numerical rank of the vertically stacked matrices, relative to the largest singular value."""
    singular_values = scipy.linalg.svdvals(np.vstack(mats))
    if singular_values.size == 0 or singular_values[0] == 0.0:
        return 0
    return int(np.sum(singular_values > rank_tol * singular_values[0]))


def kalman_rank_holds(spec: OperatorSpec) -> bool:
    directions = iterated_directions(spec)
    return stacked_rank(directions.mats, spec.rank_tol) == spec.dim


def kalman_index(spec: OperatorSpec) -> int:
    """The least r with rank [Q; Q B^T; ...; Q (B^T)^r] = n."""
    directions = iterated_directions(spec)
    for r in range(spec.dim):
        if stacked_rank(directions.mats[: r + 1], spec.rank_tol) == spec.dim:
            _LOGGER.debug("Kalman index of %s is %s", spec, r)
            return r
    raise NotControllable(
        "the Kalman rank condition fails",
        rank=stacked_rank(directions.mats, spec.rank_tol),
        dim=spec.dim,
    )


def gram_sum(directions: IteratedDirections, r: int) -> np.ndarray:
    """sum_{j <= r} (Q (B^T)^j)^T Q (B^T)^j."""
    return sum(m.T @ m for m in directions.mats[: r + 1])


def directional_coercivity_constant(directions: IteratedDirections, r: int, samples: int = 512) -> float:
    """
    Minimum of sum_{j <= r} |Q (B^T)^j xi|^2 over unit xi.

    The minimum is taken over deterministic sphere samples together with the
    eigenvectors of the Gram sum, so it matches the smallest eigenvalue. Values
    below rank_tol times the largest eigenvalue count as zero.
    """
    if r >= len(directions.mats):
        raise ValueError(f"directions only available up to index {len(directions.mats) - 1}")
    gram = gram_sum(directions, r)
    eigenvalues, eigenvectors = scipy.linalg.eigh(gram)
    dim = gram.shape[0]
    points = np.vstack([sphere_directions(dim, samples), eigenvectors.T])
    values = np.einsum("ij,jk,ik->i", points, gram, points)
    minimum = float(values.min())
    if minimum <= directions.rank_tol * max(float(eigenvalues.max()), 0.0):
        return 0.0
    return minimum

"""
Values of the iterated directions y_j = Q (B^T)^j xi on a batch of frequencies.

Responsible for:
- the dot products y_j . y_k and the Japanese bracket <xi>
- their derivatives along the transport field B^T xi . grad, which acts as
  D y_j = y_{j+1} and D <xi>^p = p <xi>^(p - 2) (B^T xi . xi)
"""
import numpy as np


def rowdot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", a, b)


class DirectionalFrame:
    """The vectors y_0 .. y_{len(mats) - 1} at every row of xi."""

    xi: np.ndarray
    field_xi: np.ndarray

    def __init__(self, mats: list[np.ndarray], field: np.ndarray, xi: np.ndarray) -> None:
        self.xi = xi
        self.field_xi = xi @ field.T
        self._y = [xi @ m.T for m in mats]
        self._bracket2 = 1.0 + rowdot(xi, xi)
        self._xi_drift = rowdot(self.field_xi, xi)

    @property
    def size(self) -> int:
        return len(self._y)

    def y(self, j: int) -> np.ndarray:
        return self._y[j]

    def dot(self, j: int, k: int) -> np.ndarray:
        return rowdot(self._y[j], self._y[k])

    def norm2(self, j: int) -> np.ndarray:
        return self.dot(j, j)

    def d_dot(self, j: int, k: int) -> np.ndarray:
        """D (y_j . y_k)."""
        return self.dot(j + 1, k) + self.dot(j, k + 1)

    def bracket_power(self, p: float) -> np.ndarray:
        """<xi>^p."""
        return self._bracket2 ** (p / 2.0)

    def d_bracket_power(self, p: float) -> np.ndarray:
        """D <xi>^p."""
        return p * self._bracket2 ** ((p - 2.0) / 2.0) * self._xi_drift

    @property
    def xi_norm2(self) -> np.ndarray:
        return self._bracket2 - 1.0

    @property
    def xi_drift(self) -> np.ndarray:
        """B^T xi . xi."""
        return self._xi_drift

import unittest

import numpy as np

from hypocert.const import EXIT_PRECONDITION
from hypocert.errors import InvalidOperator, NotControllable
from hypocert.kalman import (
    directional_coercivity_constant,
    iterated_directions,
    kalman_index,
    kalman_rank_holds,
)
from hypocert.models import OperatorSpec
from hypocert.multipliers.particular import chain_operator


def kinetic() -> OperatorSpec:
    return OperatorSpec([[0.0, 1.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 1.0]])


def random_pair(rng: np.random.Generator, max_dim: int = 6) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian B with a diagonal 0/1 Q of random rank, so the index varies."""
    n = int(rng.integers(2, max_dim + 1))
    B = rng.standard_normal((n, n))
    Q = np.zeros((n, n))
    for k in rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False):
        Q[k, k] = 1.0
    return B, Q


def brute_force_index(B: np.ndarray, Q: np.ndarray) -> int | None:
    n = B.shape[0]
    block = Q.copy()
    stacked = [block]
    for r in range(n):
        if np.linalg.matrix_rank(np.vstack(stacked)) == n:
            return r
        block = block @ B.T
        stacked.append(block)
    return None


def conjugated(B: np.ndarray, Q: np.ndarray, rotation: np.ndarray) -> OperatorSpec:
    rotated = rotation @ Q @ rotation.T
    return OperatorSpec(rotation @ B @ rotation.T, 0.5 * (rotated + rotated.T))


class KalmanTest(unittest.TestCase):

    def test_kinetic_index(self):
        """
        Transport in position driven by velocity needs one commutator.
        """
        spec = kinetic()
        assert kalman_rank_holds(spec)
        assert kalman_index(spec) == 1

    def test_full_rank_q(self):
        spec = OperatorSpec([[0.0, 1.0], [-1.0, 0.0]], np.eye(2))
        assert kalman_index(spec) == 0

    def test_chain_index(self):
        spec = chain_operator(n_block=1, time_dependent=True)
        assert spec.dim == 3
        assert spec.time_dependent
        assert kalman_index(spec) == 2

    def test_not_controllable(self):
        """
        B = 0 never reaches the second coordinate.
        """
        spec = OperatorSpec(np.zeros((2, 2)), [[1.0, 0.0], [0.0, 0.0]])
        assert not kalman_rank_holds(spec)
        with self.assertRaises(NotControllable) as caught:
            kalman_index(spec)
        assert caught.exception.exit_code == EXIT_PRECONDITION
        assert caught.exception.record["error"] == "NotControllable"
        assert caught.exception.record["rank"] == 1

    def test_index_matches_matrix_rank(self):
        """
        Compare the index against a brute force rank count on random pairs.
        """
        rng = np.random.default_rng(5)
        for _ in range(500):
            B, Q = random_pair(rng)
            expected = brute_force_index(B, Q)
            assert expected is not None
            assert kalman_index(OperatorSpec(B, Q)) == expected

    def test_index_invariance(self):
        """
        Scaling Q and rotating the frame keep the index.
        """
        rng = np.random.default_rng(6)
        for _ in range(100):
            B, Q = random_pair(rng)
            index = kalman_index(OperatorSpec(B, Q))
            for scale in (1e-3, 7.0, 1e3):
                assert kalman_index(OperatorSpec(B, scale * Q)) == index
            rotation, _ = np.linalg.qr(rng.standard_normal(B.shape))
            assert kalman_index(conjugated(B, Q, rotation)) == index

    def test_coercivity_follows_index(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            B, Q = random_pair(rng, max_dim=5)
            spec = OperatorSpec(B, Q)
            index = kalman_index(spec)
            directions = iterated_directions(spec)
            for r in range(spec.dim):
                assert (directional_coercivity_constant(directions, r) > 0.0) == (r >= index), (B, Q, r)

    def test_iterated_directions(self):
        spec = kinetic()
        mats = iterated_directions(spec, count=3).mats
        assert len(mats) == 3
        np.testing.assert_array_equal(mats[0], spec.Q)
        np.testing.assert_array_equal(mats[1], spec.Q @ spec.B.T)
        np.testing.assert_array_equal(mats[2], np.zeros((2, 2)))

    def test_coercivity_constant(self):
        """
        For the kinetic pair the Gram sum at r = 1 is the identity.
        """
        directions = iterated_directions(kinetic())
        assert abs(directional_coercivity_constant(directions, 1) - 1.0) < 1e-12
        assert directional_coercivity_constant(directions, 0) == 0.0
        with self.assertRaises(ValueError):
            directional_coercivity_constant(directions, 2)

    def test_invalid_operator(self):
        with self.assertRaises(InvalidOperator) as caught:
            OperatorSpec(np.zeros((2, 2)), [[1.0, 0.0], [0.0, -1.0]])
        assert caught.exception.key == "q_not_psd"

        with self.assertRaises(InvalidOperator) as caught:
            OperatorSpec(np.zeros((2, 2)), [[1.0, 0.5], [0.0, 1.0]])
        assert caught.exception.key == "q_not_symmetric"

        with self.assertRaises(InvalidOperator) as caught:
            OperatorSpec(np.zeros((2, 2)), np.eye(3))
        assert caught.exception.key == "matrix_shape"

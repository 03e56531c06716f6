import asyncio
import unittest
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from hypocert.const import ESTIMATE_DISCLAIMER, PAD_FACTOR, PADDED_POINTS_LIMIT
from hypocert.errors import ConfigError, TailViolation
from hypocert.exponents import exponent_chain
from hypocert.models import CutoffSpec, ExponentInput, MultiplierSymbol, OperatorSpec, TestFunctionSpec
from hypocert.multipliers.gr import build_gr
from hypocert.multipliers.particular import chain_operator
from hypocert.spectral.checks import (
    async_commutator_identity_check,
    async_measure_estimate,
    commutator_identity_check,
    commutator_padding,
    estimate_terms,
    measure_estimate,
)
from hypocert.spectral.ensembles import generate_ensemble
from hypocert.spectral.grid import SpectralGrid
from hypocert.spectral.operators import (
    apply_multiplier,
    apply_transport,
    bracket_symbol,
    check_tail,
    skew_adjointness_defect,
    transport_axes,
)


def kinetic(time_dependent: bool = False) -> OperatorSpec:
    return OperatorSpec([[0.0, 1.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 1.0]], time_dependent=time_dependent)


def gaussian(grid: SpectralGrid, width: float = 1.0) -> np.ndarray:
    radius2 = sum(grid.axis_coordinate(axis) ** 2 for axis in range(grid.dim))
    return np.exp(-radius2 / (2.0 * width ** 2))


def polynomial_symbol(field: np.ndarray) -> MultiplierSymbol:
    """g = xi_1 xi_2, whose derivative along (0, xi_1) is xi_1^2."""
    return MultiplierSymbol(
        "xi_1 xi_2",
        field,
        lambda xi: xi[:, 0] * xi[:, 1],
        lambda xi: {"main": xi[:, 0] ** 2},
    )


def constant_symbol(field: np.ndarray) -> MultiplierSymbol:
    return MultiplierSymbol(
        "three",
        field,
        lambda xi: np.full(xi.shape[0], 3.0),
        lambda xi: {"main": np.zeros(xi.shape[0])},
    )


class GridTest(unittest.TestCase):

    def test_plancherel(self):
        grid = SpectralGrid(2, 16.0, 64)
        u = gaussian(grid) * np.cos(2.0 * grid.axis_coordinate(0))
        assert grid.plancherel_error(u) <= 1e-12

    def test_power_of_two(self):
        with self.assertRaises(ConfigError) as caught:
            SpectralGrid(2, 16.0, 48)
        assert caught.exception.key == "grid_points"

    def test_embed_restrict(self):
        grid = SpectralGrid(2, 16.0, 32)
        u = gaussian(grid)
        padded = grid.embed(u, 2)
        assert padded.shape == (64, 64)
        np.testing.assert_array_equal(grid.restrict(padded, 2), u)
        # x = 0 stays on the same node
        big = grid.padded(2)
        assert big.coordinates()[32] == 0.0 and grid.coordinates()[16] == 0.0
        assert padded[32, 32] == 1.0
        assert abs(big.norm(padded) - grid.norm(u)) <= 1e-14 * grid.norm(u)

    def test_stretch_single_axis(self):
        grid = SpectralGrid(2, 16.0, 32)
        u = gaussian(grid)
        stretched = grid.padded(4, axes=[1])
        assert stretched.shape == (32, 128)
        assert stretched.spacing == grid.spacing
        assert stretched.axis_length(1) == 64.0
        assert stretched.fourier_weight() == 1.0 / (16.0 * 64.0)
        assert stretched.describe()["axis_factors"] == [1, 4]
        assert "axis_factors" not in grid.describe()

        embedded = grid.embed(u, 4, axes=[1])
        assert embedded.shape == (32, 128)
        assert embedded[16, 64] == 1.0
        np.testing.assert_array_equal(grid.restrict(embedded, 4, axes=[1]), u)
        assert abs(stretched.norm(embedded) - grid.norm(u)) <= 1e-14 * grid.norm(u)
        assert abs(stretched.plancherel_error(embedded)) <= 1e-12
        # the tail band follows the stretched side
        assert stretched.tail_fraction(embedded, [1]) == 0.0

    def test_tail_fraction(self):
        grid = SpectralGrid(2, 16.0, 64)
        assert grid.tail_fraction(gaussian(grid), [0, 1]) < 1e-20
        flat = np.ones(grid.shape)
        assert grid.tail_fraction(flat, [1]) > 0.1
        assert grid.tail_fraction(flat, []) == 0.0


class MultiplierTest(unittest.TestCase):

    grid: SpectralGrid

    def setUp(self) -> None:
        self.grid = SpectralGrid(2, 16.0, 64)
        self.u = gaussian(self.grid) * (1.0 + 0.5 * np.sin(self.grid.axis_coordinate(1)))

    def test_identity(self):
        out = apply_multiplier(self.grid, self.u, lambda xi: np.ones(xi.shape[0]))
        assert self.grid.norm(out - self.u) <= 1e-13 * self.grid.norm(self.u)

    def test_products_commute(self):
        first = bracket_symbol(None, 0.5)
        second = bracket_symbol(np.diag([1.0, 0.0]), -1.0)
        ab = apply_multiplier(self.grid, apply_multiplier(self.grid, self.u, first), second)
        ba = apply_multiplier(self.grid, apply_multiplier(self.grid, self.u, second), first)
        assert self.grid.norm(ab - ba) <= 1e-12 * self.grid.norm(ab)

    def test_bracket_on_constant_mode(self):
        values = bracket_symbol(np.diag([0.0, 1.0]), 2.0)(np.array([[5.0, 0.0], [0.0, 2.0]]))
        np.testing.assert_allclose(values, [1.0, 5.0])

    def test_plane_wave_eigenfunction(self):
        first = bracket_symbol(None, 0.5)
        x, v = self.grid.axis_coordinate(0), self.grid.axis_coordinate(1)
        for modes in ((0, 0), (3, -5), (-12, 7)):
            wave = np.exp(2j * np.pi * (modes[0] * x + modes[1] * v) / self.grid.box_length)
            value = first(2.0 * np.pi * np.array([modes], dtype=float) / self.grid.box_length)[0]
            out = apply_multiplier(self.grid, wave, first)
            assert np.max(np.abs(out - value * wave)) <= 1e-12 * value

    def test_product_is_composition(self):
        first = bracket_symbol(None, 0.5)
        second = bracket_symbol(np.diag([1.0, 0.0]), -1.0)
        composed = apply_multiplier(self.grid, apply_multiplier(self.grid, self.u, first), second)
        product = apply_multiplier(self.grid, self.u, lambda xi: first(xi) * second(xi))
        assert self.grid.norm(product - composed) <= 1e-12 * self.grid.norm(product)


class TransportTest(unittest.TestCase):

    def test_zero_drift(self):
        spec = OperatorSpec(np.zeros((2, 2)), np.eye(2))
        grid = SpectralGrid(2, 16.0, 32)
        out = apply_transport(spec, grid, gaussian(grid))
        assert np.all(out == 0.0)
        assert transport_axes(spec, grid) == []

    def test_kinetic_closed_form(self):
        """
        (d_t + v d_x) exp(-(t^2 + x^2 + v^2)/2) = -(t + v x) exp(...).
        """
        spec = kinetic(time_dependent=True)
        grid = SpectralGrid(3, 16.0, 64, time_axis=True)
        u = gaussian(grid)
        t, x, v = (grid.axis_coordinate(axis) for axis in range(3))
        expected = -(t + v * x) * u
        out = apply_transport(spec, grid, u)
        assert np.max(np.abs(out - expected)) <= 1e-8
        assert transport_axes(spec, grid) == [2]

    def test_grid_must_fit(self):
        with self.assertRaises(ValueError):
            apply_transport(kinetic(time_dependent=True), SpectralGrid(2, 16.0, 32), np.zeros((32, 32)))

    def test_skew_adjointness(self):
        rotation = OperatorSpec([[0.0, 1.0], [-1.0, 0.0]], np.eye(2))
        grid = SpectralGrid(2, 16.0, 64)
        u = gaussian(grid) * (1.0 + 0.3 * np.cos(grid.axis_coordinate(0) - 0.5 * grid.axis_coordinate(1)))
        assert skew_adjointness_defect(rotation, grid, u) <= 1e-9
        assert skew_adjointness_defect(kinetic(), grid, u) <= 1e-9

    def test_tail_guard(self):
        grid = SpectralGrid(2, 16.0, 32)
        with self.assertRaises(TailViolation) as caught:
            apply_transport(kinetic(), grid, np.ones(grid.shape))
        assert caught.exception.exit_code == 5
        # the guard only looks at axes that enter Bx
        flat_in_x = np.exp(-grid.axis_coordinate(1) ** 2 / 2.0) * np.ones(grid.shape)
        assert check_tail(kinetic(), grid, flat_in_x) < 1e-9


class EnsembleTest(unittest.TestCase):

    def test_reproducible(self):
        grid = SpectralGrid(2, 16.0, 32)
        spec = TestFunctionSpec("band-limited-gaussian", seed=7, size=6, max_mode=4)
        first = generate_ensemble(spec, grid)
        second = generate_ensemble(spec, grid)
        assert len(first) == 6
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a, b)
            assert abs(grid.norm(a) - 1.0) <= 1e-12
            assert np.isrealobj(a)

        other = generate_ensemble(TestFunctionSpec("band-limited-gaussian", seed=8, size=6, max_mode=4), grid)
        assert not np.array_equal(first[0], other[0])

    def test_members_respect_tail_guard(self):
        grid = SpectralGrid(2, 16.0, 64)
        for kind in ("band-limited-gaussian", "gaussian-hermite"):
            for u in generate_ensemble(TestFunctionSpec(kind, seed=1, size=8), grid):
                check_tail(kinetic(), grid, u)
                assert grid.tail_fraction(u, [0, 1]) <= 1e-9

    def test_exhausted_redraws_are_logged(self):
        grid = SpectralGrid(2, 16.0, 32)
        wide = TestFunctionSpec("band-limited-gaussian", seed=1, size=2, envelope_width=6.0)
        with self.assertLogs("hypocert.spectral.ensembles", level="WARNING") as logs:
            members = generate_ensemble(wide, grid)
        assert len(members) == 2
        assert len(logs.records) == 2
        assert "after 16 draws" in logs.output[0]

    def test_invalid_kind(self):
        with self.assertRaises(ConfigError):
            TestFunctionSpec("uniform", seed=1)


class CommutatorTest(unittest.TestCase):

    def test_constant_multiplier(self):
        spec = kinetic()
        grid = SpectralGrid(2, 16.0, 32)
        ensemble = generate_ensemble(TestFunctionSpec("band-limited-gaussian", seed=2, size=4, max_mode=4), grid)
        report = commutator_identity_check(spec, grid, constant_symbol(spec.field), ensemble)
        assert len(report.errors) == 4
        assert report.max_error <= 1e-10
        assert report.max_time_contribution == 0.0

    def test_polynomial_multiplier(self):
        """
        2 Re <v d_x u, D_x D_v u> = |D_x u|^2 for the kinetic field.
        """
        spec = kinetic()
        grid = SpectralGrid(2, 16.0, 64)
        ensemble = [gaussian(grid)] + generate_ensemble(
            TestFunctionSpec("gaussian-hermite", seed=4, size=3), grid
        )
        report = commutator_identity_check(spec, grid, polynomial_symbol(spec.field), ensemble)
        assert report.max_error <= 1e-8
        assert report.to_dict()["pad_factor"] == PAD_FACTOR
        assert report.padded_axes == [1]

    def test_time_derivative_drops_out(self):
        spec = kinetic(time_dependent=True)
        grid = SpectralGrid(3, 16.0, 32, time_axis=True)
        ensemble = generate_ensemble(TestFunctionSpec("band-limited-gaussian", seed=5, size=3, max_mode=4), grid)
        report = commutator_identity_check(spec, grid, constant_symbol(spec.field), ensemble)
        assert report.max_time_contribution <= 1e-10
        assert report.max_error <= 1e-10

    def test_tail_violation(self):
        spec = kinetic()
        grid = SpectralGrid(2, 16.0, 32)
        with self.assertRaises(TailViolation):
            commutator_identity_check(spec, grid, constant_symbol(spec.field), [np.ones(grid.shape)])

    def test_kinetic_multiplier_converges(self):
        """
        g_1 of the kinetic model on 20 Gaussian members: the identity holds to 1e-6
        at N = 128 and the error falls at least fourfold from N = 64.

        Half of the members oscillate in x close to the N = 64 Nyquist mode,
        where d_x is cut off, so only the finer grid resolves them.
        """
        spec = kinetic()
        g = build_gr(spec, exponent_chain(ExponentInput(1.0, 1, [0.0], [0.0])), CutoffSpec(), index=1)
        members = TestFunctionSpec("band-limited-gaussian", seed=9, size=20, max_mode=28, adversarial_every=1)
        errors = {}
        for n in (64, 128):
            grid = SpectralGrid(2, 16.0, n)
            report = commutator_identity_check(spec, grid, g, generate_ensemble(members, grid))
            assert report.padded_axes == [1]
            errors[n] = report.max_error
        assert errors[128] <= 1e-6
        assert errors[128] <= errors[64] / 4.0
        assert report.passed()

    def test_kinetic_multiplier_ignores_periodic_wrap(self):
        """
        A well resolved ensemble keeps the identity once the velocity axis is stretched.
        """
        spec = kinetic()
        g = build_gr(spec, exponent_chain(ExponentInput(1.0, 1, [0.0], [0.0])), CutoffSpec(), index=1)
        grid = SpectralGrid(2, 16.0, 64)
        ensemble = generate_ensemble(TestFunctionSpec("band-limited-gaussian", seed=7, size=8), grid)
        stretched = commutator_identity_check(spec, grid, g, ensemble)
        assert stretched.max_error <= 1e-6
        short = commutator_identity_check(spec, grid, g, ensemble, pad_factor=1)
        assert short.max_error > stretched.max_error
        assert short.max_wrap_fraction > stretched.max_wrap_fraction

    def test_kinetic_multiplier_time_derivative(self):
        spec = kinetic(time_dependent=True)
        g = build_gr(spec, exponent_chain(ExponentInput(1.0, 1, [0.0], [0.0])), CutoffSpec(), index=1)
        grid = SpectralGrid(3, 16.0, 32, time_axis=True)
        ensemble = generate_ensemble(TestFunctionSpec("band-limited-gaussian", seed=5, size=3, max_mode=4), grid)
        report = commutator_identity_check(spec, grid, g, ensemble)
        assert report.padded_axes == [2]
        assert report.max_time_contribution <= 1e-10

    def test_padding_budget(self):
        spec = chain_operator(1, False)
        grid = SpectralGrid(3, 16.0, 64)
        factor, axes = commutator_padding(spec, grid, 16)
        assert axes == transport_axes(spec, grid)
        assert grid.size * factor ** len(axes) <= PADDED_POINTS_LIMIT
        assert factor < 16
        assert commutator_padding(kinetic(), SpectralGrid(2, 16.0, 128), 16) == (16, [1])


class EstimateTest(unittest.IsolatedAsyncioTestCase):

    def setUp(self) -> None:
        self.spec = kinetic()
        self.grid = SpectralGrid(2, 16.0, 64)
        self.chain = exponent_chain(ExponentInput(1.0, 1, [0.0], [0.0]))
        self.ensemble = generate_ensemble(TestFunctionSpec("band-limited-gaussian", seed=3, size=6, max_mode=4), self.grid)

    def test_terms(self):
        terms = estimate_terms(self.spec, self.chain, "theorem-main")
        assert [name for name, _, _ in terms.rhs] == ["Q_lambda0", "L_0"]
        assert [on_lu for _, _, on_lu in terms.rhs] == [False, True]
        assert len(estimate_terms(self.spec, self.chain, "theorem-anisotropic").lhs) == 2
        assert estimate_terms(self.spec, self.chain, "conjectured-strong").conjectural

        chain = exponent_chain(ExponentInput(1.0, 2, [0.0, 0.0], [0.0, 0.0]))
        terms = estimate_terms(chain_operator(1, False), chain, "prop-particular-2")
        assert [name for name, _, _ in terms.rhs] == ["x1_lambda1", "L"]
        with self.assertRaises(ValueError):
            estimate_terms(self.spec, self.chain, "theorem-unknown")

    def test_scale_invariance(self):
        base = measure_estimate(self.spec, self.grid, self.chain, self.ensemble, "theorem-main")
        for alpha in (1e-3, 1e3):
            scaled = measure_estimate(self.spec, self.grid, self.chain, [alpha * u for u in self.ensemble], "theorem-main")
            np.testing.assert_allclose(scaled.ratios, base.ratios, rtol=1e-12)
        assert base.ensemble_size == 6
        assert base.note == ESTIMATE_DISCLAIMER
        assert all(np.isfinite(base.ratios))

    def test_kinetic_estimate_resolution(self):
        """
        200 members at N = 128: a finite worst ratio that moves by less than 15% at N = 256.
        """
        members = TestFunctionSpec("band-limited-gaussian", seed=7, size=200)
        worst = {}
        for n in (128, 256):
            grid = SpectralGrid(2, 16.0, n)
            measurement = measure_estimate(self.spec, grid, self.chain, generate_ensemble(members, grid), "kinetic-example")
            assert measurement.ensemble_size == 200
            assert np.isfinite(measurement.max_ratio)
            worst[n] = measurement.max_ratio
        assert abs(worst[256] - worst[128]) <= 0.15 * worst[128]

    def test_position_independent_member(self):
        """
        For u constant in x, <D_x>^(1/2) u = u while <D_v> u dominates u.
        """
        v = self.grid.axis_coordinate(1)
        u = np.exp(-v ** 2 / 2.0) * np.ones(self.grid.shape)
        measurement = measure_estimate(self.spec, self.grid, self.chain, [u], "kinetic-example")
        assert measurement.ratios[0] <= 1.0 + 1e-12
        assert measurement.rhs_terms["L"][0] <= 1e-12 * measurement.rhs_terms["v_p"][0]

    def test_conjectural_note(self):
        measurement = measure_estimate(self.spec, self.grid, self.chain, self.ensemble[:2], "conjectured-strong")
        assert measurement.conjectural
        assert measurement.note.startswith(ESTIMATE_DISCLAIMER)
        assert "conjectural" in measurement.note

    async def test_async_matches_sync(self):
        expected = measure_estimate(self.spec, self.grid, self.chain, self.ensemble, "theorem-anisotropic")
        with ThreadPoolExecutor(max_workers=3) as executor:
            measured = await async_measure_estimate(
                self.spec, self.grid, self.chain, self.ensemble, "theorem-anisotropic", executor=executor
            )
        assert measured.ratios == expected.ratios
        assert measured.lhs_norms == expected.lhs_norms

    async def test_async_commutator(self):
        g = constant_symbol(self.spec.field)
        expected = commutator_identity_check(self.spec, self.grid, g, self.ensemble[:3])
        measured, = await asyncio.gather(async_commutator_identity_check(self.spec, self.grid, g, self.ensemble[:3]))
        assert measured.errors == expected.errors

"""
Operator level checks on test function ensembles.

Responsible for:
- the commutator identity behind the multiplier method,
      2 Re <Lu, g(D)u> + Tr(B) <u, g(D)u> = <(B^T xi . grad g)(D) u, u>
- per sample measurements of the a priori estimates
- fanning ensemble members out to a thread pool with ordered reduction
"""
import asyncio
import logging
from concurrent.futures import Executor
from typing import Callable

import numpy as np

from hypocert.const import (
    COMMUTATOR_TOLERANCE,
    ESTIMATE_DISCLAIMER,
    PAD_FACTOR,
    PADDED_POINTS_LIMIT,
    TIME_CONTRIBUTION_TOLERANCE,
)
from hypocert.exponents import kinetic_gain_exponent
from hypocert.kalman import iterated_directions
from hypocert.models import EstimateMeasurement, ExponentChain, MultiplierSymbol, OperatorSpec
from hypocert.spectral.grid import SpectralGrid
from hypocert.spectral.operators import (
    apply_multiplier,
    apply_transport,
    block_projector,
    bracket_symbol,
    check_tail,
    symbol_on_grid,
    transport_axes,
)

_LOGGER = logging.getLogger(__name__)

MIN_ENSEMBLE = 50
CONJECTURAL = ("conjectured-strong",)


class CommutatorReport:
    """Relative errors of the commutator identity per ensemble member."""

    errors: list[float]
    time_contributions: list[float]
    wrap_fractions: list[float]
    pad_factor: int
    padded_axes: list[int]

    def __init__(
        self,
        errors: list[float],
        time_contributions: list[float],
        pad_factor: int,
        resolution: dict,
        wrap_fractions: list[float] | None = None,
        padded_axes: list[int] | None = None,
    ) -> None:
        self.errors = errors
        self.time_contributions = time_contributions
        self.pad_factor = pad_factor
        self.resolution = resolution
        self.wrap_fractions = wrap_fractions if wrap_fractions is not None else []
        self.padded_axes = padded_axes if padded_axes is not None else []

    @property
    def max_error(self) -> float:
        return max(self.errors) if self.errors else 0.0

    @property
    def max_time_contribution(self) -> float:
        return max(self.time_contributions) if self.time_contributions else 0.0

    @property
    def max_wrap_fraction(self) -> float:
        return max(self.wrap_fractions) if self.wrap_fractions else 0.0

    def passed(self, tolerance: float = COMMUTATOR_TOLERANCE, time_tolerance: float = TIME_CONTRIBUTION_TOLERANCE) -> bool:
        return self.max_error <= tolerance and self.max_time_contribution <= time_tolerance

    def to_dict(self) -> dict:
        return {
            "max_error": self.max_error,
            "errors": self.errors,
            "max_time_contribution": self.max_time_contribution,
            "max_wrap_fraction": self.max_wrap_fraction,
            "pad_factor": self.pad_factor,
            "padded_axes": self.padded_axes,
            "resolution": self.resolution,
            "identity": "2 Re<Lu, g(D)u> + Tr(B) <u, g(D)u> = <(B^T xi . grad g)(D)u, u>",
        }


def commutator_padding(spec: OperatorSpec, grid: SpectralGrid, requested: int = PAD_FACTOR) -> tuple[int, list[int]]:
    """
    Padding factor and axes for the commutator check.

    Only the axes whose coordinate enters Bx are stretched. The factor is
    halved until the padded grid holds at most PADDED_POINTS_LIMIT nodes.
    """
    axes = transport_axes(spec, grid)
    factor = max(int(requested), 1)
    while factor > 1 and grid.size * factor ** len(axes) > PADDED_POINTS_LIMIT:
        factor //= 2
    if factor < requested:
        _LOGGER.warning("Commutator padding reduced from %s to %s to stay within %s grid nodes", requested, factor, PADDED_POINTS_LIMIT)
    return factor, axes


def _commutator_member(
    spec: OperatorSpec,
    grid: SpectralGrid,
    g: MultiplierSymbol,
    u: np.ndarray,
    pad_factor: int,
    axes: list[int],
) -> tuple[float, float, float]:
    check_tail(spec, grid, u)
    padded = grid.padded(pad_factor, axes)
    U = grid.embed(u, pad_factor, axes)
    lu = apply_transport(spec, padded, U, check=False)
    gu = apply_multiplier(padded, U, g.eval)
    u_hat = padded.transform(U)
    h_values = symbol_on_grid(padded, g.directional_derivative).real
    g_values = symbol_on_grid(padded, g.eval).real

    lhs = 2.0 * padded.inner(lu, gu).real + np.trace(spec.B) * padded.inner(U, gu).real
    rhs = float(np.sum(h_values * np.abs(u_hat) ** 2) * padded.fourier_weight())
    scale = (
        2.0 * padded.norm(lu) * padded.norm(gu)
        + abs(np.trace(spec.B)) * padded.norm(U) * padded.norm(gu)
        + float(np.sum(np.abs(h_values) * np.abs(u_hat) ** 2) * padded.fourier_weight())
    )
    # share of g(D)u reaching the outer band of the stretched axes
    wrap = padded.tail_fraction(gu, axes)
    if scale == 0.0:
        return 0.0, 0.0, wrap
    error = abs(lhs - rhs) / scale

    time_part = 0.0
    if padded.time_axis:
        transport_only = OperatorSpec(np.zeros_like(spec.B), spec.Q, time_dependent=True)
        dt = apply_transport(transport_only, padded, U, check=False)
        weighted = float(np.sum(np.abs(g_values) * np.abs(u_hat) ** 2) * padded.fourier_weight())
        time_part = abs(2.0 * padded.inner(dt, gu).real) / max(weighted, np.finfo(float).tiny)
    return error, time_part, wrap


def _commutator_report(grid: SpectralGrid, results: list[tuple[float, float, float]], pad_factor: int, axes: list[int]) -> CommutatorReport:
    return CommutatorReport(
        [e for e, _, _ in results],
        [t for _, t, _ in results],
        pad_factor,
        grid.describe(),
        wrap_fractions=[w for _, _, w in results],
        padded_axes=axes,
    )


def commutator_identity_check(
    spec: OperatorSpec,
    grid: SpectralGrid,
    g: MultiplierSymbol,
    ensemble: list[np.ndarray],
    pad_factor: int = PAD_FACTOR,
) -> CommutatorReport:
    """
    Check the commutator identity member by member.

    Each member is zero padded along the axes entering Bx, so that g(D)u has
    room to decay before the coordinate x_j wraps around the periodic box.
    """
    factor, axes = commutator_padding(spec, grid, pad_factor)
    results = [_commutator_member(spec, grid, g, u, factor, axes) for u in ensemble]
    report = _commutator_report(grid, results, factor, axes)
    _LOGGER.debug("Commutator identity for %s: max error %s", g.description, report.max_error)
    return report


class EstimateTerms:
    """Left side symbols (summed as norms) and right side (name, symbol, acts on Lu) triples."""

    def __init__(self, lhs: list[Callable], rhs: list[tuple[str, Callable, bool]], conjectural: bool = False) -> None:
        self.lhs = lhs
        self.rhs = rhs
        self.conjectural = conjectural


def _product(*symbols: Callable) -> Callable:
    def symbol(points: np.ndarray) -> np.ndarray:
        value = np.ones(points.shape[0])
        for factor in symbols:
            value = value * factor(points)
        return value

    return symbol


def estimate_terms(spec: OperatorSpec, chain: ExponentChain, which: str, n_block: int | None = None) -> EstimateTerms:
    """The norms entering the estimate `which`."""
    n = spec.dim
    r = chain.r
    lam = chain.lambdas
    if which in ("theorem-main", "theorem-anisotropic", "conjectured-strong"):
        mats = iterated_directions(spec, count=r + 2).mats
        rhs = [("Q_lambda0", bracket_symbol(spec.Q, lam[0]), False)]
        if which == "conjectured-strong":
            for j in range(r):
                rhs.append((f"L_{j}", _product(bracket_symbol(mats[j], chain.q[j]), bracket_symbol(mats[j + 1], chain.s[j])), True))
        else:
            for j in range(r):
                rhs.append((f"L_{j}", _product(bracket_symbol(mats[j], chain.q[j]), bracket_symbol(None, chain.s[j])), True))
        if which == "theorem-main":
            return EstimateTerms([bracket_symbol(None, lam[r])], rhs)
        lhs = [bracket_symbol(mats[j], lam[j]) for j in range(r + 1)]
        return EstimateTerms(lhs, rhs, conjectural=which in CONJECTURAL)

    if which in ("prop-particular-1", "prop-particular-2"):
        m = n_block if n_block is not None else n // 3
        blocks = [block_projector(n, k * m, (k + 1) * m) for k in range(3)]
        low = 0 if which == "prop-particular-1" else 1
        high = low + 1
        return EstimateTerms(
            [bracket_symbol(blocks[high], lam[high])],
            [
                (f"x{low}_lambda{low}", bracket_symbol(blocks[low], lam[low]), False),
                ("L", _product(bracket_symbol(blocks[low], chain.q[low]), bracket_symbol(blocks[high], chain.s[low])), True),
            ],
        )

    if which == "kinetic-example":
        half = n // 2
        position = block_projector(n, 0, half)
        velocity = block_projector(n, half, n)
        p, q, s = lam[0], chain.q[0], chain.s[0]
        gain = kinetic_gain_exponent(p, q, s)
        return EstimateTerms(
            [bracket_symbol(position, gain)],
            [
                ("v_p", bracket_symbol(velocity, p), False),
                ("L", _product(bracket_symbol(position, s), bracket_symbol(velocity, q)), True),
            ],
        )
    raise ValueError(f"unknown estimate {which!r}")


def _estimate_member(spec: OperatorSpec, grid: SpectralGrid, terms: EstimateTerms, u: np.ndarray) -> tuple[float, dict[str, float]]:
    lu = apply_transport(spec, grid, u)
    lhs = sum(grid.norm(apply_multiplier(grid, u, symbol)) for symbol in terms.lhs)
    rhs = {}
    for name, symbol, on_lu in terms.rhs:
        rhs[name] = grid.norm(apply_multiplier(grid, lu if on_lu else u, symbol))
    return lhs, rhs


def _collect(which: str, grid: SpectralGrid, terms: EstimateTerms, results: list[tuple[float, dict[str, float]]]) -> EstimateMeasurement:
    lhs_norms = [lhs for lhs, _ in results]
    names = [name for name, _, _ in terms.rhs]
    rhs_terms = {name: [rhs[name] for _, rhs in results] for name in names}
    ratios = []
    for lhs, rhs in results:
        total = sum(rhs[name] for name in names)
        ratios.append(lhs / total if total > 0.0 else float("inf"))
    note = ESTIMATE_DISCLAIMER
    if terms.conjectural:
        note += " This estimate is conjectural; the measurement is exploratory."
    return EstimateMeasurement(
        which=which,
        lhs_norms=lhs_norms,
        rhs_terms=rhs_terms,
        ratios=ratios,
        resolution=grid.describe(),
        ensemble_size=len(results),
        conjectural=terms.conjectural,
        note=note,
    )


def measure_estimate(
    spec: OperatorSpec,
    grid: SpectralGrid,
    chain: ExponentChain,
    ensemble: list[np.ndarray],
    which: str,
    n_block: int | None = None,
) -> EstimateMeasurement:
    """Per sample LHS, RHS terms and ratios of the estimate `which`."""
    if len(ensemble) < MIN_ENSEMBLE:
        _LOGGER.warning("Ensemble of %s members is below the recommended %s", len(ensemble), MIN_ENSEMBLE)
    terms = estimate_terms(spec, chain, which, n_block)
    results = [_estimate_member(spec, grid, terms, u) for u in ensemble]
    return _collect(which, grid, terms, results)


async def async_measure_estimate(
    spec: OperatorSpec,
    grid: SpectralGrid,
    chain: ExponentChain,
    ensemble: list[np.ndarray],
    which: str,
    executor: Executor | None = None,
    n_block: int | None = None,
) -> EstimateMeasurement:
    """measure_estimate with the members spread over an executor; results keep ensemble order."""
    loop = asyncio.get_running_loop()
    terms = estimate_terms(spec, chain, which, n_block)
    tasks = [loop.run_in_executor(executor, _estimate_member, spec, grid, terms, u) for u in ensemble]
    results = await asyncio.gather(*tasks)
    return _collect(which, grid, terms, list(results))


async def async_commutator_identity_check(
    spec: OperatorSpec,
    grid: SpectralGrid,
    g: MultiplierSymbol,
    ensemble: list[np.ndarray],
    pad_factor: int = PAD_FACTOR,
    executor: Executor | None = None,
) -> CommutatorReport:
    factor, axes = commutator_padding(spec, grid, pad_factor)
    loop = asyncio.get_running_loop()
    tasks = [loop.run_in_executor(executor, _commutator_member, spec, grid, g, u, factor, axes) for u in ensemble]
    results = await asyncio.gather(*tasks)
    return _commutator_report(grid, list(results), factor, axes)

"""
The leading multiplier g_r and the basic case r = 1.

    g_r(xi) = (y_{r-1} . y_r) / <xi>^(2 - lambda_r) * psi(|y_{r-1}|^2 / <xi>^(2 lambda_r / lambda_{r-1}))

with y_j = Q (B^T)^j xi. Its derivative along B^T xi splits into the main term
|y_r|^2 / <xi>^(2 - lambda_r) psi and three error terms A1, A2, A3.
"""
import logging

import numpy as np

from hypocert.const import CONSTANT_CAP
from hypocert.cutoffs import eval_psi, eval_psi_prime, eval_w_prime
from hypocert.kalman import iterated_directions
from hypocert.models import CutoffSpec, ExponentChain, InequalityCertificate, MultiplierSymbol, OperatorSpec, PointwiseRegion
from hypocert.multipliers.certificates import fit_constants, measure_ratio
from hypocert.multipliers.frame import DirectionalFrame
from hypocert.multipliers.symbols import zero_symbol
from hypocert.sampling import log_radii, region_points, sphere_directions

_LOGGER = logging.getLogger(__name__)


class _GrParts:
    """Shared pieces of g_r at a batch of points."""

    def __init__(self, frame: DirectionalFrame, r: int, lam_r: float, lam_prev: float) -> None:
        self.frame = frame
        self.exponent = 2.0 * lam_r / lam_prev
        self.numerator = frame.dot(r - 1, r)
        self.weight = frame.bracket_power(lam_r - 2.0)
        self.argument = frame.norm2(r - 1) * frame.bracket_power(-self.exponent)

    def d_argument(self, r: int) -> np.ndarray:
        frame = self.frame
        return (
            2.0 * frame.dot(r, r - 1) * frame.bracket_power(-self.exponent)
            + frame.norm2(r - 1) * frame.d_bracket_power(-self.exponent)
        )


def build_gr(spec: OperatorSpec, chain: ExponentChain, cut: CutoffSpec, index: int | None = None) -> MultiplierSymbol:
    """The multiplier g_r for r = index (default: the chain length)."""
    r = chain.r if index is None else index
    if r < 1:
        return zero_symbol(spec.field, "g_0 = 0")
    mats = iterated_directions(spec, count=r + 2).mats
    lam_r, lam_prev = chain.lambdas[r], chain.lambdas[r - 1]

    def parts(xi: np.ndarray) -> _GrParts:
        return _GrParts(DirectionalFrame(mats, spec.field, xi), r, lam_r, lam_prev)

    def evaluate(xi: np.ndarray) -> np.ndarray:
        p = parts(xi)
        return p.numerator * p.weight * eval_psi(cut, p.argument)

    def terms(xi: np.ndarray) -> dict[str, np.ndarray]:
        p = parts(xi)
        frame = p.frame
        psi = eval_psi(cut, p.argument)
        return {
            "main": frame.norm2(r) * p.weight * psi,
            "A1": frame.dot(r - 1, r + 1) * p.weight * psi,
            "A2": p.numerator * frame.d_bracket_power(lam_r - 2.0) * psi,
            "A3": p.numerator * p.weight * eval_psi_prime(cut, p.argument) * p.d_argument(r),
        }

    def arguments(xi: np.ndarray) -> list:
        return [(parts(xi).argument, (cut.psi_inner, cut.psi_outer))]

    return MultiplierSymbol(f"g_{r}", spec.field, evaluate, terms, arguments)


def verify_gr_bound(
    symbol: MultiplierSymbol,
    chain: ExponentChain,
    region: PointwiseRegion,
    spec: OperatorSpec,
    index: int | None = None,
    cap: float = CONSTANT_CAP,
) -> InequalityCertificate:
    """|g_r| <= c <y_{r-1}>^{q_{r-1}} <xi>^{s_{r-1}}."""
    r = chain.r if index is None else index
    points = region_points(region, spec.dim)
    frame = DirectionalFrame(iterated_directions(spec, count=r + 1).mats, spec.field, points)
    rhs = (1.0 + frame.norm2(r - 1)) ** (chain.q[r - 1] / 2.0) * frame.bracket_power(chain.s[r - 1])
    return measure_ratio(f"g{r}_bound", points, np.abs(symbol.eval(points)), rhs, region, "c", cap)


def target_estimate_certificate(
    name: str,
    spec: OperatorSpec,
    chain: ExponentChain,
    symbol: MultiplierSymbol,
    region: PointwiseRegion,
    index: int | None = None,
    extra_base: bool = False,
    cap: float = CONSTANT_CAP,
) -> InequalityCertificate:
    """
    <xi>^{lambda_r} <= c2 <Q xi>^{lambda0} + c3 Dg.

    With extra_base the base also carries <Q xi>^{q_0} <xi>^{s_0}, the form used
    in the basic case.
    """
    r = chain.r if index is None else index
    points = region_points(region, spec.dim)
    frame = DirectionalFrame([spec.Q], spec.field, points)
    q_bracket2 = 1.0 + frame.norm2(0)
    base = q_bracket2 ** (chain.lambda0 / 2.0)
    if extra_base and r >= 1:
        base = base + q_bracket2 ** (chain.q[0] / 2.0) * frame.bracket_power(chain.s[0])
    lhs = frame.bracket_power(chain.lambdas[r])
    derivatives = {"c3": symbol.directional_derivative(points)} if r >= 1 else {}
    certificate = fit_constants(name, points, lhs, base, derivatives, region, base_name="c2", cap=cap)
    if r == 0:
        certificate.measured_constants["c3"] = 0.0
    return certificate


def chi_derivative_certificate(
    spec: OperatorSpec,
    chain: ExponentChain,
    cut: CutoffSpec,
    region: PointwiseRegion,
    which: str = "psi",
    index: int | None = None,
    cap: float = CONSTANT_CAP,
) -> InequalityCertificate:
    """|D chi(X)| <= c <xi>^{1 - lambda_r / lambda_{r-1}} |chi'(X)| for chi = psi or w and X the g_r argument."""
    r = chain.r if index is None else index
    points = region_points(region, spec.dim)
    frame = DirectionalFrame(iterated_directions(spec, count=r + 2).mats, spec.field, points)
    parts = _GrParts(frame, r, chain.lambdas[r], chain.lambdas[r - 1])
    if which == "psi":
        slope = np.abs(eval_psi_prime(cut, parts.argument))
    elif which == "w":
        slope = np.abs(eval_w_prime(cut, parts.argument))
    else:
        raise ValueError(f"unknown cutoff {which!r}")
    lhs = slope * np.abs(parts.d_argument(r))
    rhs = slope * frame.bracket_power(1.0 - chain.lambdas[r] / chain.lambdas[r - 1])
    return measure_ratio(f"cutoff_derivative_{which}", points, lhs, rhs, region, "c", cap)


def basic_case_threshold(
    spec: OperatorSpec,
    chain: ExponentChain,
    cut: CutoffSpec,
    c0: float,
    region: PointwiseRegion,
    iterations: int = 40,
) -> float:
    """
    Least radius r0 beyond which |Q B^T xi|^2 >= (c0 / 4) |xi|^2 wherever |Q xi|^2 <= psi_inner <xi>^{2 lambda_1 / lambda_0}.

    Radii without any constrained sample direction count as satisfied. The
    crossing is located on a log grid and refined by bisection.
    """
    mats = iterated_directions(spec, count=2).mats
    exponent = 2.0 * chain.lambdas[1] / chain.lambdas[0]
    directions = sphere_directions(spec.dim, 4 * region.n_angular)
    target = c0 / 4.0

    def satisfied(radius: float) -> bool:
        points = radius * directions
        frame = DirectionalFrame(mats, spec.field, points)
        constrained = frame.norm2(0) <= cut.psi_inner * frame.bracket_power(exponent)
        if region.constraint is not None:
            constrained &= region.constraint(points)
        if not np.any(constrained):
            return True
        return bool(np.min(frame.norm2(1)[constrained] / frame.xi_norm2[constrained]) >= target)

    radii = log_radii(region.r_min, region.r_max, 4 * region.n_radial)
    flags = [satisfied(radius) for radius in radii]
    if all(flags):
        return float(radii[0])
    last_bad = max(i for i, ok in enumerate(flags) if not ok)
    if last_bad == len(radii) - 1:
        return float("inf")
    low, high = float(radii[last_bad]), float(radii[last_bad + 1])
    for _ in range(iterations):
        middle = np.sqrt(low * high)
        if satisfied(middle):
            high = middle
        else:
            low = middle
    _LOGGER.debug("Basic case threshold r0=%s", high)
    return high


def basic_case_certificates(
    spec: OperatorSpec,
    chain: ExponentChain,
    cut: CutoffSpec,
    symbol: MultiplierSymbol,
    region: PointwiseRegion,
    c0: float,
    cap: float = CONSTANT_CAP,
) -> list[InequalityCertificate]:
    """Certificates of the r = 1 construction."""
    certificates = [
        verify_gr_bound(symbol, chain, region, spec, index=1, cap=cap),
        target_estimate_certificate("basic_case_target", spec, chain, symbol, region, index=1, extra_base=True, cap=cap),
        chi_derivative_certificate(spec, chain, cut, region, "psi", index=1, cap=cap),
        chi_derivative_certificate(spec, chain, cut, region, "w", index=1, cap=cap),
    ]
    r0 = basic_case_threshold(spec, chain, cut, c0, region)
    certificates.append(InequalityCertificate(
        name="basic_case_threshold",
        measured_constants={"r0": r0, "c0": c0},
        worst_point=None,
        worst_ratio=r0,
        passed=bool(np.isfinite(r0)),
        grid=region,
        notes="radius beyond which |Q B^T xi|^2 >= c0/4 |xi|^2 on the psi plateau",
    ))
    return certificates

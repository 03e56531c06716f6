"""
Assembly of the full multiplier for an arbitrary Kalman index.

Responsible for:
- r = 0 (nothing to build), r = 1 (g = g_1) and r >= 2, where
  g = g_r + psi_0(|y_r|^2 / |xi|^2) w_0(|xi|^2) h_{r-1} + p_r
  and h_{r-1} is the same construction one level down on
  Omega_1 = {|y_r|^2 < c |xi|^2}
- the certificates of every level
- the derivative bounds of the cutoff factors and the Omega_1 sensitivity sweep
"""
import logging

import numpy as np

from hypocert.const import CONSTANT_CAP, DEFAULT_EPS
from hypocert.cutoffs import eval_psi, eval_psi_prime, eval_w, eval_w_prime
from hypocert.kalman import directional_coercivity_constant, iterated_directions, kalman_index
from hypocert.models import (
    CutoffSpec,
    ExponentChain,
    GammaSchedule,
    InequalityCertificate,
    MultiplierSymbol,
    OperatorSpec,
    PointwiseRegion,
    PointwiseSettings,
)
from hypocert.multipliers.certificates import fit_constants, measure_ratio
from hypocert.multipliers.frame import DirectionalFrame
from hypocert.multipliers.gr import (
    basic_case_certificates,
    build_gr,
    chi_derivative_certificate,
    target_estimate_certificate,
    verify_gr_bound,
)
from hypocert.multipliers.ladder import Ladder, build_correctors, build_ladder, ladder_certificates, search_gammas
from hypocert.multipliers.symbols import linear_combination, zero_symbol
from hypocert.sampling import region_points

_LOGGER = logging.getLogger(__name__)


class AssembledMultiplier:
    """The full multiplier of one level together with its parts, schedule and certificates."""

    symbol: MultiplierSymbol
    schedule: GammaSchedule
    certificates: list[InequalityCertificate]
    components: dict[str, MultiplierSymbol]
    index: int
    c0: float
    ladder: Ladder | None

    def __init__(self, symbol, schedule, certificates, components, index, c0, ladder=None) -> None:
        self.symbol = symbol
        self.schedule = schedule
        self.certificates = certificates
        self.components = components
        self.index = index
        self.c0 = c0
        self.ladder = ladder


def omega_ratio(spec: OperatorSpec, r: int):
    """xi -> |y_r|^2 / |xi|^2 (zero at xi = 0)."""
    mats = iterated_directions(spec, count=r + 1).mats

    def ratio(points: np.ndarray) -> np.ndarray:
        frame = DirectionalFrame(mats, spec.field, points)
        size = frame.xi_norm2
        out = np.zeros(points.shape[0])
        nonzero = size > 0.0
        out[nonzero] = frame.norm2(r)[nonzero] / size[nonzero]
        return out

    return ratio


def localize(spec: OperatorSpec, h: MultiplierSymbol, r: int, c_omega: float) -> MultiplierSymbol:
    """psi_0(|y_r|^2 / |xi|^2) w_0(|xi|^2) h with psi_0 switching off on (c/4, c/2) and w_0 switching on on (1/4, 1/2)."""
    cut = CutoffSpec(c_omega / 4.0, c_omega / 2.0, 0.25, 0.5)
    mats = iterated_directions(spec, count=r + 2).mats

    def parts(xi: np.ndarray):
        frame = DirectionalFrame(mats, spec.field, xi)
        size = frame.xi_norm2
        far = eval_w(cut, size) > 0.0
        Z = np.zeros_like(size)
        dZ = np.zeros_like(size)
        Z[far] = frame.norm2(r)[far] / size[far]
        dZ[far] = (
            2.0 * frame.dot(r + 1, r)[far] / size[far]
            - 2.0 * frame.norm2(r)[far] * frame.xi_drift[far] / size[far] ** 2
        )
        w0 = eval_w(cut, size)
        psi0 = np.where(far, eval_psi(cut, Z), 0.0)
        weight = psi0 * w0
        d_weight = (
            np.where(far, eval_psi_prime(cut, Z), 0.0) * dZ * w0
            + psi0 * eval_w_prime(cut, size) * 2.0 * frame.xi_drift
        )
        return Z, size, weight, d_weight

    def evaluate(xi: np.ndarray) -> np.ndarray:
        _, _, weight, _ = parts(xi)
        return weight * h.eval(xi)

    def terms(xi: np.ndarray) -> dict[str, np.ndarray]:
        _, _, weight, d_weight = parts(xi)
        combined = {"localizer": d_weight * h.eval(xi)}
        for name, values in h.terms(xi).items():
            combined[f"h.{name}"] = weight * values
        return combined

    def arguments(xi: np.ndarray) -> list:
        Z, size, _, _ = parts(xi)
        return [(Z, (cut.psi_inner, cut.psi_outer)), (size, (cut.w_inner, cut.w_outer))] + h.arguments(xi)

    return MultiplierSymbol(f"localized h_{r - 1}", spec.field, evaluate, terms, arguments)


def _rename(certificates: list[InequalityCertificate], prefix: str) -> list[InequalityCertificate]:
    for certificate in certificates:
        certificate.name = f"{prefix}{certificate.name}"
    return certificates


def global_bound_certificate(spec, chain, symbol, region, r, cap=CONSTANT_CAP) -> InequalityCertificate:
    """|g| <= c sum_{j < r} <y_j>^{q_j} <xi>^{s_j}."""
    points = region_points(region, spec.dim)
    frame = DirectionalFrame(iterated_directions(spec, count=r).mats, spec.field, points)
    rhs = np.zeros(points.shape[0])
    for j in range(r):
        rhs += (1.0 + frame.norm2(j)) ** (chain.q[j] / 2.0) * frame.bracket_power(chain.s[j])
    return measure_ratio("global_bound", points, np.abs(symbol.eval(points)), rhs, region, "c1", cap)


def instrumental_certificate(spec, chain, ladder, corrector, region, eps, cap=CONSTANT_CAP) -> InequalityCertificate:
    """|y_{r-1}|^{lambda_{r-1}} W_1 - eps <xi>^{lambda_r} <= c <Q xi>^{lambda_0} + c_p Dp_r."""
    r = ladder.r
    points = region_points(region, spec.dim)
    fields = ladder.fields(points)
    frame = fields.frame
    lhs = frame.norm2(r - 1) ** (chain.lambdas[r - 1] / 2.0) * fields.W[1] - eps * frame.bracket_power(chain.lambdas[r])
    base = (1.0 + frame.norm2(0)) ** (chain.lambda0 / 2.0)
    return fit_constants(
        "corrector_instrumental", points, lhs, base,
        {"c_p": corrector.directional_derivative(points)}, region, "c", cap,
    )


def localizer_support_certificate(spec, localized, r, c_omega, region) -> InequalityCertificate:
    """The localized lower level multiplier must vanish identically outside Omega_1."""
    points = region_points(region, spec.dim)
    outside = omega_ratio(spec, r)(points) >= c_omega
    leak = float(np.max(np.abs(localized.eval(points[outside])), initial=0.0))
    return InequalityCertificate(
        name="localizer_support",
        measured_constants={"leak": leak, "c_omega": c_omega},
        worst_point=None,
        worst_ratio=leak,
        passed=leak == 0.0,
        grid=region,
        notes=f"{int(np.sum(outside))} sample points outside Omega_{r - 1}",
    )


def build_full_multiplier(
    spec: OperatorSpec,
    chain: ExponentChain,
    cut: CutoffSpec,
    eps: float = DEFAULT_EPS,
    settings: PointwiseSettings | None = None,
    region: PointwiseRegion | None = None,
    c0: float | None = None,
    omega_fraction: float | None = None,
    top_level: bool = True,
) -> AssembledMultiplier:
    """Build g for r = chain.r and measure the certificates of every level."""
    settings = settings or PointwiseSettings()
    region = region or settings.region
    cap = settings.constant_cap
    r = chain.r
    if top_level:
        index = kalman_index(spec)
        if index != r:
            raise ValueError(f"exponent chain has r={r} but the Kalman index is {index}")
    if c0 is None:
        c0 = directional_coercivity_constant(iterated_directions(spec), r, settings.coercivity_samples)

    if r == 0:
        symbol = zero_symbol(spec.field, "g = 0")
        certificates = [target_estimate_certificate("target_estimate", spec, chain, symbol, region, index=0, cap=cap)]
        return AssembledMultiplier(symbol, GammaSchedule([], settings.gamma_cap), certificates, {}, 0, c0)

    if r == 1:
        symbol = build_gr(spec, chain, cut, index=1)
        certificates = basic_case_certificates(spec, chain, cut, symbol, region, c0, cap)
        certificates.append(target_estimate_certificate("target_estimate", spec, chain, symbol, region, index=1, cap=cap))
        return AssembledMultiplier(symbol, GammaSchedule([], settings.gamma_cap), certificates, {"g_1": symbol}, 1, c0)

    gr = build_gr(spec, chain, cut, index=r)
    if top_level and settings.omega1_c1 is not None and omega_fraction is None:
        c_omega = settings.omega1_c1
    else:
        c_omega = (0.5 if omega_fraction is None else omega_fraction) * c0
    ratio = omega_ratio(spec, r)
    omega_region = region.restricted(lambda points: ratio(points) < c_omega, f"Omega(r={r}, c={c_omega:.4g})")
    lower = build_full_multiplier(
        spec, chain.truncated(r - 1), cut, eps, settings, omega_region,
        c0=c0 - c_omega, top_level=False,
    )
    localized = localize(spec, lower.symbol, r, c_omega)
    leading = linear_combination([gr, localized], [1.0, 1.0], f"G_{r}", [f"g_{r}", "localized"])

    schedule = search_gammas(spec, chain, cut, region, r, eps, settings.gamma_cap)
    ladder = build_ladder(spec, chain, cut, schedule.gammas, r)
    frak, correctors = build_correctors(ladder)
    symbol = linear_combination([leading, correctors[-1]], [1.0, 1.0], f"g (r={r})", ["G", "p"])

    certificates = [
        verify_gr_bound(gr, chain, region, spec, index=r, cap=cap),
        target_estimate_certificate("target_estimate", spec, chain, symbol, region, index=r, cap=cap),
        global_bound_certificate(spec, chain, symbol, region, r, cap),
        instrumental_certificate(spec, chain, ladder, correctors[-1], region, eps, cap),
        localizer_support_certificate(spec, localized, r, c_omega, region),
    ]
    certificates.extend(ladder_certificates(ladder, frak, correctors, region, cap))
    certificates.extend(_rename(lower.certificates, f"level{r - 1}."))

    history = [dict(entry, level=r - 1) for entry in lower.schedule.history] + [
        dict(entry, level=r) for entry in schedule.history
    ]
    schedule = GammaSchedule(schedule.gammas, schedule.search_cap, history)
    components = {f"g_{r}": gr, f"localized_h_{r - 1}": localized, f"p_{r}": correctors[-1]}
    components.update({symbol_.description: symbol_ for symbol_ in frak})
    components.update({f"level{r - 1}.{name}": value for name, value in lower.components.items()})
    _LOGGER.info("Assembled multiplier for r=%s with Gamma=%s", r, schedule.gammas)
    return AssembledMultiplier(symbol, schedule, certificates, components, r, c0, ladder)


def assemble_full_multiplier(
    spec: OperatorSpec,
    chain: ExponentChain,
    cut: CutoffSpec,
    eps: float = DEFAULT_EPS,
    settings: PointwiseSettings | None = None,
) -> tuple[MultiplierSymbol, GammaSchedule, list[InequalityCertificate]]:
    result = build_full_multiplier(spec, chain, cut, eps, settings)
    return result.symbol, result.schedule, result.certificates


def lemma_derivative_bounds(
    spec: OperatorSpec,
    chain: ExponentChain,
    cut: CutoffSpec,
    region: PointwiseRegion,
    gammas: list[float] | None = None,
    cap: float = CONSTANT_CAP,
) -> list[InequalityCertificate]:
    """Derivative bounds of psi and w at the g_r argument and, for r >= 2, of the ladder factors."""
    r = chain.r
    if r < 1:
        return []
    certificates = [
        chi_derivative_certificate(spec, chain, cut, region, "psi", cap=cap),
        chi_derivative_certificate(spec, chain, cut, region, "w", cap=cap),
    ]
    if r >= 2:
        gammas = gammas if gammas is not None else [2.0] * (r - 1)
        ladder = build_ladder(spec, chain, cut, gammas, r)
        frak, correctors = build_correctors(ladder)
        certificates.extend(
            c for c in ladder_certificates(ladder, frak, correctors, region, cap)
            if c.name.startswith(("ladder_psi_derivative", "ladder_w_derivative"))
        )
    return certificates


def omega_sensitivity(
    spec: OperatorSpec,
    chain: ExponentChain,
    cut: CutoffSpec,
    eps: float,
    settings: PointwiseSettings,
    fractions: tuple[float, ...] = (0.25, 0.75),
) -> list[InequalityCertificate]:
    """Target estimate constants when Omega_1 uses c0/4 or 3c0/4 instead of c0/2."""
    if chain.r < 2:
        return []
    certificates = []
    for fraction in fractions:
        result = build_full_multiplier(spec, chain, cut, eps, settings, omega_fraction=fraction)
        target = next(c for c in result.certificates if c.name == "target_estimate")
        target.name = f"target_estimate_omega_{fraction:g}"
        certificates.append(target)
    return certificates

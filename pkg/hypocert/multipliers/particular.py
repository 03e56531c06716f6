"""
Explicit multipliers for the three block chain d_t + x_0 . grad_{x_1} + x_1 . grad_{x_2} - Laplace_{x_0}.

On the Fourier side the field is xi_1 . grad_{xi_0} + xi_2 . grad_{xi_1}. With
lambda_0 > lambda_1 > lambda_2 the two multipliers are

    g1 = xi_1 . xi_2 <xi_2>^-(2 - 2 lambda_2) psi(X1),  X1 = |xi_1|^2 / <xi_2>^(2 lambda_2 / lambda_1)
    g2 = xi_0 . xi_1 |xi_1|^-(2 - 2 lambda_1) w(X1) psi(Y), Y = Gamma^2 |xi_0|^2 / |xi_1|^(2 lambda_1 / lambda_0)

and each derivative is reported split into the xi_1 . grad_{xi_0} part
("transport_xi0") and the xi_2 . grad_{xi_1} part ("transport_xi1").
"""
import logging

import numpy as np

from hypocert.const import CONSTANT_CAP, GAMMA_CAP, GAMMA_START, PASS_MARGIN
from hypocert.cutoffs import eval_psi, eval_psi_prime, eval_w, eval_w_prime
from hypocert.errors import DegenerateDomain, GammaExhausted
from hypocert.models import CutoffSpec, ExponentChain, GammaSchedule, InequalityCertificate, MultiplierSymbol, OperatorSpec, PointwiseRegion
from hypocert.multipliers.certificates import fit_constants, measure_ratio
from hypocert.multipliers.frame import rowdot
from hypocert.sampling import region_points

_LOGGER = logging.getLogger(__name__)


def chain_operator(n_block: int = 1, time_dependent: bool = True) -> OperatorSpec:
    """B and Q of the three block chain with blocks of size n_block."""
    eye = np.eye(n_block)
    zero = np.zeros((n_block, n_block))
    B = np.block([[zero, zero, zero], [eye, zero, zero], [zero, eye, zero]])
    Q = np.block([[eye, zero, zero], [zero, zero, zero], [zero, zero, zero]])
    return OperatorSpec(B, Q, time_dependent=time_dependent)


class ChainFields:
    """Every quantity g1, g2 and the chain certificates need at a batch of points."""

    def __init__(self, xi: np.ndarray, chain: ExponentChain, cut: CutoffSpec, gamma: float, n_block: int) -> None:
        lam0, lam1, lam2 = chain.lambdas[:3]
        m = n_block
        x0, x1, x2 = xi[:, :m], xi[:, m:2 * m], xi[:, 2 * m:3 * m]
        self.lambdas = (lam0, lam1, lam2)
        self.gamma = gamma

        self.n0 = rowdot(x0, x0)
        self.n1 = rowdot(x1, x1)
        self.n2 = rowdot(x2, x2)
        self.d01 = rowdot(x0, x1)
        self.d02 = rowdot(x0, x2)
        self.d12 = rowdot(x1, x2)
        bracket2 = 1.0 + self.n2

        # g1
        self.g1_weight = bracket2 ** (-(1.0 - lam2))
        self.x1_scale = bracket2 ** (-lam2 / lam1)
        self.X1 = self.n1 * self.x1_scale
        self.dX1 = 2.0 * self.d12 * self.x1_scale
        self.psi_X1 = eval_psi(cut, self.X1)
        self.psi_prime_X1 = eval_psi_prime(cut, self.X1)

        # g2 lives on supp w(X1), where |xi_1| > 0
        self.W = eval_w(cut, self.X1)
        self.w_prime_X1 = eval_w_prime(cut, self.X1)
        self.support = self.W > 0.0
        if np.any(self.support & (self.n1 == 0.0)):
            raise DegenerateDomain("xi_1 = 0 inside the support of w(X1)")
        s = self.support
        self.P2 = np.zeros_like(self.n1)
        self.dP2 = np.zeros_like(self.n1)
        self.Y = np.zeros_like(self.n1)
        self.y_scale = np.zeros_like(self.n1)
        self.P2[s] = self.n1[s] ** (-(1.0 - lam1))
        self.dP2[s] = -(1.0 - lam1) * self.n1[s] ** (-(1.0 - lam1) - 1.0) * 2.0 * self.d12[s]
        self.y_scale[s] = self.n1[s] ** (-lam1 / lam0)
        self.Y[s] = gamma ** 2 * self.n0[s] * self.y_scale[s]
        self.dY_xi1 = np.zeros_like(self.n1)
        self.dY_xi1[s] = (
            gamma ** 2 * self.n0[s] * (-lam1 / lam0) * self.n1[s] ** (-lam1 / lam0 - 1.0) * 2.0 * self.d12[s]
        )
        self.psi_Y = np.where(s, eval_psi(cut, self.Y), 0.0)
        self.psi_prime_Y = np.where(s, eval_psi_prime(cut, self.Y), 0.0)
        self.w_Y = np.where(s, eval_w(cut, self.Y), 0.0)

    def g1(self) -> np.ndarray:
        return self.d12 * self.g1_weight * self.psi_X1

    def g1_terms(self) -> dict[str, np.ndarray]:
        transport = (
            self.n2 * self.g1_weight * self.psi_X1
            + self.d12 * self.g1_weight * self.psi_prime_X1 * self.dX1
        )
        return {"transport_xi0": np.zeros_like(transport), "transport_xi1": transport}

    def g2(self) -> np.ndarray:
        return self.d01 * self.P2 * self.W * self.psi_Y

    def g2_terms(self) -> dict[str, np.ndarray]:
        gamma2 = self.gamma ** 2
        along_xi0 = (
            self.n1 * self.P2 * self.W * self.psi_Y
            + self.d01 * self.P2 * self.W * self.psi_prime_Y * gamma2 * 2.0 * self.d01 * self.y_scale
        )
        along_xi1 = (
            self.d02 * self.P2 * self.W * self.psi_Y
            + self.d01 * self.dP2 * self.W * self.psi_Y
            + self.d01 * self.P2 * self.w_prime_X1 * self.dX1 * self.psi_Y
            + self.d01 * self.P2 * self.W * self.psi_prime_Y * self.dY_xi1
        )
        return {"transport_xi0": along_xi0, "transport_xi1": along_xi1}


def build_particular_g1_g2(
    chain: ExponentChain,
    cut: CutoffSpec,
    gamma: float,
    n_block: int = 1,
) -> tuple[MultiplierSymbol, MultiplierSymbol]:
    """The pair (g1, g2); g2.rebuild(gamma) gives g2 for another scale parameter."""
    if chain.r < 2:
        raise ValueError("the chain multipliers need lambda_0, lambda_1 and lambda_2")
    field = chain_operator(n_block).field

    def fields(xi: np.ndarray) -> ChainFields:
        return ChainFields(xi, chain, cut, gamma, n_block)

    def g1_arguments(xi: np.ndarray) -> list:
        return [(fields(xi).X1, (cut.psi_inner, cut.psi_outer))]

    def g2_arguments(xi: np.ndarray) -> list:
        f = fields(xi)
        return [
            (f.X1, (cut.w_inner, cut.w_outer)),
            (np.where(f.support, f.Y, np.nan), (cut.psi_inner, cut.psi_outer)),
        ]

    g1 = MultiplierSymbol(
        "g1 (chain)", field,
        lambda xi: fields(xi).g1(),
        lambda xi: fields(xi).g1_terms(),
        g1_arguments,
    )
    g2 = MultiplierSymbol(
        f"g2 (chain, Gamma={gamma:g})", field,
        lambda xi: fields(xi).g2(),
        lambda xi: fields(xi).g2_terms(),
        g2_arguments,
        rebuild=lambda new_gamma: build_particular_g1_g2(chain, cut, new_gamma, n_block)[1],
    )
    return g1, g2


def _block_bracket(values: np.ndarray, exponent: float) -> np.ndarray:
    return (1.0 + values) ** (exponent / 2.0)


def chain_certificates(
    g1: MultiplierSymbol,
    g2: MultiplierSymbol,
    chain: ExponentChain,
    cut: CutoffSpec,
    gamma: float,
    region: PointwiseRegion,
    n_block: int = 1,
    cap: float = CONSTANT_CAP,
) -> tuple[list[InequalityCertificate], float]:
    """Every chain certificate at a fixed Gamma, and the absorption ratio of the negative xi_1 part of Dg2."""
    points = region_points(region, 3 * n_block)
    f = ChainFields(points, chain, cut, gamma, n_block)
    lam0, lam1, lam2 = f.lambdas
    q0, q1 = chain.q[0], chain.q[1]
    s1, s2 = chain.s[0], chain.s[1]
    g2_terms = g2.terms(points)
    dg1 = g1.directional_derivative(points)
    dg2 = g2.directional_derivative(points)
    n1_gain = f.n1 ** lam1
    localized = n1_gain * f.W
    gamma_gain = gamma ** (2.0 * lam0) * f.n0 ** lam0

    certificates = [
        measure_ratio("chain_bound_g1", points, np.abs(g1.eval(points)),
                      _block_bracket(f.n1, q1) * _block_bracket(f.n2, s2 + lam2), region, "c", cap),
        measure_ratio("chain_bound_g2", points, np.abs(g2.eval(points)),
                      _block_bracket(f.n0, q0) * _block_bracket(f.n1, s1 + lam1), region, "c", cap),
        fit_constants("chain_transport_g1", points, _block_bracket(f.n2, 2.0 * lam2),
                      _block_bracket(f.n1, 2.0 * lam1), {"c_g1": dg1}, region, "c_a", cap),
        fit_constants("chain_full_estimate", points, _block_bracket(f.n1, 2.0 * lam1),
                      _block_bracket(f.n0, 2.0 * lam0), {"c_g1": dg1, "c_g2": dg2}, region, "c_a", cap),
        fit_constants("chain_transport_g1_localized", points, _block_bracket(f.n2, 2.0 * lam2),
                      localized + 1.0, {"c_g1": dg1}, region, "c_a", cap),
        measure_ratio("chain_w_split", points, n1_gain,
                      _block_bracket(f.n2, 2.0 * lam2) + localized, region, "c", cap),
        measure_ratio("chain_partition", points, localized,
                      localized * (f.w_Y + f.psi_Y), region, "c", cap),
        measure_ratio("chain_far_region", points, localized * f.w_Y, gamma_gain, region, "c", cap),
        fit_constants("chain_transport_g2", points, localized * f.psi_Y,
                      gamma_gain, {"c_g2": g2_terms["transport_xi0"]}, region, "c_a", cap),
    ]
    lower = measure_ratio("chain_g2_lower", points, np.maximum(-g2_terms["transport_xi1"], 0.0),
                          n1_gain / gamma, region, "c10", cap)
    certificates.append(lower)
    absorption = lower.measured_constants["c10"] / gamma
    lower.measured_constants["absorption"] = absorption
    return certificates, absorption


def verify_particular_chain(
    g1: MultiplierSymbol,
    g2: MultiplierSymbol,
    chain: ExponentChain,
    cut: CutoffSpec,
    region: PointwiseRegion,
    gamma: float = GAMMA_START,
    search: bool = True,
    gamma_cap: float = GAMMA_CAP,
    pass_margin: float = PASS_MARGIN,
    n_block: int = 1,
    cap: float = CONSTANT_CAP,
) -> tuple[list[InequalityCertificate], GammaSchedule, MultiplierSymbol]:
    """
    Run the chain certificates, doubling Gamma from the given start until every
    certificate passes and the negative xi_1 part of Dg2 is absorbed with margin.

    Returns the certificates at the accepted Gamma, the schedule and the
    accepted g2. Raises GammaExhausted past gamma_cap.
    """
    history = []
    while True:
        g2 = g2.rebuild(gamma)
        certificates, absorption = chain_certificates(g1, g2, chain, cut, gamma, region, n_block, cap)
        accepted = all(c.passed for c in certificates) and absorption <= pass_margin
        history.append({"index": 2, "gamma": gamma, "absorption": absorption, "accepted": accepted})
        _LOGGER.debug("Chain Gamma=%s absorption=%s accepted=%s", gamma, absorption, accepted)
        if accepted or not search:
            break
        gamma *= 2.0
        if gamma > gamma_cap:
            raise GammaExhausted("no Gamma below the cap absorbs the negative part of Dg2", history=history)
    return certificates, GammaSchedule([gamma], gamma_cap, history), g2

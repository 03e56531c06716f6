"""
Cutoff ladder and correctors for r >= 2.

Responsible for:
- the factors W_1 .. W_r, their complements Psi_j = 1 - W_j and the
  cumulative products calW_k = W_1 ... W_k
- the correctors frak_k and their sums p_k, p_r
- the sequential search for Gamma_2 .. Gamma_r
- the ladder certificates

W_1 = w(|y_{r-1}|^2 / <xi>^{2 lambda_r / lambda_{r-1}}) and, for j >= 2,
W_j = w(Gamma_j^2 |y_{r-j}|^2 / |y_{r-j+1}|^{2 lambda_{r-j+1} / lambda_{r-j}}).
W_j is only evaluated inside supp calW_{j-1}; outside it W_j and Psi_j are
stored as 0, which is all the products ever see.
"""
import logging

import numpy as np

from hypocert.const import CONSTANT_CAP, DEFAULT_EPS, GAMMA_CAP, GAMMA_START
from hypocert.cutoffs import eval_w, eval_w_prime
from hypocert.errors import DomainViolation, GammaExhausted
from hypocert.kalman import iterated_directions
from hypocert.models import CutoffSpec, ExponentChain, GammaSchedule, InequalityCertificate, MultiplierSymbol, OperatorSpec, PointwiseRegion
from hypocert.multipliers.certificates import measure_ratio
from hypocert.multipliers.frame import DirectionalFrame
from hypocert.multipliers.symbols import linear_combination
from hypocert.sampling import region_points

_LOGGER = logging.getLogger(__name__)


class LadderFields:
    """Ladder factors and corrector pieces at a batch of points."""

    def __init__(self, frame: DirectionalFrame, chain: ExponentChain, cut: CutoffSpec, gammas: list[float], r: int) -> None:
        self.frame = frame
        self.r = r
        self.lambdas = chain.lambdas
        self.cut = cut
        self.depth = min(r, len(gammas) + 1)
        self.X, self.W, self.dW, self.Psi, self.dPsi, self.calW, self.dcalW = {}, {}, {}, {}, {}, {}, {}

        lam = chain.lambdas
        count = frame.xi.shape[0]
        exponent = 2.0 * lam[r] / lam[r - 1]
        X = frame.norm2(r - 1) * frame.bracket_power(-exponent)
        dX = 2.0 * frame.dot(r, r - 1) * frame.bracket_power(-exponent) + frame.norm2(r - 1) * frame.d_bracket_power(-exponent)
        self._store(1, X, dX, np.ones(count, dtype=bool))

        for j in range(2, self.depth + 1):
            mask = self.calW[j - 1] > 0.0
            a, b = r - j, r - j + 1
            exponent = 2.0 * lam[b] / lam[a]
            nb = frame.norm2(b)
            if np.any(mask & (nb == 0.0)):
                raise DomainViolation(f"y_{b} vanishes inside supp calW_{j - 1}", factor=j)
            gamma2 = gammas[j - 2] ** 2
            X = np.zeros(count)
            dX = np.zeros(count)
            na, nbm = frame.norm2(a)[mask], nb[mask]
            X[mask] = gamma2 * na * nbm ** (-exponent / 2.0)
            dX[mask] = gamma2 * (
                2.0 * frame.dot(b, a)[mask] * nbm ** (-exponent / 2.0)
                - exponent * na * nbm ** (-exponent / 2.0 - 1.0) * frame.dot(b + 1, b)[mask]
            )
            self._store(j, X, dX, mask)

    def _store(self, j: int, X: np.ndarray, dX: np.ndarray, mask: np.ndarray) -> None:
        w = np.where(mask, eval_w(self.cut, X), 0.0)
        dw = np.where(mask, eval_w_prime(self.cut, X) * dX, 0.0)
        self.X[j] = np.where(mask, X, np.nan)
        self.W[j] = w
        self.dW[j] = dw
        self.Psi[j] = np.where(mask, 1.0 - w, 0.0)
        self.dPsi[j] = -dw
        if j == 1:
            self.calW[1] = w
            self.dcalW[1] = dw
        else:
            self.calW[j] = self.calW[j - 1] * w
            self.dcalW[j] = self.dcalW[j - 1] * w + self.calW[j - 1] * dw

    def corrector(self, k: int) -> tuple[np.ndarray, dict[str, np.ndarray]]:
        """frak_k = (y_{r-k} . y_{r-k-1}) / |y_{r-k}|^{2 - lambda_{r-k}} calW_k Psi_{k+1} and its derivative terms."""
        if k + 1 > self.depth:
            raise ValueError(f"corrector {k} needs Gamma_{k + 1}")
        frame = self.frame
        a, b = self.r - k, self.r - k - 1
        lam_a = self.lambdas[a]
        active = self.calW[k] > 0.0
        na = frame.norm2(a)
        if np.any(active & (na == 0.0)):
            raise DomainViolation(f"y_{a} vanishes inside supp calW_{k}", corrector=k)
        power = np.zeros_like(na)
        d_power = np.zeros_like(na)
        power[active] = na[active] ** (-(2.0 - lam_a) / 2.0)
        d_power[active] = (lam_a - 2.0) * na[active] ** ((lam_a - 4.0) / 2.0) * frame.dot(a + 1, a)[active]

        numerator = frame.dot(a, b)
        psi_next = self.Psi[k + 1]
        support = self.calW[k] * psi_next
        value = numerator * power * support

        prefix_free = self.dW[1].copy()
        for j in range(2, k + 1):
            prefix_free = prefix_free * self.W[j]
        inner = np.zeros_like(na)
        for j in range(2, k + 1):
            tail = np.ones_like(na)
            for l in range(j + 1, k + 1):
                tail = tail * self.W[l]
            inner = inner + self.calW[j - 1] * self.dW[j] * tail

        terms = {
            "main": na * power * support,
            "B1": frame.dot(a + 1, b) * power * support,
            "B2": numerator * d_power * support,
            "B3": numerator * power * prefix_free * psi_next,
            "B4": numerator * power * self.calW[k] * self.dPsi[k + 1],
            "B5": numerator * power * inner * psi_next,
        }
        return value, terms

    def absorption(self, k: int) -> float:
        """max (|B1| + |B2|) / main over supp calW_k Psi_{k+1}."""
        _, terms = self.corrector(k)
        main = terms["main"]
        live = main > 0.0
        if not np.any(live):
            return 0.0
        return float(np.max((np.abs(terms["B1"][live]) + np.abs(terms["B2"][live])) / main[live]))


class Ladder:
    """The ladder symbols W_j, Psi_j and calW_j for j = 1 .. r."""

    W: list[MultiplierSymbol]
    Psi: list[MultiplierSymbol]
    calW: list[MultiplierSymbol]

    def __init__(self, spec: OperatorSpec, chain: ExponentChain, cut: CutoffSpec, gammas: list[float], r: int) -> None:
        self.spec = spec
        self.chain = chain
        self.cut = cut
        self.gammas = list(gammas)
        self.r = r
        self.mats = iterated_directions(spec, count=r + 2).mats
        self.W, self.Psi, self.calW = [], [], []
        for j in range(1, min(r, len(gammas) + 1) + 1):
            self.W.append(self._symbol(f"W_{j}", "W", "dW", j))
            self.Psi.append(self._symbol(f"Psi_{j}", "Psi", "dPsi", j))
            self.calW.append(self._symbol(f"calW_{j}", "calW", "dcalW", j))

    def fields(self, xi: np.ndarray) -> LadderFields:
        frame = DirectionalFrame(self.mats, self.spec.field, xi)
        return LadderFields(frame, self.chain, self.cut, self.gammas, self.r)

    def arguments(self, xi: np.ndarray, upto: int) -> list:
        fields = self.fields(xi)
        return [(fields.X[j], (self.cut.w_inner, self.cut.w_outer)) for j in range(1, min(upto, fields.depth) + 1)]

    def _symbol(self, description: str, value_key: str, derivative_key: str, j: int) -> MultiplierSymbol:
        def evaluate(xi: np.ndarray) -> np.ndarray:
            return getattr(self.fields(xi), value_key)[j]

        def terms(xi: np.ndarray) -> dict[str, np.ndarray]:
            return {"main": getattr(self.fields(xi), derivative_key)[j]}

        return MultiplierSymbol(description, self.spec.field, evaluate, terms, lambda xi: self.arguments(xi, j))


def build_ladder(spec: OperatorSpec, chain: ExponentChain, cut: CutoffSpec, gammas: list[float], index: int | None = None) -> Ladder:
    r = chain.r if index is None else index
    if r < 2:
        raise ValueError("the ladder needs r >= 2")
    return Ladder(spec, chain, cut, gammas, r)


def build_correctors(ladder: Ladder) -> tuple[list[MultiplierSymbol], list[MultiplierSymbol]]:
    """
    The correctors frak_1 .. frak_{r-1} and the sums p_1 .. p_r.

    p_1 = frak_1, p_k = frak_k + sum_{j<k} p_j and p_r = sum_{k<r} p_k; the p_k
    are kept as integer combinations of the frak_k.
    """
    r = ladder.r
    frak = []
    for k in range(1, r):
        frak.append(MultiplierSymbol(
            f"frak_{k}",
            ladder.spec.field,
            lambda xi, k=k: ladder.fields(xi).corrector(k)[0],
            lambda xi, k=k: ladder.fields(xi).corrector(k)[1],
            lambda xi, k=k: ladder.arguments(xi, k + 1),
        ))

    coefficients = []
    for k in range(1, r):
        vector = [0] * (r - 1)
        vector[k - 1] = 1
        for previous in coefficients:
            vector = [v + p for v, p in zip(vector, previous)]
        coefficients.append(vector)
    total = [sum(column) for column in zip(*coefficients)]
    coefficients.append(total)

    labels = [f"frak_{k}" for k in range(1, r)]
    correctors = [
        linear_combination(frak, [float(c) for c in vector], f"p_{k}", labels)
        for k, vector in enumerate(coefficients, start=1)
    ]
    return frak, correctors


def search_gammas(
    spec: OperatorSpec,
    chain: ExponentChain,
    cut: CutoffSpec,
    region: PointwiseRegion,
    index: int | None = None,
    eps: float = DEFAULT_EPS,
    gamma_cap: float = GAMMA_CAP,
    gamma_start: float = GAMMA_START,
) -> GammaSchedule:
    """
    Choose Gamma_2, .., Gamma_r one at a time.

    Gamma_{k+1} doubles from gamma_start until the error terms B1 and B2 of
    frak_k are at most eps times its main term on the sampled region.
    """
    r = chain.r if index is None else index
    points = region_points(region, spec.dim)
    mats = iterated_directions(spec, count=r + 2).mats
    frame = DirectionalFrame(mats, spec.field, points)
    gammas: list[float] = []
    history: list[dict] = []
    for k in range(1, r):
        gamma = gamma_start
        while True:
            fields = LadderFields(frame, chain, cut, gammas + [gamma], r)
            absorption = fields.absorption(k)
            accepted = absorption <= eps
            history.append({"index": k + 1, "gamma": gamma, "absorption": absorption, "accepted": accepted})
            if accepted:
                break
            gamma *= 2.0
            if gamma > gamma_cap:
                raise GammaExhausted(f"no Gamma_{k + 1} below the cap absorbs B1 and B2 of frak_{k}", history=history)
        _LOGGER.debug("Accepted Gamma_%s = %s (absorption %s)", k + 1, gamma, absorption)
        gammas.append(gamma)
    return GammaSchedule(gammas, gamma_cap, history)


def ladder_certificates(
    ladder: Ladder,
    frak: list[MultiplierSymbol],
    correctors: list[MultiplierSymbol],
    region: PointwiseRegion,
    cap: float = CONSTANT_CAP,
) -> list[InequalityCertificate]:
    """Bounds of the correctors, domination along the ladder and the derivative bounds of its factors."""
    r = ladder.r
    spec = ladder.spec
    lam = ladder.chain.lambdas
    gammas = ladder.gammas
    points = region_points(region, spec.dim)
    fields = ladder.fields(points)
    frame = fields.frame
    certificates = []

    # frak_1 = p_1 is covered by the weighted bound below
    for k in range(2, r):
        certificates.append(measure_ratio(
            f"corrector_frak{k}_bound", points, np.abs(frak[k - 1].eval(points)) * gammas[k - 1],
            np.ones(points.shape[0]), region, "C", cap,
        ))

    rhs = (1.0 + frame.norm2(r - 2)) ** (ladder.chain.q[r - 2] / 2.0) * frame.bracket_power(ladder.chain.s[r - 2])
    certificates.append(measure_ratio(
        "corrector_p1_bound", points, np.abs(correctors[0].eval(points)) * gammas[0], rhs, region, "c", cap,
    ))

    inside = (fields.calW[1] > 0.0).astype(float)
    certificates.append(measure_ratio(
        "ladder_domination_1", points, frame.bracket_power(lam[r]) * inside,
        frame.norm2(r - 1) ** (lam[r - 1] / 2.0), region, "c", cap,
    ))
    for j in range(2, r + 1):
        inside = (fields.calW[j] > 0.0).astype(float)
        upper = frame.norm2(r - j + 1) ** (lam[r - j + 1] / 2.0)
        lower = (gammas[j - 2] ** 2 * frame.norm2(r - j)) ** (lam[r - j] / 2.0)
        certificates.append(measure_ratio(f"ladder_domination_{j}", points, upper * inside, lower, region, "c", cap))

    for k in range(1, r):
        gain = frame.norm2(r - k - 1) ** (lam[r - k - 1] / 2.0)
        certificates.append(measure_ratio(
            f"ladder_psi_derivative_{k}", points, np.abs(fields.calW[k] * fields.dPsi[k + 1]),
            gain * fields.calW[k + 1], region, "c", cap,
            notes="ratio grows near the inner edge of w, where w' / w is unbounded",
        ))
        certificates.append(measure_ratio(
            f"ladder_w_derivative_{k}", points, np.abs(fields.calW[k] * fields.dW[k + 1]),
            gain * fields.calW[k] * fields.Psi[k + 1], region, "c", cap,
        ))
    return certificates

"""
Exponent calculus for the hypoelliptic gain.

Responsible for:
- the recursion lambda_{j+1} = (1 + s_j) lambda_j / (1 - q_j + lambda_j)
- monotonicity and ratio conditions of the resulting chain
- the closed form equivalences of those conditions in terms of (lambda0, q, s)
- closed forms of lambda_{r-1}, lambda_r and the kinetic gain exponent
"""
import logging

from hypocert.const import ROUNDING_SLACK
from hypocert.errors import DegenerateExponent
from hypocert.models import AdmissibilityReport, Equivalence, ExponentChain, ExponentInput

_LOGGER = logging.getLogger(__name__)


def _recurse(inputs: ExponentInput) -> tuple[list[float], float]:
    """The chain lambda_0 .. lambda_r and the largest relative residual of the recursion."""
    lambdas = [inputs.lambda0]
    residual = 0.0
    for j in range(inputs.r):
        current = lambdas[-1]
        denominator = 1.0 - inputs.q[j] + current
        if denominator <= 0.0:
            raise DegenerateExponent("1 - q_j + lambda_j is not positive", step=j, lambda_j=current, q_j=inputs.q[j])
        following = (1.0 + inputs.s[j]) * current / denominator
        if following <= 0.0:
            raise DegenerateExponent("the recursion produced a nonpositive exponent", step=j + 1, value=following)
        lambdas.append(following)
        gap = following * ((1.0 - inputs.q[j]) / current + 1.0) - (1.0 + inputs.s[j])
        residual = max(residual, abs(gap) / (1.0 + inputs.s[j]))
    return lambdas, residual


def _strictly_less(a: float, b: float, margin: float) -> bool:
    return a < b - margin


def _at_most(a: float, b: float, margin: float) -> bool:
    return a <= b + max(margin, ROUNDING_SLACK * max(1.0, abs(b)))


def is_decreasing(lambdas: list[float], margin: float = 0.0) -> bool:
    return all(_strictly_less(b, a, margin) for a, b in zip(lambdas, lambdas[1:]))


def ratio_condition_holds(lambdas: list[float], margin: float = 0.0) -> bool:
    """lambda_{j-1}/lambda_{j-2} + lambda_{j-1}/lambda_j <= 2 for j = 2 .. r."""
    for j in range(2, len(lambdas)):
        total = lambdas[j - 1] / lambdas[j - 2] + lambdas[j - 1] / lambdas[j]
        if not _at_most(total, 2.0, margin):
            return False
    return True


def exponent_chain(inputs: ExponentInput, margin: float = 0.0) -> ExponentChain:
    """Run the recursion and classify the resulting chain."""
    lambdas, residual = _recurse(inputs)
    report = admissibility_report(inputs, margin) if inputs.r >= 2 else None
    chain = ExponentChain(
        lambdas=lambdas,
        decreasing=is_decreasing(lambdas, margin),
        ratio_condition=ratio_condition_holds(lambdas, margin),
        source=inputs,
        residual=residual,
        equivalences=report,
    )
    _LOGGER.debug("Exponent chain %s (decreasing=%s, ratio=%s)", chain.lambdas, chain.decreasing, chain.ratio_condition)
    return chain


def admissibility_report(inputs: ExponentInput, margin: float = 0.0) -> AdmissibilityReport:
    """
    Compare each condition on the last three exponents with its closed form.

    Primed quantities below belong to step r - 2, unprimed ones to step r - 1,
    and A = 1 + lambda0 (r - 2).
    """
    if inputs.r < 2:
        raise ValueError("admissibility needs a chain with r >= 2")
    lambdas, _ = _recurse(inputs)
    r = inputs.r
    lam0 = inputs.lambda0
    q_prev, s_prev = inputs.q[r - 2], inputs.s[r - 2]
    q_last, s_last = inputs.q[r - 1], inputs.s[r - 1]
    lam_a, lam_b, lam_c = lambdas[r - 2], lambdas[r - 1], lambdas[r]
    amplitude = 1.0 + lam0 * (r - 2)
    equivalences = []

    # lambda_{r-2} > lambda_{r-1}
    lhs = lam_a - lam_b
    rhs = lam0 - (s_prev + q_prev) * amplitude
    equivalences.append(Equivalence(
        "decreasing_before_last",
        lhs > margin,
        rhs > margin,
        min(abs(lhs), abs(rhs)),
    ))

    # lambda_{r-1} > lambda_r
    lhs = lam_b - lam_c
    rhs = lam0 * (1.0 + s_prev - q_last - s_last) - (s_last + q_last) * (1.0 - q_prev) * amplitude
    equivalences.append(Equivalence(
        "decreasing_last",
        lhs > margin,
        rhs > margin,
        min(abs(lhs), abs(rhs)),
    ))

    # lambda_{r-1} > lambda_r, written against the last step's loss and gain
    threshold = lam_b - (q_last + s_last)
    equivalences.append(Equivalence(
        "decreasing_last_threshold",
        lhs > margin,
        threshold > margin,
        min(abs(lhs), abs(threshold)),
    ))

    # ratio condition at the last index
    total = lam_b / lam_a + lam_b / lam_c
    lhs_gap = 2.0 - total
    bracket = (1.0 + s_prev) * (1.0 + s_last) + (1.0 - q_last) * (1.0 - q_prev) - 2.0 * (1.0 + s_last) * (1.0 - q_prev)
    rhs_gap = lam0 * (2.0 * s_last - s_prev + q_last) - bracket * amplitude
    equivalences.append(Equivalence(
        "ratio_condition",
        _at_most(total, 2.0, margin),
        _at_most(bracket * amplitude, lam0 * (2.0 * s_last - s_prev + q_last), margin),
        min(abs(lhs_gap), abs(rhs_gap)),
    ))

    if q_prev == q_last and s_prev == s_last:
        chain_ok = (lam_a - lam_b > margin) and (lam_b - lam_c > margin) and _at_most(total, 2.0, margin)
        gap = lam0 - (q_last + s_last) * amplitude
        equivalences.append(Equivalence(
            "equal_steps",
            chain_ok,
            gap > margin,
            min(abs(gap), abs(lam_a - lam_b), abs(lam_b - lam_c), abs(lhs_gap)),
        ))

    # lambda_{r-1} > lambda_r forces lambda_r > q_{r-1} + s_{r-1} >= q_{r-2} + s_{r-2}
    implication = not (lam_b - lam_c > margin) or (
        lam_c > q_last + s_last and q_last + s_last >= q_prev + s_prev
    )
    return AdmissibilityReport(equivalences, implication, margin)


def simplified_admissibility(lambda0: float, r: int, q: float, s: float) -> bool:
    """Closed form of admissibility when the last two steps share q and s: (q + s)(1 + lambda0 (r - 2)) < lambda0."""
    return (q + s) * (1.0 + lambda0 * (r - 2)) < lambda0


def zero_loss_lambda(lambda0: float, j: int) -> float:
    """lambda_j = lambda0 / (1 + j lambda0), the chain when every q_j and s_j vanishes."""
    return lambda0 / (1.0 + j * lambda0)


def closed_form_lambda_r(inputs: ExponentInput) -> tuple[float, float]:
    """
    (lambda_{r-1}, lambda_r) written directly in lambda0 and the last two steps.

    The leading steps j < r - 2 must carry no loss and no gain.
    """
    r = inputs.r
    if r < 2:
        raise ValueError("the closed form needs a chain with r >= 2")
    if any(inputs.q[:r - 2]) or any(inputs.s[:r - 2]):
        raise ValueError("the closed form needs q_j = s_j = 0 for j < r - 2")
    lam0 = inputs.lambda0
    keep_prev, gain_prev = 1.0 - inputs.q[r - 2], 1.0 + inputs.s[r - 2]
    keep_last, gain_last = 1.0 - inputs.q[r - 1], 1.0 + inputs.s[r - 1]

    before_last = lam0 * gain_prev / (keep_prev + lam0 + lam0 * keep_prev * (r - 2))
    denominator = (
        keep_prev * keep_last
        + lam0 * gain_prev
        + lam0 * keep_last
        + lam0 * keep_prev * keep_last * (r - 2)
    )
    return before_last, lam0 * gain_prev * gain_last / denominator


def kinetic_gain_exponent(p: float, q: float, s: float) -> float:
    """Regularity (1 + s) p / (1 - q + p) gained in position for the kinetic model."""
    denominator = 1.0 - q + p
    if denominator <= 0.0:
        raise DegenerateExponent("1 - q + p is not positive", p=p, q=q)
    return (1.0 + s) * p / denominator

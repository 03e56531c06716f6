"""
Domain models for the hypocert toolkit.

This module contains pure data classes: operators, exponent chains, cutoffs,
multiplier symbols, sampling regions, certificates and run configurations.
They validate their own invariants but know nothing about how they are computed.
"""
import logging
from typing import Callable

import numpy as np
import scipy.linalg

from hypocert.const import (
    BOX_LENGTH,
    CONSTANT_CAP,
    DEFAULT_EPS,
    ENSEMBLE_KINDS,
    ENVELOPE_WIDTH,
    GAMMA_CAP,
    N_ANGULAR,
    N_RADIAL,
    PAD_FACTOR,
    PASS_MARGIN,
    PSD_TOL,
    PSI_INNER,
    PSI_OUTER,
    R_MAX,
    R_MIN,
    RANK_TOL,
    SYMMETRY_TOL,
    TASKS,
    W_INNER,
    W_OUTER,
)
from hypocert.errors import ConfigError, InvalidCutoff, InvalidExponents, InvalidOperator, InvalidRegion

_LOGGER = logging.getLogger(__name__)


def as_points(xi) -> tuple[np.ndarray, bool]:
    """Return frequencies as a (m, n) float array and whether a single point was given."""
    points = np.asarray(xi, dtype=float)
    if points.ndim == 1:
        return points.reshape(1, -1), True
    return points, False


class OperatorSpec:
    """Drift matrix B of L = [d_t +] Bx.grad and the matrix Q selecting the directions of known regularity."""

    B: np.ndarray
    Q: np.ndarray
    time_dependent: bool
    rank_tol: float

    def __init__(self, B, Q, time_dependent: bool = False, rank_tol: float = RANK_TOL) -> None:
        """Initialize the OperatorSpec class and check that Q is symmetric positive semidefinite."""
        B = np.array(B, dtype=float)
        Q = np.array(Q, dtype=float)
        if B.ndim != 2 or B.shape[0] == 0 or B.shape[0] != B.shape[1] or Q.shape != B.shape:
            raise InvalidOperator("matrix_shape", shape_b=list(B.shape), shape_q=list(Q.shape))
        if not (np.all(np.isfinite(B)) and np.all(np.isfinite(Q))):
            raise InvalidOperator("schema", message="B and Q must have finite entries.")

        scale = max(1.0, float(np.abs(Q).max()))
        asymmetry = float(np.abs(Q - Q.T).max())
        if asymmetry > SYMMETRY_TOL * scale:
            raise InvalidOperator("q_not_symmetric", asymmetry=asymmetry)
        eigenvalues = scipy.linalg.eigvalsh(Q)
        spectral_norm = float(np.abs(eigenvalues).max())
        if eigenvalues.min() < -PSD_TOL * spectral_norm:
            raise InvalidOperator("q_not_psd", min_eigenvalue=float(eigenvalues.min()))

        self.B = B
        self.Q = Q
        self.time_dependent = bool(time_dependent)
        self.rank_tol = float(rank_tol)

    @property
    def dim(self) -> int:
        return self.B.shape[0]

    @property
    def field(self) -> np.ndarray:
        """Matrix of the Fourier side transport field, xi -> B^T xi."""
        return self.B.T

    def to_dict(self) -> dict:
        return {
            "B": self.B.tolist(),
            "Q": self.Q.tolist(),
            "time_dependent": self.time_dependent,
            "rank_tol": self.rank_tol,
        }

    def __eq__(self, other) -> bool:
        if not isinstance(other, OperatorSpec):
            return NotImplemented
        return (
            np.array_equal(self.B, other.B)
            and np.array_equal(self.Q, other.Q)
            and self.time_dependent == other.time_dependent
            and self.rank_tol == other.rank_tol
        )

    def __repr__(self) -> str:
        return f"OperatorSpec(dim={self.dim}, time_dependent={self.time_dependent})"


class IteratedDirections:
    """The matrices Q (B^T)^j for j = 0 .. len(mats) - 1."""

    mats: list[np.ndarray]
    rank_tol: float

    def __init__(self, mats: list[np.ndarray], rank_tol: float = RANK_TOL) -> None:
        self.mats = mats
        self.rank_tol = rank_tol


class ExponentInput:
    """Initial exponent lambda0, chain length r and the per step losses q_j and gains s_j."""

    lambda0: float
    r: int
    q: list[float]
    s: list[float]
    hypotheses: str

    def __init__(self, lambda0: float, r: int, q: list[float], s: list[float], hypotheses: str = "theorem") -> None:
        """Initialize the ExponentInput class, enforcing the hypotheses of the chosen regime."""
        self.lambda0 = float(lambda0)
        self.r = int(r)
        self.q = [float(v) for v in q]
        self.s = [float(v) for v in s]
        self.hypotheses = hypotheses

        if hypotheses not in ("theorem", "proposition"):
            raise InvalidExponents("schema", message=f"Unknown hypotheses regime {hypotheses!r}.")
        if self.r < 0 or len(self.q) != self.r or len(self.s) != self.r:
            raise InvalidExponents("exponent_length", r=self.r, q_length=len(self.q), s_length=len(self.s))
        if not np.isfinite(self.lambda0) or self.lambda0 <= 0.0:
            raise InvalidExponents("exponent_range", lambda0=self.lambda0)
        if any(not 0.0 <= v <= 1.0 for v in self.q) or any(not 0.0 <= v < np.inf for v in self.s):
            raise InvalidExponents("exponent_range", q=self.q, s=self.s)

        if hypotheses == "theorem":
            for j in range(max(self.r - 2, 0)):
                if self.q[j] != 0.0 or self.s[j] != 0.0:
                    raise InvalidExponents("exponent_leading", index=j)
            if self.r >= 2:
                if self.q[-2] > self.q[-1] or self.s[-2] > self.s[-1]:
                    raise InvalidExponents("exponent_order", q=self.q[-2:], s=self.s[-2:])

    def truncated(self, r: int) -> "ExponentInput":
        """The first r steps of this input, without the ordering hypotheses."""
        return ExponentInput(self.lambda0, r, self.q[:r], self.s[:r], hypotheses="proposition")

    def to_dict(self) -> dict:
        return {"lambda0": self.lambda0, "r": self.r, "q": self.q, "s": self.s, "hypotheses": self.hypotheses}


class Equivalence:
    """One equivalence between a condition on the chain and its closed form in the inputs."""

    name: str
    lhs: bool
    rhs: bool
    distance: float

    def __init__(self, name: str, lhs: bool, rhs: bool, distance: float) -> None:
        self.name = name
        self.lhs = bool(lhs)
        self.rhs = bool(rhs)
        self.distance = float(distance)

    @property
    def agree(self) -> bool:
        return self.lhs == self.rhs

    def to_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "agree": self.agree, "distance": self.distance}


class AdmissibilityReport:
    """Outcome of the equivalence checks for the last steps of an exponent chain."""

    equivalences: list[Equivalence]
    implication_holds: bool
    margin: float

    def __init__(self, equivalences: list[Equivalence], implication_holds: bool, margin: float = 0.0) -> None:
        self.equivalences = equivalences
        self.implication_holds = bool(implication_holds)
        self.margin = float(margin)

    @property
    def all_agree(self) -> bool:
        return all(eq.agree for eq in self.equivalences)

    def by_name(self, name: str) -> Equivalence:
        for eq in self.equivalences:
            if eq.name == name:
                return eq
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "equivalences": [eq.to_dict() for eq in self.equivalences],
            "all_agree": self.all_agree,
            "implication_holds": self.implication_holds,
            "margin": self.margin,
        }


class ExponentChain:
    """The exponents lambda_0 .. lambda_r produced by the recursion."""

    lambdas: list[float]
    decreasing: bool
    ratio_condition: bool
    source: ExponentInput
    residual: float
    equivalences: AdmissibilityReport | None

    def __init__(
        self,
        lambdas: list[float],
        decreasing: bool,
        ratio_condition: bool,
        source: ExponentInput,
        residual: float = 0.0,
        equivalences: AdmissibilityReport | None = None,
    ) -> None:
        self.lambdas = [float(v) for v in lambdas]
        self.decreasing = bool(decreasing)
        self.ratio_condition = bool(ratio_condition)
        self.source = source
        self.residual = float(residual)
        self.equivalences = equivalences

    @property
    def r(self) -> int:
        return len(self.lambdas) - 1

    @property
    def lambda0(self) -> float:
        return self.lambdas[0]

    @property
    def q(self) -> list[float]:
        return self.source.q

    @property
    def s(self) -> list[float]:
        return self.source.s

    def truncated(self, r: int) -> "ExponentChain":
        """The chain lambda_0 .. lambda_r of the first r steps."""
        lambdas = self.lambdas[: r + 1]
        decreasing = all(a > b for a, b in zip(lambdas, lambdas[1:]))
        return ExponentChain(lambdas, decreasing, self.ratio_condition, self.source.truncated(r), self.residual)

    def to_dict(self) -> dict:
        return {
            "lambdas": self.lambdas,
            "r": self.r,
            "decreasing": self.decreasing,
            "ratio_condition": self.ratio_condition,
            "recursion_residual": self.residual,
            "input": self.source.to_dict(),
        }


class CutoffSpec:
    """Radii of the smooth cutoffs psi (1 near 0) and w (1 away from 0)."""

    psi_inner: float
    psi_outer: float
    w_inner: float
    w_outer: float

    def __init__(
        self,
        psi_inner: float = PSI_INNER,
        psi_outer: float = PSI_OUTER,
        w_inner: float = W_INNER,
        w_outer: float = W_OUTER,
    ) -> None:
        """Initialize the CutoffSpec class."""
        if not (0.0 < psi_inner < psi_outer < np.inf) or not (0.0 < w_inner < w_outer < np.inf):
            raise InvalidCutoff("cutoff_order", radii=[psi_inner, psi_outer, w_inner, w_outer])
        self.psi_inner = float(psi_inner)
        self.psi_outer = float(psi_outer)
        self.w_inner = float(w_inner)
        self.w_outer = float(w_outer)

    def complementary(self) -> "CutoffSpec":
        """The cutoffs whose w equals 1 - psi of this one."""
        return CutoffSpec(self.psi_inner, self.psi_outer, self.psi_inner, self.psi_outer)

    @property
    def is_complementary(self) -> bool:
        return self.psi_inner == self.w_inner and self.psi_outer == self.w_outer

    def to_dict(self) -> dict:
        return {
            "psi_inner": self.psi_inner,
            "psi_outer": self.psi_outer,
            "w_inner": self.w_inner,
            "w_outer": self.w_outer,
        }

    def __eq__(self, other) -> bool:
        if not isinstance(other, CutoffSpec):
            return NotImplemented
        return self.to_dict() == other.to_dict()


class CutoffPair:
    """The cutoffs used for every psi evaluation and the cutoffs used for every w evaluation."""

    psi: CutoffSpec
    w: CutoffSpec

    def __init__(self, psi: CutoffSpec | None = None, w: CutoffSpec | None = None) -> None:
        self.psi = psi or CutoffSpec()
        self.w = w or CutoffSpec()

    def combined(self) -> CutoffSpec:
        """Single spec carrying the psi radii of the first and the w radii of the second."""
        return CutoffSpec(self.psi.psi_inner, self.psi.psi_outer, self.w.w_inner, self.w.w_outer)

    def to_dict(self) -> dict:
        return {"psi": self.psi.to_dict(), "w": self.w.to_dict()}


class DominanceCertificate:
    """Measured constants of 1 - psi <= c1 w and |psi'| <= c2 w."""

    c_one_minus_psi: float
    c_psi_prime: float
    grid_size: int

    def __init__(self, c_one_minus_psi: float, c_psi_prime: float, grid_size: int) -> None:
        self.c_one_minus_psi = float(c_one_minus_psi)
        self.c_psi_prime = float(c_psi_prime)
        self.grid_size = int(grid_size)

    def to_dict(self) -> dict:
        return {
            "c_one_minus_psi": self.c_one_minus_psi,
            "c_psi_prime": self.c_psi_prime,
            "grid_size": self.grid_size,
        }


class MultiplierSymbol:
    """
    A Fourier multiplier g(xi) together with its derivative along the field B^T xi.

    The derivative is kept split into named terms so certificates can weigh
    the main positive part against the error terms.
    """

    description: str
    field: np.ndarray

    def __init__(
        self,
        description: str,
        field: np.ndarray,
        evaluate: Callable[[np.ndarray], np.ndarray],
        derivative_terms: Callable[[np.ndarray], dict[str, np.ndarray]],
        arguments: Callable[[np.ndarray], list[tuple[np.ndarray, tuple[float, ...]]]] | None = None,
        rebuild: Callable[..., "MultiplierSymbol"] | None = None,
    ) -> None:
        self.description = description
        self.field = np.asarray(field, dtype=float)
        self._evaluate = evaluate
        self._derivative_terms = derivative_terms
        self._arguments = arguments
        self._rebuild = rebuild

    @property
    def dim(self) -> int:
        return self.field.shape[0]

    def eval(self, xi):
        points, single = as_points(xi)
        values = self._evaluate(points)
        return float(values[0]) if single else values

    def terms(self, xi) -> dict[str, np.ndarray]:
        points, _ = as_points(xi)
        return self._derivative_terms(points)

    def directional_derivative(self, xi):
        """Value of (B^T xi) . grad g at xi."""
        points, single = as_points(xi)
        terms = self._derivative_terms(points)
        total = np.zeros(points.shape[0])
        for name in sorted(terms):
            total = total + terms[name]
        return float(total[0]) if single else total

    def transport(self, xi) -> np.ndarray:
        points, _ = as_points(xi)
        return points @ self.field.T

    def arguments(self, xi) -> list[tuple[np.ndarray, tuple[float, ...]]]:
        """Cutoff arguments at xi with the breakpoints of the cutoff they feed."""
        if self._arguments is None:
            return []
        points, _ = as_points(xi)
        return self._arguments(points)

    def rebuild(self, *args, **kwargs) -> "MultiplierSymbol":
        if self._rebuild is None:
            raise TypeError(f"{self.description} has no free parameter to rebuild with")
        return self._rebuild(*args, **kwargs)

    def __repr__(self) -> str:
        return f"MultiplierSymbol({self.description!r})"


class GammaSchedule:
    """Accepted scale parameters Gamma_2 .. Gamma_r and the search history."""

    gammas: list[float]
    search_cap: float
    history: list[dict]

    def __init__(self, gammas: list[float] | None = None, search_cap: float = GAMMA_CAP, history: list[dict] | None = None) -> None:
        self.gammas = list(gammas or [])
        self.search_cap = float(search_cap)
        self.history = list(history or [])

    def to_dict(self) -> dict:
        return {"gammas": self.gammas, "search_cap": self.search_cap, "history": self.history}


class PointwiseRegion:
    """Log spaced radii times deterministic directions, optionally per coordinate block."""

    r_min: float
    r_max: float
    n_radial: int
    n_angular: int
    blocks: list[int] | None
    include_zero: bool
    constraint: Callable[[np.ndarray], np.ndarray] | None
    constraint_name: str | None

    def __init__(
        self,
        r_min: float = R_MIN,
        r_max: float = R_MAX,
        n_radial: int = N_RADIAL,
        n_angular: int = N_ANGULAR,
        blocks: list[int] | None = None,
        include_zero: bool = True,
        constraint: Callable[[np.ndarray], np.ndarray] | None = None,
        constraint_name: str | None = None,
    ) -> None:
        """Initialize the PointwiseRegion class."""
        if not (0.0 < r_min < r_max < np.inf):
            raise InvalidRegion("region_radii", r_min=r_min, r_max=r_max)
        if n_radial < 8 or n_angular < 8:
            raise InvalidRegion("region_points", n_radial=n_radial, n_angular=n_angular)
        if blocks is not None and (len(blocks) == 0 or any(int(b) < 1 for b in blocks)):
            raise InvalidRegion("region_blocks", blocks=list(blocks))
        self.r_min = float(r_min)
        self.r_max = float(r_max)
        self.n_radial = int(n_radial)
        self.n_angular = int(n_angular)
        self.blocks = [int(b) for b in blocks] if blocks is not None else None
        self.include_zero = bool(include_zero)
        self.constraint = constraint
        self.constraint_name = constraint_name

    def _copy(self, **changes) -> "PointwiseRegion":
        values = {
            "r_min": self.r_min,
            "r_max": self.r_max,
            "n_radial": self.n_radial,
            "n_angular": self.n_angular,
            "blocks": self.blocks,
            "include_zero": self.include_zero,
            "constraint": self.constraint,
            "constraint_name": self.constraint_name,
        }
        values.update(changes)
        return PointwiseRegion(**values)

    def refined(self) -> "PointwiseRegion":
        """Same box with twice the radial and angular resolution."""
        return self._copy(n_radial=2 * self.n_radial, n_angular=2 * self.n_angular)

    def extended(self, factor: float = 10.0) -> "PointwiseRegion":
        """Same resolution per decade, larger outer radius."""
        decades = np.log10(self.r_max * factor / self.r_min) / np.log10(self.r_max / self.r_min)
        return self._copy(r_max=self.r_max * factor, n_radial=int(np.ceil(self.n_radial * decades)))

    def restricted(self, predicate: Callable[[np.ndarray], np.ndarray], name: str) -> "PointwiseRegion":
        """Region keeping only the points where predicate holds (and any earlier constraint)."""
        previous = self.constraint
        if previous is None:
            combined = predicate
            combined_name = name
        else:
            def combined(points: np.ndarray) -> np.ndarray:
                return previous(points) & predicate(points)
            combined_name = f"{self.constraint_name} & {name}"
        return self._copy(constraint=combined, constraint_name=combined_name)

    def to_dict(self) -> dict:
        return {
            "r_min": self.r_min,
            "r_max": self.r_max,
            "n_radial": self.n_radial,
            "n_angular": self.n_angular,
            "blocks": self.blocks,
            "include_zero": self.include_zero,
            "constraint": self.constraint_name,
        }

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointwiseRegion):
            return NotImplemented
        return self.to_dict() == other.to_dict()


class InequalityCertificate:
    """Measured constants of one pointwise inequality over a sampled region."""

    name: str
    measured_constants: dict[str, float]
    worst_point: list[float] | None
    worst_ratio: float
    passed: bool
    grid: PointwiseRegion | None
    inner_constants: dict[str, float]
    top_points: list[list[float]]
    notes: str | None

    def __init__(
        self,
        name: str,
        measured_constants: dict[str, float],
        worst_point: list[float] | None,
        worst_ratio: float,
        passed: bool,
        grid: PointwiseRegion | None = None,
        inner_constants: dict[str, float] | None = None,
        top_points: list[list[float]] | None = None,
        notes: str | None = None,
    ) -> None:
        self.name = name
        self.measured_constants = {k: float(v) for k, v in measured_constants.items()}
        self.worst_point = worst_point
        self.worst_ratio = float(worst_ratio)
        self.passed = bool(passed)
        self.grid = grid
        self.inner_constants = {k: float(v) for k, v in (inner_constants or {}).items()}
        self.top_points = top_points or []
        self.notes = notes

    def to_record(self) -> dict:
        return {
            "name": self.name,
            "measured_constants": self.measured_constants,
            "inner_constants": self.inner_constants,
            "worst_point": self.worst_point,
            "worst_ratio": self.worst_ratio,
            "passed": self.passed,
            "grid": self.grid.to_dict() if self.grid is not None else None,
            "notes": self.notes,
        }


class TestFunctionSpec:
    """Seeded ensemble of smooth, rapidly decaying test functions."""

    __test__ = False

    kind: str
    seed: int
    size: int
    envelope_width: float
    max_mode: int
    adversarial_every: int

    def __init__(
        self,
        kind: str,
        seed: int,
        size: int = 8,
        envelope_width: float = ENVELOPE_WIDTH,
        max_mode: int = 8,
        adversarial_every: int = 4,
    ) -> None:
        if kind not in ENSEMBLE_KINDS:
            raise ConfigError("schema", message=f"Unknown ensemble kind {kind!r}.")
        if size < 1 or envelope_width <= 0.0 or max_mode < 0 or adversarial_every < 1:
            raise ConfigError("schema", message="Ensemble size, width and modes must be positive.")
        self.kind = kind
        self.seed = int(seed)
        self.size = int(size)
        self.envelope_width = float(envelope_width)
        self.max_mode = int(max_mode)
        self.adversarial_every = int(adversarial_every)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "size": self.size,
            "envelope_width": self.envelope_width,
            "max_mode": self.max_mode,
            "adversarial_every": self.adversarial_every,
        }


class EstimateMeasurement:
    """Per sample left and right hand sides of one a priori estimate."""

    which: str
    lhs_norms: list[float]
    rhs_terms: dict[str, list[float]]
    ratios: list[float]
    resolution: dict
    ensemble_size: int
    conjectural: bool
    note: str

    def __init__(
        self,
        which: str,
        lhs_norms: list[float],
        rhs_terms: dict[str, list[float]],
        ratios: list[float],
        resolution: dict,
        ensemble_size: int,
        conjectural: bool = False,
        note: str = "",
    ) -> None:
        self.which = which
        self.lhs_norms = [float(v) for v in lhs_norms]
        self.rhs_terms = {k: [float(v) for v in values] for k, values in rhs_terms.items()}
        self.ratios = [float(v) for v in ratios]
        self.resolution = resolution
        self.ensemble_size = int(ensemble_size)
        self.conjectural = bool(conjectural)
        self.note = note

    @property
    def max_ratio(self) -> float:
        return max(self.ratios) if self.ratios else 0.0

    def to_record(self) -> dict:
        return {
            "which": self.which,
            "max_ratio": self.max_ratio,
            "ratios": self.ratios,
            "lhs_norms": self.lhs_norms,
            "rhs_terms": self.rhs_terms,
            "resolution": self.resolution,
            "ensemble_size": self.ensemble_size,
            "conjectural": self.conjectural,
            "note": self.note,
        }


class ExponentSettings:
    """Exponent section of a run configuration; r is only known after the Kalman step."""

    lambda0: float
    q: list[float]
    s: list[float]
    hypotheses: str
    margin: float

    def __init__(self, lambda0: float, q: list[float] | None = None, s: list[float] | None = None,
                 hypotheses: str = "theorem", margin: float = 0.0) -> None:
        self.lambda0 = float(lambda0)
        self.q = [float(v) for v in (q or [])]
        self.s = [float(v) for v in (s or [])]
        self.hypotheses = hypotheses
        self.margin = float(margin)

    def for_index(self, r: int) -> ExponentInput:
        """
        Exponent input for a chain of length r.

        Shorter q and s lists describe the last steps of the chain; the leading
        entries are filled with zeros.
        """
        if len(self.q) > r or len(self.s) > r:
            raise InvalidExponents("exponent_length", r=r, q_length=len(self.q), s_length=len(self.s))
        q = [0.0] * (r - len(self.q)) + self.q
        s = [0.0] * (r - len(self.s)) + self.s
        return ExponentInput(self.lambda0, r, q, s, self.hypotheses)

    def to_dict(self) -> dict:
        return {"lambda0": self.lambda0, "q": self.q, "s": self.s, "hypotheses": self.hypotheses, "margin": self.margin}


class PointwiseSettings:
    """Pointwise section of a run configuration."""

    region: PointwiseRegion
    eps: float
    gamma_cap: float
    pass_margin: float
    constant_cap: float
    omega1_c1: float | None
    omega1_sensitivity: bool
    fd_points: int
    coercivity_samples: int
    particular_chain: bool
    drift_check: bool

    def __init__(
        self,
        region: PointwiseRegion | None = None,
        eps: float = DEFAULT_EPS,
        gamma_cap: float = GAMMA_CAP,
        pass_margin: float = PASS_MARGIN,
        constant_cap: float = CONSTANT_CAP,
        omega1_c1: float | None = None,
        omega1_sensitivity: bool = False,
        fd_points: int = 256,
        coercivity_samples: int = 512,
        particular_chain: bool = False,
        drift_check: bool = True,
    ) -> None:
        self.region = region or PointwiseRegion()
        self.eps = float(eps)
        self.gamma_cap = float(gamma_cap)
        self.pass_margin = float(pass_margin)
        self.constant_cap = float(constant_cap)
        self.omega1_c1 = None if omega1_c1 is None else float(omega1_c1)
        self.omega1_sensitivity = bool(omega1_sensitivity)
        self.fd_points = int(fd_points)
        self.coercivity_samples = int(coercivity_samples)
        self.particular_chain = bool(particular_chain)
        self.drift_check = bool(drift_check)

    def to_dict(self) -> dict:
        return {
            "region": self.region.to_dict(),
            "eps": self.eps,
            "gamma_cap": self.gamma_cap,
            "pass_margin": self.pass_margin,
            "constant_cap": self.constant_cap,
            "omega1_c1": self.omega1_c1,
            "omega1_sensitivity": self.omega1_sensitivity,
            "fd_points": self.fd_points,
            "coercivity_samples": self.coercivity_samples,
            "particular_chain": self.particular_chain,
            "drift_check": self.drift_check,
        }


class SpectralSettings:
    """Spectral section of a run configuration."""

    box_length: float
    points_per_axis: int
    pad_factor: int
    estimates: list[str]
    blocks: list[int] | None
    ensemble: TestFunctionSpec

    def __init__(
        self,
        ensemble: TestFunctionSpec,
        box_length: float = BOX_LENGTH,
        points_per_axis: int = 64,
        pad_factor: int = PAD_FACTOR,
        estimates: list[str] | None = None,
        blocks: list[int] | None = None,
    ) -> None:
        self.ensemble = ensemble
        self.box_length = float(box_length)
        self.points_per_axis = int(points_per_axis)
        self.pad_factor = int(pad_factor)
        self.estimates = list(estimates if estimates is not None else ["theorem-main"])
        self.blocks = list(blocks) if blocks is not None else None

    def to_dict(self) -> dict:
        return {
            "box_length": self.box_length,
            "points_per_axis": self.points_per_axis,
            "pad_factor": self.pad_factor,
            "estimates": self.estimates,
            "blocks": self.blocks,
            "ensemble": self.ensemble.to_dict(),
        }


class RunConfig:
    """A complete, validated run configuration."""

    name: str
    operator: OperatorSpec
    exponents: ExponentSettings | None
    cutoffs: CutoffPair
    pointwise: PointwiseSettings | None
    spectral: SpectralSettings | None
    experiments: dict[str, bool]
    tasks: list[str]
    output_dir: str | None

    def __init__(
        self,
        operator: OperatorSpec,
        exponents: ExponentSettings | None = None,
        cutoffs: CutoffPair | None = None,
        pointwise: PointwiseSettings | None = None,
        spectral: SpectralSettings | None = None,
        experiments: dict[str, bool] | None = None,
        tasks: list[str] | None = None,
        output_dir: str | None = None,
        name: str = "run",
    ) -> None:
        self.name = name
        self.operator = operator
        self.exponents = exponents
        self.cutoffs = cutoffs or CutoffPair()
        self.pointwise = pointwise
        self.spectral = spectral
        self.experiments = dict(experiments or {})
        requested = list(tasks if tasks is not None else TASKS)
        self.tasks = [task for task in TASKS if task in requested]
        self.output_dir = output_dir

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "operator": self.operator.to_dict(),
            "exponents": self.exponents.to_dict() if self.exponents is not None else None,
            "cutoffs": self.cutoffs.to_dict(),
            "pointwise": self.pointwise.to_dict() if self.pointwise is not None else None,
            "spectral": self.spectral.to_dict() if self.spectral is not None else None,
            "experiments": self.experiments,
            "tasks": self.tasks,
            "output_dir": self.output_dir,
        }

    def __eq__(self, other) -> bool:
        if not isinstance(other, RunConfig):
            return NotImplemented
        return self.to_dict() == other.to_dict()


class VerificationReport:
    """Everything a run measured, ready to be written as JSON and CSV."""

    config_echo: dict
    tasks: dict[str, str]
    kalman: dict | None
    exponent_chain: dict | None
    admissibility: dict | None
    certificates: list[InequalityCertificate]
    spectral: list[EstimateMeasurement]
    gamma_schedule: GammaSchedule | None
    diagnostics: dict
    errors: list[dict]
    failed_checks: list[str]
    tool_version: str
    wall_times: dict[str, float]

    def __init__(self, config_echo: dict, tool_version: str) -> None:
        self.config_echo = config_echo
        self.tool_version = tool_version
        self.tasks = {}
        self.kalman = None
        self.exponent_chain = None
        self.admissibility = None
        self.certificates = []
        self.spectral = []
        self.gamma_schedule = None
        self.diagnostics = {}
        self.errors = []
        self.failed_checks = []
        self.wall_times = {}

    @property
    def exit_code(self) -> int:
        return self.errors[0]["exit_code"] if self.errors else 0

    @property
    def all_certificates_passed(self) -> bool:
        return all(cert.passed for cert in self.certificates)

    @property
    def all_checks_passed(self) -> bool:
        """Certificates plus the numerical self checks (finite differences, commutator identity)."""
        return self.all_certificates_passed and not self.failed_checks

    def to_dict(self) -> dict:
        return {
            "config": self.config_echo,
            "tasks": self.tasks,
            "kalman": self.kalman,
            "exponent_chain": self.exponent_chain,
            "admissibility": self.admissibility,
            "certificates": [cert.to_record() for cert in self.certificates],
            "spectral": [m.to_record() for m in self.spectral],
            "gamma_schedule": self.gamma_schedule.to_dict() if self.gamma_schedule is not None else None,
            "diagnostics": self.diagnostics,
            "errors": self.errors,
            "failed_checks": self.failed_checks,
            "tool_version": self.tool_version,
            "wall_times": self.wall_times,
        }

"""
Main class for a hypocert verification run.

Singleton class per run name that executes the requested tasks in dependency
order and collects everything they measure into one VerificationReport.
Prerequisites of a requested task are computed without being published; a
failing task is recorded as a structured error and every task depending on
it is marked skipped instead of aborting the run.
"""
import asyncio
import copy
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from hypocert.const import (
    COMMUTATOR_TOLERANCE,
    DRIFT_LIMIT,
    ENV_MAX_WORKERS,
    FD_BAND,
    FD_TOLERANCE,
    FREQUENCY_CONVENTION,
    GAMMA_START,
    TASK_DEPENDENCIES,
    TASKS,
    VERSION,
)
from hypocert.cutoffs import dominance_certificate
from hypocert.errors import HypocertError
from hypocert.exponents import closed_form_lambda_r, exponent_chain
from hypocert.kalman import directional_coercivity_constant, iterated_directions, kalman_index, kalman_rank_holds
from hypocert.models import (
    CutoffSpec,
    ExponentChain,
    ExponentInput,
    InequalityCertificate,
    OperatorSpec,
    PointwiseSettings,
    RunConfig,
    VerificationReport,
)
from hypocert.multipliers.assembly import AssembledMultiplier, build_full_multiplier, lemma_derivative_bounds, omega_sensitivity
from hypocert.multipliers.gr import build_gr
from hypocert.multipliers.particular import build_particular_g1_g2, verify_particular_chain
from hypocert.multipliers.symbols import finite_difference_check
from hypocert.sampling import region_points
from hypocert.spectral.checks import async_commutator_identity_check, async_measure_estimate
from hypocert.spectral.ensembles import generate_ensemble
from hypocert.spectral.grid import SpectralGrid
from hypocert.spectral.operators import skew_adjointness_defect

_LOGGER = logging.getLogger(__name__)

KNIFE_EDGE = 1e-9
CLOSED_FORM_TOLERANCE = 1e-12
COMMUTATOR_MEMBERS = 20
DEFAULT_WORKERS = 4

VerificationRunInstances: dict[str, "VerificationRun"] = {}


def max_workers() -> int:
    """Worker cap for ensemble evaluation, from HYPOCERT_MAX_WORKERS."""
    try:
        return max(1, int(os.getenv(ENV_MAX_WORKERS, DEFAULT_WORKERS)))
    except ValueError:
        _LOGGER.warning("Ignoring non integer %s", ENV_MAX_WORKERS)
        return DEFAULT_WORKERS


def _relative_drift(base: float, other: float) -> float:
    if not (np.isfinite(base) and np.isfinite(other)):
        return float("inf")
    return abs(other - base) / max(abs(base), np.finfo(float).tiny)


class VerificationRun:
    """Executes the tasks of one RunConfig."""

    config: RunConfig
    update_lock: asyncio.Lock
    report: VerificationReport | None

    # Intermediate results shared between tasks
    spec: OperatorSpec
    cut: CutoffSpec
    index: int | None
    c0: float | None
    chain: ExponentChain | None
    assembled: AssembledMultiplier | None
    particular: dict | None

    def __init__(self, config: RunConfig) -> None:
        """
        Initialize the VerificationRun class.
        """
        self.config = config
        self.spec = config.operator
        self.cut = config.cutoffs.combined()
        self.update_lock = asyncio.Lock()
        self.report = None
        self._executor = None
        self.clean_data()

    @classmethod
    def get_instance(cls, config: RunConfig) -> "VerificationRun":
        """
        Get or create the instance for config.name; a changed config replaces the old instance.
        """
        instance = VerificationRunInstances.get(config.name)
        if instance is None or instance.config != config:
            VerificationRunInstances[config.name] = cls(config)
        return VerificationRunInstances[config.name]

    @classmethod
    def clean_instances(cls) -> None:
        """
        Clean all instances of VerificationRun.
        This is used for testing purposes to reset the singleton instances.
        """
        VerificationRunInstances.clear()

    def clean_data(self) -> None:
        self.index = None
        self.c0 = None
        self.chain = None
        self.assembled = None
        self.particular = None

    @property
    def pointwise(self) -> PointwiseSettings:
        return self.config.pointwise or PointwiseSettings()

    def _needed_tasks(self) -> list[str]:
        needed = set(self.config.tasks)
        for task in self.config.tasks:
            needed.update(TASK_DEPENDENCIES[task])
        return [task for task in TASKS if task in needed]

    async def async_run(self) -> VerificationReport:
        """Run every requested task once; concurrent callers wait for the running pipeline."""
        async with self.update_lock:
            self.clean_data()
            report = VerificationReport(self.config.to_dict(), VERSION)
            failed: set[str] = set()
            self._executor = ThreadPoolExecutor(max_workers=max_workers())
            try:
                for task in self._needed_tasks():
                    publish = task in self.config.tasks
                    blocked = [dep for dep in TASK_DEPENDENCIES[task] if dep in failed]
                    if blocked:
                        failed.add(task)
                        if publish:
                            report.tasks[task] = "skipped"
                        _LOGGER.info("Skipping %s because %s failed", task, ", ".join(blocked))
                        continue

                    start = time.perf_counter()
                    _LOGGER.info("Starting task %s", task)
                    try:
                        await self._run_task(task, report, publish)
                    except HypocertError as e:
                        _LOGGER.error("Task %s failed: %s", task, e)
                        failed.add(task)
                        report.errors.append(dict(e.record, task=task))
                        if publish:
                            report.tasks[task] = "failed"
                    else:
                        if publish:
                            report.tasks[task] = "ok"
                    elapsed = time.perf_counter() - start
                    report.wall_times[task] = elapsed
                    _LOGGER.info("Finished task %s in %.3f s", task, elapsed)
            finally:
                self._executor.shutdown(wait=True)
                self._executor = None
            self.report = report
            return report

    async def _run_task(self, task: str, report: VerificationReport, publish: bool) -> None:
        if task == "kalman":
            self.update_kalman(report, publish)
        elif task == "exponents":
            self.update_exponents(report, publish)
        elif task == "build":
            self.update_build(report, publish)
        elif task == "verify-pointwise":
            self.update_verify_pointwise(report)
        elif task == "verify-spectral":
            await self.async_update_verify_spectral(report)

    def update_kalman(self, report: VerificationReport, publish: bool = True) -> None:
        """Kalman index and the coercivity constant of the direction sum."""
        self.index = kalman_index(self.spec)
        directions = iterated_directions(self.spec)
        self.c0 = directional_coercivity_constant(directions, self.index, self.pointwise.coercivity_samples)
        _LOGGER.debug("Kalman index %s for n=%s, c0=%s", self.index, self.spec.dim, self.c0)
        if publish:
            report.kalman = {
                "rank_ok": kalman_rank_holds(self.spec),
                "r": self.index,
                "c0_estimate": self.c0,
                "dim": self.spec.dim,
                "time_dependent": self.spec.time_dependent,
            }

    def update_exponents(self, report: VerificationReport, publish: bool = True) -> None:
        """Exponent chain for r = Kalman index and, from r = 2 on, the admissibility checks."""
        settings = self.config.exponents
        inputs = settings.for_index(self.index)
        self.chain = exponent_chain(inputs, settings.margin)
        admissibility = self.chain.equivalences
        if admissibility is not None:
            for eq in admissibility.equivalences:
                if eq.distance < KNIFE_EDGE:
                    _LOGGER.warning("Admissibility check %s is within %s of its boundary", eq.name, KNIFE_EDGE)
        closed_form = self._closed_form_gap(inputs)
        if publish:
            report.exponent_chain = self.chain.to_dict()
            if closed_form is not None:
                report.diagnostics["closed_form"] = closed_form
            report.admissibility = admissibility.to_dict() if admissibility is not None else None

    def _closed_form_gap(self, inputs: ExponentInput) -> dict | None:
        """Relative gap between the recursion and the two step closed form, when the latter applies."""
        if inputs.r < 2 or any(inputs.q[:inputs.r - 2]) or any(inputs.s[:inputs.r - 2]):
            return None
        before_last, last = closed_form_lambda_r(inputs)
        gap = max(
            abs(before_last - self.chain.lambdas[-2]) / self.chain.lambdas[-2],
            abs(last - self.chain.lambdas[-1]) / self.chain.lambdas[-1],
        )
        if gap > CLOSED_FORM_TOLERANCE:
            _LOGGER.warning("Exponent recursion and closed form differ by %s", gap)
        return {"lambda_rm1": before_last, "lambda_r": last, "relative_gap": gap}

    def update_build(self, report: VerificationReport, publish: bool = True) -> None:
        """Construct the full multiplier, running the Gamma searches it needs."""
        settings = self.pointwise
        self.assembled = build_full_multiplier(self.spec, self.chain, self.cut, settings.eps, settings, c0=self.c0)
        if settings.particular_chain and self.chain.r >= 2:
            self.particular = self._build_particular(settings)
        if publish:
            report.gamma_schedule = self.assembled.schedule
            report.diagnostics["multiplier"] = {
                "description": self.assembled.symbol.description,
                "components": sorted(self.assembled.components),
                "c0": self.assembled.c0,
            }
            if self.particular is not None:
                report.diagnostics["particular_chain"] = {
                    "gamma_schedule": self.particular["schedule"].to_dict(),
                }

    def _build_particular(self, settings: PointwiseSettings) -> dict:
        n_block = self.spec.dim // 3
        chain = self.chain if self.chain.r == 2 else self.chain.truncated(2)
        g1, g2 = build_particular_g1_g2(chain, self.cut, GAMMA_START, n_block)
        certificates, schedule, g2 = verify_particular_chain(
            g1, g2, chain, self.cut, settings.region,
            gamma_cap=settings.gamma_cap,
            pass_margin=settings.pass_margin,
            n_block=n_block,
            cap=settings.constant_cap,
        )
        return {"g1": g1, "g2": g2, "certificates": certificates, "schedule": schedule}

    def update_verify_pointwise(self, report: VerificationReport) -> None:
        """Publish the certificates of every level plus the diagnostics that back them."""
        settings = self.pointwise
        region = settings.region
        cap = settings.constant_cap
        dominance = dominance_certificate(self.config.cutoffs.psi, self.config.cutoffs.w)
        report.diagnostics["dominance"] = dominance.to_dict()

        certificates: list[InequalityCertificate] = list(self.assembled.certificates)
        certificates.extend(lemma_derivative_bounds(self.spec, self.chain, self.cut, region, self.assembled.schedule.gammas or None, cap))
        if self.particular is not None:
            certificates.extend(self.particular["certificates"])
        if settings.omega1_sensitivity:
            certificates.extend(omega_sensitivity(self.spec, self.chain, self.cut, settings.eps, settings))
        report.certificates = certificates
        for cert in certificates:
            if not cert.passed:
                _LOGGER.warning("Certificate %s did not pass (worst ratio %s)", cert.name, cert.worst_ratio)

        finite_differences = self._finite_differences(region, settings.fd_points)
        report.diagnostics["finite_differences"] = finite_differences
        report.failed_checks.extend(f"finite_differences.{name}" for name, result in finite_differences.items() if not result["passed"])
        if settings.drift_check:
            drift = self._drift(settings)
            report.diagnostics["drift"] = drift
            report.failed_checks.extend(f"drift.{label}" for label in ("refined", "extended") if not drift[label]["passed"])
        if self.particular is not None:
            report.diagnostics["particular_cross_check"] = self._cross_check()

    def _finite_differences(self, region, count: int) -> dict:
        points = region_points(region, self.spec.dim)
        if points.shape[0] > count:
            points = points[np.linspace(0, points.shape[0] - 1, count).astype(int)]
        symbols = {"g": self.assembled.symbol}
        symbols.update(self.assembled.components)
        if self.particular is not None:
            symbols["chain.g1"] = self.particular["g1"]
            symbols["chain.g2"] = self.particular["g2"]
        results = {}
        for name in sorted(symbols):
            result = finite_difference_check(symbols[name], points, FD_BAND)
            result["passed"] = result["max_error"] <= FD_TOLERANCE
            if not result["passed"]:
                _LOGGER.warning("Derivative of %s deviates from finite differences by %s", name, result["max_error"])
            results[name] = result
        return results

    def _target_constants(self, settings: PointwiseSettings) -> dict[str, float]:
        result = build_full_multiplier(self.spec, self.chain, self.cut, settings.eps, settings, c0=self.c0)
        target = next(c for c in result.certificates if c.name == "target_estimate")
        return target.measured_constants

    def _drift(self, settings: PointwiseSettings) -> dict:
        """Target constants on the configured, the refined and the extended region."""
        base = next(c for c in self.assembled.certificates if c.name == "target_estimate").measured_constants
        variants = {}
        for label, region in (("refined", settings.region.refined()), ("extended", settings.region.extended())):
            varied = copy.copy(settings)
            varied.region = region
            constants = self._target_constants(varied)
            drift = {name: _relative_drift(base[name], constants.get(name, float("inf"))) for name in base}
            worst = max(drift.values(), default=0.0)
            variants[label] = {"constants": constants, "drift": drift, "passed": worst <= DRIFT_LIMIT}
            if worst > DRIFT_LIMIT:
                _LOGGER.warning("Target constants drift by %.1f%% on the %s region", 100.0 * worst, label)
        return {"base": base, "limit": DRIFT_LIMIT, **variants}

    def _cross_check(self) -> dict:
        """Relative difference between the two step chain constants and the general construction."""
        general = next(c for c in self.assembled.certificates if c.name == "target_estimate")
        particular = next(c for c in self.particular["certificates"] if c.name == "chain_full_estimate")
        general_total = sum(general.measured_constants.values())
        particular_total = sum(particular.measured_constants.values())
        return {
            "general_constants": general.measured_constants,
            "chain_constants": particular.measured_constants,
            "relative_difference": _relative_drift(general_total, particular_total),
        }

    async def async_update_verify_spectral(self, report: VerificationReport) -> None:
        """Ensemble measurements of the estimates plus the operator level diagnostics."""
        settings = self.config.spectral
        grid = SpectralGrid(
            self.spec.dim + (1 if self.spec.time_dependent else 0),
            settings.box_length,
            settings.points_per_axis,
            time_axis=self.spec.time_dependent,
        )
        ensemble = generate_ensemble(settings.ensemble, grid)
        n_block = settings.blocks[0] if settings.blocks else None

        measurements = []
        for which in settings.estimates:
            measurement = await async_measure_estimate(self.spec, grid, self.chain, ensemble, which, self._executor, n_block)
            _LOGGER.debug("Estimate %s: max ratio %s", which, measurement.max_ratio)
            measurements.append(measurement)
        report.spectral = measurements

        diagnostics = {
            "frequency_convention": FREQUENCY_CONVENTION,
            "plancherel_max_error": max(grid.plancherel_error(u) for u in ensemble),
            "skew_adjointness_max_defect": max(skew_adjointness_defect(self.spec, grid, u) for u in ensemble),
        }
        if self.chain.r >= 1:
            g = build_gr(self.spec, self.chain, self.cut, index=self.chain.r)
            commutator = await async_commutator_identity_check(
                self.spec, grid, g, ensemble[:COMMUTATOR_MEMBERS], settings.pad_factor, self._executor,
            )
            passed = commutator.passed()
            diagnostics["commutator"] = dict(commutator.to_dict(), symbol=g.description, tolerance=COMMUTATOR_TOLERANCE, passed=passed)
            if not passed:
                _LOGGER.warning(
                    "Commutator identity for %s misses its tolerance: error %s, d_t contribution %s",
                    g.description, commutator.max_error, commutator.max_time_contribution,
                )
                report.failed_checks.append("commutator")
        report.diagnostics["spectral"] = diagnostics


def run(config: RunConfig) -> VerificationReport:
    """Run config synchronously and return its report."""
    instance = VerificationRun.get_instance(config)
    return asyncio.run(instance.async_run())

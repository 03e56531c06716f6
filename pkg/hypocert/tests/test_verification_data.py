import unittest
from unittest.mock import AsyncMock, patch

from hypocert.config_flow import parse_config
from hypocert.errors import TailViolation
from hypocert.presets import preset_document
from hypocert.report import report_json
from hypocert.spectral.checks import CommutatorReport
from hypocert.verification_data import VerificationRun, VerificationRunInstances, max_workers

KINETIC = {"B": [[0, 1], [0, 0]], "Q": [[0, 0], [0, 1]]}
SMALL_REGION = {"r_min": 1.0, "r_max": 1e3, "n_radial": 8, "n_angular": 16}


def kinetic_config(tasks: list[str], name: str = "kinetic", **sections):
    document = {
        "name": name,
        "operator": KINETIC,
        "exponents": {"lambda0": 1.0},
        "pointwise": {"region": SMALL_REGION, "drift_check": False, "fd_points": 64},
        "spectral": {"ensemble": {"seed": 5, "size": 4, "max_mode": 4}, "points_per_axis": 32},
        "tasks": tasks,
    }
    document.update(sections)
    return parse_config(document)


class VerificationRunTest(unittest.IsolatedAsyncioTestCase):

    async def asyncSetUp(self):
        VerificationRun.clean_instances()

    async def test_singleton(self):
        config = kinetic_config(["kalman"])
        first = VerificationRun.get_instance(config)
        assert VerificationRun.get_instance(kinetic_config(["kalman"])) is first
        assert len(VerificationRunInstances) == 1

        # a changed config under the same name replaces the instance
        changed = VerificationRun.get_instance(kinetic_config(["kalman", "exponents"]))
        assert changed is not first
        assert VerificationRun.get_instance(kinetic_config(["kalman"], name="other")) is not changed
        assert len(VerificationRunInstances) == 2

        VerificationRun.clean_instances()
        assert len(VerificationRunInstances) == 0

    async def test_kalman_only(self):
        report = await VerificationRun.get_instance(kinetic_config(["kalman"])).async_run()
        assert report.tasks == {"kalman": "ok"}
        assert report.kalman["r"] == 1
        assert report.kalman["rank_ok"]
        assert report.kalman["dim"] == 2
        assert report.exponent_chain is None
        assert report.exit_code == 0
        assert set(report.wall_times) == {"kalman"}

    async def test_exponents_publish_prerequisites_only_when_requested(self):
        report = await VerificationRun.get_instance(kinetic_config(["exponents"])).async_run()
        assert report.tasks == {"exponents": "ok"}
        assert report.kalman is None
        assert report.exponent_chain["lambdas"] == [1.0, 0.5]
        assert report.admissibility is None

    async def test_exponents_publish_closed_form(self):
        document = dict(preset_document("chain-3-block"), tasks=["exponents"])
        document["exponents"] = {"lambda0": 1.0, "q": [0.1, 0.3], "s": [0.05, 0.2]}
        report = await VerificationRun.get_instance(parse_config(document)).async_run()
        closed_form = report.diagnostics["closed_form"]
        assert abs(closed_form["lambda_rm1"] - 1.05 / 1.9) < 1e-14
        assert abs(closed_form["lambda_r"] - 1.26 / 2.38) < 1e-14
        assert closed_form["relative_gap"] < 1e-12
        lambdas = report.exponent_chain["lambdas"]
        assert abs(lambdas[2] - closed_form["lambda_r"]) <= 1e-12 * lambdas[2]

    async def test_not_controllable(self):
        config = kinetic_config(["kalman", "exponents"], operator={"B": [[0, 0], [0, 0]], "Q": [[1, 0], [0, 0]]})
        report = await VerificationRun.get_instance(config).async_run()
        assert report.tasks == {"kalman": "failed", "exponents": "skipped"}
        assert report.exit_code == 3
        assert report.errors[0]["error"] == "NotControllable"
        assert report.errors[0]["task"] == "kalman"

    async def test_spectral_failure_is_recorded(self):
        config = kinetic_config(["kalman", "exponents", "verify-spectral"])
        with patch.object(VerificationRun, "async_update_verify_spectral", AsyncMock(side_effect=TailViolation("x"))):
            report = await VerificationRun.get_instance(config).async_run()
        assert report.tasks == {"kalman": "ok", "exponents": "ok", "verify-spectral": "failed"}
        assert report.exit_code == 5
        assert report.errors == [{"error": "TailViolation", "message": "x", "exit_code": 5, "task": "verify-spectral"}]

    async def test_full_kinetic_pipeline(self):
        config = kinetic_config(["kalman", "exponents", "build", "verify-pointwise", "verify-spectral"])
        report = await VerificationRun.get_instance(config).async_run()
        assert report.errors == []
        assert set(report.tasks.values()) == {"ok"}
        names = [cert.name for cert in report.certificates]
        assert "target_estimate" in names
        assert report.gamma_schedule.gammas == []
        assert report.diagnostics["dominance"]["c_one_minus_psi"] == 1.0
        assert "g" in report.diagnostics["finite_differences"]
        assert "drift" not in report.diagnostics

        spectral = report.diagnostics["spectral"]
        assert spectral["plancherel_max_error"] < 1e-12
        assert spectral["skew_adjointness_max_defect"] < 1e-9
        assert [m.which for m in report.spectral] == ["theorem-main"]
        assert len(report.spectral[0].ratios) == 4
        commutator = spectral["commutator"]
        assert commutator["passed"]
        assert commutator["max_error"] <= commutator["tolerance"]
        assert commutator["padded_axes"] == [1]
        assert "commutator" not in report.failed_checks

    async def test_commutator_failure_is_gated(self):
        config = kinetic_config(["kalman", "exponents", "verify-spectral"])
        with patch.object(CommutatorReport, "passed", return_value=False):
            report = await VerificationRun.get_instance(config).async_run()
        assert report.tasks["verify-spectral"] == "ok"
        assert report.diagnostics["spectral"]["commutator"]["passed"] is False
        assert report.failed_checks == ["commutator"]
        assert not report.all_checks_passed
        assert report.exit_code == 0

    async def test_target_constants_are_stable(self):
        pointwise = {"region": {"r_min": 1.0, "r_max": 1e4}, "drift_check": True, "fd_points": 64}
        config = kinetic_config(["kalman", "exponents", "build", "verify-pointwise"], pointwise=pointwise)
        report = await VerificationRun.get_instance(config).async_run()
        drift = report.diagnostics["drift"]
        assert set(drift["base"]) == {"c2", "c3"}
        for label in ("refined", "extended"):
            assert drift[label]["passed"], drift[label]
            assert max(drift[label]["drift"].values()) <= 0.2
        assert report.failed_checks == []

    async def test_drift_is_gated(self):
        pointwise = {"region": SMALL_REGION, "drift_check": True, "fd_points": 64}
        config = kinetic_config(["kalman", "exponents", "build", "verify-pointwise"], pointwise=pointwise)
        with patch("hypocert.verification_data._relative_drift", return_value=0.5):
            report = await VerificationRun.get_instance(config).async_run()
        assert report.failed_checks == ["drift.refined", "drift.extended"]
        assert not report.all_checks_passed

    async def test_report_is_deterministic(self):
        config = kinetic_config(["kalman", "exponents", "build", "verify-pointwise"])
        first = report_json(await VerificationRun.get_instance(config).async_run(), include_timings=False)
        VerificationRun.clean_instances()
        second = report_json(await VerificationRun.get_instance(config).async_run(), include_timings=False)
        assert first == second
        assert "wall_times" not in first


class MaxWorkersTest(unittest.TestCase):

    def test_environment(self):
        with patch.dict("os.environ", {"HYPOCERT_MAX_WORKERS": "2"}):
            assert max_workers() == 2
        with patch.dict("os.environ", {"HYPOCERT_MAX_WORKERS": "many"}):
            assert max_workers() == 4

import contextlib
import csv
import io
import json
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import numpy as np

from hypocert.__main__ import main
from hypocert.const import VERSION
from hypocert.models import EstimateMeasurement, InequalityCertificate, VerificationReport
from hypocert.report import report_json, sanitize, write_report


def sample_report() -> VerificationReport:
    report = VerificationReport({"name": "sample"}, VERSION)
    report.tasks = {"verify-pointwise": "ok"}
    report.certificates = [
        InequalityCertificate(
            "g1_bound",
            {"c": 0.5},
            [1.0, 2.0],
            0.5,
            True,
            top_points=[[1.0, 2.0, 0.5, 1.0, 0.5], [0.0, 1.0, 0.1, 1.0, 0.1]],
        )
    ]
    report.spectral = [
        EstimateMeasurement("theorem-main", [1.0, 2.0], {"L": [1.0, 1.0], "l2": [0.5, np.inf]}, [0.5, 0.0], {}, 2)
    ]
    report.diagnostics = {"worst": float("inf"), "scale": np.float64(2.0)}
    report.wall_times = {"verify-pointwise": 0.25}
    return report


class ReportTest(unittest.TestCase):

    def test_sanitize(self):
        value = sanitize({"a": [float("inf"), -np.inf, float("nan")], 1: np.int64(3), "b": (1.5,)})
        assert value == {"a": ["inf", "-inf", "nan"], "1": 3, "b": [1.5]}
        assert isinstance(value["1"], int)

    def test_report_json(self):
        document = json.loads(report_json(sample_report()))
        assert document["diagnostics"] == {"worst": "inf", "scale": 2.0}
        assert document["tool_version"] == VERSION
        assert document["certificates"][0]["name"] == "g1_bound"

        document = json.loads(report_json(sample_report(), include_timings=False))
        assert "wall_times" not in document
        assert "tool_version" not in document

    def test_write_report(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_report(sample_report(), Path(tmp) / "out")
            assert path.name == "report.json"
            assert json.loads(path.read_text(encoding="utf-8"))["tasks"] == {"verify-pointwise": "ok"}

            with (path.parent / "certificates" / "g1_bound.csv").open(encoding="utf-8") as f:
                rows = list(csv.DictReader(f))
            assert list(rows[0]) == ["xi_0", "xi_1", "lhs", "rhs", "ratio"]
            assert rows[0]["ratio"] == "0.5"

            with (path.parent / "estimates" / "theorem-main.csv").open(encoding="utf-8") as f:
                rows = list(csv.DictReader(f))
            assert list(rows[0]) == ["sample", "lhs", "rhs_L", "rhs_l2", "ratio"]
            assert rows[1]["rhs_l2"] == "inf"


class CommandLineTest(unittest.TestCase):

    def run_main(self, argv: list[str]) -> tuple[int, str]:
        out = io.StringIO()
        with contextlib.redirect_stdout(out):
            code = main(argv)
        return code, out.getvalue()

    def test_version(self):
        code, out = self.run_main(["version"])
        assert code == 0
        assert out.strip() == VERSION

    def test_presets(self):
        code, out = self.run_main(["presets", "list"])
        assert code == 0
        assert out.split() == [
            "kinetic-autonomous",
            "kinetic-time-dependent",
            "chain-3-block",
            "full-rank-Q",
            "random-controllable",
        ]

        code, out = self.run_main(["presets", "show", "full-rank-Q"])
        assert code == 0
        assert json.loads(out)["operator"]["Q"] == [[1.0, 0.0], [0.0, 1.0]]

        code, out = self.run_main(["presets", "show", "nothing"])
        assert code == 2
        assert json.loads(out)["errors"][0]["key"] == "preset_unknown"

    def test_unknown_target(self):
        code, out = self.run_main(["run", "no-such-preset"])
        assert code == 2
        assert json.loads(out)["errors"][0]["error"] == "ConfigError"

    def test_unknown_task(self):
        code, out = self.run_main(["run", "kinetic-autonomous", "--tasks", "kalman,fly"])
        assert code == 2
        assert json.loads(out)["errors"][0]["key"] == "task_unknown"

    def test_run_to_stdout(self):
        code, out = self.run_main(["run", "kinetic-autonomous", "--tasks", "kalman"])
        assert code == 0
        document = json.loads(out)
        assert document["tasks"] == {"kalman": "ok"}
        assert document["kalman"]["r"] == 1

    def test_run_to_directory(self):
        with tempfile.TemporaryDirectory() as tmp:
            code, _ = self.run_main(["run", "chain-3-block", "--tasks", "kalman,exponents", "-o", tmp, "--seed", "3"])
            assert code == 0
            document = json.loads((Path(tmp) / "report.json").read_text(encoding="utf-8"))
            assert document["kalman"]["r"] == 2
            assert document["config"]["spectral"]["ensemble"]["seed"] == 3
            assert document["admissibility"] is not None

    def test_strict_counts_failed_checks(self):
        report = VerificationReport({"name": "kinetic-autonomous"}, VERSION)
        report.tasks = {"kalman": "ok"}
        report.failed_checks = ["commutator"]
        with patch("hypocert.__main__.run", return_value=report):
            code, _ = self.run_main(["run", "kinetic-autonomous", "--tasks", "kalman"])
            assert code == 0
            code, out = self.run_main(["run", "kinetic-autonomous", "--tasks", "kalman", "--strict"])
        assert code == 1
        assert json.loads(out)["failed_checks"] == ["commutator"]

    def test_run_config_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "uncontrollable.yaml"
            path.write_text(
                "operator:\n  B: [[0, 0], [0, 0]]\n  Q: [[1, 0], [0, 0]]\ntasks: [kalman]\n",
                encoding="utf-8",
            )
            code, out = self.run_main(["run", str(path)])
            assert code == 3
            assert json.loads(out)["tasks"] == {"kalman": "failed"}

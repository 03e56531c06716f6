import json
import tempfile
import unittest
from pathlib import Path

import numpy as np

from hypocert.config_flow import RunConfigFlow, async_parse_config, load_config, load_document, parse_config
from hypocert.const import EXIT_CONFIG, TASKS
from hypocert.errors import ConfigError
from hypocert.kalman import kalman_index
from hypocert.presets import RANDOM_SEED, preset, preset_document, preset_names, presets


def kinetic_document(**changes) -> dict:
    document = {
        "name": "kinetic-test",
        "operator": {"B": [[0, 1], [0, 0]], "Q": [[0, 0], [0, 1]]},
        "exponents": {"lambda0": 1},
        "pointwise": {"region": {"r_min": 1, "r_max": 100, "n_radial": 8, "n_angular": 16}},
        "spectral": {"ensemble": {"seed": 1, "size": 4}, "points_per_axis": 32},
    }
    document.update(changes)
    return document


class RunConfigFlowTest(unittest.IsolatedAsyncioTestCase):

    async def test_empty_step(self):
        flow = RunConfigFlow()
        config, errors = await flow.async_step_user(None)
        assert config is None
        assert errors == {}

    async def test_defaults(self):
        config = await async_parse_config(kinetic_document())
        assert config.name == "kinetic-test"
        assert config.tasks == list(TASKS)
        assert config.operator.rank_tol == 1e-10
        assert not config.operator.time_dependent
        assert config.exponents.q == [] and config.exponents.hypotheses == "theorem"
        assert config.cutoffs.psi.psi_inner == 0.5 and config.cutoffs.w.w_outer == 0.5
        assert config.pointwise.region.n_angular == 16
        assert config.pointwise.eps == 0.1
        assert config.spectral.ensemble.kind == "band-limited-gaussian"
        assert config.spectral.estimates == ["theorem-main"]
        assert config.output_dir is None

    def test_round_trip(self):
        """
        The echoed config of a report parses back to the same config.
        """
        for name in preset_names():
            config = preset(name)
            echoed = json.loads(json.dumps(config.to_dict()))
            assert parse_config(echoed) == config

    def test_tasks_are_ordered(self):
        config = parse_config(kinetic_document(tasks=["exponents", "kalman"]))
        assert config.tasks == ["kalman", "exponents"]

    def test_invalid_q(self):
        flow = RunConfigFlow()
        config, errors = flow.validate(kinetic_document(operator={"B": [[0, 1], [0, 0]], "Q": [[0, 0], [0, -1]]}))
        assert config is None
        assert errors == {"base": "q_not_psd"}
        assert flow.failure.exit_code == EXIT_CONFIG

        with self.assertRaises(ConfigError) as caught:
            parse_config(kinetic_document(operator={"B": [[0, 1], [0, 0]], "Q": [[0, 0], [0, -1]]}))
        assert caught.exception.key == "q_not_psd"
        assert caught.exception.record["exit_code"] == 2

    def test_schema_errors(self):
        flow = RunConfigFlow()
        _, errors = flow.validate({"name": "no operator"})
        assert errors == {"base": "schema"}

        _, errors = flow.validate(kinetic_document(pointwise={"eps": -1.0}))
        assert errors == {"pointwise": "schema"}
        assert flow.failure.details["section"] == "pointwise"

        _, errors = flow.validate(kinetic_document(spectral={"ensemble": {"size": 4}}))
        assert errors == {"spectral": "schema"}

    def test_unknown_task(self):
        with self.assertRaises(ConfigError) as caught:
            parse_config(kinetic_document(tasks=["kalman", "fly"]))
        assert caught.exception.key == "task_unknown"
        assert caught.exception.record["tasks"] == ["fly"]

    def test_missing_sections(self):
        flow = RunConfigFlow()
        document = kinetic_document(tasks=["verify-spectral"])
        del document["spectral"]
        del document["exponents"]
        _, errors = flow.validate(document)
        assert errors == {"spectral": "section_missing", "exponents": "section_missing"}
        assert flow.failure.key == "section_missing"

    def test_kalman_only(self):
        config = parse_config({"operator": {"B": [[0, 1], [0, 0]], "Q": [[0, 0], [0, 1]]}, "tasks": ["kalman"]})
        assert config.exponents is None
        assert config.pointwise is None
        assert config.name == "run"

    def test_experiment_flag(self):
        spectral = {"ensemble": {"seed": 1}, "estimates": ["theorem-main", "conjectured-strong"]}
        with self.assertRaises(ConfigError) as caught:
            parse_config(kinetic_document(spectral=spectral))
        assert caught.exception.key == "experiment_disabled"

        config = parse_config(kinetic_document(spectral=spectral, experiments={"anisotropic_strong_form": True}))
        assert "conjectured-strong" in config.spectral.estimates

    def test_value_checks(self):
        cases = [
            (kinetic_document(spectral={"ensemble": {"seed": 1}, "points_per_axis": 48}), "grid_points"),
            (kinetic_document(exponents={"lambda0": 0.0}), "exponent_range"),
            (kinetic_document(cutoffs={"psi": {"psi_inner": 2.0}}), "cutoff_order"),
            (kinetic_document(pointwise={"region": {"blocks": [1, 2]}}), "region_blocks"),
            (kinetic_document(pointwise={"region": {"n_radial": 4}}), "region_points"),
            (kinetic_document(operator={"B": [[0, 1], [0, 0]], "Q": [[1]]}), "matrix_shape"),
        ]
        for document, key in cases:
            with self.assertRaises(ConfigError) as caught:
                parse_config(document)
            assert caught.exception.key == key, (key, caught.exception.key)

    def test_load_files(self):
        with tempfile.TemporaryDirectory() as tmp:
            json_path = Path(tmp) / "kinetic.json"
            json_path.write_text(json.dumps(kinetic_document()), encoding="utf-8")
            assert load_config(json_path) == parse_config(kinetic_document())

            yaml_path = Path(tmp) / "kinetic.yaml"
            yaml_path.write_text(
                "name: kinetic-yaml\n"
                "operator:\n"
                "  B: [[0, 1], [0, 0]]\n"
                "  Q: [[0, 0], [0, 1]]\n"
                "tasks: [kalman]\n",
                encoding="utf-8",
            )
            assert load_config(yaml_path).name == "kinetic-yaml"

            broken = Path(tmp) / "broken.yaml"
            broken.write_text("operator: [unclosed\n", encoding="utf-8")
            with self.assertRaises(ConfigError):
                load_document(broken)

            listing = Path(tmp) / "list.yaml"
            listing.write_text("- 1\n- 2\n", encoding="utf-8")
            with self.assertRaises(ConfigError):
                load_document(listing)


class PresetTest(unittest.TestCase):

    def test_names(self):
        assert preset_names() == [
            "kinetic-autonomous",
            "kinetic-time-dependent",
            "chain-3-block",
            "full-rank-Q",
            "random-controllable",
        ]
        assert [config.name for config in presets()] == preset_names()

    def test_kalman_indices(self):
        assert kalman_index(preset("kinetic-autonomous").operator) == 1
        assert kalman_index(preset("kinetic-time-dependent").operator) == 1
        assert kalman_index(preset("chain-3-block").operator) == 2
        assert kalman_index(preset("full-rank-Q").operator) == 0
        assert kalman_index(preset("random-controllable").operator) == 3

    def test_random_preset_is_seeded(self):
        B = np.random.default_rng(RANDOM_SEED).standard_normal((4, 4))
        np.testing.assert_array_equal(preset("random-controllable").operator.B, B)
        assert "verify-spectral" not in preset("random-controllable").tasks

    def test_documents_are_copies(self):
        document = preset_document("chain-3-block")
        document["operator"]["B"][0][0] = 5.0
        assert preset_document("chain-3-block")["operator"]["B"][0][0] == 0.0

    def test_unknown_preset(self):
        with self.assertRaises(ConfigError) as caught:
            preset_document("kinetic-relativistic")
        assert caught.exception.key == "preset_unknown"

"""Config flow for hypocert runs: voluptuous schemas, the user step and file loading."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Dict, Optional

import voluptuous as vol
import yaml

from hypocert.const import ENSEMBLE_KINDS, ESTIMATES, PAD_FACTOR, TASK_DEPENDENCIES, TASKS
from hypocert.errors import ConfigError, error_message
from hypocert.models import (
    CutoffPair,
    CutoffSpec,
    ExponentSettings,
    OperatorSpec,
    PointwiseRegion,
    PointwiseSettings,
    RunConfig,
    SpectralSettings,
    TestFunctionSpec,
)

_LOGGER = logging.getLogger(__name__)

number = vol.All(vol.Coerce(float))
positive = vol.All(vol.Coerce(float), vol.Range(min=0.0, min_included=False))
count = vol.All(vol.Coerce(int), vol.Range(min=1))
matrix = vol.All([[number]], vol.Length(min=1))

OPERATOR_SCHEMA = vol.Schema(
    {
        vol.Required("B"): matrix,
        vol.Required("Q"): matrix,
        vol.Optional("time_dependent", default=False): bool,
        vol.Optional("rank_tol", default=1e-10): positive,
    }
)

EXPONENT_SCHEMA = vol.Schema(
    {
        vol.Required("lambda0"): number,
        vol.Optional("q", default=[]): [number],
        vol.Optional("s", default=[]): [number],
        vol.Optional("hypotheses", default="theorem"): vol.In(["theorem", "proposition"]),
        vol.Optional("margin", default=0.0): vol.All(vol.Coerce(float), vol.Range(min=0.0)),
    }
)

RADII_SCHEMA = vol.Schema(
    {
        vol.Optional("psi_inner"): number,
        vol.Optional("psi_outer"): number,
        vol.Optional("w_inner"): number,
        vol.Optional("w_outer"): number,
    }
)

CUTOFF_SCHEMA = vol.Schema(
    {
        vol.Optional("psi", default={}): RADII_SCHEMA,
        vol.Optional("w", default={}): RADII_SCHEMA,
    }
)

REGION_SCHEMA = vol.Schema(
    {
        vol.Optional("r_min", default=1.0): number,
        vol.Optional("r_max", default=1e4): number,
        vol.Optional("n_radial", default=24): vol.Coerce(int),
        vol.Optional("n_angular", default=64): vol.Coerce(int),
        vol.Optional("blocks", default=None): vol.Any(None, [vol.Coerce(int)]),
        vol.Optional("include_zero", default=True): bool,
        # derived regions only; a configured region is never constrained
        vol.Optional("constraint", default=None): None,
    }
)

POINTWISE_SCHEMA = vol.Schema(
    {
        vol.Optional("region", default={}): REGION_SCHEMA,
        vol.Optional("eps", default=0.1): positive,
        vol.Optional("gamma_cap", default=2.0 ** 20): positive,
        vol.Optional("pass_margin", default=0.1): positive,
        vol.Optional("constant_cap", default=1e8): positive,
        vol.Optional("omega1_c1", default=None): vol.Any(None, positive),
        vol.Optional("omega1_sensitivity", default=False): bool,
        vol.Optional("fd_points", default=256): count,
        vol.Optional("coercivity_samples", default=512): count,
        vol.Optional("particular_chain", default=False): bool,
        vol.Optional("drift_check", default=True): bool,
    }
)

ENSEMBLE_SCHEMA = vol.Schema(
    {
        vol.Required("kind", default="band-limited-gaussian"): vol.In(ENSEMBLE_KINDS),
        # explicit seeds only
        vol.Required("seed"): vol.Coerce(int),
        vol.Optional("size", default=8): count,
        vol.Optional("envelope_width", default=1.5): positive,
        vol.Optional("max_mode", default=8): vol.All(vol.Coerce(int), vol.Range(min=0)),
        vol.Optional("adversarial_every", default=4): count,
    }
)

SPECTRAL_SCHEMA = vol.Schema(
    {
        vol.Required("ensemble"): ENSEMBLE_SCHEMA,
        vol.Optional("box_length", default=16.0): positive,
        vol.Optional("points_per_axis", default=64): count,
        vol.Optional("pad_factor", default=PAD_FACTOR): count,
        vol.Optional("estimates", default=["theorem-main"]): [vol.In(ESTIMATES)],
        vol.Optional("blocks", default=None): vol.Any(None, [vol.Coerce(int)]),
    }
)

CONFIG_SCHEMA = vol.Schema(
    {
        vol.Required("name", default="run"): str,
        vol.Required("operator"): dict,
        vol.Optional("exponents", default=None): vol.Any(None, dict),
        vol.Optional("cutoffs", default={}): vol.Any(None, dict),
        vol.Optional("pointwise", default=None): vol.Any(None, dict),
        vol.Optional("spectral", default=None): vol.Any(None, dict),
        vol.Optional("experiments", default={}): {str: bool},
        vol.Optional("tasks", default=list(TASKS)): [str],
        vol.Optional("output_dir", default=None): vol.Any(None, str),
    }
)

SECTION_SCHEMAS = {
    "operator": OPERATOR_SCHEMA,
    "exponents": EXPONENT_SCHEMA,
    "cutoffs": CUTOFF_SCHEMA,
    "pointwise": POINTWISE_SCHEMA,
    "spectral": SPECTRAL_SCHEMA,
}

# sections a task reads besides the operator
TASK_SECTIONS = {
    "kalman": (),
    "exponents": ("exponents",),
    "build": ("exponents",),
    "verify-pointwise": ("exponents", "pointwise"),
    "verify-spectral": ("exponents", "spectral"),
}


class RunConfigFlow:
    """Collects a run configuration section by section, keeping an error key per failing section."""

    data: Optional[Dict[str, Any]]

    def __init__(self) -> None:
        self.data = None
        self.config: RunConfig | None = None
        self.failure: ConfigError | None = None

    async def async_step_user(self, user_input: Optional[Dict[str, Any]] = None):
        """Validate user_input; returns the RunConfig (or None) and the errors dict."""
        return self.validate(user_input)

    def validate(self, user_input: Optional[Dict[str, Any]]):
        errors: Dict[str, str] = {}
        self.config = None
        self.failure = None
        if user_input is None:
            return None, errors

        try:
            self.data = CONFIG_SCHEMA(user_input)
        except vol.Invalid as e:
            _LOGGER.debug("Config rejected by schema: %s", e)
            errors["base"] = "schema"
            self.failure = ConfigError("schema", message=f"{error_message('schema')} {e}")
            return None, errors

        unknown = [task for task in self.data["tasks"] if task not in TASKS]
        if unknown:
            errors["tasks"] = "task_unknown"
            self.failure = ConfigError("task_unknown", tasks=unknown)
            return None, errors

        requested = set(self.data["tasks"])
        for task in list(requested):
            requested.update(TASK_DEPENDENCIES[task])
        for task in sorted(requested):
            for section in TASK_SECTIONS[task]:
                if self.data.get(section) is None:
                    errors[section] = "section_missing"
                    if self.failure is None:
                        self.failure = ConfigError("section_missing", task=task, section=section)
        if errors:
            return None, errors

        sections: Dict[str, Any] = {}
        for section, schema in SECTION_SCHEMAS.items():
            raw = self.data.get(section)
            if raw is None:
                continue
            try:
                sections[section] = schema(raw)
            except vol.Invalid as e:
                errors[section] = "schema"
                if self.failure is None:
                    self.failure = ConfigError("schema", message=f"{error_message('schema')} {section}: {e}", section=section)
        if errors:
            return None, errors

        estimates = sections.get("spectral", {}).get("estimates", [])
        if "conjectured-strong" in estimates and not self.data["experiments"].get("anisotropic_strong_form", False):
            errors["spectral"] = "experiment_disabled"
            self.failure = ConfigError("experiment_disabled", estimate="conjectured-strong", flag="anisotropic_strong_form")
            return None, errors

        try:
            self.config = _build(self.data, sections)
        except ConfigError as e:
            _LOGGER.debug("Config violates %s", e.key)
            errors["base"] = e.key
            self.failure = e
            return None, errors
        return self.config, errors


def _build(data: Dict[str, Any], sections: Dict[str, Any]) -> RunConfig:
    op = sections["operator"]
    operator = OperatorSpec(op["B"], op["Q"], time_dependent=op["time_dependent"], rank_tol=op["rank_tol"])

    exponents = None
    if "exponents" in sections:
        ex = sections["exponents"]
        exponents = ExponentSettings(ex["lambda0"], ex["q"], ex["s"], ex["hypotheses"], ex["margin"])
        if exponents.lambda0 <= 0.0:
            raise ConfigError("exponent_range", lambda0=exponents.lambda0)

    cut = sections.get("cutoffs") or {"psi": {}, "w": {}}
    cutoffs = CutoffPair(CutoffSpec(**cut["psi"]), CutoffSpec(**cut["w"]))

    pointwise = None
    if "pointwise" in sections:
        pw = dict(sections["pointwise"])
        region = dict(pw.pop("region"))
        region.pop("constraint", None)
        if region["blocks"] is not None and sum(region["blocks"]) != operator.dim:
            raise ConfigError("region_blocks", blocks=region["blocks"], dim=operator.dim)
        pointwise = PointwiseSettings(region=PointwiseRegion(**region), **pw)

    spectral = None
    if "spectral" in sections:
        sp = dict(sections["spectral"])
        ensemble = TestFunctionSpec(**sp.pop("ensemble"))
        n = sp["points_per_axis"]
        if n & (n - 1):
            raise ConfigError("grid_points", points_per_axis=n)
        if sp["blocks"] is not None and sum(sp["blocks"]) != operator.dim:
            raise ConfigError("region_blocks", blocks=sp["blocks"], dim=operator.dim)
        spectral = SpectralSettings(ensemble=ensemble, **sp)

    return RunConfig(
        operator=operator,
        exponents=exponents,
        cutoffs=cutoffs,
        pointwise=pointwise,
        spectral=spectral,
        experiments=data["experiments"],
        tasks=data["tasks"],
        output_dir=data["output_dir"],
        name=data["name"],
    )


async def async_parse_config(user_input: Dict[str, Any]) -> RunConfig:
    flow = RunConfigFlow()
    config, errors = await flow.async_step_user(user_input)
    if errors:
        raise flow.failure or ConfigError("schema", errors=errors)
    return config


def parse_config(user_input: Dict[str, Any]) -> RunConfig:
    """Validate a config document and build the RunConfig; raises ConfigError."""
    flow = RunConfigFlow()
    config, errors = flow.validate(user_input)
    if errors:
        raise flow.failure or ConfigError("schema", errors=errors)
    return config


def load_document(path: str | Path) -> dict:
    """Read a JSON or YAML config file without validating it."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError("schema", message=f"{error_message('schema')} {e}", path=str(path))
    if not isinstance(document, dict):
        raise ConfigError("schema", path=str(path))
    return document


def load_config(path: str | Path) -> RunConfig:
    return parse_config(load_document(path))

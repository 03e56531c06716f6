"""
Named run configurations shipped with the toolkit.

Responsible for:
- the config documents of the kinetic, chain, full rank and random presets
- turning a preset name into a validated RunConfig
"""
import copy
import logging

import numpy as np

from hypocert.config_flow import parse_config
from hypocert.errors import ConfigError
from hypocert.models import RunConfig
from hypocert.multipliers.particular import chain_operator

_LOGGER = logging.getLogger(__name__)

RANDOM_SEED = 20200418


def _kinetic(time_dependent: bool) -> dict:
    name = "kinetic-time-dependent" if time_dependent else "kinetic-autonomous"
    return {
        "name": name,
        "operator": {"B": [[0.0, 1.0], [0.0, 0.0]], "Q": [[0.0, 0.0], [0.0, 1.0]], "time_dependent": time_dependent},
        "exponents": {"lambda0": 1.0, "q": [0.0], "s": [0.0]},
        "pointwise": {"region": {"r_min": 1.0, "r_max": 1e4}},
        "spectral": {
            "ensemble": {"kind": "band-limited-gaussian", "seed": 7, "size": 64 if time_dependent else 200},
            "box_length": 16.0,
            "points_per_axis": 64 if time_dependent else 128,
            "estimates": ["theorem-main", "theorem-anisotropic", "kinetic-example"],
        },
    }


def _chain() -> dict:
    spec = chain_operator(n_block=1, time_dependent=False)
    return {
        "name": "chain-3-block",
        "operator": {"B": spec.B.tolist(), "Q": spec.Q.tolist()},
        "exponents": {"lambda0": 1.0, "q": [0.0, 0.0], "s": [0.0, 0.0]},
        "pointwise": {"region": {"r_min": 1.0, "r_max": 1e4, "blocks": [1, 1, 1]}, "particular_chain": True},
        "spectral": {
            "ensemble": {"kind": "band-limited-gaussian", "seed": 11, "size": 50, "max_mode": 6},
            "box_length": 16.0,
            "points_per_axis": 64,
            "estimates": ["theorem-main", "prop-particular-1", "prop-particular-2"],
            "blocks": [1, 1, 1],
        },
    }


def _full_rank() -> dict:
    return {
        "name": "full-rank-Q",
        "operator": {"B": [[0.0, 1.0], [-1.0, 0.0]], "Q": [[1.0, 0.0], [0.0, 1.0]]},
        "exponents": {"lambda0": 1.0},
        "pointwise": {"region": {"r_min": 1.0, "r_max": 1e3}},
        "spectral": {
            "ensemble": {"kind": "gaussian-hermite", "seed": 3, "size": 50},
            "points_per_axis": 64,
            "estimates": ["theorem-main"],
        },
    }


def _random_controllable() -> dict:
    rng = np.random.default_rng(RANDOM_SEED)
    B = rng.standard_normal((4, 4))
    Q = np.zeros((4, 4))
    Q[0, 0] = 1.0
    return {
        "name": "random-controllable",
        "operator": {"B": B.tolist(), "Q": Q.tolist()},
        "exponents": {"lambda0": 1.0},
        "pointwise": {"region": {"r_min": 1.0, "r_max": 1e3, "n_radial": 16, "n_angular": 128}},
        "tasks": ["kalman", "exponents", "build", "verify-pointwise"],
    }


PRESET_DOCUMENTS = {
    "kinetic-autonomous": lambda: _kinetic(False),
    "kinetic-time-dependent": lambda: _kinetic(True),
    "chain-3-block": _chain,
    "full-rank-Q": _full_rank,
    "random-controllable": _random_controllable,
}


def preset_names() -> list[str]:
    return list(PRESET_DOCUMENTS)


def preset_document(name: str) -> dict:
    """The raw config document of a preset, as `presets show` prints it."""
    if name not in PRESET_DOCUMENTS:
        raise ConfigError("preset_unknown", preset=name, available=preset_names())
    return copy.deepcopy(PRESET_DOCUMENTS[name]())


def preset(name: str) -> RunConfig:
    return parse_config(preset_document(name))


def presets() -> list[RunConfig]:
    """Every shipped preset as a validated RunConfig."""
    configs = [preset(name) for name in PRESET_DOCUMENTS]
    _LOGGER.debug("Loaded %s presets", len(configs))
    return configs

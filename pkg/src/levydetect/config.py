"""Experiment configuration: one JSON file describes one experiment.

Only the model block is mandatory; every other field has a documented
default. A summary.json written by the CLI embeds the fully resolved config
under ``resolved_config`` and can itself be passed back as a config file,
which is how byte-identical reruns are produced.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from typing import Optional

from .detector import DetectorConfig
from .errors import SpecValidationError
from .families import LevySpec
from .model import ChangeModel, build_change_model

__all__ = ["ExperimentConfig", "DEFAULTS"]

DEFAULTS = {
    "simulation": {
        "horizon": 100.0,
        "grid_dt": 0.01,
        "n_rep": 1000,
        "master_seed": 12345,
        "threads": 1,
    },
    "detector": {
        "rule": "cusum_grid",
        "delta": 0.1,
        "log_barrier": 2.0,
        "gamma": None,
        "rel_tol": 0.02,
    },
    "experiment": {
        "regime": "in_control",
        "tau": 5.0,
        "tau_grid": [0.0, 1.0, 5.0],
        "dyadic_levels": 4,
        "base_delta": None,
        "rules": [["cusum_grid", 0.1], ["shiryaev_roberts", 0.1]],
        "fixed_steps": None,
        "n_rep_calibrate": 4000,
    },
    "output": {
        "dump_path": False,
        "dump_llr": False,
    },
}


def _merge(defaults: dict, given: Optional[dict]) -> dict:
    out = copy.deepcopy(defaults)
    if given:
        for key, value in given.items():
            out[key] = value
    return out


@dataclass
class ExperimentConfig:
    model: dict
    simulation: dict
    detector: dict
    experiment: dict
    output: dict

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if "resolved_config" in data:      # a summary.json round-trips
            data = data["resolved_config"]
        if "model" not in data or not isinstance(data["model"], dict):
            raise SpecValidationError("config needs a 'model' block")
        model = data["model"]
        if "pre" not in model or "post" not in model:
            raise SpecValidationError("model block needs 'pre' and 'post' entries")
        return cls(
            model=copy.deepcopy(model),
            simulation=_merge(DEFAULTS["simulation"], data.get("simulation")),
            detector=_merge(DEFAULTS["detector"], data.get("detector")),
            experiment=_merge(DEFAULTS["experiment"], data.get("experiment")),
            output=_merge(DEFAULTS["output"], data.get("output")),
        )

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise SpecValidationError(f"cannot parse config {path}: {exc}") from exc
        return cls.from_dict(data)

    def resolved(self) -> dict:
        return {
            "model": copy.deepcopy(self.model),
            "simulation": copy.deepcopy(self.simulation),
            "detector": copy.deepcopy(self.detector),
            "experiment": copy.deepcopy(self.experiment),
            "output": copy.deepcopy(self.output),
        }

    def change_model(self) -> ChangeModel:
        pre = LevySpec.from_dict(self.model["pre"])
        post = LevySpec.from_dict(self.model["post"])
        return build_change_model(pre, post)

    def detector_config(self) -> DetectorConfig:
        det = self.detector
        return DetectorConfig(rule=det["rule"],
                              log_barrier=float(det["log_barrier"]),
                              delta=det.get("delta"))

"""Run configuration: strict JSON schema for the scenario runner."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ConfigError
from ..flows import FLOW_METHODS, FlowConfig

SCENARIOS = (
    "bimodal_compare",
    "manifold_guidance",
    "ngd_tracking",
    "graphical_model",
    "covariate_shift_rotation",
    "stein_sampling",
)

_TOP_KEYS = {"scenario", "seed", "methods", "flow", "manifold", "kernels", "dataset", "out_dir"}
_FLOW_KEYS = {"step", "iterations", "ridge", "jitter", "log_every", "freeze_bandwidth"}


def take_fields(given: dict, defaults: dict, context: str) -> dict:
    """Merge a user dict over defaults, rejecting keys outside the defaults."""
    if not isinstance(given, dict):
        raise ConfigError(f"{context} must be an object, got {type(given).__name__}")
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown {context} fields: {sorted(unknown)}")
    merged = dict(defaults)
    merged.update(given)
    return merged


@dataclass(frozen=True)
class RunConfig:
    """Validated scenario run description.

    ``methods``, ``manifold`` and ``kernels`` may be left unset to take the
    scenario defaults; ``dataset`` carries scenario-specific knobs that the
    scenario validates against its own defaults.
    """

    scenario: str
    seed: int = 0
    methods: tuple[str, ...] | None = None
    flow: FlowConfig | None = None
    manifold: dict | None = None
    kernels: dict | None = None
    dataset: dict = field(default_factory=dict)
    out_dir: str | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario: {self.scenario!r} (expected one of {SCENARIOS})")
        if isinstance(self.flow, dict):
            flow_dict = self.flow
            unknown = set(flow_dict) - _FLOW_KEYS
            if unknown:
                raise ConfigError(f"unknown flow fields: {sorted(unknown)}")
            try:
                object.__setattr__(self, "flow", FlowConfig(**flow_dict))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad flow config: {exc}") from exc
        if self.methods is not None:
            methods = tuple(self.methods)
            for m in methods:
                if m not in FLOW_METHODS:
                    raise ConfigError(f"unknown method: {m!r} (expected one of {FLOW_METHODS})")
            if len(set(methods)) != len(methods):
                raise ConfigError("methods must not repeat")
            object.__setattr__(self, "methods", methods)
        if self.kernels is not None:
            for key in self.kernels:
                if key not in FLOW_METHODS:
                    raise ConfigError(f"kernel override for unknown method: {key!r}")

    @staticmethod
    def from_dict(data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("run config must be a JSON object")
        unknown = set(data) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "scenario" not in data:
            raise ConfigError("config is missing the 'scenario' field")
        flow = None
        if data.get("flow") is not None:
            flow_dict = data["flow"]
            if isinstance(flow_dict, FlowConfig):
                flow_dict = {
                    "step": flow_dict.step,
                    "iterations": flow_dict.iterations,
                    "ridge": flow_dict.ridge,
                    "jitter": flow_dict.jitter,
                    "log_every": flow_dict.log_every,
                    "freeze_bandwidth": flow_dict.freeze_bandwidth,
                }
            if not isinstance(flow_dict, dict):
                raise ConfigError("'flow' must be an object")
            unknown = set(flow_dict) - _FLOW_KEYS
            if unknown:
                raise ConfigError(f"unknown flow fields: {sorted(unknown)}")
            if "step" not in flow_dict or "iterations" not in flow_dict:
                raise ConfigError("'flow' needs at least 'step' and 'iterations'")
            try:
                flow = FlowConfig(**flow_dict)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad flow config: {exc}") from exc
        dataset = data.get("dataset") or {}
        if not isinstance(dataset, dict):
            raise ConfigError("'dataset' must be an object")
        seed = data.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ConfigError(f"'seed' must be an integer, got {seed!r}")
        try:
            return RunConfig(
                scenario=data["scenario"],
                seed=seed,
                methods=data.get("methods"),
                flow=flow,
                manifold=data.get("manifold"),
                kernels=data.get("kernels"),
                dataset=dataset,
                out_dir=data.get("out_dir"),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @staticmethod
    def from_json(path) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return RunConfig.from_dict(data)

    def to_dict(self) -> dict:
        flow = None
        if self.flow is not None:
            flow = {
                "step": self.flow.step,
                "iterations": self.flow.iterations,
                "ridge": self.flow.ridge,
                "jitter": self.flow.jitter,
                "log_every": self.flow.log_every,
                "freeze_bandwidth": self.flow.freeze_bandwidth,
            }
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "methods": list(self.methods) if self.methods is not None else None,
            "flow": flow,
            "manifold": self.manifold,
            "kernels": self.kernels,
            "dataset": dict(self.dataset),
            "out_dir": self.out_dir,
        }

    def replace(self, **changes) -> "RunConfig":
        merged = self.to_dict()
        merged.update(changes)
        return RunConfig.from_dict(merged)

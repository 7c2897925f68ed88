"""Shipped defaults and configuration loading.

The engine ships with one default configuration; a TOML file overrides any
subset of it, and service settings additionally honor environment variables
so deployments can move the port and bundle directory without editing files.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field, replace

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .model_core import DEFAULT_K_OPTIONS, FlowSchedule, SimilarityParams
from .traversal import CriterionWeights, SpoilerPenalty, TraversalConfig

__all__ = [
    "EngineConfig",
    "ServiceConfig",
    "default_config",
    "load_config",
    "load_service_config",
    "write_default_config",
    "DEFAULT_CONFIG_TOML",
]

PORT_ENV = "TRAILER_WALK_PORT"
BUNDLE_DIR_ENV = "TRAILER_WALK_BUNDLE_DIR"


@dataclass(frozen=True)
class EngineConfig:
    """Every tunable of the generation engine, with shipped defaults."""

    similarity_weight: float = 1.0
    proximity_weight: float = 5.0
    structure_weight: float = 10.0
    sentiment_weight: float = 10.0
    spoiler_weight: float = 0.0
    spoiler_horizon: int = 10
    budget: int = 10
    proposals: int = 5
    fill_to_budget: bool = True
    sentiment_mode: str = "absolute"
    rng_seed: int = 0
    flow_base: float = 0.7
    flow_ramp: float = 0.1
    flow_cap: float = 1.0
    k_options: tuple[int, ...] = DEFAULT_K_OPTIONS
    mass_coverage: float = 0.8
    consistency_weight: float = 10.0
    representation_weight: float = 0.03
    cpc_steps: int = 3

    def criterion_weights(self) -> CriterionWeights:
        return CriterionWeights(
            similarity=self.similarity_weight,
            proximity=self.proximity_weight,
            structure=self.structure_weight,
            sentiment=self.sentiment_weight,
        )

    def traversal(self) -> TraversalConfig:
        spoiler = None
        if self.spoiler_weight > 0:
            spoiler = SpoilerPenalty(weight=self.spoiler_weight, horizon=self.spoiler_horizon)
        schedule = FlowSchedule(
            budget=max(self.budget, 3), base=self.flow_base, ramp=self.flow_ramp, cap=self.flow_cap
        )
        return TraversalConfig(
            weights=self.criterion_weights(),
            budget=self.budget,
            proposals=self.proposals,
            schedule=schedule,
            fill_to_budget=self.fill_to_budget,
            spoiler=spoiler,
            sentiment_mode=self.sentiment_mode,
            rng_seed=self.rng_seed,
        )

    def similarity_params(self) -> SimilarityParams:
        return SimilarityParams(k_options=self.k_options, coverage=self.mass_coverage)


@dataclass(frozen=True)
class ServiceConfig:
    """Where the HTTP service listens and where it finds movie bundles."""

    port: int = 8765
    bundle_dir: str = "bundles"
    journal_path: str | None = None
    engine: EngineConfig = field(default_factory=EngineConfig)


def default_config() -> EngineConfig:
    return EngineConfig()


_SECTION_FIELDS = {
    "traversal": (
        "similarity_weight",
        "proximity_weight",
        "structure_weight",
        "sentiment_weight",
        "spoiler_weight",
        "spoiler_horizon",
        "budget",
        "proposals",
        "fill_to_budget",
        "sentiment_mode",
        "rng_seed",
    ),
    "flow": ("flow_base", "flow_ramp", "flow_cap"),
    "graph": ("k_options", "mass_coverage"),
    "loss": ("consistency_weight", "representation_weight", "cpc_steps"),
}

_KEY_IN_FILE = {
    "flow_base": "base",
    "flow_ramp": "ramp",
    "flow_cap": "cap",
}


def _apply_section(config: EngineConfig, data: dict, section: str) -> EngineConfig:
    table = data.get(section)
    if table is None:
        return config
    if not isinstance(table, dict):
        raise ValueError(f"config section [{section}] must be a table")
    known = {_KEY_IN_FILE.get(f, f): f for f in _SECTION_FIELDS[section]}
    updates = {}
    for key, value in table.items():
        if key not in known:
            raise ValueError(f"unknown config key: {section}.{key}")
        target = known[key]
        if target == "k_options":
            value = tuple(int(k) for k in value)
        updates[target] = value
    return replace(config, **updates)


def load_config(path: str | None = None) -> EngineConfig:
    """Shipped defaults, overridden by any keys present in the TOML file."""
    config = default_config()
    if path is None:
        return config
    with open(path, "rb") as f:
        data = tomllib.load(f)
    for section in _SECTION_FIELDS:
        config = _apply_section(config, data, section)
    unknown = set(data) - set(_SECTION_FIELDS) - {"service"}
    if unknown:
        raise ValueError(f"unknown config section: [{sorted(unknown)[0]}]")
    return config


def load_service_config(path: str | None = None, env=None) -> ServiceConfig:
    """Service settings from file, then environment overrides on top."""
    env = os.environ if env is None else env
    engine = load_config(path)
    service = ServiceConfig(engine=engine)
    if path is not None:
        with open(path, "rb") as f:
            table = tomllib.load(f).get("service", {})
        if not isinstance(table, dict):
            raise ValueError("config section [service] must be a table")
        updates = {}
        for key, value in table.items():
            if key == "port":
                updates["port"] = int(value)
            elif key == "bundle_dir":
                updates["bundle_dir"] = str(value)
            elif key == "journal_path":
                updates["journal_path"] = str(value) or None
            else:
                raise ValueError(f"unknown config key: service.{key}")
        service = replace(service, **updates)
    if env.get(PORT_ENV):
        service = replace(service, port=int(env[PORT_ENV]))
    if env.get(BUNDLE_DIR_ENV):
        service = replace(service, bundle_dir=env[BUNDLE_DIR_ENV])
    return service


DEFAULT_CONFIG_TOML = """\
# Generation engine defaults. Every key is optional; missing keys keep the
# shipped value shown here.

[traversal]
similarity_weight = 1.0
proximity_weight = 5.0
structure_weight = 10.0
sentiment_weight = 10.0
# spoiler_weight > 0 turns on the late-TP spoiler penalty
spoiler_weight = 0.0
spoiler_horizon = 10
budget = 10
proposals = 5
fill_to_budget = true
# "absolute" scores the shot's own intensity; "delta" scores the change
sentiment_mode = "absolute"
rng_seed = 0

[flow]
base = 0.7
ramp = 0.1
cap = 1.0

[graph]
k_options = [6, 7, 8, 9, 10, 11, 12]
mass_coverage = 0.8

[loss]
consistency_weight = 10.0
representation_weight = 0.03
cpc_steps = 3

[service]
port = 8765
bundle_dir = "bundles"
# journal_path = "sessions.jsonl"
"""


def write_default_config(path: str) -> None:
    with open(path, "w") as f:
        f.write(DEFAULT_CONFIG_TOML)

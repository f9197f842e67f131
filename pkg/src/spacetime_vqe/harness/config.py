"""Experiment configuration: a single human-editable YAML file with a
versioned schema, validated into the package's domain objects before any
compute starts."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .. import optimize
from ..circuits import Ansatz, build_brickwall, build_qmps
from ..fkham import PdeProblem
from ..lattice import InitialProfile, build_grid

SCHEMA_VERSION = 1

EXPERIMENT_KINDS = (
    "solve",
    "depth_sweep",
    "scaling",
    "multigrid",
    "spectral",
    "qnpu_verify",
    "gradient_variance",
    "sample",
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    problem: dict
    ansatz: dict = field(default_factory=dict)
    protocol: dict = field(default_factory=dict)
    sampler: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    raw_text: str = ""

    def build_problem(self, **overrides) -> PdeProblem:
        spec = {**self.problem, **overrides}
        profile_spec = dict(spec.pop("profile", {"kind": "gaussian"}))
        samples = tuple(profile_spec.pop("samples", ()))
        profile = InitialProfile(samples=samples, **profile_spec)
        grid = build_grid(
            int(spec.pop("n_x")),
            int(spec.pop("n_t")),
            float(spec.pop("domain_length", 1.0)),
            float(spec.pop("dt")),
        )
        return PdeProblem(grid=grid, profile=profile, **spec)

    def build_ansatz(self, problem: PdeProblem, **overrides) -> Ansatz:
        spec = {**self.ansatz, **overrides}
        family = spec.pop("family", "brickwall")
        n_qubits = problem.grid.n_x + problem.grid.n_t
        ordering = spec.pop("ordering", "reversed_space")
        if family == "brickwall":
            return build_brickwall(
                n_qubits,
                int(spec.pop("layers")),
                r=int(spec.pop("r", 1)),
                ordering=ordering,
                n_t=problem.grid.n_t,
                start_parity=int(spec.pop("start_parity", 0)),
            )
        if family == "qmps":
            return build_qmps(
                n_qubits,
                chi=int(spec.pop("chi", 4)),
                r=int(spec.pop("r", 1)),
                sparse=bool(spec.pop("sparse", True)),
                ordering=ordering,
                n_t=problem.grid.n_t,
            )
        raise ConfigError(f"unknown ansatz family {family!r}")

    def build_schedule(self, problem: PdeProblem) -> optimize.RampSchedule:
        name = self.protocol.get("schedule", "diffusion" if problem.beta == 0 else "burgers")
        n_qubits = problem.grid.n_x + problem.grid.n_t
        steps = int(self.protocol.get("steps", optimize.default_steps(n_qubits)))
        if name == "diffusion":
            return optimize.diffusion_schedule(problem.diffusion, steps)
        if name == "burgers":
            return optimize.burgers_schedule(problem.beta, steps)
        if name == "single":
            return optimize.RampSchedule(
                (optimize.RampStage((), "adam", steps),)
            )
        raise ConfigError(f"unknown schedule {name!r}")

    @property
    def seeds(self) -> int:
        return int(self.protocol.get("seeds", 20))

    @property
    def mode(self) -> str:
        return self.protocol.get("mode", "self_consistent")

    @property
    def linearization(self) -> str:
        return self.protocol.get("linearization", "slice_real")


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    return parse_config(text)


def parse_config(text: str) -> ExperimentConfig:
    data = yaml.safe_load(text)
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    version = data.pop("schema_version", None)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    kind = data.pop("kind", None)
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"kind must be one of {EXPERIMENT_KINDS}, got {kind!r}")
    known = {}
    for section in ("problem", "ansatz", "protocol", "sampler", "outputs"):
        value = data.pop(section, {})
        if not isinstance(value, dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        known[section] = value
    config = ExperimentConfig(kind=kind, extra=data, raw_text=text, **known)
    validate_config(config)
    return config


def validate_config(config: ExperimentConfig) -> None:
    """Fail fast: build every referenced domain object."""
    if config.kind in ("solve", "depth_sweep", "scaling", "multigrid", "qnpu_verify",
                       "gradient_variance", "sample"):
        try:
            problem = config.build_problem()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid problem block: {exc}") from exc
        if config.ansatz:
            try:
                config.build_ansatz(problem)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid ansatz block: {exc}") from exc
    elif config.kind == "spectral":
        try:
            config.build_problem()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid problem block: {exc}") from exc
    if config.seeds < 1:
        raise ConfigError("protocol.seeds must be >= 1")


def config_to_yaml(config: ExperimentConfig) -> str:
    if config.raw_text:
        return config.raw_text
    data = {
        "schema_version": SCHEMA_VERSION,
        "kind": config.kind,
        "problem": config.problem,
        "ansatz": config.ansatz,
        "protocol": config.protocol,
        "sampler": config.sampler,
        "outputs": config.outputs,
        **config.extra,
    }
    return yaml.safe_dump(data, sort_keys=False)


def make_config(kind: str, **sections) -> ExperimentConfig:
    """Programmatic construction used by the figure suites."""
    cfg = ExperimentConfig(
        kind=kind,
        problem=sections.get("problem", {}),
        ansatz=sections.get("ansatz", {}),
        protocol=sections.get("protocol", {}),
        sampler=sections.get("sampler", {}),
        outputs=sections.get("outputs", {}),
        extra=sections.get("extra", {}),
    )
    validate_config(cfg)
    return dataclasses.replace(cfg, raw_text=config_to_yaml(cfg))

"""Application configuration and experiment config loading."""

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

from bergman_lab.bundles import SequenceKind
from bergman_lab.geometry import ModelKind
from bergman_lab.models import Experiment, ExperimentConfig, experiment_config_from_dict

logger = logging.getLogger(__name__)

REPO_CONFIG_DIR = Path(__file__).resolve().parents[2] / "config"


class ConfigInvalid(Exception):
    """Experiment configuration failed validation."""

    def __init__(self, diagnostics: list[str]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(diagnostics) or "invalid configuration")


@dataclass
class LabConfig:
    """Process-wide settings from the environment."""
    config_dir: Path
    catalog_dir: Path
    logging_config: Path
    threads: int = 0
    log_level: str = "INFO"

    @property
    def worker_count(self) -> int:
        """Worker cap for sample-level parallelism (0 means one per CPU)."""
        if self.threads > 0:
            return self.threads
        return os.cpu_count() or 1


def get_config() -> LabConfig:
    """Load configuration from environment."""
    config_dir = Path(os.environ.get("BERGMAN_LAB_CONFIG", str(REPO_CONFIG_DIR)))
    return LabConfig(
        config_dir=config_dir,
        catalog_dir=config_dir / "catalog",
        logging_config=config_dir / "logging.yaml",
        threads=int(os.environ.get("BERGMAN_LAB_THREADS", "0")),
        log_level=os.environ.get("BERGMAN_LAB_LOG_LEVEL", "INFO").upper(),
    )


@dataclass
class ConfigValidationResult:
    """Outcome of validating an experiment configuration."""
    errors: list[str] = field(default_factory=list)

    @property
    def is_valid(self) -> bool:
        return not self.errors


def load_experiment_config(path: Path | str, overrides: dict | None = None) -> ExperimentConfig:
    """Parse a JSON experiment document, applying top-level overrides first."""
    with open(path) as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise ConfigInvalid([f"{path}: top level must be a JSON object"])
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    try:
        return experiment_config_from_dict(data)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigInvalid([f"{path}: {e}"]) from e


def validate(config: ExperimentConfig) -> list[str]:
    """Diagnostics for every violated precondition; empty when the config can run."""
    errors: list[str] = []
    p_values = config.p_values

    if not p_values:
        errors.append("p list is empty")
    elif any(b <= a for a, b in zip(p_values, p_values[1:])):
        errors.append(f"p list must be strictly increasing, got {p_values}")
    if any(p < 0 for p in p_values):
        errors.append("p values must be non-negative")

    if not 0 <= config.seed < 2**64:
        errors.append(f"seed must be a 64-bit unsigned integer, got {config.seed}")

    n = 2 if config.model.kind is ModelKind.PROJECTIVE_PRODUCT else 1
    if not 1 <= config.m <= n:
        errors.append(f"m must lie in [1, {n}] for {config.model.kind.value}, got {config.m}")

    sequence = config.sequence
    if sequence.kind is SequenceKind.PERTURBED_POWER:
        if sequence.a is None or sequence.a <= 0:
            errors.append(f"perturbed-power needs exponent a > 0, got {sequence.a}")
        if not sequence.psi_id:
            errors.append("perturbed-power needs a psi_id")
    if sequence.kind is SequenceKind.MULTI_RAY:
        if not sequence.rays:
            errors.append("multi-ray needs at least one ray")
        elif len(sequence.factors) not in (0, len(sequence.rays)):
            errors.append("multi-ray needs one factor degree per ray")
        if sequence.depth < 1:
            errors.append("multi-ray depth must be at least 1")
    if any(d < 0 for d in sequence.degree):
        errors.append("bundle degrees must be non-negative")

    if config.model.kind is ModelKind.FLAT_TORUS and config.model.tau is not None:
        if config.model.tau.imag <= 0:
            errors.append(f"flat torus needs Im(tau) > 0, got {config.model.tau}")

    if config.experiment is Experiment.ZEROS_EQUIDIST:
        if config.model.kind is ModelKind.FLAT_TORUS:
            errors.append("zeros-equidist supports the projective line and the product only")
        if config.samples < 1:
            errors.append(f"{config.experiment.value} needs samples N >= 1, got {config.samples}")
        if config.m != n:
            errors.append("zero currents are only implemented for m = n")
    if config.experiment is not Experiment.BERGMAN_SCAN and any(p < 1 for p in p_values):
        errors.append(f"{config.experiment.value} needs p >= 1")
    if config.experiment is Experiment.EXPANSION_FIT and len(set(p_values)) < 2:
        errors.append("expansion-fit needs at least two p values")
    if config.experiment is Experiment.MODEL_KERNEL and config.window_radius <= 0:
        errors.append("window radius must be positive")
    if config.grid_points < 1:
        errors.append("grid_points must be at least 1")
    return errors


def validate_config(config: ExperimentConfig) -> ConfigValidationResult:
    """Wrap :func:`validate` in a result object."""
    return ConfigValidationResult(errors=validate(config))

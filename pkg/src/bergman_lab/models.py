"""Experiment configuration models."""

from dataclasses import dataclass, field
from enum import Enum

from bergman_lab.bundles import SequenceKind
from bergman_lab.geometry import ChartPoint, ModelKind, parse_complex


class Experiment(Enum):
    """Experiments the runner knows."""
    BERGMAN_SCAN = "bergman-scan"
    EXPANSION_FIT = "expansion-fit"
    MODEL_KERNEL = "model-kernel"
    ZEROS_EQUIDIST = "zeros-equidist"
    FS_SPEED = "fs-speed"
    DEGREES = "degrees"


class ReportFormat(Enum):
    """Report file formats."""
    CSV = "csv"
    JSON = "json"


@dataclass
class ModelSpec:
    """Which model manifold to use."""
    kind: ModelKind
    tau: complex | None = None


@dataclass
class SequenceSpec:
    """How the bundle sequence is built."""
    kind: SequenceKind = SequenceKind.POWER_RAY
    degree: list[int] = field(default_factory=lambda: [1])
    a: float | None = None
    psi_id: str | None = None
    rays: list = field(default_factory=list)
    factors: list[list[int]] = field(default_factory=list)
    depth: int = 8


@dataclass
class ExperimentConfig:
    """A single experiment run."""
    experiment: Experiment
    model: ModelSpec
    sequence: SequenceSpec
    p_values: list[int]
    m: int = 1
    samples: int = 0
    seed: int = 0
    output: str | None = None
    format: ReportFormat = ReportFormat.JSON
    forms: list[str] = field(default_factory=list)
    point: ChartPoint | None = None
    window_radius: float = 2.0
    grid_points: int = 50
    epsilon_scale: float = 4.0
    gap_constant: float = 0.0
    threads: int | None = None
    tolerances: dict[str, float] = field(default_factory=dict)


def _p_values(data: dict) -> list[int]:
    if "p" in data:
        values = data["p"]
        return [int(values)] if isinstance(values, int) else [int(p) for p in values]
    if "p_range" in data:
        spec = data["p_range"]
        start, stop, step = int(spec["start"]), int(spec["stop"]), int(spec.get("step", 1))
        if step < 1:
            raise ValueError(f"p_range step must be positive, got {step}")
        return list(range(start, stop + 1, step))
    raise KeyError("config needs 'p' or 'p_range'")


def point_from_dict(data: dict) -> ChartPoint:
    coords = data.get("coords", [[0.0, 0.0]])
    return ChartPoint(
        chart_id=int(data.get("chart", 0)),
        coords=tuple(parse_complex(c) for c in coords),
    )


def point_to_dict(point: ChartPoint) -> dict:
    return {
        "chart": point.chart_id,
        "coords": [[c.real, c.imag] for c in point.coords],
    }


def experiment_config_from_dict(data: dict) -> ExperimentConfig:
    """Parse the JSON form of an experiment."""
    model_data = data["model"]
    if isinstance(model_data, str):
        model_data = {"kind": model_data}
    tau = model_data.get("tau")
    model = ModelSpec(
        kind=ModelKind(model_data["kind"]),
        tau=parse_complex(tau) if tau is not None else None,
    )

    seq_data = data.get("sequence") or {}
    degree = seq_data.get("degree", [1])
    sequence = SequenceSpec(
        kind=SequenceKind(seq_data.get("kind", SequenceKind.POWER_RAY.value)),
        degree=[int(degree)] if isinstance(degree, int) else [int(d) for d in degree],
        a=float(seq_data["a"]) if seq_data.get("a") is not None else None,
        psi_id=seq_data.get("psi_id"),
        rays=list(seq_data.get("rays", [])),
        factors=[
            [int(f)] if isinstance(f, int) else [int(d) for d in f]
            for f in seq_data.get("factors", [])
        ],
        depth=int(seq_data.get("depth", 8)),
    )

    point = data.get("point")
    return ExperimentConfig(
        experiment=Experiment(data["experiment"]),
        model=model,
        sequence=sequence,
        p_values=_p_values(data),
        m=int(data.get("m", 1)),
        samples=int(data.get("samples", 0)),
        seed=int(data.get("seed", 0)),
        output=data.get("output"),
        format=ReportFormat(data.get("format", ReportFormat.JSON.value)),
        forms=list(data.get("forms", [])),
        point=point_from_dict(point) if point is not None else None,
        window_radius=float(data.get("window_radius", 2.0)),
        grid_points=int(data.get("grid_points", 50)),
        epsilon_scale=float(data.get("epsilon_scale", 4.0)),
        gap_constant=float(data.get("gap_constant", 0.0)),
        threads=int(data["threads"]) if data.get("threads") is not None else None,
        tolerances={k: float(v) for k, v in (data.get("tolerances") or {}).items()},
    )


def experiment_config_to_dict(config: ExperimentConfig) -> dict:
    """JSON-ready echo of a config (output path and thread count excluded)."""
    model: dict = {"kind": config.model.kind.value}
    if config.model.tau is not None:
        model["tau"] = [config.model.tau.real, config.model.tau.imag]
    sequence = config.sequence
    return {
        "experiment": config.experiment.value,
        "model": model,
        "sequence": {
            "kind": sequence.kind.value,
            "degree": list(sequence.degree),
            "a": sequence.a,
            "psi_id": sequence.psi_id,
            "rays": [str(r) for r in sequence.rays],
            "factors": [list(f) for f in sequence.factors],
            "depth": sequence.depth,
        },
        "p": list(config.p_values),
        "m": config.m,
        "samples": config.samples,
        "seed": config.seed,
        "format": config.format.value,
        "forms": list(config.forms),
        "point": point_to_dict(config.point) if config.point is not None else None,
        "window_radius": config.window_radius,
        "grid_points": config.grid_points,
        "epsilon_scale": config.epsilon_scale,
        "gap_constant": config.gap_constant,
        "tolerances": dict(sorted(config.tolerances.items())),
    }

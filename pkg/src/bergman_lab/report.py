"""Experiment reports and their atomic on-disk forms."""

import csv
import io
import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from bergman_lab.models import ReportFormat

logger = logging.getLogger(__name__)

# Columns of each experiment's CSV rows, in order.
CSV_COLUMNS: dict[str, list[str]] = {
    "bergman-scan": ["p", "A_p", "chart", "coords", "P_p", "P_over_An", "offdiag"],
    "expansion-fit": ["p", "A_p", "P_p", "P_over_An"],
    "model-kernel": ["p", "A_p", "window", "rescaled_defect", "diagonal_defect"],
    "zeros-equidist": ["p", "A_p", "m", "seed", "sample", "form_id", "value"],
    "fs-speed": ["p", "A_p", "m", "form_id", "value", "abs_value"],
    "degrees": ["p", "A_p", "m", "d_p", "d_pm", "c_pm", "delta1", "delta2", "ratio", "mass"],
}


@dataclass
class Report:
    """Everything a run produces: config echo, rows, and the summary derived from them."""
    experiment: str
    config: dict
    rows: list[dict]
    summary: dict
    tool_version: str
    wall_time: float = 0.0
    checks: dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self, include_wall_time: bool = True) -> dict:
        data = {
            "experiment": self.experiment,
            "tool_version": self.tool_version,
            "config": self.config,
            "rows": self.rows,
            "summary": {**self.summary, "checks": self.checks, "passed": self.passed},
        }
        if include_wall_time:
            data["wall_time"] = self.wall_time
        return data

    def body(self) -> str:
        """Serialized report without the wall time; identical for identical runs."""
        return dumps(self.to_dict(include_wall_time=False))


def _plain(value):
    """Convert numpy and complex scalars into JSON-ready values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if np.isfinite(value) else repr(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    return value


def dumps(data: dict) -> str:
    return json.dumps(_plain(data), indent=2, sort_keys=False) + "\n"


def _csv_cell(value) -> str:
    value = _plain(value)
    if isinstance(value, list):
        return json.dumps(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(experiment: str, rows: list[dict]) -> str:
    columns = CSV_COLUMNS.get(experiment) or (list(rows[0]) if rows else [])
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(row.get(column, "")) for column in columns])
    return buffer.getvalue()


def atomic_write(path: Path | str, text: str) -> None:
    """Write ``text`` to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def summary_path(path: Path | str) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".summary.json")


def write_report(report: Report, path: Path | str, fmt: ReportFormat) -> list[Path]:
    """Write the report; CSV runs put the summary block in ``<out>.summary.json``."""
    path = Path(path)
    if fmt is ReportFormat.CSV:
        atomic_write(path, rows_to_csv(report.experiment, report.rows))
        meta = report.to_dict()
        meta.pop("rows")
        side = summary_path(path)
        atomic_write(side, dumps(meta))
        logger.info(f"Wrote {len(report.rows)} rows to {path} and summary to {side}")
        return [path, side]
    atomic_write(path, dumps(report.to_dict()))
    logger.info(f"Wrote report with {len(report.rows)} rows to {path}")
    return [path]

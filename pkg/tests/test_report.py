"""Tests for reports and their files."""

import csv
import json
import math

import numpy as np
import pytest

from bergman_lab.models import ReportFormat
from bergman_lab.report import (
    CSV_COLUMNS,
    Report,
    atomic_write,
    dumps,
    rows_to_csv,
    summary_path,
    write_report,
)


@pytest.fixture
def report():
    return Report(
        experiment="expansion-fit",
        config={"experiment": "expansion-fit", "p": [10, 20]},
        rows=[
            {"p": 10, "A_p": 10.0, "P_p": np.float64(11.0), "P_over_An": 1.1},
            {"p": 20, "A_p": 20.0, "P_p": 21.0, "P_over_An": 1.05},
        ],
        summary={"b0": 1.0},
        tool_version="0.1.0",
        wall_time=1.5,
        checks={"b0": True, "b1": True},
    )


class TestReport:
    def test_passed(self, report):
        assert report.passed
        report.checks["b1"] = False
        assert not report.passed

    def test_no_checks_pass(self, report):
        report.checks = {}
        assert report.passed

    def test_body_omits_wall_time(self, report):
        body = json.loads(report.body())
        assert "wall_time" not in body
        assert body["summary"]["passed"] is True
        assert "wall_time" in report.to_dict()

    def test_body_is_stable(self, report):
        """Only the wall time differs between identical runs."""
        other = Report(**{**report.__dict__, "wall_time": 99.0})
        assert other.body() == report.body()


class TestSerialization:
    def test_numpy_and_complex(self):
        raw = {"a": np.int64(3), "b": np.array([1.0, 2.0]), "c": 1 + 2j, "d": np.bool_(True)}
        data = json.loads(dumps(raw))
        assert data == {"a": 3, "b": [1.0, 2.0], "c": [1.0, 2.0], "d": True}

    def test_non_finite(self):
        data = json.loads(dumps({"x": math.inf, "y": math.nan}))
        assert data == {"x": "inf", "y": "nan"}

    def test_csv_columns(self, report):
        text = rows_to_csv(report.experiment, report.rows)
        rows = list(csv.reader(text.splitlines()))
        assert rows[0] == CSV_COLUMNS["expansion-fit"]
        assert rows[1] == ["10", "10.0", "11.0", "1.1"]
        assert len(rows) == 3

    def test_csv_list_cell(self):
        text = rows_to_csv("bergman-scan", [{"p": 1, "coords": [0.5 + 0.25j]}])
        header, row = list(csv.reader(text.splitlines()))
        assert json.loads(row[header.index("coords")]) == [[0.5, 0.25]]


class TestFiles:
    def test_atomic_write_replaces(self, tmp_path):
        path = tmp_path / "out" / "report.json"
        atomic_write(path, "first")
        atomic_write(path, "second")
        assert path.read_text() == "second"
        assert [p.name for p in path.parent.iterdir()] == ["report.json"]

    def test_json_report(self, report, tmp_path):
        paths = write_report(report, tmp_path / "fit.json", ReportFormat.JSON)
        assert paths == [tmp_path / "fit.json"]
        data = json.loads(paths[0].read_text())
        assert data["rows"][0]["P_p"] == 11.0
        assert data["wall_time"] == 1.5

    def test_csv_report_writes_summary(self, report, tmp_path):
        out = tmp_path / "fit.csv"
        paths = write_report(report, out, ReportFormat.CSV)
        assert paths == [out, summary_path(out)]
        assert summary_path(out).name == "fit.csv.summary.json"
        meta = json.loads(summary_path(out).read_text())
        assert "rows" not in meta
        assert meta["summary"]["checks"] == {"b0": True, "b1": True}

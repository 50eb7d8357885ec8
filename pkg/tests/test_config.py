"""Tests for environment configuration and experiment config parsing."""

import json
from pathlib import Path

import pytest

from bergman_lab.config import (
    ConfigInvalid,
    get_config,
    load_experiment_config,
    validate,
    validate_config,
)
from bergman_lab.geometry import ModelKind
from bergman_lab.models import (
    Experiment,
    ReportFormat,
    experiment_config_from_dict,
    experiment_config_to_dict,
)

EXPERIMENTS_DIR = Path(__file__).resolve().parents[1] / "config" / "experiments"


def scan(**fields) -> dict:
    data = {"experiment": "bergman-scan", "model": "projective-line", "p": [1, 2, 3]}
    data.update(fields)
    return data


class TestGetConfig:
    """Tests for environment-driven settings."""

    def test_thread_cap(self, monkeypatch):
        """BERGMAN_LAB_THREADS caps the worker count."""
        monkeypatch.setenv("BERGMAN_LAB_THREADS", "3")
        assert get_config().worker_count == 3

    def test_auto_threads(self, monkeypatch):
        """0 means one worker per CPU."""
        monkeypatch.setenv("BERGMAN_LAB_THREADS", "0")
        assert get_config().worker_count >= 1

    def test_config_dir_override(self, monkeypatch, tmp_path):
        """BERGMAN_LAB_CONFIG moves the catalog and logging files."""
        monkeypatch.setenv("BERGMAN_LAB_CONFIG", str(tmp_path))
        config = get_config()
        assert config.catalog_dir == tmp_path / "catalog"
        assert config.logging_config == tmp_path / "logging.yaml"

    def test_log_level_upper_cased(self, monkeypatch):
        """The level override is normalized to upper case."""
        monkeypatch.setenv("BERGMAN_LAB_LOG_LEVEL", "debug")
        assert get_config().log_level == "DEBUG"


class TestExperimentConfig:
    """Tests for parsing experiment documents."""

    def test_p_range(self):
        """p_range expands inclusively."""
        data = scan(p_range={"start": 2, "stop": 8, "step": 3})
        del data["p"]
        config = experiment_config_from_dict(data)
        assert config.p_values == [2, 5, 8]

    def test_defaults(self):
        """Missing fields take their documented defaults."""
        config = experiment_config_from_dict(scan())
        assert config.experiment is Experiment.BERGMAN_SCAN
        assert config.model.kind is ModelKind.PROJECTIVE_LINE
        assert config.format is ReportFormat.JSON
        assert config.window_radius == 2.0
        assert config.sequence.degree == [1]

    def test_echo_round_trip(self):
        """The echoed config parses back to the same echo."""
        data = scan(
            model={"kind": "flat-torus", "tau": [0.5, 1.5]},
            point={"chart": 0, "coords": [[0.25, 0.1]]},
            tolerances={"kernel_exact": 1e-9},
        )
        echo = experiment_config_to_dict(experiment_config_from_dict(data))
        assert experiment_config_to_dict(experiment_config_from_dict(echo)) == echo

    @pytest.mark.parametrize("path", sorted(EXPERIMENTS_DIR.glob("*.json")), ids=lambda p: p.stem)
    def test_shipped_examples_are_valid(self, path):
        """Every shipped experiment config validates cleanly."""
        assert validate_config(load_experiment_config(path)).is_valid

    def test_overrides_apply(self):
        """Top-level overrides replace config fields; None leaves them alone."""
        path = EXPERIMENTS_DIR / "cp1-zeros-equidist.json"
        config = load_experiment_config(path, {"seed": 99, "output": None, "format": "json"})
        assert config.seed == 99
        assert config.format is ReportFormat.JSON

    def test_missing_experiment_is_invalid(self, tmp_path):
        """A document without an experiment name raises ConfigInvalid."""
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"model": "projective-line", "p": [1]}))
        with pytest.raises(ConfigInvalid):
            load_experiment_config(path)


class TestValidate:
    """Tests for configuration diagnostics."""

    def test_well_formed(self):
        """A well-formed config has no diagnostics."""
        assert validate(experiment_config_from_dict(scan())) == []

    def test_decreasing_p(self):
        """A decreasing p list gives one diagnostic."""
        assert len(validate(experiment_config_from_dict(scan(p=[3, 2, 1])))) == 1

    def test_perturbed_needs_positive_exponent(self):
        """PerturbedPower with a <= 0 gives one diagnostic."""
        sequence = {"kind": "perturbed-power", "a": 0.0, "psi_id": "psi-re-1"}
        assert len(validate(experiment_config_from_dict(scan(sequence=sequence)))) == 1

    def test_zeros_need_samples(self):
        """zeros-equidist with N = 0 is rejected."""
        config = experiment_config_from_dict(
            {"experiment": "zeros-equidist", "model": "projective-line", "p": [50], "samples": 0}
        )
        diagnostics = validate(config)
        assert len(diagnostics) == 1
        assert "samples" in diagnostics[0]

    def test_m_range(self):
        """m beyond the dimension is rejected."""
        assert validate(experiment_config_from_dict(scan(m=2)))

    def test_seed_range(self):
        """Seeds must fit in 64 unsigned bits."""
        assert validate(experiment_config_from_dict(scan(seed=-1)))

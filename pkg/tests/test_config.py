import json

import pytest

from config import DEFAULT_MASTER_SEED, LabConfig, load_experiment_config
from exceptions import ConfigValidationError
from models import Condition


@pytest.fixture
def settings(monkeypatch, tmp_path):
    for name in ("SPELLER_MASTER_SEED", "SPELLER_WORKERS", "SPELLER_LOG_LEVEL", "SPELLER_MANIFEST"):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv("SPELLER_OUTPUT_DIR", str(tmp_path / "out"))
    return LabConfig()


def test_environment_defaults(settings, tmp_path):
    assert settings.master_seed == DEFAULT_MASTER_SEED
    assert settings.master_seed_defaulted
    assert settings.workers == 1
    assert settings.log_level == "INFO"
    assert settings.output_dir == str(tmp_path / "out")


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("SPELLER_MASTER_SEED", "42")
    monkeypatch.setenv("SPELLER_WORKERS", "3")
    monkeypatch.setenv("SPELLER_LOG_LEVEL", "debug")
    settings = LabConfig()
    assert settings.master_seed == 42
    assert not settings.master_seed_defaulted
    assert settings.workers == 3
    assert settings.log_level == "DEBUG"


def test_non_integer_environment_value_is_rejected(monkeypatch):
    monkeypatch.setenv("SPELLER_WORKERS", "many")
    with pytest.raises(ConfigValidationError) as excinfo:
        LabConfig()
    assert excinfo.value.errors[0][0] == "SPELLER_WORKERS"


def test_config_file_and_overrides(settings, tmp_path):
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps({
        "n_subjects": 2,
        "conditions": [3, 1],
        "profile": {"n700_amplitudes": {"3": -2.0}},
    }))
    config = load_experiment_config(str(path), {"n_subjects": 4, "master_seed": None}, settings)
    assert config.n_subjects == 4
    assert config.conditions == (Condition.ERP_ONLY, Condition.ERP_PLUS_MEANINGFUL)
    assert config.profile.n700_amplitudes == {Condition.ERP_PLUS_MEANINGFUL: -2.0}
    assert config.master_seed == DEFAULT_MASTER_SEED


def test_invalid_fields_are_listed(settings, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"trials_per_phase": 0, "workers": 0}))
    with pytest.raises(ConfigValidationError) as excinfo:
        load_experiment_config(str(path), settings=settings)
    fields = [field for field, _ in excinfo.value.errors]
    assert "trials_per_phase" in fields and "workers" in fields


def test_unreadable_config_documents(settings, tmp_path):
    with pytest.raises(ConfigValidationError, match="file not found"):
        load_experiment_config(str(tmp_path / "missing.json"), settings=settings)
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ConfigValidationError, match="invalid JSON"):
        load_experiment_config(str(broken), settings=settings)
    listed = tmp_path / "list.json"
    listed.write_text("[1, 2]")
    with pytest.raises(ConfigValidationError):
        load_experiment_config(str(listed), settings=settings)


def test_output_dir_must_not_be_a_file(settings, tmp_path):
    blocker = tmp_path / "file.txt"
    blocker.write_text("x")
    with pytest.raises(ConfigValidationError) as excinfo:
        load_experiment_config(overrides={"output_dir": str(blocker / "nested")}, settings=settings)
    assert excinfo.value.errors[0][0] == "output_dir"

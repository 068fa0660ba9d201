"""
Laboratory configuration: environment settings and experiment config loading
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

from exceptions import ConfigValidationError
from models import ExperimentConfig

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)

DEFAULT_MASTER_SEED = 20190101
DEFAULT_MANIFEST = str(Path(__file__).resolve().parent / "data" / "home_manifest.json")


class LabConfig:
    """Environment-level settings shared by every command"""

    def __init__(self):
        self.output_dir: str = os.getenv("SPELLER_OUTPUT_DIR", "results")
        self.log_level: str = os.getenv("SPELLER_LOG_LEVEL", "INFO").upper()
        self.manifest_path: str = os.getenv("SPELLER_MANIFEST", DEFAULT_MANIFEST)

        seed = os.getenv("SPELLER_MASTER_SEED")
        self.master_seed_defaulted: bool = seed is None
        self.master_seed: int = self._parse_int("SPELLER_MASTER_SEED", seed, DEFAULT_MASTER_SEED)
        self.workers: int = max(1, self._parse_int("SPELLER_WORKERS", os.getenv("SPELLER_WORKERS"), 1))

    @staticmethod
    def _parse_int(name: str, raw: Optional[str], default: int) -> int:
        if raw is None or raw.strip() == "":
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigValidationError([(name, f"expected an integer, got {raw!r}")])

    def base_config(self) -> Dict[str, Any]:
        """Experiment fields that come from the environment"""
        return {
            "output_dir": self.output_dir,
            "master_seed": self.master_seed,
            "workers": self.workers,
        }


def _check_output_dir(path: str) -> None:
    """Raise ConfigValidationError unless path is (or can become) a writable directory"""
    target = Path(path)
    existing = target
    while not existing.exists():
        if existing.parent == existing:
            break
        existing = existing.parent
    if existing.exists() and not existing.is_dir():
        raise ConfigValidationError([("output_dir", f"{existing} is not a directory")])
    if not os.access(existing, os.W_OK):
        raise ConfigValidationError([("output_dir", f"{path} is not writable")])


def load_experiment_config(
    path: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
    settings: Optional[LabConfig] = None,
) -> ExperimentConfig:
    """
    Build an ExperimentConfig from the environment, an optional JSON file and CLI overrides

    Args:
        path: JSON document with ExperimentConfig fields
        overrides: Fields set on the command line (None values are ignored)
        settings: Environment settings (defaults to the shared lab_config)

    Returns:
        The validated configuration
    """
    settings = settings or lab_config
    fields: Dict[str, Any] = settings.base_config()

    if path:
        try:
            with open(path, "r", encoding="utf-8") as handle:
                document = json.load(handle)
        except FileNotFoundError:
            raise ConfigValidationError([("config", f"file not found: {path}")])
        except json.JSONDecodeError as e:
            raise ConfigValidationError([("config", f"invalid JSON at line {e.lineno}: {e.msg}")])
        if not isinstance(document, dict):
            raise ConfigValidationError([("config", "top-level JSON value must be an object")])
        fields.update(document)

    fields.update({key: value for key, value in (overrides or {}).items() if value is not None})

    try:
        config = ExperimentConfig(**fields)
    except ValidationError as e:
        errors = [(" -> ".join(str(loc) for loc in item["loc"]) or "<root>", item["msg"]) for item in e.errors()]
        raise ConfigValidationError(errors)

    _check_output_dir(config.output_dir)
    logger.debug(f"Resolved experiment config: {config.model_dump_json()}")
    return config


# Global settings instance
lab_config = LabConfig()

"""
Repository for experiment artifacts written to an output directory
"""

import json
import logging
from pathlib import Path
from typing import List, Optional, Sequence

import pandas as pd

from config import lab_config
from decoder import model_from_json, model_to_json
from exceptions import ArtifactIOError
from models import DEFAULT_MONTAGE, DEFAULT_TIMING, FlashSchedule, Montage, RldaModel, TimingConfig
from paradigm import format_schedules, parse_schedules
from synthgen import EegStream, stream_frame

logger = logging.getLogger(__name__)


class ResultsRepository:
    """Repository class for reading and writing CSV, JSON and text artifacts"""

    def __init__(self, output_dir: Optional[str] = None):
        self.output_dir = output_dir
        self._directory: Optional[Path] = None

    @property
    def directory(self) -> Path:
        """Output directory, created on first use"""
        if self._directory is None:
            path = Path(self.output_dir or lab_config.output_dir)
            try:
                path.mkdir(parents=True, exist_ok=True)
            except OSError as e:
                raise ArtifactIOError(f"File error while creating output directory {path}: {str(e)}")
            self._directory = path
        return self._directory

    def path_for(self, name: str) -> Path:
        """Absolute-or-relative names are resolved against the output directory"""
        path = Path(name)
        return path if path.is_absolute() else self.directory / path

    def write_text(self, name: str, text: str) -> Path:
        """Write a text artifact"""
        path = self.path_for(name)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        except OSError as e:
            raise ArtifactIOError(f"File error while writing {path}: {str(e)}")
        logger.debug(f"Wrote {path}")
        return path

    def read_text(self, name: str) -> str:
        """Read a text artifact"""
        path = self.path_for(name)
        try:
            return path.read_text(encoding="utf-8")
        except OSError as e:
            raise ArtifactIOError(f"File error while reading {path}: {str(e)}")

    def write_table(self, name: str, frame: pd.DataFrame) -> Path:
        """Write a DataFrame as CSV with a header and no index"""
        path = self.path_for(name)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            frame.to_csv(path, index=False)
        except (OSError, ValueError) as e:
            raise ArtifactIOError(f"File error while writing table {path}: {str(e)}")
        logger.debug(f"Wrote {path} ({len(frame)} rows)")
        return path

    def read_table(self, name: str) -> pd.DataFrame:
        """Read a CSV artifact"""
        path = self.path_for(name)
        try:
            return pd.read_csv(path)
        except (OSError, ValueError) as e:
            raise ArtifactIOError(f"File error while reading table {path}: {str(e)}")

    def write_schedules(self, name: str, schedules: Sequence[FlashSchedule]) -> Path:
        return self.write_text(name, format_schedules(schedules))

    def read_schedules(self, name: str, cfg: TimingConfig = DEFAULT_TIMING) -> List[FlashSchedule]:
        return parse_schedules(self.read_text(name).splitlines(), cfg)

    def write_stream(self, name: str, stream: EegStream, montage: Montage = DEFAULT_MONTAGE) -> Path:
        return self.write_table(name, stream_frame(stream, montage))

    def write_model(self, name: str, model: RldaModel) -> Path:
        return self.write_text(name, model_to_json(model))

    def read_model(self, name: str) -> RldaModel:
        """Load a serialized decoder"""
        text = self.read_text(name)
        try:
            return model_from_json(text)
        except (ArtifactIOError, ValueError, KeyError) as e:
            raise ArtifactIOError(f"Invalid model document {name}: {str(e)}")

    def write_json(self, name: str, document: dict) -> Path:
        return self.write_text(name, json.dumps(document, indent=2, sort_keys=True) + "\n")

    def save_experiment(self, result) -> List[Path]:
        """
        Write every artifact of a finished experiment

        Args:
            result: experiment.ExperimentResult

        Returns:
            Paths written, in a fixed order
        """
        written = [
            self.write_table("accuracy.csv", result.accuracy),
            self.write_table("accuracy_stats.csv", result.accuracy_stats),
            self.write_table("selections.csv", result.selections),
            self.write_table("erp_l2.csv", result.l2),
            self.write_table("peak_stats.csv", result.peak_stats),
            self.write_table("decode_log.csv", result.decode_log),
        ]
        for item in result.results:
            written.append(self.write_model(f"models/subject{item.subject}_condition{int(item.condition)}.json", item.model))
        written.append(self.write_json("run_config.json", result.config.model_dump(mode="json")))
        logger.info(f"✅ Wrote {len(written)} artifacts to {self.directory}")
        return written

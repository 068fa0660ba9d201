"""
Epoching, baseline correction and spatio-temporal feature extraction
"""

import logging
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from exceptions import DimensionMismatchError, EmptyInputError, TimingRangeError
from models import (
    DEFAULT_TIMING,
    N_CHANNELS,
    Condition,
    Epoch,
    FlashSchedule,
    FloatArray,
    TimingConfig,
    Trial,
)
from paradigm import timeline
from synthgen import EegStream

logger = logging.getLogger(__name__)

N_WINDOWS = 10
N_FEATURES = N_CHANNELS * N_WINDOWS
FEATURE_COLUMNS = [f"f{i:03d}" for i in range(N_FEATURES)]


class FeatureVector(BaseModel):
    """320 window means, channel-major (channel 0 windows 0..9, channel 1 windows 0..9, ...)"""
    model_config = ConfigDict(frozen=True)

    values: FloatArray
    trial_id: int = 0
    sequence_index: int = Field(default=0, ge=0)
    flash_index: int = Field(default=0, ge=0)
    is_target: bool = False

    @model_validator(mode="after")
    def check_length(self):
        if self.values.shape != (N_FEATURES,):
            raise ValueError(f"feature vector must have {N_FEATURES} values, got shape {self.values.shape}")
        return self


def _epoch_starts(onsets_ms: np.ndarray, cfg: TimingConfig) -> np.ndarray:
    return np.floor((onsets_ms + cfg.epoch_start) * cfg.sample_rate / 1000 + 1e-9).astype(int)


def cut_epochs(stream: EegStream, onsets_ms: Sequence[float], cfg: TimingConfig = DEFAULT_TIMING) -> np.ndarray:
    """
    Cut raw epochs for many onsets at once

    Args:
        stream: Continuous recording
        onsets_ms: Onsets in stream time
        cfg: Timing configuration

    Returns:
        Array of shape (n_onsets, channels, n_epoch_samples)
    """
    onsets = np.asarray(onsets_ms, dtype=float)
    if stream.sample_rate != cfg.sample_rate:
        raise DimensionMismatchError(f"stream sampled at {stream.sample_rate} Hz, timing expects {cfg.sample_rate} Hz")
    starts = _epoch_starts(onsets, cfg)
    width = cfg.n_epoch_samples
    if onsets.size and (starts.min() < 0 or starts.max() + width > stream.n_samples):
        bad = onsets[(starts < 0) | (starts + width > stream.n_samples)][0]
        raise TimingRangeError(
            f"stream of {stream.n_samples} samples does not cover [{bad + cfg.epoch_start}, {bad + cfg.epoch_end}) ms"
        )
    index = starts[:, None] + np.arange(width)[None, :]
    return np.transpose(stream.data[:, index], (1, 0, 2))


def baseline_correct_array(epochs: np.ndarray, cfg: TimingConfig = DEFAULT_TIMING) -> np.ndarray:
    """Subtract each channel's pre-stimulus mean; works on (..., channels, samples)"""
    baseline = epochs[..., :cfg.n_baseline_samples].mean(axis=-1, keepdims=True)
    return epochs - baseline


def extract_features_array(
    epochs: np.ndarray,
    cfg: TimingConfig = DEFAULT_TIMING,
    n_windows: int = N_WINDOWS,
) -> np.ndarray:
    """
    Window means over the post-stimulus part of baseline-corrected epochs

    Args:
        epochs: Array (..., channels, samples)
        cfg: Timing configuration
        n_windows: Number of equal contiguous windows

    Returns:
        Array (..., channels * n_windows), channel-major
    """
    post = epochs[..., cfg.n_baseline_samples:]
    n_post = post.shape[-1]
    if n_post % n_windows != 0:
        raise DimensionMismatchError(f"{n_post} post-stimulus samples do not split into {n_windows} windows")
    lead = post.shape[:-2]
    n_channels = post.shape[-2]
    windows = post.reshape(*lead, n_channels, n_windows, n_post // n_windows).mean(axis=-1)
    return windows.reshape(*lead, n_channels * n_windows)


def flash_epochs(stream: EegStream, schedule: FlashSchedule, cfg: TimingConfig = DEFAULT_TIMING) -> np.ndarray:
    """Baseline-corrected epochs of every flash of a trial, (n_flashes, channels, samples)"""
    onsets = [stream.onset_in_stream(event.onset_ms) for event in timeline(schedule, cfg).events]
    return baseline_correct_array(cut_epochs(stream, onsets, cfg), cfg)


def cut_epoch(
    stream: EegStream,
    onset_ms: float,
    cfg: TimingConfig = DEFAULT_TIMING,
    *,
    objects: Sequence[int],
    condition: Condition = Condition.ERP_ONLY,
    true_target: Optional[int] = None,
    sequence_index: int = 0,
    flash_index: int = 0,
    trial_id: int = 0,
) -> Epoch:
    """
    Cut one raw epoch around an onset given in stream time

    Raises:
        TimingRangeError: the stream does not cover [onset + epoch_start, onset + epoch_end)
    """
    samples = cut_epochs(stream, [onset_ms], cfg)[0]
    return Epoch(
        samples=samples,
        onset_time=onset_ms,
        object_flags=frozenset(objects),
        is_target=true_target is not None and true_target in objects,
        condition=condition,
        sequence_index=sequence_index,
        flash_index=flash_index,
        trial_id=trial_id,
        n_samples=cfg.n_epoch_samples,
        objects_per_flash=cfg.objects_per_flash,
    )


def baseline_correct(epoch: Epoch, cfg: TimingConfig = DEFAULT_TIMING) -> Epoch:
    """Epoch with every channel's mean over columns 0..19 removed"""
    corrected = baseline_correct_array(np.asarray(epoch.samples), cfg)
    return epoch.model_copy(update={"samples": FloatArray.validate(corrected)})


def extract_features(epoch: Epoch, cfg: TimingConfig = DEFAULT_TIMING) -> FeatureVector:
    """320-dim feature vector of a baseline-corrected epoch"""
    return FeatureVector(
        values=extract_features_array(np.asarray(epoch.samples), cfg),
        trial_id=epoch.trial_id,
        sequence_index=epoch.sequence_index,
        flash_index=epoch.flash_index,
        is_target=epoch.is_target,
    )


def epoch_trial(
    stream: EegStream,
    schedule: FlashSchedule,
    condition: Condition,
    true_target: int,
    trial_id: int = 0,
    cfg: TimingConfig = DEFAULT_TIMING,
) -> Trial:
    """Cut every flash of a trial into raw epochs with their metadata"""
    epochs = tuple(
        cut_epoch(
            stream,
            stream.onset_in_stream(event.onset_ms),
            cfg,
            objects=event.objects,
            condition=condition,
            true_target=true_target,
            sequence_index=event.sequence_index,
            flash_index=event.flash_index,
            trial_id=trial_id,
        )
        for event in timeline(schedule, cfg).events
    )
    return Trial(trial_id=trial_id, condition=condition, true_target=true_target, schedule=schedule, epochs=epochs)


def trial_features(trial: Trial, cfg: TimingConfig = DEFAULT_TIMING) -> List[FeatureVector]:
    """Baseline-corrected feature vector of every epoch of a trial"""
    if not trial.epochs:
        raise EmptyInputError("trial has no epochs")
    return [extract_features(baseline_correct(epoch, cfg), cfg) for epoch in trial.epochs]


def features_frame(
    features: np.ndarray,
    trial_ids: Sequence[int],
    sequence_indices: Sequence[int],
    flash_indices: Sequence[int],
    is_target: Sequence[bool],
) -> pd.DataFrame:
    """Feature matrix as a table: trial_id, sequence, flash, is_target, f000..f319"""
    features = np.atleast_2d(features)
    if features.shape[1] != N_FEATURES:
        raise DimensionMismatchError(f"expected {N_FEATURES} feature columns, got {features.shape[1]}")
    frame = pd.DataFrame(features, columns=FEATURE_COLUMNS)
    frame.insert(0, "is_target", [int(bool(v)) for v in is_target])
    frame.insert(0, "flash", list(flash_indices))
    frame.insert(0, "sequence", list(sequence_indices))
    frame.insert(0, "trial_id", list(trial_ids))
    return frame


def trials_frame(trials: Sequence[Trial], cfg: TimingConfig = DEFAULT_TIMING) -> pd.DataFrame:
    """Feature table of every epoch of every trial, in trial then flash order"""
    vectors = [vector for trial in trials for vector in trial_features(trial, cfg)]
    if not vectors:
        raise EmptyInputError("no trials to export")
    return features_frame(
        np.stack([v.values for v in vectors]),
        [v.trial_id for v in vectors],
        [v.sequence_index for v in vectors],
        [v.flash_index for v in vectors],
        [v.is_target for v in vectors],
    )

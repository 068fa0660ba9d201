"""
Synthetic continuous EEG for the speller

Streams are rendered as background noise (white + 1/f) plus, for every flash
that highlights the intended object, a P300 and an N700 Gaussian bump scaled
by a per-channel topography. Imagined speech only changes the N700 amplitude.
"""

import logging
import math
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from models import (
    DEFAULT_MONTAGE,
    DEFAULT_TIMING,
    N_CHANNELS,
    ComponentName,
    Condition,
    ErpTemplate,
    FlashSchedule,
    FloatArray,
    Montage,
    NoiseModel,
    ProfileOverrides,
    SubjectProfile,
    TimingConfig,
)
from paradigm import target_flash_indices, timeline

logger = logging.getLogger(__name__)

# Calibration: condition 1 reaches about 60% at six sequences, condition 3 about 87% at seven
WHITE_SIGMA = 20.0
PINK_SIGMA = 10.0
P300_AMPLITUDE = 2.3
N700_AMPLITUDES: Dict[Condition, float] = {
    Condition.ERP_ONLY: -1.1,
    Condition.ERP_PLUS_MEANINGLESS: -2.0,
    Condition.ERP_PLUS_MEANINGFUL: -2.5,
}
GAIN_SPREAD = 0.1
P300_PEAK_MS, P300_WIDTH_MS = 300.0, 60.0
N700_PEAK_MS, N700_WIDTH_MS = 700.0, 70.0
DEFAULT_LEAD_IN_MS = 200.0

P300_TOPOGRAPHY: Dict[str, float] = {
    "Fp1": 0.30, "Fp2": 0.30, "F3": 0.45, "Fz": 0.55, "F4": 0.45, "FC1": 0.60, "FCz": 0.65, "FC2": 0.60,
    "C3": 0.80, "C1": 0.90, "Cz": 1.00, "C2": 0.90, "C4": 0.80, "CP1": 0.95, "CPz": 1.00, "CP2": 0.95,
    "FC5": 0.45, "FC6": 0.45, "T7": 0.35, "T8": 0.35, "CP5": 0.70, "CP6": 0.70, "P7": 0.60, "P8": 0.60,
    "P3": 0.85, "P1": 0.90, "Pz": 0.95, "P2": 0.90, "P4": 0.85, "O1": 0.55, "Oz": 0.60, "O2": 0.55,
}

N700_TOPOGRAPHY: Dict[str, float] = {
    "Fp1": 0.80, "Fp2": 0.80, "F3": 0.95, "Fz": 1.00, "F4": 0.95, "FC1": 0.95, "FCz": 1.00, "FC2": 0.95,
    "C3": 0.75, "C1": 0.70, "Cz": 0.70, "C2": 0.70, "C4": 0.65, "CP1": 0.55, "CPz": 0.55, "CP2": 0.55,
    "FC5": 0.80, "FC6": 0.80, "T7": 0.70, "T8": 0.70, "CP5": 0.50, "CP6": 0.50, "P7": 0.35, "P8": 0.35,
    "P3": 0.35, "P1": 0.35, "Pz": 0.35, "P2": 0.35, "P4": 0.35, "O1": 0.10, "Oz": 0.10, "O2": 0.10,
}


class EegStream(BaseModel):
    """Continuous channels x samples recording in µV"""
    model_config = ConfigDict(frozen=True)

    data: FloatArray = Field(..., description="channels x samples, µV")
    sample_rate: int = Field(default=100, gt=0)
    lead_in_ms: float = Field(default=DEFAULT_LEAD_IN_MS, ge=0, description="Recording time before the first flash")

    @model_validator(mode="after")
    def check_shape(self):
        if self.data.ndim != 2 or self.data.shape[0] != N_CHANNELS:
            raise ValueError(f"stream must be a {N_CHANNELS} x samples matrix, got shape {self.data.shape}")
        return self

    @property
    def n_samples(self) -> int:
        return int(self.data.shape[1])

    @property
    def times_ms(self) -> np.ndarray:
        return np.arange(self.n_samples) * 1000.0 / self.sample_rate

    def onset_in_stream(self, onset_ms: float) -> float:
        """Stream time of a timeline onset"""
        return self.lead_in_ms + onset_ms


def _topography(gains: Dict[str, float], montage: Montage) -> np.ndarray:
    return np.array([gains[label] for label in montage.channels], dtype=float)


def default_profile(
    seed: int,
    overrides: Optional[ProfileOverrides] = None,
    montage: Montage = DEFAULT_MONTAGE,
) -> SubjectProfile:
    """
    Calibrated synthetic subject

    Args:
        seed: Subject seed; draws the global gain and the base noise seed
        overrides: Replacements for any calibrated parameter
        montage: Channel order of the topographies

    Returns:
        A SubjectProfile with frontal N700 growing from condition 1 to 3
    """
    overrides = overrides or ProfileOverrides()
    rng = np.random.default_rng(seed)
    spread = GAIN_SPREAD if overrides.gain_spread is None else overrides.gain_spread
    drawn_gain = float(math.exp(rng.normal(0.0, spread))) if spread > 0 else 1.0
    noise_seed = int(rng.integers(2**31 - 1))

    p300_amplitude = P300_AMPLITUDE if overrides.p300_amplitude is None else overrides.p300_amplitude
    n700_amplitudes = dict(N700_AMPLITUDES)
    if overrides.n700_amplitudes:
        n700_amplitudes.update({Condition(c): a for c, a in overrides.n700_amplitudes.items()})

    return SubjectProfile(
        p300=ErpTemplate(
            name=ComponentName.P300,
            peak_time=P300_PEAK_MS,
            width=P300_WIDTH_MS,
            amplitude={c: p300_amplitude for c in Condition},
            topography=_topography(P300_TOPOGRAPHY, montage),
        ),
        n700=ErpTemplate(
            name=ComponentName.N700,
            peak_time=N700_PEAK_MS,
            width=N700_WIDTH_MS,
            amplitude=n700_amplitudes,
            topography=_topography(N700_TOPOGRAPHY, montage),
        ),
        noise=NoiseModel(
            white_sigma=WHITE_SIGMA if overrides.white_sigma is None else overrides.white_sigma,
            pink_sigma=PINK_SIGMA if overrides.pink_sigma is None else overrides.pink_sigma,
            seed=noise_seed,
        ),
        global_gain=drawn_gain if overrides.global_gain is None else overrides.global_gain,
    )


def zero_noise(profile: SubjectProfile) -> SubjectProfile:
    """Same subject without background noise"""
    noise = profile.noise.model_copy(update={"white_sigma": 0.0, "pink_sigma": 0.0})
    return profile.model_copy(update={"noise": noise})


def zero_templates(profile: SubjectProfile) -> SubjectProfile:
    """Same subject with both ERP amplitudes set to zero"""
    silent = {c: 0.0 for c in Condition}
    return profile.model_copy(update={
        "p300": profile.p300.model_copy(update={"amplitude": silent}),
        "n700": profile.n700.model_copy(update={"amplitude": dict(silent)}),
    })


def scale_noise(profile: SubjectProfile, factor: float) -> SubjectProfile:
    """Same subject with both noise sigmas multiplied by factor"""
    noise = profile.noise.model_copy(update={
        "white_sigma": profile.noise.white_sigma * factor,
        "pink_sigma": profile.noise.pink_sigma * factor,
    })
    return profile.model_copy(update={"noise": noise})


def pink_noise(n_channels: int, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """
    Unit-variance 1/f noise, independent per channel

    White Gaussian noise is shaped in the frequency domain by 1/sqrt(f), so the
    power spectral density falls as 1/f. The DC bin is removed.
    """
    white = rng.standard_normal((n_channels, n_samples))
    spectrum = np.fft.rfft(white, axis=1)
    freqs = np.fft.rfftfreq(n_samples)
    scale = np.zeros_like(freqs)
    scale[1:] = 1.0 / np.sqrt(freqs[1:])
    shaped = np.fft.irfft(spectrum * scale, n=n_samples, axis=1)
    shaped -= shaped.mean(axis=1, keepdims=True)
    std = shaped.std(axis=1, keepdims=True)
    std[std == 0] = 1.0
    return shaped / std


def background_noise(noise: NoiseModel, n_samples: int, seed: Optional[int] = None) -> np.ndarray:
    """White plus pink noise for a stream of n_samples"""
    rng = np.random.default_rng(noise.seed if seed is None else seed)
    white = rng.standard_normal((N_CHANNELS, n_samples))
    pink = pink_noise(N_CHANNELS, n_samples, rng)
    return noise.white_sigma * white + noise.pink_sigma * pink


def superimpose_erps(
    onsets_ms: Sequence[float],
    condition: Condition,
    profile: SubjectProfile,
    n_samples: int,
    cfg: TimingConfig = DEFAULT_TIMING,
) -> np.ndarray:
    """
    Deterministic ERP part of a stream

    Args:
        onsets_ms: Stream times of the target flashes
        condition: Condition selecting the template amplitudes
        profile: Subject templates and gain
        n_samples: Stream length
        cfg: Timing configuration (sample rate)

    Returns:
        channels x samples array; bumps of overlapping flashes add linearly
    """
    times = np.arange(n_samples) * 1000.0 / cfg.sample_rate
    onsets = np.asarray(onsets_ms, dtype=float)
    signal = np.zeros((N_CHANNELS, n_samples))
    if onsets.size == 0:
        return signal

    for template in (profile.p300, profile.n700):
        amplitude = template.amplitude_for(condition) * profile.global_gain
        if amplitude == 0:
            continue
        lags = times[None, :] - onsets[:, None] - template.peak_time
        waveform = amplitude * np.exp(-0.5 * (lags / template.width) ** 2).sum(axis=0)
        signal += np.outer(template.topography, waveform)
    return signal


def stream_length(schedule: FlashSchedule, cfg: TimingConfig = DEFAULT_TIMING,
                  lead_in_ms: float = DEFAULT_LEAD_IN_MS) -> int:
    """Samples needed to cover the last flash onset plus the epoch end"""
    last_onset = (len(schedule.flashes) - 1) * cfg.soa()
    return int(math.ceil((lead_in_ms + last_onset + cfg.epoch_end) * cfg.sample_rate / 1000))


def render_stream(
    schedule: FlashSchedule,
    condition: Condition,
    true_target: int,
    profile: SubjectProfile,
    cfg: TimingConfig = DEFAULT_TIMING,
    noise_seed: Optional[int] = None,
    lead_in_ms: float = DEFAULT_LEAD_IN_MS,
) -> EegStream:
    """
    Render one trial into a continuous stream

    Args:
        schedule: Flash schedule of the trial
        condition: Experimental condition
        true_target: Object the synthetic subject attends to
        profile: Synthetic subject
        cfg: Timing configuration
        noise_seed: Per-trial noise seed (defaults to the profile's)
        lead_in_ms: Recording time before the first flash

    Returns:
        EegStream = noise + ERPs at every target flash onset
    """
    n_samples = stream_length(schedule, cfg, lead_in_ms)
    events = timeline(schedule, cfg).events
    target_onsets = [lead_in_ms + events[k].onset_ms for k in target_flash_indices(schedule, true_target)]

    data = superimpose_erps(target_onsets, condition, profile, n_samples, cfg)
    if profile.noise.white_sigma > 0 or profile.noise.pink_sigma > 0:
        data = data + background_noise(profile.noise, n_samples, noise_seed)
    return EegStream(data=data, sample_rate=cfg.sample_rate, lead_in_ms=lead_in_ms)


def stream_frame(stream: EegStream, montage: Montage = DEFAULT_MONTAGE) -> pd.DataFrame:
    """Stream as a table: time_ms then one column per channel"""
    frame = pd.DataFrame(stream.data.T, columns=list(montage.channels))
    frame.insert(0, "time_ms", stream.times_ms)
    return frame

"""
Pydantic models for the speller laboratory: montage, timing, epochs, schedules,
templates, decoder state, test results, smart-home state and experiment config
"""

import itertools
import math
from enum import Enum, IntEnum
from typing import Dict, FrozenSet, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from exceptions import SchedulingError, TimingRangeError


class FloatArray(np.ndarray):
    """Read-only float ndarray usable as a pydantic field type"""

    @classmethod
    def __get_pydantic_core_schema__(cls, source_type, handler):
        from pydantic_core import core_schema
        return core_schema.no_info_plain_validator_function(
            cls.validate,
            serialization=core_schema.plain_serializer_function_ser_schema(
                lambda value: np.asarray(value).tolist()
            ),
        )

    @classmethod
    def validate(cls, v):
        array = np.array(v, dtype=float)
        array.setflags(write=False)
        return array

    @classmethod
    def __get_pydantic_json_schema__(cls, core_schema, handler):
        return {"type": "array", "items": {"type": "number"}}


# ========== MONTAGE ==========

class Region(str, Enum):
    """Scalp regions, one per column group of the per-channel tables"""
    FRONTAL = "frontal"
    CENTRAL = "central"
    PARIETAL = "parietal"
    OCCIPITAL = "occipital"


REGION_GROUPS: Dict[Region, Tuple[str, ...]] = {
    Region.FRONTAL: ("Fp1", "Fp2", "F3", "Fz", "F4", "FC1", "FCz", "FC2"),
    Region.CENTRAL: ("C3", "C1", "Cz", "C2", "C4", "CP1", "CPz", "CP2"),
    Region.PARIETAL: ("FC5", "FC6", "T7", "T8", "CP5", "CP6", "P7", "P8"),
    Region.OCCIPITAL: ("P3", "P1", "Pz", "P2", "P4", "O1", "Oz", "O2"),
}

CHANNEL_LABELS: Tuple[str, ...] = tuple(
    label for region in Region for label in REGION_GROUPS[region]
)
N_CHANNELS = len(CHANNEL_LABELS)


class Montage(BaseModel):
    """Ordered 32-channel montage with its region partition"""
    model_config = ConfigDict(frozen=True)

    channels: Tuple[str, ...] = Field(default=CHANNEL_LABELS, description="Channel labels in matrix row order")
    regions: Dict[str, Region] = Field(
        default_factory=lambda: {label: region for region, labels in REGION_GROUPS.items() for label in labels},
        description="Channel label -> scalp region",
    )
    reference: str = Field(default="nose tip", description="Reference electrode site (metadata only)")
    ground: str = Field(default="mastoid", description="Ground electrode site (metadata only)")

    @model_validator(mode="after")
    def check_layout(self):
        if len(self.channels) != N_CHANNELS:
            raise ValueError(f"montage must have exactly {N_CHANNELS} channels, got {len(self.channels)}")
        if len(set(self.channels)) != len(self.channels):
            raise ValueError("channel labels must be distinct")
        if set(self.channels) != set(CHANNEL_LABELS):
            unknown = sorted(set(self.channels) - set(CHANNEL_LABELS))
            raise ValueError(f"unexpected channel labels: {unknown}")
        for label in self.channels:
            expected = next(region for region, labels in REGION_GROUPS.items() if label in labels)
            if self.regions.get(label) != expected:
                raise ValueError(f"channel {label} must belong to region {expected.value}")
        return self

    def index(self, label: str) -> int:
        """Row index of a channel label"""
        try:
            return self.channels.index(label)
        except ValueError:
            raise KeyError(f"unknown channel: {label}")

    def region_channels(self, region: Region) -> List[str]:
        """Channel labels of a region, in montage order"""
        return [label for label in self.channels if self.regions[label] == region]

    def region_indices(self, region: Region) -> List[int]:
        """Row indices of a region, in montage order"""
        return [i for i, label in enumerate(self.channels) if self.regions[label] == region]


DEFAULT_MONTAGE = Montage()


# ========== TIMING ==========

class TimingConfig(BaseModel):
    """Stimulus and epoch timing; all times in ms"""
    model_config = ConfigDict(frozen=True)

    sample_rate: int = Field(default=100, gt=0, description="Sampling rate in Hz")
    stim_duration: int = Field(default=50, gt=0, description="Flash duration in ms")
    isi: int = Field(default=135, ge=0, description="Inter-stimulus interval in ms")
    epoch_start: int = Field(default=-200, description="Epoch start relative to onset, ms")
    epoch_end: int = Field(default=800, description="Epoch end relative to onset, ms (exclusive)")
    flashes_per_sequence: int = Field(default=12, gt=0)
    sequences_per_trial: int = Field(default=10, gt=0)
    objects_per_flash: int = Field(default=6, gt=0)
    n_objects: int = Field(default=36, gt=0)

    @model_validator(mode="after")
    def check_invariants(self):
        if not self.epoch_start < 0 < self.epoch_end:
            raise ValueError("epoch_start < 0 < epoch_end is required")
        span = (self.epoch_end - self.epoch_start) * self.sample_rate
        if span % 1000 != 0:
            raise ValueError("epoch span times sample_rate must be a whole number of samples")
        if (-self.epoch_start * self.sample_rate) % 1000 != 0:
            raise ValueError("baseline span must be a whole number of samples")
        if self.flashes_per_sequence * self.objects_per_flash != 2 * self.n_objects:
            raise ValueError("each object must flash exactly twice per sequence")
        if self.objects_per_flash > self.n_objects // 2:
            raise ValueError("objects_per_flash too large for the non-adjacency constraint")
        return self

    def soa(self) -> int:
        """Stimulus onset asynchrony in ms"""
        return self.stim_duration + self.isi

    @property
    def sample_period_ms(self) -> float:
        return 1000.0 / self.sample_rate

    @property
    def n_epoch_samples(self) -> int:
        return (self.epoch_end - self.epoch_start) * self.sample_rate // 1000

    @property
    def n_baseline_samples(self) -> int:
        return -self.epoch_start * self.sample_rate // 1000

    @property
    def n_flashes_per_trial(self) -> int:
        return self.flashes_per_sequence * self.sequences_per_trial

    @property
    def target_flashes_per_sequence(self) -> int:
        return self.flashes_per_sequence * self.objects_per_flash // self.n_objects


DEFAULT_TIMING = TimingConfig()


def ms_to_sample(t: float, cfg: TimingConfig = DEFAULT_TIMING) -> int:
    """
    Convert an epoch-relative time to a column index

    Args:
        t: Time in ms relative to stimulus onset
        cfg: Timing configuration

    Returns:
        Column index, floored for times between samples
    """
    if not cfg.epoch_start <= t < cfg.epoch_end:
        raise TimingRangeError(f"time {t} ms outside epoch [{cfg.epoch_start}, {cfg.epoch_end})")
    return int(math.floor((t - cfg.epoch_start) * cfg.sample_rate / 1000 + 1e-9))


def sample_to_ms(index: int, cfg: TimingConfig = DEFAULT_TIMING) -> float:
    """Epoch-relative time (ms) of a column index"""
    if not 0 <= index < cfg.n_epoch_samples:
        raise TimingRangeError(f"sample {index} outside epoch of {cfg.n_epoch_samples} samples")
    return cfg.epoch_start + index * 1000 / cfg.sample_rate


class Condition(IntEnum):
    """Experimental conditions"""
    ERP_ONLY = 1
    ERP_PLUS_MEANINGLESS = 2
    ERP_PLUS_MEANINGFUL = 3

    @property
    def label(self) -> str:
        return {
            Condition.ERP_ONLY: "ERP only",
            Condition.ERP_PLUS_MEANINGLESS: "ERP + imagined meaningless word",
            Condition.ERP_PLUS_MEANINGFUL: "ERP + imagined object name",
        }[self]


# ========== STIMULI ==========

def schedule_violations(
    flashes: Tuple[Tuple[int, ...], ...],
    flashes_per_sequence: int,
    n_objects: int,
    objects_per_flash: int,
) -> List[str]:
    """
    List every broken schedule invariant

    Args:
        flashes: Flash groups in presentation order
        flashes_per_sequence: Flashes in one sequence
        n_objects: Number of selectable objects
        objects_per_flash: Objects highlighted per flash

    Returns:
        Human-readable violation descriptions (empty when valid)
    """
    problems = []
    if len(flashes) % flashes_per_sequence != 0:
        problems.append(f"{len(flashes)} flashes is not a whole number of sequences")
    for k, group in enumerate(flashes):
        if len(group) != objects_per_flash or len(set(group)) != objects_per_flash:
            problems.append(f"flash {k} must hold {objects_per_flash} distinct objects")
        if any(not 0 <= o < n_objects for o in group):
            problems.append(f"flash {k} references an object outside 0..{n_objects - 1}")
    per_sequence = flashes_per_sequence * objects_per_flash // n_objects
    for s in range(len(flashes) // flashes_per_sequence):
        counts = np.zeros(n_objects, dtype=int)
        for group in flashes[s * flashes_per_sequence:(s + 1) * flashes_per_sequence]:
            for o in group:
                if 0 <= o < n_objects:
                    counts[o] += 1
        if np.any(counts != per_sequence):
            problems.append(f"sequence {s} does not flash every object exactly {per_sequence} times")
    for k in range(1, len(flashes)):
        shared = set(flashes[k - 1]) & set(flashes[k])
        if shared:
            problems.append(f"flashes {k - 1} and {k} share objects {sorted(shared)}")
    for s in range(len(flashes) // flashes_per_sequence):
        groups = [set(g) for g in flashes[s * flashes_per_sequence:(s + 1) * flashes_per_sequence]]
        for i, j in itertools.combinations(range(len(groups)), 2):
            common = groups[i] & groups[j]
            if len(common) > 1:
                problems.append(f"flashes {i} and {j} of sequence {s} have objects {sorted(common)} in common")
    return problems


class FlashSchedule(BaseModel):
    """Ordered flash groups of one trial"""
    model_config = ConfigDict(frozen=True)

    flashes: Tuple[Tuple[int, ...], ...] = Field(..., description="Flash groups in presentation order")
    seed: Optional[int] = Field(default=None, description="Seed the schedule was generated from (None when parsed from text)")
    flashes_per_sequence: int = 12
    n_objects: int = 36
    objects_per_flash: int = 6

    @model_validator(mode="after")
    def check_constraints(self):
        problems = schedule_violations(
            self.flashes, self.flashes_per_sequence, self.n_objects, self.objects_per_flash
        )
        if problems:
            raise SchedulingError("; ".join(problems[:5]))
        return self

    @property
    def n_sequences(self) -> int:
        return len(self.flashes) // self.flashes_per_sequence

    def sequence(self, index: int) -> Tuple[Tuple[int, ...], ...]:
        """Flash groups of one sequence"""
        start = index * self.flashes_per_sequence
        return self.flashes[start:start + self.flashes_per_sequence]


class FlashEvent(BaseModel):
    """One flash on the stimulus timeline"""
    model_config = ConfigDict(frozen=True)

    onset_ms: float
    objects: Tuple[int, ...]
    sequence_index: int = Field(..., ge=0)
    flash_index: int = Field(..., ge=0)


class StimulusTimeline(BaseModel):
    """Flash events with absolute onsets relative to the first flash"""
    model_config = ConfigDict(frozen=True)

    events: Tuple[FlashEvent, ...]

    @field_validator("events")
    @classmethod
    def check_onsets(cls, events):
        onsets = [event.onset_ms for event in events]
        if any(b <= a for a, b in zip(onsets, onsets[1:])):
            raise ValueError("onsets must be strictly increasing")
        return events

    @property
    def onsets(self) -> np.ndarray:
        return np.array([event.onset_ms for event in self.events], dtype=float)


# ========== EPOCHS ==========

class Epoch(BaseModel):
    """Channels x time window of µV samples cut around one flash"""
    model_config = ConfigDict(frozen=True)

    samples: FloatArray = Field(..., description="channels x time, µV")
    onset_time: float = Field(..., description="Onset in stream time, ms")
    object_flags: FrozenSet[int] = Field(..., description="Objects highlighted by the flash")
    is_target: bool
    condition: Condition
    sequence_index: int = Field(..., ge=0)
    flash_index: int = Field(..., ge=0)
    trial_id: int = 0
    n_samples: int = Field(default=DEFAULT_TIMING.n_epoch_samples, gt=0, description="Columns of the epoch window")
    objects_per_flash: int = Field(default=DEFAULT_TIMING.objects_per_flash, gt=0)

    @model_validator(mode="after")
    def check_shape(self):
        if self.samples.shape != (N_CHANNELS, self.n_samples):
            raise ValueError(
                f"samples must be a {N_CHANNELS} x {self.n_samples} matrix, got shape {self.samples.shape}"
            )
        if len(self.object_flags) != self.objects_per_flash:
            raise ValueError(
                f"object_flags must hold {self.objects_per_flash} objects, got {len(self.object_flags)}"
            )
        return self


class Trial(BaseModel):
    """Ten sequences of epochs ending in one selection"""
    model_config = ConfigDict(frozen=True)

    trial_id: int
    condition: Condition
    true_target: int = Field(..., ge=0)
    schedule: FlashSchedule
    epochs: Tuple[Epoch, ...]

    @model_validator(mode="after")
    def check_targets(self):
        if len(self.epochs) != len(self.schedule.flashes):
            raise ValueError("one epoch per flash is required")
        per_sequence = self.schedule.flashes_per_sequence * self.schedule.objects_per_flash // self.schedule.n_objects
        target_counts: Dict[int, int] = {}
        for epoch in self.epochs:
            if epoch.is_target != (self.true_target in epoch.object_flags):
                raise ValueError(f"epoch {epoch.flash_index} has an inconsistent target flag")
            if epoch.is_target:
                target_counts[epoch.sequence_index] = target_counts.get(epoch.sequence_index, 0) + 1
        for s in range(self.schedule.n_sequences):
            if target_counts.get(s, 0) != per_sequence:
                raise ValueError(f"sequence {s} must contain exactly {per_sequence} target epochs")
        return self


# ========== SYNTHETIC EEG ==========

class ComponentName(str, Enum):
    """ERP components modelled by the generator"""
    P300 = "P300"
    N700 = "N700"


class ErpTemplate(BaseModel):
    """Gaussian ERP bump with per-condition amplitude and a scalp topography"""
    model_config = ConfigDict(frozen=True)

    name: ComponentName
    peak_time: float = Field(..., description="Peak latency after onset, ms")
    width: float = Field(..., gt=0, description="Gaussian sigma, ms")
    amplitude: Dict[Condition, float] = Field(..., description="Signed µV amplitude per condition")
    topography: FloatArray = Field(..., description="Per-channel gain in [0, 1]")

    @model_validator(mode="after")
    def check_topography(self):
        if self.topography.shape != (N_CHANNELS,):
            raise ValueError(f"topography must have {N_CHANNELS} gains")
        if np.any(self.topography < 0) or np.any(self.topography > 1):
            raise ValueError("topography gains must lie in [0, 1]")
        if set(self.amplitude) != set(Condition):
            raise ValueError("an amplitude is required for every condition")
        return self

    def amplitude_for(self, condition: Condition) -> float:
        return self.amplitude[Condition(condition)]


class NoiseModel(BaseModel):
    """Background EEG stand-in: white plus 1/f noise"""
    model_config = ConfigDict(frozen=True)

    white_sigma: float = Field(..., ge=0, description="White noise sd, µV")
    pink_sigma: float = Field(..., ge=0, description="Pink noise sd, µV")
    seed: int = Field(..., description="Base noise seed")


class SubjectProfile(BaseModel):
    """One synthetic subject"""
    model_config = ConfigDict(frozen=True)

    p300: ErpTemplate
    n700: ErpTemplate
    noise: NoiseModel
    global_gain: float = Field(..., gt=0)

    @property
    def templates(self) -> Dict[ComponentName, ErpTemplate]:
        return {ComponentName.P300: self.p300, ComponentName.N700: self.n700}

    def check_component_ordering(self, montage: Montage = DEFAULT_MONTAGE) -> List[str]:
        """
        Check the template relations the generator is calibrated to reproduce

        Returns:
            List of problems (empty when the profile is consistent)
        """
        problems = []
        p300_peak_region = montage.regions[montage.channels[int(np.argmax(self.p300.topography))]]
        if p300_peak_region not in (Region.CENTRAL, Region.PARIETAL, Region.OCCIPITAL):
            problems.append(f"P300 topography peaks over {p300_peak_region.value}")
        n700_peak_region = montage.regions[montage.channels[int(np.argmax(self.n700.topography))]]
        if n700_peak_region != Region.FRONTAL:
            problems.append(f"N700 topography peaks over {n700_peak_region.value}")
        n700 = [abs(self.n700.amplitude_for(c)) for c in Condition]
        if not n700[2] > n700[1] > n700[0]:
            problems.append("N700 amplitude must grow from condition 1 to 3")
        if len({self.p300.amplitude_for(c) for c in Condition}) != 1:
            problems.append("P300 amplitude must be equal across conditions")
        if self.p300.amplitude_for(Condition.ERP_ONLY) < 0:
            problems.append("P300 must be positive")
        if any(self.n700.amplitude_for(c) > 0 for c in Condition):
            problems.append("N700 must be negative")
        return problems


# ========== DECODER ==========

class WindowSpec(BaseModel):
    """Feature window layout"""
    model_config = ConfigDict(frozen=True)

    start_ms: int = 0
    width_ms: int = 80
    n_windows: int = 10


class RldaModel(BaseModel):
    """Trained shrinkage LDA over spatio-temporal features"""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    weights: FloatArray
    bias: float
    shrinkage: float = Field(..., ge=0, le=1, alias="lambda")
    nu: float = Field(..., ge=0, description="Shrinkage target scale: mean pooled variance")
    target_mean: FloatArray
    nontarget_mean: FloatArray
    channel_order: Tuple[str, ...] = CHANNEL_LABELS
    window_spec: WindowSpec = Field(default_factory=WindowSpec)

    @model_validator(mode="after")
    def check_weights(self):
        if self.weights.ndim != 1:
            raise ValueError("weights must be a vector")
        if not np.all(np.isfinite(self.weights)) or not math.isfinite(self.bias):
            raise ValueError("weights and bias must be finite")
        if self.target_mean.shape != self.weights.shape or self.nontarget_mean.shape != self.weights.shape:
            raise ValueError("class means must match the weight dimension")
        return self

    @property
    def dimension(self) -> int:
        return int(self.weights.shape[0])


class ScoreBoard(BaseModel):
    """Cumulative classifier evidence per object"""
    model_config = ConfigDict(frozen=True)

    scores: Tuple[float, ...]
    counts: Tuple[int, ...]
    flashes_seen: int = 0

    @classmethod
    def empty(cls, n_objects: int = 36) -> "ScoreBoard":
        return cls(scores=(0.0,) * n_objects, counts=(0,) * n_objects, flashes_seen=0)


# ========== ANALYSIS ==========

class TestMethod(str, Enum):
    """Nonparametric tests"""
    __test__ = False

    KRUSKAL_WALLIS = "kruskal_wallis"
    WILCOXON_RANK_SUM = "wilcoxon_rank_sum"


class TestResult(BaseModel):
    """Outcome of a nonparametric test"""
    __test__ = False
    model_config = ConfigDict(frozen=True)

    statistic: float
    df: Optional[int] = None
    p_value: float = Field(..., ge=0, le=1)
    method: TestMethod


class ComponentWindow(BaseModel):
    """Inclusive post-stimulus analysis window of an ERP component"""
    model_config = ConfigDict(frozen=True)

    name: ComponentName
    start_ms: int
    end_ms: int

    @model_validator(mode="after")
    def check_span(self):
        if not 0 <= self.start_ms < self.end_ms <= 800:
            raise ValueError("component window must lie within [0, 800] ms")
        return self

    def column_slice(self, cfg: TimingConfig = DEFAULT_TIMING) -> slice:
        """Epoch columns covered by the window, clipped to the epoch's end"""
        start = ms_to_sample(self.start_ms, cfg)
        stop = (self.end_ms - cfg.epoch_start) * cfg.sample_rate // 1000 + 1
        return slice(start, min(stop, cfg.n_epoch_samples))


P300_WINDOW = ComponentWindow(name=ComponentName.P300, start_ms=200, end_ms=400)
N700_WINDOW = ComponentWindow(name=ComponentName.N700, start_ms=600, end_ms=800)
COMPONENT_WINDOWS = (P300_WINDOW, N700_WINDOW)


# ========== SMART HOME ==========

CHARSET = "ABCDEFGHIJKLMNOPQRSTUVWXYZ123456789_"


class SpellerMode(str, Enum):
    """Speller screens"""
    HOME = "home_speller"
    CHARACTER = "character_speller"


class Device(BaseModel):
    """One selectable object of the virtual home"""
    model_config = ConfigDict(frozen=True)

    object_id: int = Field(..., ge=0)
    room: int = Field(..., ge=0, le=3)
    label: str = Field(..., min_length=1, max_length=100)
    active: bool = False


class SpecialIds(BaseModel):
    """Objects that switch screens instead of toggling a device"""
    model_config = ConfigDict(frozen=True)

    to_char_speller: int = Field(..., ge=0)
    call_list: int = Field(..., ge=0)

    @model_validator(mode="after")
    def check_distinct(self):
        if self.to_char_speller == self.call_list:
            raise ValueError("special ids must be distinct")
        return self


class HomeState(BaseModel):
    """Application state driven by decoded selections"""
    model_config = ConfigDict(frozen=True)

    devices: Tuple[Device, ...]
    mode: SpellerMode = SpellerMode.HOME
    text_buffer: str = ""
    call_list: Tuple[str, ...] = ()
    special_ids: SpecialIds
    events: Tuple[str, ...] = ()
    pending_exit: bool = False

    @model_validator(mode="after")
    def check_state(self):
        if len(self.devices) != 36:
            raise ValueError(f"exactly 36 devices are required, got {len(self.devices)}")
        if [d.object_id for d in self.devices] != list(range(36)):
            raise ValueError("devices must be listed by object id 0..35")
        for special in (self.special_ids.to_char_speller, self.special_ids.call_list):
            if not 0 <= special < 36:
                raise ValueError(f"special id {special} out of range")
        if any(symbol not in CHARSET for symbol in self.text_buffer):
            raise ValueError("text_buffer may only contain speller symbols")
        return self


class DecodeStep(BaseModel):
    """One closed-loop selection"""
    model_config = ConfigDict(frozen=True)

    step: int
    condition: Condition
    intent: int
    selected: int
    correct: bool


# ========== EXPERIMENT CONFIG ==========

class ProfileOverrides(BaseModel):
    """Optional replacements for the calibrated subject profile"""
    model_config = ConfigDict(frozen=True)

    white_sigma: Optional[float] = Field(default=None, ge=0)
    pink_sigma: Optional[float] = Field(default=None, ge=0)
    p300_amplitude: Optional[float] = None
    n700_amplitudes: Optional[Dict[Condition, float]] = None
    global_gain: Optional[float] = Field(default=None, gt=0)
    gain_spread: Optional[float] = Field(default=None, ge=0)

    @field_validator("n700_amplitudes", mode="before")
    @classmethod
    def coerce_condition_keys(cls, value):
        # JSON object keys arrive as strings
        if isinstance(value, dict):
            return {int(k): v for k, v in value.items()}
        return value


class ExperimentConfig(BaseModel):
    """Full simulated experiment"""
    model_config = ConfigDict(frozen=True)

    n_subjects: int = Field(default=8, ge=1, description="Synthetic subjects")
    trials_per_phase: int = Field(default=20, ge=1, description="Trials in each of the training and testing phases")
    conditions: Tuple[Condition, ...] = Field(default=tuple(Condition), min_length=1)
    timing: TimingConfig = Field(default_factory=TimingConfig)
    profile: ProfileOverrides = Field(default_factory=ProfileOverrides)
    master_seed: int = Field(default=20190101)
    output_dir: str = Field(default="results", min_length=1)
    shrinkage: Optional[float] = Field(default=None, ge=0, le=1, description="Fixed lambda; analytic when absent")
    workers: int = Field(default=1, ge=1)

    @field_validator("conditions")
    @classmethod
    def check_conditions(cls, conditions):
        if len(set(conditions)) != len(conditions):
            raise ValueError("conditions must not repeat")
        return tuple(sorted(conditions))

import numpy as np
import pytest
from pydantic import ValidationError

from exceptions import SchedulingError, TimingRangeError
from models import (
    CHANNEL_LABELS,
    CHARSET,
    DEFAULT_MONTAGE,
    N700_WINDOW,
    P300_WINDOW,
    Condition,
    Epoch,
    ExperimentConfig,
    FlashSchedule,
    HomeState,
    Montage,
    ProfileOverrides,
    Region,
    RldaModel,
    SpecialIds,
    TestMethod,
    TestResult,
    TimingConfig,
    ms_to_sample,
    sample_to_ms,
)

FLAGS = frozenset({3, 8, 13, 18, 23, 28})


def test_montage_has_32_distinct_channels_in_region_blocks():
    assert len(DEFAULT_MONTAGE.channels) == 32
    assert len(set(DEFAULT_MONTAGE.channels)) == 32
    assert DEFAULT_MONTAGE.region_indices(Region.FRONTAL) == list(range(0, 8))
    assert DEFAULT_MONTAGE.region_indices(Region.OCCIPITAL) == list(range(24, 32))
    assert DEFAULT_MONTAGE.index("Cz") == 10
    assert "Fz" in DEFAULT_MONTAGE.region_channels(Region.FRONTAL)


def test_montage_rejects_duplicate_channels():
    channels = ("Fp1",) + CHANNEL_LABELS[1:-1] + ("Fp1",)
    with pytest.raises(ValidationError):
        Montage(channels=channels)


def test_montage_rejects_unknown_label():
    with pytest.raises(KeyError):
        DEFAULT_MONTAGE.index("A1")


def test_default_timing_derived_quantities(cfg):
    assert cfg.soa() == 185
    assert cfg.n_epoch_samples == 100
    assert cfg.n_baseline_samples == 20
    assert cfg.n_flashes_per_trial == 120
    assert cfg.target_flashes_per_sequence == 2


def test_timing_rejects_inconsistent_flash_counts():
    with pytest.raises(ValidationError):
        TimingConfig(flashes_per_sequence=11)
    with pytest.raises(ValidationError):
        TimingConfig(epoch_start=100)


@pytest.mark.parametrize("t, index", [(-200, 0), (0, 20), (600, 80), (795, 99), (-195, 0), (5, 20)])
def test_ms_to_sample_examples(cfg, t, index):
    assert ms_to_sample(t, cfg) == index


@pytest.mark.parametrize("t", [800, 801, -201])
def test_ms_to_sample_rejects_times_outside_epoch(cfg, t):
    with pytest.raises(TimingRangeError):
        ms_to_sample(t, cfg)


def test_sample_grid_round_trip(cfg):
    for t in range(-200, 800, 10):
        assert sample_to_ms(ms_to_sample(t, cfg), cfg) == t
    with pytest.raises(TimingRangeError):
        sample_to_ms(100, cfg)


def test_component_windows_cover_inclusive_columns(cfg):
    assert P300_WINDOW.column_slice(cfg) == slice(40, 61)
    assert N700_WINDOW.column_slice(cfg) == slice(80, 100)


def test_condition_labels():
    assert [int(c) for c in Condition] == [1, 2, 3]
    assert "object name" in Condition.ERP_PLUS_MEANINGFUL.label


def test_flash_schedule_rejects_adjacent_repeats():
    groups = [tuple(range(6 * g, 6 * g + 6)) for g in range(6)]
    flashes = tuple(group for group in groups for _ in range(2))
    with pytest.raises(SchedulingError, match="share objects"):
        FlashSchedule(flashes=flashes)


def test_flash_schedule_rejects_wrong_group_size():
    with pytest.raises(SchedulingError):
        FlashSchedule(flashes=((0, 1, 2),) * 12)


def test_epoch_requires_32_channels_and_flags():
    with pytest.raises(ValidationError):
        Epoch(samples=np.zeros((31, 100)), onset_time=0.0, object_flags=FLAGS, is_target=False,
              condition=Condition.ERP_ONLY, sequence_index=0, flash_index=0)
    with pytest.raises(ValidationError):
        Epoch(samples=np.zeros((32, 100)), onset_time=0.0, object_flags=set(), is_target=False,
              condition=Condition.ERP_ONLY, sequence_index=0, flash_index=0)


def test_epoch_requires_full_window_and_full_flash_group():
    with pytest.raises(ValidationError, match="32 x 100"):
        Epoch(samples=np.zeros((32, 37)), onset_time=0.0, object_flags=FLAGS, is_target=False,
              condition=Condition.ERP_ONLY, sequence_index=0, flash_index=0)
    with pytest.raises(ValidationError, match="6 objects"):
        Epoch(samples=np.zeros((32, 100)), onset_time=0.0, object_flags={3}, is_target=True,
              condition=Condition.ERP_ONLY, sequence_index=0, flash_index=0)
    short = Epoch(samples=np.zeros((32, 50)), onset_time=0.0, object_flags={3, 4}, is_target=True,
                  condition=Condition.ERP_ONLY, sequence_index=0, flash_index=0, n_samples=50, objects_per_flash=2)
    assert short.samples.shape == (32, 50)


def test_epoch_samples_are_read_only():
    epoch = Epoch(samples=np.zeros((32, 100)), onset_time=0.0, object_flags=FLAGS, is_target=True,
                  condition=Condition.ERP_ONLY, sequence_index=0, flash_index=0)
    assert not epoch.samples.flags.writeable
    with pytest.raises(ValueError):
        epoch.samples[0, 0] = 1.0


def test_rlda_model_uses_lambda_alias():
    model = RldaModel(weights=[1.0, -1.0], bias=0.5, shrinkage=0.25, nu=2.0,
                      target_mean=[1.0, 0.0], nontarget_mean=[0.0, 0.0])
    dumped = model.model_dump(by_alias=True)
    assert dumped["lambda"] == 0.25
    assert dumped["weights"] == [1.0, -1.0]
    assert RldaModel(**dumped).shrinkage == 0.25


def test_rlda_model_rejects_invalid_state():
    with pytest.raises(ValidationError):
        RldaModel(weights=[1.0], bias=0.0, shrinkage=1.5, nu=1.0, target_mean=[0.0], nontarget_mean=[0.0])
    with pytest.raises(ValidationError):
        RldaModel(weights=[np.nan], bias=0.0, shrinkage=0.5, nu=1.0, target_mean=[0.0], nontarget_mean=[0.0])
    with pytest.raises(ValidationError):
        RldaModel(weights=[1.0, 2.0], bias=0.0, shrinkage=0.5, nu=1.0, target_mean=[0.0], nontarget_mean=[0.0])


def test_test_result_bounds_p_value():
    with pytest.raises(ValidationError):
        TestResult(statistic=1.0, p_value=1.2, method=TestMethod.KRUSKAL_WALLIS)


def test_charset_has_36_distinct_symbols():
    assert len(CHARSET) == 36
    assert len(set(CHARSET)) == 36
    assert CHARSET[-1] == "_"


def test_special_ids_must_differ():
    with pytest.raises(ValidationError):
        SpecialIds(to_char_speller=34, call_list=34)


def test_home_state_rejects_foreign_symbols():
    from smarthome import initial_state, load_manifest
    from config import DEFAULT_MANIFEST

    state = initial_state(load_manifest(DEFAULT_MANIFEST))
    with pytest.raises(ValidationError):
        HomeState(**{**state.model_dump(), "text_buffer": "ab"})


def test_experiment_config_validation():
    with pytest.raises(ValidationError):
        ExperimentConfig(trials_per_phase=0)
    with pytest.raises(ValidationError):
        ExperimentConfig(conditions=(1, 1))
    config = ExperimentConfig(conditions=(3, 1))
    assert config.conditions == (Condition.ERP_ONLY, Condition.ERP_PLUS_MEANINGFUL)


def test_profile_overrides_accept_string_condition_keys():
    overrides = ProfileOverrides(n700_amplitudes={"1": -0.5, "3": -2.0})
    assert overrides.n700_amplitudes == {Condition.ERP_ONLY: -0.5, Condition.ERP_PLUS_MEANINGFUL: -2.0}

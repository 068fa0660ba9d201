import numpy as np
import pytest

from exceptions import DimensionMismatchError, EmptyInputError, TimingRangeError
from models import Condition
from paradigm import generate_schedule
from pipeline import (
    FEATURE_COLUMNS,
    N_FEATURES,
    baseline_correct,
    baseline_correct_array,
    cut_epoch,
    epoch_trial,
    extract_features,
    extract_features_array,
    features_frame,
    flash_epochs,
    trial_features,
    trials_frame,
)
from synthgen import EegStream, render_stream


GROUP = (4, 5, 6, 7, 8, 9)


def _ramp_stream(n_samples=400):
    data = np.zeros((32, n_samples))
    data[0] = np.arange(n_samples) * 10.0
    return EegStream(data=data)


def test_cut_epoch_at_first_legal_onset():
    stream = _ramp_stream()
    epoch = cut_epoch(stream, 200.0, objects=(1, 2, 3, 4, 5, 6), true_target=3)
    np.testing.assert_array_equal(epoch.samples, stream.data[:, 0:100])
    assert epoch.is_target
    assert epoch.onset_time == 200.0


def test_cut_epoch_follows_a_ramp():
    epoch = cut_epoch(_ramp_stream(), 1000.0, objects=GROUP)
    np.testing.assert_allclose(epoch.samples[0], 800 + 10 * np.arange(100))
    assert not epoch.is_target


def test_cut_epoch_floors_off_grid_onsets():
    epoch = cut_epoch(_ramp_stream(), 1005.0, objects=GROUP)
    assert epoch.samples[0, 0] == 800


@pytest.mark.parametrize("onset", [0.0, 199.0, 3300.0])
def test_cut_epoch_outside_stream_raises(onset):
    with pytest.raises(TimingRangeError):
        cut_epoch(_ramp_stream(), onset, objects=GROUP)


def test_baseline_of_constant_epoch_is_zero():
    epochs = np.full((3, 32, 100), 5.0)
    np.testing.assert_allclose(baseline_correct_array(epochs), 0.0)


def test_baseline_matches_loop_oracle(rng):
    epochs = rng.normal(size=(1000, 32, 100)) * 20
    corrected = baseline_correct_array(epochs)
    for n in range(0, 1000, 97):
        for c in range(32):
            expected = epochs[n, c] - sum(epochs[n, c, :20]) / 20
            np.testing.assert_allclose(corrected[n, c], expected, atol=1e-12)
    np.testing.assert_allclose(corrected[..., :20].mean(axis=-1), 0.0, atol=1e-12)


def test_baseline_is_idempotent(rng):
    once = baseline_correct_array(rng.normal(size=(10, 32, 100)))
    np.testing.assert_allclose(baseline_correct_array(once), once, atol=1e-12)


def test_baseline_correct_keeps_epoch_metadata():
    epoch = cut_epoch(_ramp_stream(), 1000.0, objects=GROUP, true_target=4, flash_index=3, trial_id=9)
    corrected = baseline_correct(epoch)
    assert corrected.samples[0, :20].mean() == pytest.approx(0.0, abs=1e-12)
    assert (corrected.flash_index, corrected.trial_id, corrected.is_target) == (3, 9, True)
    assert not corrected.samples.flags.writeable


def test_features_of_zero_epoch_are_zero():
    features = extract_features_array(np.zeros((32, 100)))
    assert features.shape == (N_FEATURES,)
    assert np.all(features == 0)


def test_features_are_channel_major():
    epoch = np.zeros((32, 100))
    epoch[3, 20:] = 2.0
    features = extract_features_array(epoch)
    np.testing.assert_array_equal(features[30:40], 2.0)
    assert np.count_nonzero(features) == 10


def test_features_match_loop_oracle(rng):
    epochs = rng.normal(size=(1000, 32, 100))
    features = extract_features_array(epochs)
    assert features.shape == (1000, 320)
    for n in range(0, 1000, 111):
        for c in range(32):
            for w in range(10):
                window = epochs[n, c, 20 + 8 * w:20 + 8 * (w + 1)]
                assert features[n, 10 * c + w] == pytest.approx(sum(window) / 8, abs=1e-12)


def test_features_are_linear(rng):
    a, b = rng.normal(size=(2, 32, 100))
    np.testing.assert_allclose(
        extract_features_array(2.0 * a - 3.0 * b),
        2.0 * extract_features_array(a) - 3.0 * extract_features_array(b),
        atol=1e-12,
    )


def test_features_reject_uneven_windows():
    with pytest.raises(DimensionMismatchError):
        extract_features_array(np.zeros((32, 95)))


def test_extract_features_carries_labels():
    epoch = baseline_correct(cut_epoch(_ramp_stream(), 1000.0, objects=GROUP, true_target=4, sequence_index=2))
    vector = extract_features(epoch)
    assert vector.values.shape == (320,)
    assert vector.is_target and vector.sequence_index == 2


def test_epoch_trial_marks_targets(quiet_profile, cfg):
    schedule = generate_schedule(8)
    stream = render_stream(schedule, Condition.ERP_ONLY, 17, quiet_profile, cfg)
    trial = epoch_trial(stream, schedule, Condition.ERP_ONLY, 17, trial_id=4, cfg=cfg)
    assert len(trial.epochs) == 120
    assert sum(e.is_target for e in trial.epochs) == 20
    assert trial.epochs[13].onset_time == 200 + 13 * 185
    assert (trial.epochs[13].sequence_index, trial.epochs[13].flash_index) == (1, 1)
    vectors = trial_features(trial, cfg)
    assert len(vectors) == 120
    assert sum(v.is_target for v in vectors) == 20
    np.testing.assert_allclose(
        np.stack([v.values for v in vectors]),
        extract_features_array(flash_epochs(stream, schedule, cfg)),
        atol=1e-12,
    )


def test_trials_frame_has_one_row_per_flash(quiet_profile, cfg):
    trials = []
    for trial_id, (seed, target) in enumerate([(2, 5), (3, 30)]):
        schedule = generate_schedule(seed)
        stream = render_stream(schedule, Condition.ERP_ONLY, target, quiet_profile, cfg)
        trials.append(epoch_trial(stream, schedule, Condition.ERP_ONLY, target, trial_id=trial_id, cfg=cfg))
    frame = trials_frame(trials, cfg)
    assert frame.shape == (240, 324)
    assert frame["trial_id"].tolist() == [0] * 120 + [1] * 120
    assert frame["is_target"].sum() == 40
    assert frame.loc[130, ["sequence", "flash"]].tolist() == [0, 10]
    with pytest.raises(EmptyInputError):
        trials_frame([], cfg)


def test_features_frame_layout(rng):
    frame = features_frame(rng.normal(size=(2, 320)), [0, 0], [0, 0], [0, 1], [True, False])
    assert list(frame.columns[:4]) == ["trial_id", "sequence", "flash", "is_target"]
    assert list(frame.columns[4:]) == FEATURE_COLUMNS
    assert frame["is_target"].tolist() == [1, 0]

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import signal

from experiment import measure_auc
from models import DEFAULT_MONTAGE, Condition, ProfileOverrides
from paradigm import generate_schedule, target_flash_indices
from synthgen import (
    EegStream,
    background_noise,
    default_profile,
    pink_noise,
    render_stream,
    scale_noise,
    stream_frame,
    stream_length,
    superimpose_erps,
    zero_noise,
    zero_templates,
)

CZ = DEFAULT_MONTAGE.index("Cz")
FZ = DEFAULT_MONTAGE.index("Fz")


def test_single_flash_peaks_at_p300_amplitude(quiet_profile, cfg):
    erp = superimpose_erps([0.0], Condition.ERP_ONLY, quiet_profile, 200, cfg)
    expected = (quiet_profile.p300.amplitude_for(Condition.ERP_ONLY)
                * quiet_profile.p300.topography[CZ] * quiet_profile.global_gain)
    assert erp[CZ, 30] == pytest.approx(expected, abs=1e-6)
    assert np.argmax(erp[CZ]) == 30


def test_n700_grows_with_condition_over_frontal_sites(quiet_profile, cfg):
    peaks = [superimpose_erps([0.0], c, quiet_profile, 200, cfg)[FZ, 70] for c in Condition]
    assert peaks[0] < 0
    assert peaks[2] < peaks[1] < peaks[0]


def test_zero_templates_and_zero_noise_give_a_silent_stream(profile, cfg):
    silent = zero_templates(zero_noise(profile))
    stream = render_stream(generate_schedule(1), Condition.ERP_PLUS_MEANINGFUL, 4, silent, cfg)
    assert np.all(stream.data == 0)


def test_erps_superimpose_linearly(quiet_profile, cfg):
    both = superimpose_erps([500.0, 685.0], Condition.ERP_PLUS_MEANINGLESS, quiet_profile, 300, cfg)
    first = superimpose_erps([500.0], Condition.ERP_PLUS_MEANINGLESS, quiet_profile, 300, cfg)
    second = superimpose_erps([685.0], Condition.ERP_PLUS_MEANINGLESS, quiet_profile, 300, cfg)
    np.testing.assert_allclose(both, first + second, atol=1e-9)


def test_stream_covers_the_last_epoch(quiet_profile, cfg):
    schedule = generate_schedule(2)
    stream = render_stream(schedule, Condition.ERP_ONLY, 0, quiet_profile, cfg)
    assert stream.n_samples == stream_length(schedule, cfg) == 2302
    assert stream.lead_in_ms == 200
    assert stream.onset_in_stream(0.0) == 200


def test_noise_free_stream_matches_target_onsets(quiet_profile, cfg):
    schedule = generate_schedule(2)
    stream = render_stream(schedule, Condition.ERP_ONLY, 9, quiet_profile, cfg)
    onsets = [200.0 + k * 185 for k in target_flash_indices(schedule, 9)]
    expected = superimpose_erps(onsets, Condition.ERP_ONLY, quiet_profile, stream.n_samples, cfg)
    np.testing.assert_array_equal(stream.data, expected)


def test_stream_requires_32_rows():
    with pytest.raises(ValidationError):
        EegStream(data=np.zeros((8, 10)))


def test_stream_frame_columns(quiet_profile, cfg):
    stream = render_stream(generate_schedule(2), Condition.ERP_ONLY, 0, quiet_profile, cfg)
    frame = stream_frame(stream)
    assert list(frame.columns) == ["time_ms"] + list(DEFAULT_MONTAGE.channels)
    assert frame["time_ms"].iloc[1] == 10.0


def test_profile_is_deterministic_per_seed():
    a, b = default_profile(3), default_profile(3)
    assert a.global_gain == b.global_gain
    assert a.noise == b.noise
    np.testing.assert_array_equal(a.p300.topography, b.p300.topography)
    assert a.n700.amplitude == b.n700.amplitude
    assert default_profile(4).global_gain != a.global_gain


def test_calibrated_profile_component_relations():
    profile = default_profile(0)
    assert profile.check_component_ordering() == []
    assert zero_templates(profile).check_component_ordering() != []
    flipped = default_profile(0, ProfileOverrides(n700_amplitudes={1: -3.0}))
    assert "N700 amplitude must grow from condition 1 to 3" in flipped.check_component_ordering()


def test_background_noise_is_seeded(profile):
    a = background_noise(profile.noise, 500, seed=1)
    np.testing.assert_array_equal(a, background_noise(profile.noise, 500, seed=1))
    assert not np.array_equal(a, background_noise(profile.noise, 500, seed=2))


def test_pink_noise_has_one_over_f_spectrum():
    noise = pink_noise(1, 20_000, np.random.default_rng(0))[0]
    freqs, power = signal.welch(noise, fs=100, nperseg=1024)
    band = (freqs >= 1) & (freqs <= 40)
    slope = np.polyfit(np.log(freqs[band]), np.log(power[band]), 1)[0]
    assert -1.5 <= slope <= -0.5


@pytest.mark.slow
def test_noise_only_epochs_average_to_zero(profile, cfg):
    silent = zero_templates(profile)
    schedule = generate_schedule(1)
    epochs = []
    for seed in range(5000):
        stream = render_stream(schedule, Condition.ERP_ONLY, 0, silent, cfg, noise_seed=seed)
        start = int((200 + 60 * 185 - 200) / 10)
        epochs.append(stream.data[:, start:start + 100])
    stack = np.stack(epochs)
    z = stack.mean(axis=0) / (stack.std(axis=0, ddof=1) / np.sqrt(stack.shape[0]))
    assert np.mean(np.abs(z) > 3) < 0.01


def test_condition_one_auc_is_near_calibration(profile):
    auc = measure_auc(profile, Condition.ERP_ONLY, seed=3)
    assert 0.65 <= auc <= 0.85


def test_doubling_noise_lowers_auc(profile):
    base = measure_auc(profile, Condition.ERP_ONLY, n_test=17, seed=5)
    doubled = measure_auc(scale_noise(profile, 2.0), Condition.ERP_ONLY, n_test=17, seed=5)
    assert doubled < base

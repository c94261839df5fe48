import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from meetmuse.audio import (
    FULL_SCALE,
    MUSIC_RATE,
    SPEECH_RATE,
    apply_gain,
    array_to_pcm,
    equal_power_gains,
    gain_for_peak,
    linear_fade_in,
    linear_fade_out,
    ms_to_samples,
    pcm_to_array,
    peak_dbfs,
    read_wav,
    wav_bytes,
    write_wav,
)


def test_pcm_round_trip():
    samples = np.array([0, 1, -1, 32767, -32768], dtype="<i2")
    assert np.array_equal(pcm_to_array(array_to_pcm(samples)), samples)


def test_ms_to_samples():
    assert ms_to_samples(1000, SPEECH_RATE) == 16000
    assert ms_to_samples(250, MUSIC_RATE) == 8000


def test_wav_file_round_trip(tmp_path):
    samples = (np.sin(np.linspace(0, 20, 4096)) * 12000).astype("<i2")
    path = tmp_path / "t.wav"
    write_wav(path, samples, MUSIC_RATE)
    back, rate = read_wav(str(path))
    assert rate == MUSIC_RATE
    assert np.array_equal(back, samples)


def test_wav_bytes_header_sane():
    data = wav_bytes(np.zeros(100, dtype="<i2"), SPEECH_RATE)
    assert data[:4] == b"RIFF" and data[8:12] == b"WAVE"


def test_peak_dbfs_reference_points():
    assert peak_dbfs(np.array([32767], dtype="<i2")) == pytest.approx(0.0, abs=1e-3)
    assert peak_dbfs(np.array([16384], dtype="<i2")) == pytest.approx(-6.02, abs=0.01)
    assert peak_dbfs(np.zeros(16, dtype="<i2")) == float("-inf")


def test_gain_brings_peak_to_target():
    samples = (np.array([0.5, -0.25, 0.1]) * FULL_SCALE).astype("<i2")
    gained = apply_gain(samples, gain_for_peak(samples, -12.0))
    assert peak_dbfs(gained) == pytest.approx(-12.0, abs=0.01)


def test_apply_gain_clips_instead_of_wrapping():
    samples = np.array([32000, -32000], dtype="<i2")
    gained = apply_gain(samples, 4.0)
    assert gained.tolist() == [32767, -32768]


@given(st.integers(min_value=1, max_value=4096))
def test_equal_power_gains_sum_of_squares_is_one(n):
    fade_in, fade_out = equal_power_gains(n)
    assert fade_in.shape == fade_out.shape == (n,)
    assert np.allclose(fade_in**2 + fade_out**2, 1.0, atol=1e-12)


def test_equal_power_gains_are_monotonic():
    fade_in, fade_out = equal_power_gains(512)
    assert np.all(np.diff(fade_in) > 0)
    assert np.all(np.diff(fade_out) < 0)


def test_linear_fades_taper_edges():
    samples = np.full(100, 10000, dtype="<i2")
    faded_in = linear_fade_in(samples, 10)
    faded_out = linear_fade_out(samples, 10)
    assert abs(int(faded_in[0])) < 1500 and faded_in[-1] == 10000
    assert faded_out[0] == 10000 and abs(int(faded_out[-1])) < 1500
    assert np.array_equal(faded_in[10:], samples[10:])

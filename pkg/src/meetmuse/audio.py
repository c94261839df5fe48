"""PCM utilities shared by ingestion, synthesis, and rendering.

All audio in the service is mono 16-bit linear PCM: speech at 16 kHz on the
way in, music at 32 kHz on the way out.  Sample counts are derived from
integer milliseconds so rendered lengths are exact at these rates.
"""

from __future__ import annotations

import io
import math
import wave

import numpy as np

SPEECH_RATE = 16000
MUSIC_RATE = 32000
SAMPLE_WIDTH = 2  # bytes, int16
FULL_SCALE = 32767.0


def ms_to_samples(duration_ms: int, rate: int) -> int:
    return round(duration_ms * rate / 1000)


def pcm_to_array(pcm: bytes) -> np.ndarray:
    """Raw little-endian int16 bytes to a numpy array."""
    if len(pcm) % SAMPLE_WIDTH:
        raise ValueError(f"PCM byte count {len(pcm)} is not a whole number of samples")
    return np.frombuffer(pcm, dtype="<i2")


def array_to_pcm(samples: np.ndarray) -> bytes:
    return np.asarray(samples, dtype="<i2").tobytes()


def wav_bytes(samples: np.ndarray, rate: int) -> bytes:
    """Encode mono int16 samples as a WAV container."""
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(SAMPLE_WIDTH)
        wf.setframerate(rate)
        wf.writeframes(array_to_pcm(samples))
    return buf.getvalue()


def write_wav(path, samples: np.ndarray, rate: int) -> None:
    with open(path, "wb") as fh:
        fh.write(wav_bytes(samples, rate))


def read_wav(source) -> tuple[np.ndarray, int]:
    """Decode a mono or multi-channel 16-bit WAV; multi-channel is downmixed.

    ``source`` may be a path or raw WAV bytes.
    """
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(bytes(source))
    with wave.open(source, "rb") as wf:
        if wf.getsampwidth() != SAMPLE_WIDTH:
            raise ValueError(f"expected 16-bit WAV, got {8 * wf.getsampwidth()}-bit")
        rate = wf.getframerate()
        channels = wf.getnchannels()
        raw = wf.readframes(wf.getnframes())
    samples = np.frombuffer(raw, dtype="<i2")
    if channels > 1:
        samples = samples.reshape(-1, channels).mean(axis=1).round().astype("<i2")
    return samples, rate


def peak_dbfs(samples: np.ndarray) -> float:
    """Peak level in dBFS relative to int16 full scale; -inf for silence."""
    peak = int(np.max(np.abs(samples.astype(np.int32)))) if samples.size else 0
    if peak == 0:
        return float("-inf")
    return 20.0 * math.log10(peak / FULL_SCALE)


def gain_for_peak(samples: np.ndarray, target_dbfs: float) -> float:
    """Linear gain that brings the peak to ``target_dbfs``; 1.0 for silence."""
    current = peak_dbfs(samples)
    if current == float("-inf"):
        return 1.0
    return 10.0 ** ((target_dbfs - current) / 20.0)


def apply_gain(samples: np.ndarray, gain: float) -> np.ndarray:
    scaled = np.rint(samples.astype(np.float64) * gain)
    return np.clip(scaled, -32768, 32767).astype("<i2")


def equal_power_gains(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Quarter-sine fade-in and fade-out gain curves of ``n`` samples.

    At every point ``fade_in**2 + fade_out**2 == 1``, so two uncorrelated
    sources crossfaded with these curves keep constant power.
    """
    x = (np.arange(n) + 0.5) / n if n else np.zeros(0)
    return np.sin(0.5 * math.pi * x), np.cos(0.5 * math.pi * x)


def linear_fade_in(samples: np.ndarray, n: int) -> np.ndarray:
    """Apply a linear fade-in over the first ``n`` samples (copy)."""
    out = samples.astype(np.float64)
    n = min(n, out.size)
    if n > 0:
        out[:n] *= (np.arange(n) + 1) / n
    return np.rint(out).astype("<i2")


def linear_fade_out(samples: np.ndarray, n: int) -> np.ndarray:
    """Apply a linear fade-out over the last ``n`` samples (copy)."""
    out = samples.astype(np.float64)
    n = min(n, out.size)
    if n > 0:
        out[-n:] *= (np.arange(n)[::-1] + 1) / n
    return np.rint(out).astype("<i2")

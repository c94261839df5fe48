"""Deterministic mock providers for tests and replay runs.

Each mock is a pure function of its input digest (plus the seed for music),
so replaying a session reproduces every stage byte-for-byte without network
access.  Scripted lookup tables, keyed by input digest, let tests pin exact
outputs; unscripted inputs fall back to a deterministic generator.

All mocks share the failure-injection knob ``failures_remaining``: while
positive, calls raise ProviderError and decrement, which exercises the retry
path.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

from ..audio import MUSIC_RATE
from ..ingest import TranscriptFragment
from .base import ProviderError


def digest_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


class MockTranscriptionProvider:
    """Returns scripted fragments keyed by the audio buffer's digest."""

    provider_id = "mock-transcription"

    def __init__(
        self,
        scripted: dict[str, list[TranscriptFragment]] | None = None,
        failures_remaining: int = 0,
    ):
        self.scripted = scripted or {}
        self.failures_remaining = failures_remaining
        self.calls = 0

    def transcribe(self, audio: bytes, sample_rate: int) -> list[TranscriptFragment]:
        self.calls += 1
        if self.failures_remaining > 0:
            self.failures_remaining -= 1
            raise ProviderError("injected transcription failure")
        return list(self.scripted.get(digest_hex(audio), []))


_TEMPOS = ("a slow", "a relaxed", "a moderate", "an easygoing", "a gentle")
_STYLES = ("ambient", "jazz", "acoustic folk", "lo-fi", "classical", "bossa nova")
_INSTRUMENTS = (
    "soft piano", "warm guitar", "muted trumpet", "upright bass",
    "string quartet", "electric piano", "accordion", "vibraphone",
)


class MockDescriptionProvider:
    """Deterministic music descriptions, scripted by prompt digest."""

    provider_id = "mock-description"

    def __init__(self, scripted: dict[str, str] | None = None, failures_remaining: int = 0):
        self.scripted = scripted or {}
        self.failures_remaining = failures_remaining
        self.calls = 0

    def complete(self, prompt: str) -> str:
        self.calls += 1
        if self.failures_remaining > 0:
            self.failures_remaining -= 1
            raise ProviderError("injected description failure")
        key = digest_hex(prompt)
        if key in self.scripted:
            return self.scripted[key]
        d = int(key[:16], 16)
        tempo_bpm = 60 + d % 61
        tempo = _TEMPOS[d % len(_TEMPOS)]
        style = _STYLES[(d >> 8) % len(_STYLES)]
        lead = _INSTRUMENTS[(d >> 16) % len(_INSTRUMENTS)]
        backing = _INSTRUMENTS[(d >> 24) % len(_INSTRUMENTS)]
        if backing == lead:
            backing = _INSTRUMENTS[((d >> 24) + 1) % len(_INSTRUMENTS)]
        return (
            f"Background {style} music at {tempo} tempo around {tempo_bpm} BPM, "
            f"led by {lead} with {backing} underneath, unobtrusive and steady."
        )


# Mock music contract: the clip is a four-chord progression whose root pitch
# is 220 Hz + (description digest mod 220) Hz; the seed rotates the
# progression.  Chord ratios are I-IV-V-I over the root, the root voice
# loudest so it dominates the spectrum.
_CHORD_RATIOS = (1.0, 4.0 / 3.0, 3.0 / 2.0, 1.0)


def mock_root_hz(description: str) -> float:
    """Root pitch the mock derives from a description's digest."""
    return 220.0 + int(digest_hex(description)[:16], 16) % 220


class MockMusicProvider:
    """Synthesizes a deterministic chord-progression clip from the digest."""

    provider_id = "mock-music"

    def __init__(self, failures_remaining: int = 0):
        self.failures_remaining = failures_remaining
        self.calls = 0

    def render(self, description: str, duration_s: float, seed: int) -> np.ndarray:
        self.calls += 1
        if self.failures_remaining > 0:
            self.failures_remaining -= 1
            raise ProviderError("injected synthesis failure")
        root = mock_root_hz(description)
        total = round(duration_s * MUSIC_RATE)
        chord_len = total // len(_CHORD_RATIOS)
        rotation = seed % len(_CHORD_RATIOS)
        out = np.zeros(total, dtype=np.float64)
        for i in range(len(_CHORD_RATIOS)):
            ratio = _CHORD_RATIOS[(i + rotation) % len(_CHORD_RATIOS)]
            start = i * chord_len
            end = total if i == len(_CHORD_RATIOS) - 1 else (i + 1) * chord_len
            t = np.arange(end - start) / MUSIC_RATE
            base = root * ratio
            chord = (
                1.0 * np.sin(2 * math.pi * base * t)
                + 0.5 * np.sin(2 * math.pi * base * 1.25 * t)
                + 0.6 * np.sin(2 * math.pi * base * 1.5 * t)
            )
            # 10 ms attack/release per chord keeps the joins click-free
            edge = min(round(0.01 * MUSIC_RATE), chord.size // 2)
            if edge > 0:
                ramp = np.linspace(0.0, 1.0, edge)
                chord[:edge] *= ramp
                chord[-edge:] *= ramp[::-1]
            out[start:end] = chord
        peak = np.max(np.abs(out)) or 1.0
        return np.rint(out / peak * 0.5 * 32767).astype("<i2")

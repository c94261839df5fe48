"""Clip synthesis, loudness normalization, and gapless loop assembly.

A clip is identified by the digest of (description text, provider id, seed),
so identical inputs hit the on-disk cache instead of the provider.  Loop
assembly tiles the clip on an exact grid over the playback window: interior
loop joins get an equal-power crossfade (the outgoing tail blended with the
incoming head just before each boundary) and the final, possibly partial,
loop is faded out.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Callable

import numpy as np

from .audio import (
    MUSIC_RATE,
    apply_gain,
    equal_power_gains,
    gain_for_peak,
    ms_to_samples,
    peak_dbfs,
    read_wav,
    write_wav,
)
from .config import SessionConfig
from .describe import MusicDescription
from .timeline import PlaybackSegment, expand_loops_ms

if TYPE_CHECKING:
    from .providers.base import MusicProvider, RetryPolicy

DEFAULT_PEAK_DBFS = -12.0


class SynthesisError(Exception):
    """Music synthesis failed after retries (``synthesis_failed``)."""


class LoopContractError(ValueError):
    """Clip duration does not match the configured clip duration."""


@dataclass(frozen=True)
class MusicClip:
    """A short synthesized clip: mono int16 samples at 32 kHz."""

    clip_id: str
    samples: np.ndarray
    sample_rate: int
    description_text: str
    provider_id: str
    seed: int

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class LoopedStream:
    """A clip expanded to cover one playback segment exactly."""

    segment: PlaybackSegment
    samples: np.ndarray
    sample_rate: int

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


def clip_id_for(description_text: str, provider_id: str, seed: int) -> str:
    payload = f"{description_text}\n{provider_id}\n{seed}".encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


class ClipCache:
    """Content-addressed on-disk clip store: ``<id>.wav`` plus ``<id>.json``.

    ``get_or_create`` is single-flight per clip id: concurrent identical
    requests coalesce into one provider call.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._guard = threading.Lock()
        self._in_flight: dict[str, threading.Lock] = {}

    def _wav_path(self, clip_id: str) -> Path:
        return self.root / f"{clip_id}.wav"

    def _meta_path(self, clip_id: str) -> Path:
        return self.root / f"{clip_id}.json"

    def get(self, clip_id: str) -> MusicClip | None:
        wav_path = self._wav_path(clip_id)
        meta_path = self._meta_path(clip_id)
        if not (wav_path.exists() and meta_path.exists()):
            return None
        samples, rate = read_wav(str(wav_path))
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        return MusicClip(
            clip_id=clip_id,
            samples=samples,
            sample_rate=rate,
            description_text=meta["description"],
            provider_id=meta["provider"],
            seed=meta["seed"],
        )

    def put(self, clip: MusicClip) -> None:
        write_wav(self._wav_path(clip.clip_id), clip.samples, clip.sample_rate)
        meta = {
            "description": clip.description_text,
            "provider": clip.provider_id,
            "seed": clip.seed,
            "created": time.time(),
        }
        self._meta_path(clip.clip_id).write_text(
            json.dumps(meta, ensure_ascii=False), encoding="utf-8"
        )

    def get_or_create(self, clip_id: str, factory: Callable[[], MusicClip]) -> MusicClip:
        with self._guard:
            lock = self._in_flight.setdefault(clip_id, threading.Lock())
        with lock:
            cached = self.get(clip_id)
            if cached is not None:
                return cached
            clip = factory()
            self.put(clip)
            return clip


def normalize_loudness(clip: MusicClip, target_peak_dbfs: float = DEFAULT_PEAK_DBFS) -> MusicClip:
    """Scale the clip so its peak sits at ``target_peak_dbfs``.

    Silent clips come back unchanged; a clip already at target keeps its
    samples bit-identical.
    """
    if peak_dbfs(clip.samples) == float("-inf"):
        return clip
    gain = gain_for_peak(clip.samples, target_peak_dbfs)
    if gain == 1.0:
        return clip
    return MusicClip(
        clip_id=clip.clip_id,
        samples=apply_gain(clip.samples, gain),
        sample_rate=clip.sample_rate,
        description_text=clip.description_text,
        provider_id=clip.provider_id,
        seed=clip.seed,
    )


def generate_clip(
    description: MusicDescription,
    provider: "MusicProvider",
    seed: int,
    cfg: SessionConfig,
    cache: ClipCache | None = None,
    target_peak_dbfs: float = DEFAULT_PEAK_DBFS,
    retry: "RetryPolicy | None" = None,
    sleep: Callable[[float], None] = lambda s: None,
) -> MusicClip:
    """Synthesize (or fetch from cache) the clip for a description.

    The returned clip is exactly ``cfg.clip_duration`` long (padded or
    trimmed within one sample) and normalized to the target peak.
    """
    from .providers.base import ProviderError, RetryPolicy, call_with_retries

    clip_id = clip_id_for(description.text, provider.provider_id, seed)

    def factory() -> MusicClip:
        try:
            samples = call_with_retries(
                lambda: provider.render(description.text, cfg.clip_duration, seed),
                retry or RetryPolicy(),
                sleep,
            )
        except ProviderError as exc:
            raise SynthesisError(str(exc)) from exc
        samples = _fit_length(np.asarray(samples, dtype="<i2"), cfg.clip_ms)
        clip = MusicClip(
            clip_id=clip_id,
            samples=samples,
            sample_rate=MUSIC_RATE,
            description_text=description.text,
            provider_id=provider.provider_id,
            seed=seed,
        )
        return normalize_loudness(clip, target_peak_dbfs)

    if cache is None:
        return factory()
    return cache.get_or_create(clip_id, factory)


def _fit_length(samples: np.ndarray, duration_ms: int) -> np.ndarray:
    want = ms_to_samples(duration_ms, MUSIC_RATE)
    if len(samples) > want:
        return samples[:want]
    if len(samples) < want:
        return np.concatenate([samples, np.zeros(want - len(samples), dtype="<i2")])
    return samples


def assemble_loop(clip: MusicClip, segment: PlaybackSegment, cfg: SessionConfig) -> LoopedStream:
    """Expand a clip into a stream covering the segment window exactly.

    The clip is tiled ``loop_count`` times on the clip grid; in the
    ``crossfade_ms`` before each interior boundary the outgoing loop's tail
    is blended equal-power with the incoming loop's head, and the stream ends
    with a fade-out of ``min(crossfade, remaining)``.  Total length matches
    the segment window within one sample.
    """
    if abs(clip.duration_s - cfg.clip_duration) * clip.sample_rate > 1:
        raise LoopContractError(
            f"clip duration {clip.duration_s}s does not match configured "
            f"{cfg.clip_duration}s"
        )
    rate = clip.sample_rate
    loop_count, _final_ms = expand_loops_ms(segment.length_ms, cfg)
    total = ms_to_samples(segment.length_ms, rate)
    clip_n = len(clip.samples)
    final_n = total - (loop_count - 1) * clip_n

    out = np.zeros(total, dtype=np.float64)
    source = clip.samples.astype(np.float64)
    for i in range(loop_count):
        start = i * clip_n
        n = final_n if i == loop_count - 1 else clip_n
        out[start : start + n] = source[:n]

    xf = min(ms_to_samples(cfg.crossfade_ms, rate), clip_n)
    if xf > 0:
        fade_in, fade_out = equal_power_gains(xf)
        head = source[:xf]
        for i in range(1, loop_count):
            boundary = i * clip_n
            tail = out[boundary - xf : boundary]
            out[boundary - xf : boundary] = tail * fade_out + head * fade_in
        tail_fade = min(xf, final_n)
        if tail_fade > 0:
            _, fade_out_tail = equal_power_gains(tail_fade)
            out[total - tail_fade :] *= fade_out_tail

    rendered = np.clip(np.rint(out), -32768, 32767).astype("<i2")
    return LoopedStream(segment=segment, samples=rendered, sample_rate=rate)

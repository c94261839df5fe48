import dataclasses
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meetmuse.audio import MUSIC_RATE, peak_dbfs
from meetmuse.config import SessionConfig
from meetmuse.describe import MusicDescription
from meetmuse.providers import MockMusicProvider, mock_root_hz
from meetmuse.synth import (
    ClipCache,
    LoopContractError,
    MusicClip,
    SynthesisError,
    assemble_loop,
    clip_id_for,
    generate_clip,
    normalize_loudness,
)
from meetmuse.timeline import PlaybackSegment, expand_loops_ms


def description(text: str = "calm piano over soft strings") -> MusicDescription:
    return MusicDescription(source_chunk=0, text=text, created_at=180.0)


def clip_of(samples: np.ndarray, clip_id: str = "c1") -> MusicClip:
    return MusicClip(clip_id, samples.astype("<i2"), MUSIC_RATE, "d", "p", 0)


def segment(start_ms: int, end_ms: int, cfg: SessionConfig) -> PlaybackSegment:
    loops, final = expand_loops_ms(end_ms - start_ms, cfg)
    return PlaybackSegment(0, start_ms, end_ms, 0, loops, final != cfg.clip_ms)


class TestClipId:
    def test_stable_across_calls(self):
        assert clip_id_for("text", "mock-music", 5) == clip_id_for("text", "mock-music", 5)

    def test_distinct_per_component(self):
        base = clip_id_for("text", "mock-music", 5)
        assert clip_id_for("other", "mock-music", 5) != base
        assert clip_id_for("text", "http-music", 5) != base
        assert clip_id_for("text", "mock-music", 6) != base

    def test_field_swap_does_not_collide(self):
        # the joiner must keep (a, bc) distinct from (ab, c)
        assert clip_id_for("a", "bc", 0) != clip_id_for("ab", "c", 0)


class TestGenerateClip:
    def test_exact_length_and_target_peak(self, cfg):
        clip = generate_clip(description(), MockMusicProvider(), seed=3, cfg=cfg)
        assert len(clip.samples) == round(cfg.clip_duration * MUSIC_RATE)
        assert clip.sample_rate == MUSIC_RATE
        assert abs(peak_dbfs(clip.samples) - (-12.0)) < 0.1

    def test_clip_id_matches_inputs(self, cfg):
        provider = MockMusicProvider()
        clip = generate_clip(description(), provider, seed=9, cfg=cfg)
        assert clip.clip_id == clip_id_for(description().text, provider.provider_id, 9)
        assert clip.seed == 9

    def test_cache_hit_skips_provider(self, cfg, tmp_path):
        cache = ClipCache(tmp_path / "clips")
        provider = MockMusicProvider()
        first = generate_clip(description(), provider, seed=1, cfg=cfg, cache=cache)
        second = generate_clip(description(), provider, seed=1, cfg=cfg, cache=cache)
        assert provider.calls == 1
        assert np.array_equal(first.samples, second.samples)
        assert first.clip_id == second.clip_id

    def test_cache_round_trips_metadata(self, cfg, tmp_path):
        cache = ClipCache(tmp_path / "clips")
        created = generate_clip(description(), MockMusicProvider(), seed=2, cfg=cfg, cache=cache)
        loaded = cache.get(created.clip_id)
        assert loaded is not None
        assert loaded.description_text == description().text
        assert loaded.provider_id == "mock-music"
        assert loaded.seed == 2
        assert np.array_equal(loaded.samples, created.samples)

    def test_concurrent_identical_requests_coalesce(self, cfg, tmp_path):
        cache = ClipCache(tmp_path / "clips")
        provider = MockMusicProvider()
        results = []

        def work():
            results.append(
                generate_clip(description(), provider, seed=4, cfg=cfg, cache=cache)
            )

        threads = [threading.Thread(target=work) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert provider.calls == 1
        assert len({clip.clip_id for clip in results}) == 1

    def test_provider_failure_after_retries_raises(self, cfg):
        provider = MockMusicProvider(failures_remaining=99)
        with pytest.raises(SynthesisError):
            generate_clip(description(), provider, seed=0, cfg=cfg)
        assert provider.calls == 3

    def test_dominant_pitch_tracks_description_digest(self, cfg):
        # seed 4 keeps the root chord first, so the opening quarter is the
        # root triad with the root voice loudest
        text = "slow warm jazz with upright bass"
        clip = generate_clip(description(text), MockMusicProvider(), seed=4, cfg=cfg)
        quarter = clip.samples[: len(clip.samples) // 4].astype(np.float64)
        spectrum = np.abs(np.fft.rfft(quarter * np.hanning(len(quarter))))
        peak_hz = np.fft.rfftfreq(len(quarter), 1 / MUSIC_RATE)[int(np.argmax(spectrum))]
        assert abs(peak_hz - mock_root_hz(text)) < 2.0


class TestNormalizeLoudness:
    def test_minus_six_clip_raised_to_minus_twelve(self):
        # -6.02 dBFS peak is 16384; -12 dBFS is 32768/4 scaled by 10^(-12/20)
        samples = np.zeros(1000, dtype=np.int16)
        samples[500] = 16384
        out = normalize_loudness(clip_of(samples))
        assert abs(peak_dbfs(out.samples) - (-12.0)) < 0.01

    def test_idempotent_within_tolerance(self):
        samples = (np.sin(np.linspace(0, 20, 4000)) * 20000).astype(np.int16)
        once = normalize_loudness(clip_of(samples))
        twice = normalize_loudness(once)
        assert np.array_equal(once.samples, twice.samples)

    def test_silence_unchanged(self):
        silent = clip_of(np.zeros(100, dtype=np.int16))
        assert normalize_loudness(silent) is silent


class TestAssembleLoop:
    def test_zero_crossfade_is_exact_tiling(self, cfg):
        cfg0 = dataclasses.replace(cfg, crossfade_ms=0)
        clip = generate_clip(description(), MockMusicProvider(), seed=0, cfg=cfg0)
        seg = segment(360_000, 540_000, cfg0)
        stream = assemble_loop(clip, seg, cfg0)
        assert np.array_equal(stream.samples, np.tile(clip.samples, 18))

    def test_full_window_is_eighteen_loops(self, cfg):
        clip = generate_clip(description(), MockMusicProvider(), seed=0, cfg=cfg)
        seg = segment(360_000, 540_000, cfg)
        stream = assemble_loop(clip, seg, cfg)
        assert seg.loop_count == 18 and not seg.truncated
        assert len(stream.samples) == 180 * MUSIC_RATE

    def test_truncated_final_window_is_twelve_loops(self, cfg):
        clip = generate_clip(description(), MockMusicProvider(), seed=0, cfg=cfg)
        seg = segment(1_080_000, 1_200_000, cfg)
        stream = assemble_loop(clip, seg, cfg)
        assert seg.loop_count == 12
        assert len(stream.samples) == 120 * MUSIC_RATE

    def test_partial_final_loop(self, cfg):
        # 15s window at 10s clips: one full loop plus a 5s partial
        clip = generate_clip(description(), MockMusicProvider(), seed=0, cfg=cfg)
        seg = segment(0, 15_000, cfg)
        assert (seg.loop_count, seg.truncated) == (2, True)
        stream = assemble_loop(clip, seg, cfg)
        assert len(stream.samples) == 15 * MUSIC_RATE

    def test_interior_loops_preserve_clip_grid(self, cfg):
        clip = generate_clip(description(), MockMusicProvider(), seed=0, cfg=cfg)
        stream = assemble_loop(clip, segment(0, 30_000, cfg), cfg)
        clip_n = len(clip.samples)
        xf_n = round(cfg.crossfade_ms / 1000 * MUSIC_RATE)
        # outside each crossfade region the loops are bit-identical copies
        mid = stream.samples[clip_n : 2 * clip_n - xf_n]
        assert np.array_equal(mid, clip.samples[: clip_n - xf_n])

    def test_stream_ends_faded_out(self, cfg):
        clip = generate_clip(description(), MockMusicProvider(), seed=0, cfg=cfg)
        stream = assemble_loop(clip, segment(0, 20_000, cfg), cfg)
        tail = np.abs(stream.samples[-16:].astype(np.int64))
        assert tail.max() < np.abs(clip.samples).max() // 8

    def test_wrong_length_clip_rejected(self, cfg):
        short = clip_of(np.ones(MUSIC_RATE, dtype=np.int16))  # 1s vs configured 10s
        with pytest.raises(LoopContractError):
            assemble_loop(short, segment(0, 20_000, cfg), cfg)

    @settings(max_examples=60, deadline=None)
    @given(
        window_s=st.integers(min_value=1, max_value=240),
        crossfade_ms=st.integers(min_value=0, max_value=2000),
    )
    def test_length_always_matches_window(self, window_s, crossfade_ms):
        cfg = SessionConfig(crossfade_ms=crossfade_ms)
        clip = clip_of(np.full(10 * MUSIC_RATE, 1000, dtype=np.int16))
        seg = segment(0, window_s * 1000, cfg)
        stream = assemble_loop(clip, seg, cfg)
        assert abs(len(stream.samples) - window_s * MUSIC_RATE) <= 1

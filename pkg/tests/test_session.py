import dataclasses
import json
import time

import pytest

from meetmuse import events as ev
from meetmuse.clock import RealClock, StageTimings
from meetmuse.config import ConfigError, ServiceConfig, SessionConfig
from meetmuse.describe import NEUTRAL_DESCRIPTION
from meetmuse.events import audibility_problems, read_jsonl
from meetmuse.ingest import AudioFrame
from meetmuse.protocol import MusicSegmentMessage, NowPlaying, SessionEnded
from meetmuse.providers import (
    MockDescriptionProvider,
    MockMusicProvider,
    MockTranscriptionProvider,
    providers_for,
)
from meetmuse.session import (
    ROLES,
    SessionManager,
    SessionRunner,
    derive_seed,
)
from meetmuse.synth import ClipCache

from conftest import make_runner


class PushRecorder:
    def __init__(self):
        self.messages: list[tuple[str, object]] = []

    def __call__(self, role, message):
        self.messages.append((role, message))

    def of_type(self, kind, role=None):
        return [
            m
            for r, m in self.messages
            if isinstance(m, kind) and (role is None or r == role)
        ]


def events_of(runner: SessionRunner, kind: str):
    return [e for e in runner.log.events if e.kind == kind]


def run_full(runner: SessionRunner) -> SessionRunner:
    runner.start()
    runner.run()
    return runner


class TestCompletedSession:
    def test_segments_start_on_the_lagged_grid(self, service_cfg, tmp_path, scripted_transcripts):
        runner = run_full(make_runner(service_cfg, tmp_path, scripted=scripted_transcripts))
        starts = events_of(runner, ev.SEGMENT_STARTED)
        assert [e.t_ms for e in starts] == [360_000, 540_000, 720_000, 900_000, 1_080_000]
        assert [e.payload["source_chunk"] for e in starts] == [0, 1, 2, 3, 4]
        assert runner.segments_started == 5 and runner.fallbacks == 0
        assert runner.end_reason == "completed"
        assert audibility_problems(runner.log.events, service_cfg.session) == []

    def test_segment_metadata(self, service_cfg, tmp_path, scripted_transcripts):
        runner = run_full(make_runner(service_cfg, tmp_path, scripted=scripted_transcripts))
        first, *_, last = events_of(runner, ev.SEGMENT_STARTED)
        assert first.payload["loop_count"] == 18 and not first.payload["truncated"]
        assert (first.payload["window_start_s"], first.payload["window_end_s"]) == (360.0, 540.0)
        assert last.payload["loop_count"] == 12 and last.payload["truncated"]
        assert (last.payload["window_start_s"], last.payload["window_end_s"]) == (1080.0, 1200.0)
        assert first.payload["description"]
        assert first.payload["ready_at_s"] <= 360.0

    def test_session_ended_event_summarizes(self, service_cfg, tmp_path, scripted_transcripts):
        runner = run_full(make_runner(service_cfg, tmp_path, scripted=scripted_transcripts))
        ended = events_of(runner, ev.SESSION_ENDED)
        assert len(ended) == 1
        assert ended[0].t_ms == 1_200_000
        assert ended[0].payload == {"reason": "completed", "segments_started": 5, "fallbacks": 0}

    def test_playback_messages_fan_out(self, service_cfg, tmp_path, scripted_transcripts):
        push = PushRecorder()
        runner = run_full(
            make_runner(service_cfg, tmp_path, push=push, scripted=scripted_transcripts)
        )
        assert runner.ended
        for role in ROLES:
            assert len(push.of_type(NowPlaying, role)) == 5
            assert len(push.of_type(MusicSegmentMessage, role)) == 5
            assert len(push.of_type(SessionEnded, role)) == 1
        wavs = push.of_type(MusicSegmentMessage, "interviewer")
        assert all(m.wav.startswith(b"RIFF") for m in wavs)
        assert all(m.offset_s == 0.0 for m in wavs)

    def test_non_source_chunks_still_transcribed(self, service_cfg, tmp_path, scripted_transcripts):
        runner = run_full(make_runner(service_cfg, tmp_path, scripted=scripted_transcripts))
        done = events_of(runner, ev.TRANSCRIPTION_DONE)
        assert [e.payload["chunk_index"] for e in done] == list(range(7))
        descriptions = events_of(runner, ev.DESCRIPTION_DONE)
        assert [e.payload["chunk_index"] for e in descriptions] == list(range(5))


class TestFallbacks:
    def test_slow_synthesis_misses_deadline(self, service_cfg, tmp_path, scripted_transcripts):
        runner = make_runner(
            service_cfg,
            tmp_path,
            timings=StageTimings(synthesize_s={2: 370.0}),
            scripted=scripted_transcripts,
        )
        run_full(runner)
        fallbacks = events_of(runner, ev.FALLBACK_APPLIED)
        assert len(fallbacks) == 1
        payload = fallbacks[0].payload
        assert payload["segment_index"] == 2
        assert payload["reason"] == "deadline_missed"
        starts = events_of(runner, ev.SEGMENT_STARTED)
        previous_clip = next(
            e.payload["clip_id"] for e in starts if e.payload["segment_index"] == 1
        )
        assert payload["extends_clip_id"] == previous_clip
        assert runner.segments_started == 4 and runner.fallbacks == 1
        assert audibility_problems(runner.log.events, service_cfg.session) == []

    def test_synthesis_failure_on_first_chunk_means_silence(
        self, service_cfg, tmp_path, scripted_transcripts
    ):
        push = PushRecorder()
        providers = (
            MockTranscriptionProvider(),
            MockDescriptionProvider(),
            MockMusicProvider(failures_remaining=3),
        )
        runner = make_runner(
            service_cfg, tmp_path, push=push, providers=providers, scripted=scripted_transcripts
        )
        run_full(runner)
        assert [e.payload["chunk_index"] for e in events_of(runner, ev.SYNTHESIS_FAILED)] == [0]
        fallback = events_of(runner, ev.FALLBACK_APPLIED)[0]
        assert fallback.payload["segment_index"] == 0
        assert fallback.payload["reason"] == "synthesis_failed"
        assert fallback.payload["extends_clip_id"] is None
        # silence plays: now_playing announced, but no clip message yet
        first_now = push.of_type(NowPlaying)[0]
        assert first_now.fallback and first_now.description is None
        segments = push.of_type(MusicSegmentMessage, "interviewee")
        assert {m.segment_index for m in segments} == {1, 2, 3, 4}
        assert audibility_problems(runner.log.events, service_cfg.session) == []

    def test_description_failure_applies_fallback(self, service_cfg, tmp_path, scripted_transcripts):
        providers = (
            MockTranscriptionProvider(),
            MockDescriptionProvider(failures_remaining=3),
            MockMusicProvider(),
        )
        runner = make_runner(
            service_cfg, tmp_path, providers=providers, scripted=scripted_transcripts
        )
        run_full(runner)
        assert [e.payload["chunk_index"] for e in events_of(runner, ev.DESCRIPTION_FAILED)] == [0]
        fallback = events_of(runner, ev.FALLBACK_APPLIED)[0]
        assert fallback.payload["reason"] == "description_failed"
        assert audibility_problems(runner.log.events, service_cfg.session) == []

    def test_transcription_failure_degrades_to_neutral_music(self, service_cfg, tmp_path):
        providers = (
            MockTranscriptionProvider(failures_remaining=3),
            MockDescriptionProvider(),
            MockMusicProvider(),
        )
        runner = make_runner(service_cfg, tmp_path, providers=providers)
        runner.start()
        assert runner.post_frame(AudioFrame("interviewee", 10.0, b"\x01\x00" * 480)).accepted
        runner.run()
        failed = events_of(runner, ev.TRANSCRIPTION_FAILED)
        assert [e.payload["chunk_index"] for e in failed] == [0]
        first_segment = events_of(runner, ev.SEGMENT_STARTED)[0]
        assert first_segment.payload["description"] == NEUTRAL_DESCRIPTION
        assert runner.fallbacks == 0


class TestEmptySession:
    def test_silence_in_still_yields_five_neutral_segments(self, service_cfg, tmp_path):
        runner = run_full(make_runner(service_cfg, tmp_path))
        starts = events_of(runner, ev.SEGMENT_STARTED)
        assert len(starts) == 5
        assert all(e.payload["description"] == NEUTRAL_DESCRIPTION for e in starts)
        # same text, different per-chunk seeds: five distinct clips
        assert len({e.payload["clip_id"] for e in starts}) == 5
        assert [e.payload["transcript"] for e in events_of(runner, ev.TRANSCRIPTION_DONE)] == [
            ""
        ] * 7


class TestAbortAndResume:
    def test_abort_mid_session(self, service_cfg, tmp_path, scripted_transcripts):
        push = PushRecorder()
        runner = make_runner(service_cfg, tmp_path, push=push, scripted=scripted_transcripts)
        runner.start()
        runner.run(until_s=400.0)
        runner.abort()
        assert runner.ended and runner.end_reason == "aborted"
        assert runner.ended_at_ms == 400_000
        assert runner.segments_started == 1
        assert runner.piece_count() == 1
        ended_events = events_of(runner, ev.SESSION_ENDED)
        assert len(ended_events) == 1 and ended_events[0].payload["reason"] == "aborted"
        ends = push.of_type(SessionEnded)
        assert len(ends) == 2 and all(m.segment_count == 1 for m in ends)

    def test_abort_is_idempotent(self, service_cfg, tmp_path):
        runner = make_runner(service_cfg, tmp_path)
        runner.start()
        runner.run(until_s=10.0)
        runner.abort()
        runner.abort()
        assert len(events_of(runner, ev.SESSION_ENDED)) == 1

    def test_run_after_abort_is_a_no_op(self, service_cfg, tmp_path):
        runner = make_runner(service_cfg, tmp_path)
        runner.start()
        runner.run(until_s=10.0)
        runner.abort()
        before = len(runner.log.events)
        runner.run()
        assert len(runner.log.events) == before

    def test_resume_mid_segment_redelivers_with_offset(
        self, service_cfg, tmp_path, scripted_transcripts
    ):
        push = PushRecorder()
        runner = make_runner(service_cfg, tmp_path, push=push, scripted=scripted_transcripts)
        runner.start()
        runner.run(until_s=400.0)
        push.messages.clear()
        runner.resume("interviewer")
        nows = push.of_type(NowPlaying)
        segments = push.of_type(MusicSegmentMessage)
        assert [r for r, _ in push.messages] == ["interviewer", "interviewer"]
        assert len(nows) == 1 and nows[0].segment_index == 0
        assert len(segments) == 1 and segments[0].offset_s == 40.0

    def test_resume_before_music_window_sends_nothing(self, service_cfg, tmp_path):
        push = PushRecorder()
        runner = make_runner(service_cfg, tmp_path, push=push)
        runner.start()
        runner.run(until_s=100.0)
        push.messages.clear()
        runner.resume("interviewee")
        assert push.messages == []

    def test_post_frame_after_end_rejected(self, service_cfg, tmp_path):
        runner = run_full(make_runner(service_cfg, tmp_path))
        result = runner.post_frame(AudioFrame("interviewee", 10.0, b"\x01\x00"))
        assert not result.accepted and result.reason == "session_over"


class TestVolume:
    def test_volume_gating_and_event(self, service_cfg, tmp_path):
        runner = make_runner(service_cfg, tmp_path)
        assert not runner.set_volume("interviewee", 50)  # not started
        runner.start()
        runner.run(until_s=30.0)
        assert runner.set_volume("interviewee", 50)
        assert not runner.set_volume("interviewee", 101)
        assert not runner.set_volume("interviewee", -1)
        runner.run()
        assert not runner.set_volume("interviewee", 10)  # ended
        changed = events_of(runner, ev.VOLUME_CHANGED)
        assert len(changed) == 1
        assert changed[0].payload == {"role": "interviewee", "volume": 50}


class TestAudibleRoles:
    def test_clip_only_reaches_audible_roles(self, service_cfg, tmp_path, scripted_transcripts):
        cfg = dataclasses.replace(service_cfg, audible_roles=("interviewee",))
        push = PushRecorder()
        runner = run_full(make_runner(cfg, tmp_path, push=push, scripted=scripted_transcripts))
        assert runner.ended
        assert len(push.of_type(NowPlaying, "interviewer")) == 5
        assert push.of_type(MusicSegmentMessage, "interviewer") == []
        assert len(push.of_type(MusicSegmentMessage, "interviewee")) == 5


class TestStateAndSeeds:
    def test_state_transitions(self, service_cfg, tmp_path):
        runner = make_runner(service_cfg, tmp_path)
        assert runner.state() == "waiting"
        runner.start()
        assert runner.state() == "active"
        runner.run()
        assert runner.state() == "ended"

    def test_session_state_message(self, service_cfg, tmp_path):
        runner = make_runner(service_cfg, tmp_path)
        runner.start()
        runner.run(until_s=100.0)
        state = runner.session_state_message(("interviewer",))
        assert state.state == "active"
        assert state.session_time_s == 100.0
        assert state.segment_count == 5
        assert state.config == service_cfg.session.to_dict()

    def test_derive_seed_is_stable_and_spread(self):
        assert derive_seed("s-abc", 0) == derive_seed("s-abc", 0)
        assert 0 <= derive_seed("s-abc", 0) < 2**32
        seeds = {derive_seed("s-abc", k) for k in range(5)}
        assert len(seeds) == 5
        assert derive_seed("s-abc", 0) != derive_seed("s-xyz", 0)


class TestLogDeterminism:
    def test_same_script_same_log_modulo_header_timestamp(
        self, service_cfg, tmp_path, scripted_transcripts
    ):
        def one_run(cache_name: str) -> str:
            runner = SessionRunner(
                "fixed-session",
                service_cfg,
                MockTranscriptionProvider(),
                MockDescriptionProvider(),
                MockMusicProvider(),
                cache=ClipCache(tmp_path / cache_name),
                scripted_transcripts=scripted_transcripts,
            )
            runner.start()
            runner.run()
            return runner.log.to_jsonl()

        first, second = one_run("cache-a"), one_run("cache-b")
        head_a, *events_a = first.splitlines()
        head_b, *events_b = second.splitlines()
        assert events_a == events_b
        ha, hb = json.loads(head_a), json.loads(head_b)
        ha.pop("created_at"), hb.pop("created_at")
        assert ha == hb

    def test_shared_cache_does_not_change_the_log(self, service_cfg, tmp_path, scripted_transcripts):
        def one_run() -> str:
            runner = SessionRunner(
                "fixed-session",
                service_cfg,
                MockTranscriptionProvider(),
                MockDescriptionProvider(),
                MockMusicProvider(),
                cache=ClipCache(tmp_path / "shared-cache"),
                scripted_transcripts=scripted_transcripts,
            )
            runner.start()
            runner.run()
            return runner.log.to_jsonl()

        first, second = one_run(), one_run()  # second run hits the cache
        assert first.splitlines()[1:] == second.splitlines()[1:]


class TestSessionManager:
    def test_join_flow_and_survey(self, service_cfg, tmp_path):
        manager = SessionManager(service_cfg, providers_for)
        handle = manager.create_session()
        assert set(handle.tokens) == set(ROLES)
        assert manager.join("bogus-token") is None

        got, role = manager.join(handle.tokens["interviewer"])
        assert got is handle and role == "interviewer"
        assert not handle.runner.started  # one participant is not enough

        manager.join(handle.tokens["interviewee"])
        assert handle.runner.started
        handle.runner.run()

        ok, violations = manager.submit_survey(
            handle.session_id,
            "interviewee",
            {
                "per_piece": [
                    {"segment_index": i, "relax": 5, "concentrate": 5, "like": 5}
                    for i in range(5)
                ],
                "volume_rating": 7,
                "transition_comfort": 6,
            },
        )
        assert ok and violations == []
        assert "interviewee" in handle.survey_store.latest()
        submitted = [e for e in handle.runner.log.events if e.kind == ev.SURVEY_SUBMITTED]
        assert len(submitted) == 1 and submitted[0].t_ms == 1_200_000

    def test_survey_rejected_while_running(self, service_cfg):
        manager = SessionManager(service_cfg, providers_for)
        handle = manager.create_session(persist=False)
        for token in handle.tokens.values():
            manager.join(token)
        ok, violations = manager.submit_survey(handle.session_id, "interviewee", {})
        assert not ok and violations == ["session has not ended"]

    def test_invalid_survey_not_stored(self, service_cfg):
        manager = SessionManager(service_cfg, providers_for)
        handle = manager.create_session(persist=False)
        for token in handle.tokens.values():
            manager.join(token)
        handle.runner.run()
        ok, violations = manager.submit_survey(
            handle.session_id, "interviewee", {"per_piece": [], "volume_rating": 5}
        )
        assert not ok and violations
        assert handle.survey_store.latest() == {}

    def test_persisted_log_and_survey_files(self, service_cfg):
        manager = SessionManager(service_cfg, providers_for)
        handle = manager.create_session()
        for token in handle.tokens.values():
            manager.join(token)
        handle.runner.run()
        exported = manager.export_session_log(handle.session_id)
        assert exported is not None
        header, events = read_jsonl(exported)
        assert header["session_id"] == handle.session_id
        assert events[-1].kind == ev.SESSION_ENDED
        log_path = handle.log_file.name
        handle.log_file.flush()
        on_disk = open(log_path, encoding="utf-8").read()
        assert on_disk == exported
        assert manager.export_session_log("nope") is None

    def test_config_override_rejected_with_violations(self, service_cfg):
        manager = SessionManager(service_cfg, providers_for)
        with pytest.raises(ConfigError) as err:
            manager.create_session(session_overrides={"chunk_duration": -5})
        assert any("chunk_duration" in v for v in err.value.violations)
        with pytest.raises(ConfigError):
            manager.create_session(session_overrides={"tempo": 120})

    def test_override_changes_schedule(self, service_cfg):
        manager = SessionManager(service_cfg, providers_for)
        handle = manager.create_session(
            session_overrides={"session_limit": 900.0}, persist=False
        )
        assert len(handle.runner.schedule) == 3


class TestRealClock:
    def test_short_real_session_plays_one_segment(self, tmp_path):
        session = SessionConfig(
            chunk_duration=0.3,
            clip_duration=0.2,
            lag_chunks=2,
            session_limit=0.9,
            crossfade_ms=20,
        )
        cfg = ServiceConfig.from_dict(
            {
                "session": session.to_dict(),
                "clock": "real",
                "cache_dir": str(tmp_path / "cache"),
                "log_dir": str(tmp_path / "logs"),
            }
        )
        push = PushRecorder()
        runner = SessionRunner(
            "real-smoke",
            cfg,
            MockTranscriptionProvider(),
            MockDescriptionProvider(),
            MockMusicProvider(),
            clock=RealClock(),
            cache=ClipCache(tmp_path / "real-cache"),
            push=push,
            scripted_transcripts={0: "a quick chat", 1: "", 2: ""},
        )
        runner.start()
        began = time.monotonic()
        runner.run()
        elapsed = time.monotonic() - began
        assert 0.85 <= elapsed < 5.0
        assert runner.ended and runner.end_reason == "completed"
        starts = events_of(runner, ev.SEGMENT_STARTED)
        assert len(starts) == 1 and runner.fallbacks == 0
        assert abs(starts[0].t_ms - 600) <= 50  # fired at the scheduled instant
        assert len(push.of_type(MusicSegmentMessage, "interviewee")) == 1
        assert audibility_problems(runner.log.events, session) == []

"""Offline replay: drive a timed transcript through the full pipeline.

Reads a tab-separated transcript (``start_s<TAB>end_s<TAB>speaker<TAB>text``),
assigns each line to the chunk containing its start time, and runs the whole
session under the virtual clock, producing a deterministic timeline report
and, optionally, the session's complete rendered audio track and event log.
The same input and seed always produce a byte-identical report.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import MUSIC_RATE, ms_to_samples, write_wav
from .config import ConfigError, ServiceConfig, to_ms
from .events import FALLBACK_APPLIED, SEGMENT_STARTED
from .ingest import TranscriptFragment, assemble_transcript
from .providers import providers_for
from .session import ROLE_INTERVIEWEE, SessionRunner
from .synth import ClipCache, MusicClip, assemble_loop
from .timeline import chunk_count


class TranscriptParseError(ValueError):
    """A transcript line that does not parse; carries its line number."""

    def __init__(self, line_number: int, reason: str):
        super().__init__(f"line {line_number}: {reason}")
        self.line_number = line_number


def parse_transcript_file(text: str) -> list[TranscriptFragment]:
    """Parse TSV transcript lines; blank lines and #-comments are skipped."""
    fragments = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise TranscriptParseError(
                number, f"expected 4 tab-separated fields, got {len(parts)}"
            )
        start_raw, end_raw, speaker, content = parts
        try:
            start_s = float(start_raw)
            end_s = float(end_raw)
        except ValueError:
            raise TranscriptParseError(
                number, f"times must be numeric, got {start_raw!r} and {end_raw!r}"
            ) from None
        if start_s < 0 or end_s < start_s:
            raise TranscriptParseError(
                number, f"need 0 <= start <= end, got [{start_s}, {end_s}]"
            )
        if not speaker.strip():
            raise TranscriptParseError(number, "empty speaker field")
        fragments.append(TranscriptFragment(content, start_s, end_s, speaker.strip()))
    return fragments


def transcripts_by_chunk(
    fragments: list[TranscriptFragment],
    cfg: ServiceConfig,
    speaker: str = ROLE_INTERVIEWEE,
) -> dict[int, str]:
    """Per-chunk transcripts: each line goes to the chunk owning its start.

    Lines from other speakers and lines starting at or past the session limit
    are dropped, mirroring live ingestion.
    """
    session = cfg.session
    grouped: dict[int, list[TranscriptFragment]] = {}
    for fragment in fragments:
        start_ms = to_ms(fragment.start_s)
        if start_ms < 0 or start_ms >= session.limit_ms:
            continue
        if fragment.speaker != speaker:
            continue
        grouped.setdefault(start_ms // session.chunk_ms, []).append(fragment)
    return {
        k: assemble_transcript(parts, speaker)
        for k, parts in grouped.items()
    }


@dataclass
class ReplayResult:
    runner: SessionRunner
    report: dict


def run_replay(
    input_path: str | Path,
    cfg: ServiceConfig,
    seed: int = 0,
    cache_dir: str | Path | None = None,
    speaker: str = ROLE_INTERVIEWEE,
) -> ReplayResult:
    """Run the whole session under the virtual clock and build its report."""
    cfg.validate()
    fragments = parse_transcript_file(Path(input_path).read_text(encoding="utf-8"))
    scripted = transcripts_by_chunk(fragments, cfg, speaker)
    transcription, description, music = providers_for(cfg)
    session_id = f"replay-seed{seed}"
    runner = SessionRunner(
        session_id,
        cfg,
        transcription,
        description,
        music,
        cache=ClipCache(cache_dir if cache_dir is not None else cfg.cache_dir),
        scripted_transcripts=scripted,
    )
    runner.start()
    runner.run()
    return ReplayResult(runner=runner, report=build_report(runner, seed))


def build_report(runner: SessionRunner, seed: int) -> dict:
    """Deterministic timeline report: no wall-clock fields, stable key order."""
    session = runner.session
    chunks = []
    finalized = runner.ingest.finalized_chunks
    for k in range(chunk_count(session)):
        chunk = finalized[k]
        chunks.append(
            {
                "index": k,
                "window_start_s": chunk.start_s,
                "window_end_s": chunk.end_s,
                "transcript": chunk.transcript,
            }
        )

    descriptions = []
    for k in sorted(finalized):
        outcome = runner.outcome_for(k)
        if outcome is None or outcome.description is None:
            continue
        descriptions.append(
            {
                "source_chunk": k,
                "text": outcome.description.text,
                "neutral_fallback": not finalized[k].transcript.strip(),
            }
        )

    by_segment: dict[int, dict] = {}
    for event in runner.log.events:
        if event.kind in (SEGMENT_STARTED, FALLBACK_APPLIED):
            by_segment[event.payload["segment_index"]] = event.payload

    segments = []
    for segment in runner.schedule:
        payload = by_segment.get(segment.segment_index, {})
        fallback = "clip_id" not in payload
        segments.append(
            {
                "segment_index": segment.segment_index,
                "window_start_s": segment.start_s,
                "window_end_s": segment.end_s,
                "source_chunk": segment.source_chunk,
                "loop_count": segment.loop_count,
                "truncated": segment.truncated,
                "fallback": fallback,
                "clip_id": payload.get("clip_id") or payload.get("extends_clip_id"),
                "description": payload.get("description"),
            }
        )

    return {
        "session": {
            "id": runner.session_id,
            "seed": seed,
            "config": session.to_dict(),
            "providers": runner.cfg.providers.to_dict(),
        },
        "chunks": chunks,
        "descriptions": descriptions,
        "segments": segments,
        "summary": {
            "chunk_count": len(chunks),
            "segment_count": len(segments),
            "segments_started": runner.segments_started,
            "fallbacks": runner.fallbacks,
            "first_music_s": runner.schedule[0].start_s if runner.schedule else None,
            "clip_ids": [s["clip_id"] for s in segments],
        },
    }


def report_json(report: dict) -> str:
    return json.dumps(report, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def render_session_audio(runner: SessionRunner) -> np.ndarray:
    """The full session track: leading silence, then each segment's loops.

    A fallback segment renders the clip it extends (silence when there is
    none).  Each audible stretch gets a short linear fade at both edges so
    segment joins land softly.  Total length is the session limit within one
    sample.
    """
    session = runner.session
    total = ms_to_samples(session.limit_ms, MUSIC_RATE)
    out = np.zeros(total, dtype="<i2")
    fade_n = max(0, round(runner.cfg.segment_fade_s * MUSIC_RATE))

    previous_clip: MusicClip | None = None
    for segment in runner.schedule:
        outcome = runner.outcome_for(segment.source_chunk)
        ready = (
            outcome is not None
            and outcome.ok
            and outcome.ready_at_ms <= segment.start_ms
        )
        clip = outcome.clip if ready and outcome is not None else previous_clip
        if clip is not None:
            stream = assemble_loop(clip, segment, session)
            samples = stream.samples.astype(np.float64)
            edge = min(fade_n, len(samples) // 2)
            if edge > 0:
                ramp = np.linspace(0.0, 1.0, edge, endpoint=False)
                samples[:edge] *= ramp
                samples[-edge:] *= ramp[::-1]
            start = ms_to_samples(segment.start_ms, MUSIC_RATE)
            end = min(start + len(samples), total)
            out[start:end] = np.clip(
                np.rint(samples[: end - start]), -32768, 32767
            ).astype("<i2")
        previous_clip = clip
    return out


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="meetmuse-replay",
        description="Replay a timed transcript through the music pipeline.",
    )
    parser.add_argument("--input", required=True, help="TSV transcript file")
    parser.add_argument("--config", help="JSON service config file")
    parser.add_argument("--seed", type=int, default=0, help="synthesis seed")
    parser.add_argument("--render", metavar="OUT.WAV", help="write the full session audio")
    parser.add_argument("--report", metavar="OUT.JSON", help="write the report here instead of stdout")
    parser.add_argument("--log", metavar="OUT.JSONL", help="write the session event log")
    parser.add_argument(
        "--live",
        action="store_true",
        help="use live description/music providers (keys via environment)",
    )
    parser.add_argument(
        "--speaker",
        default=ROLE_INTERVIEWEE,
        help="which speaker's lines feed the pipeline (default: interviewee)",
    )
    args = parser.parse_args(argv)

    try:
        cfg = ServiceConfig.from_file(args.config) if args.config else ServiceConfig()
        if args.live:
            providers = type(cfg.providers)(
                transcription=cfg.providers.transcription,
                description="live",
                music="live",
            )
            cfg = type(cfg).from_dict({**cfg.to_dict(), "providers": providers.to_dict()})
        result = run_replay(args.input, cfg, seed=args.seed, speaker=args.speaker)
    except (ConfigError, TranscriptParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    text = report_json(result.report)
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.log:
        result.runner.log.write_jsonl(args.log)
    if args.render:
        write_wav(args.render, render_session_audio(result.runner), MUSIC_RATE)
    return 0


if __name__ == "__main__":
    sys.exit(main())

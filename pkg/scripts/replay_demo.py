#!/usr/bin/env python3
"""Replay the bundled 20-minute interview and write every artifact.

Produces out/report.json (timeline report), out/session.jsonl (event log),
and out/session.wav (the full rendered session audio) using mock providers,
then prints the playback schedule.
"""

from pathlib import Path
import sys

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from meetmuse.audio import MUSIC_RATE, write_wav
from meetmuse.config import ServiceConfig
from meetmuse.replay import render_session_audio, report_json, run_replay

ROOT = Path(__file__).resolve().parents[1]
OUT = ROOT / "out"


def main() -> int:
    OUT.mkdir(exist_ok=True)
    cfg = ServiceConfig.from_dict(
        {"cache_dir": str(OUT / "clip-cache"), "log_dir": str(OUT / "logs")}
    )
    result = run_replay(ROOT / "data" / "interview_20min.tsv", cfg, seed=0)

    (OUT / "report.json").write_text(report_json(result.report), encoding="utf-8")
    result.runner.log.write_jsonl(OUT / "session.jsonl")
    write_wav(OUT / "session.wav", render_session_audio(result.runner), MUSIC_RATE)

    print(f"report : {OUT / 'report.json'}")
    print(f"log    : {OUT / 'session.jsonl'}")
    print(f"audio  : {OUT / 'session.wav'}")
    print()
    for segment in result.report["segments"]:
        mark = "fallback" if segment["fallback"] else segment["clip_id"][:12]
        print(
            f"segment {segment['segment_index']}  "
            f"[{segment['window_start_s']:6.0f}s, {segment['window_end_s']:6.0f}s)  "
            f"chunk {segment['source_chunk']}  x{segment['loop_count']} loops  {mark}"
        )
        if segment["description"]:
            print(f"          {segment['description'][:100]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""End-of-session survey instrument and its validation.

Participants rate each played piece on three 1-9 scales (relaxation,
concentration, liking) and the session overall on two 1-10 scales (volume,
transition comfort).  Validation returns every violation, not just the first,
and a response must carry exactly one entry per playback segment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

PIECE_SCALE = (1, 9)
SESSION_SCALE = (1, 10)


@dataclass(frozen=True)
class PieceRating:
    segment_index: int
    relax: int
    concentrate: int
    like: int


@dataclass(frozen=True)
class SurveyResponse:
    per_piece: tuple[PieceRating, ...]
    volume_rating: int
    transition_comfort: int

    def to_dict(self) -> dict:
        return {
            "per_piece": [
                {
                    "segment_index": p.segment_index,
                    "relax": p.relax,
                    "concentrate": p.concentrate,
                    "like": p.like,
                }
                for p in self.per_piece
            ],
            "volume_rating": self.volume_rating,
            "transition_comfort": self.transition_comfort,
        }


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _check_scale(violations: list[str], label: str, value, lo: int, hi: int) -> None:
    if not _is_int(value):
        violations.append(f"{label} must be an integer, got {value!r}")
    elif not lo <= value <= hi:
        violations.append(f"{label} out of range {lo}-{hi}: {value}")


def validate_survey(payload: dict, segment_count: int) -> list[str]:
    """All violations in a raw survey payload; empty list means acceptable."""
    violations: list[str] = []
    if not isinstance(payload, dict):
        return ["survey payload must be an object"]
    pieces = payload.get("per_piece")
    if not isinstance(pieces, list):
        violations.append("per_piece must be a list")
        pieces = []
    if isinstance(pieces, list) and len(pieces) != segment_count:
        violations.append(f"per_piece has {len(pieces)} entries, session played {segment_count}")
    seen: list[int] = []
    for i, piece in enumerate(pieces):
        if not isinstance(piece, dict):
            violations.append(f"per_piece[{i}] must be an object")
            continue
        index = piece.get("segment_index")
        if not _is_int(index):
            violations.append(f"per_piece[{i}].segment_index must be an integer")
        else:
            seen.append(index)
        lo, hi = PIECE_SCALE
        _check_scale(violations, f"per_piece[{i}].relax", piece.get("relax"), lo, hi)
        _check_scale(violations, f"per_piece[{i}].concentrate", piece.get("concentrate"), lo, hi)
        _check_scale(violations, f"per_piece[{i}].like", piece.get("like"), lo, hi)
    if len(pieces) == segment_count and sorted(seen) != list(range(segment_count)):
        violations.append(
            f"per_piece segment indexes {sorted(seen)} must cover 0..{segment_count - 1} exactly"
        )
    lo, hi = SESSION_SCALE
    _check_scale(violations, "volume_rating", payload.get("volume_rating"), lo, hi)
    _check_scale(violations, "transition_comfort", payload.get("transition_comfort"), lo, hi)
    return violations


def parse_survey(payload: dict) -> SurveyResponse:
    """Build a SurveyResponse from an already-validated payload."""
    pieces = tuple(
        PieceRating(p["segment_index"], p["relax"], p["concentrate"], p["like"])
        for p in payload["per_piece"]
    )
    return SurveyResponse(pieces, payload["volume_rating"], payload["transition_comfort"])


class SurveyStore:
    """Append-only survey persistence; the latest entry per participant wins."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._entries: list[tuple[str, dict]] = []
        if self.path is not None and self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    obj = json.loads(line)
                    self._entries.append((obj["participant"], obj["response"]))

    def submit(self, participant: str, response: SurveyResponse) -> None:
        record = {"participant": participant, "response": response.to_dict()}
        self._entries.append((participant, record["response"]))
        if self.path is not None:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")

    def latest(self) -> dict[str, dict]:
        return {participant: response for participant, response in self._entries}

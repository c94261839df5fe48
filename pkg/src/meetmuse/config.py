"""Session and service configuration.

Timing values are declared in seconds (crossfade in milliseconds) but all
arithmetic downstream runs on integer milliseconds, so every boundary has an
exact, replayable owner.  Configs are frozen dataclasses; invalid combinations
are reported as a violation list rather than a single opaque error so callers
can surface every problem at once.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path


class ConfigError(ValueError):
    """Raised for a configuration that violates its invariants."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


def to_ms(seconds: float) -> int:
    """Seconds to integer milliseconds, rounded to nearest."""
    return round(seconds * 1000)


@dataclass(frozen=True)
class SessionConfig:
    """Timing parameters governing one meeting session.

    Attributes:
        chunk_duration: seconds of speech accumulated per transcript window.
        clip_duration: seconds of synthesized audio per music clip.
        lag_chunks: how many windows behind the conversation the music runs;
            also fixes the silent intro at ``lag_chunks * chunk_duration``.
        session_limit: hard end of the session, in seconds.
        crossfade_ms: loop-join crossfade length, in milliseconds.
    """

    chunk_duration: float = 180.0
    clip_duration: float = 10.0
    lag_chunks: int = 2
    session_limit: float = 1200.0
    crossfade_ms: int = 250

    @property
    def chunk_ms(self) -> int:
        return to_ms(self.chunk_duration)

    @property
    def clip_ms(self) -> int:
        return to_ms(self.clip_duration)

    @property
    def limit_ms(self) -> int:
        return to_ms(self.session_limit)

    def violations(self) -> list[str]:
        """All invariant violations, empty when the config is usable."""
        v: list[str] = []
        if self.chunk_duration <= 0:
            v.append(f"chunk_duration must be positive, got {self.chunk_duration}")
        if self.clip_duration <= 0:
            v.append(f"clip_duration must be positive, got {self.clip_duration}")
        if self.session_limit <= 0:
            v.append(f"session_limit must be positive, got {self.session_limit}")
        if not isinstance(self.lag_chunks, int) or self.lag_chunks < 0:
            v.append(f"lag_chunks must be a non-negative integer, got {self.lag_chunks}")
        if self.crossfade_ms < 0:
            v.append(f"crossfade_ms must be non-negative, got {self.crossfade_ms}")
        if v:
            return v
        if self.clip_ms > self.chunk_ms:
            v.append(
                f"clip_duration ({self.clip_duration}s) must not exceed "
                f"chunk_duration ({self.chunk_duration}s)"
            )
        if self.lag_chunks * self.chunk_ms >= self.limit_ms:
            v.append(
                f"lag_chunks*chunk_duration ({self.lag_chunks * self.chunk_duration}s) "
                f"must be below session_limit ({self.session_limit}s): "
                "no music would ever play"
            )
        if self.crossfade_ms >= self.clip_ms / 2:
            v.append(
                f"crossfade ({self.crossfade_ms}ms) must be below half the "
                f"clip duration ({self.clip_ms / 2}ms)"
            )
        return v

    def validate(self) -> "SessionConfig":
        """Return self, raising ConfigError when any invariant is violated."""
        v = self.violations()
        if v:
            raise ConfigError(v)
        return self

    def to_dict(self) -> dict:
        return {
            "chunk_duration": self.chunk_duration,
            "clip_duration": self.clip_duration,
            "lag_chunks": self.lag_chunks,
            "session_limit": self.session_limit,
            "crossfade_ms": self.crossfade_ms,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SessionConfig":
        _reject_unknown_keys(cls, data, "session")
        return cls(**data)


@dataclass(frozen=True)
class ProviderSelection:
    """Which backend implements each pipeline stage: ``mock`` or ``live``."""

    transcription: str = "mock"
    description: str = "mock"
    music: str = "mock"

    def violations(self) -> list[str]:
        v = []
        for name in ("transcription", "description", "music"):
            value = getattr(self, name)
            if value not in ("mock", "live"):
                v.append(f"providers.{name} must be 'mock' or 'live', got {value!r}")
        return v

    def to_dict(self) -> dict:
        return {
            "transcription": self.transcription,
            "description": self.description,
            "music": self.music,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProviderSelection":
        _reject_unknown_keys(cls, data, "providers")
        return cls(**data)


@dataclass(frozen=True)
class ServiceConfig:
    """Full service configuration: timing plus provider and output knobs.

    Secrets (endpoint keys) never live here; live providers read them from
    environment variables.
    """

    session: SessionConfig = field(default_factory=SessionConfig)
    providers: ProviderSelection = field(default_factory=ProviderSelection)
    clock: str = "virtual"  # "virtual" | "real"
    cache_dir: str = "clip-cache"
    log_dir: str = "session-logs"
    loudness_target_dbfs: float = -12.0
    segment_fade_s: float = 1.0
    description_temperature: float = 0.7
    max_description_words: int = 60
    template_text: str | None = None  # None -> built-in default template
    neutral_description: str | None = None  # None -> built-in neutral fallback
    audible_roles: tuple[str, ...] = ("interviewer", "interviewee")

    def violations(self) -> list[str]:
        v = list(self.session.violations())
        v.extend(self.providers.violations())
        if self.clock not in ("virtual", "real"):
            v.append(f"clock must be 'virtual' or 'real', got {self.clock!r}")
        if self.segment_fade_s < 0:
            v.append(f"segment_fade_s must be non-negative, got {self.segment_fade_s}")
        if self.max_description_words <= 0:
            v.append("max_description_words must be positive")
        return v

    def validate(self) -> "ServiceConfig":
        v = self.violations()
        if v:
            raise ConfigError(v)
        return self

    def to_dict(self) -> dict:
        return {
            "session": self.session.to_dict(),
            "providers": self.providers.to_dict(),
            "clock": self.clock,
            "cache_dir": self.cache_dir,
            "log_dir": self.log_dir,
            "loudness_target_dbfs": self.loudness_target_dbfs,
            "segment_fade_s": self.segment_fade_s,
            "description_temperature": self.description_temperature,
            "max_description_words": self.max_description_words,
            "template_text": self.template_text,
            "neutral_description": self.neutral_description,
            "audible_roles": list(self.audible_roles),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ServiceConfig":
        _reject_unknown_keys(cls, data, "service")
        kwargs = dict(data)
        if "session" in kwargs:
            kwargs["session"] = SessionConfig.from_dict(kwargs["session"])
        if "providers" in kwargs:
            kwargs["providers"] = ProviderSelection.from_dict(kwargs["providers"])
        if "audible_roles" in kwargs:
            kwargs["audible_roles"] = tuple(kwargs["audible_roles"])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        """Load a JSON config file (schema documented in the README)."""
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ConfigError([f"config file {path} must contain a JSON object"])
        return cls.from_dict(data)


def _reject_unknown_keys(cls, data: dict, where: str) -> None:
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError([f"unknown {where} config key(s): {', '.join(unknown)}"])

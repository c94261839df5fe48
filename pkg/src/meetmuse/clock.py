"""Clock abstraction: real wall time or instantly-advancing virtual time.

All session scheduling consults an injected clock, never the wall directly,
so a 20-minute session replays in milliseconds under the virtual clock.
``StageTimings`` models how long each pipeline stage takes in simulated time;
tests use it to inject deadline-busting delays on specific chunks.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field


class VirtualClock:
    """Session time that advances only when told to."""

    def __init__(self, start_ms: int = 0):
        self._now_ms = start_ms

    def now_ms(self) -> int:
        return self._now_ms

    def advance_to_ms(self, t_ms: int) -> None:
        if t_ms < self._now_ms:
            raise ValueError(f"cannot move virtual clock backwards ({self._now_ms} -> {t_ms})")
        self._now_ms = t_ms

    def sleep(self, seconds: float) -> None:
        self._now_ms += round(seconds * 1000)


class RealClock:
    """Monotonic wall time relative to a start() epoch."""

    def __init__(self):
        self._epoch: float | None = None

    def start(self) -> None:
        self._epoch = time.monotonic()

    def now_ms(self) -> int:
        if self._epoch is None:
            return 0
        return round((time.monotonic() - self._epoch) * 1000)

    def advance_to_ms(self, t_ms: int) -> None:
        """Block until wall time reaches ``t_ms`` of session time."""
        if self._epoch is None:
            raise RuntimeError("clock has not been started")
        delay = t_ms / 1000.0 - (time.monotonic() - self._epoch)
        if delay > 0:
            time.sleep(delay)

    def sleep(self, seconds: float) -> None:
        time.sleep(seconds)


@dataclass
class StageTimings:
    """Simulated per-stage durations, in seconds, keyed by chunk index.

    Unlisted chunks use the defaults.  Only consulted under the virtual
    clock; live runs take however long the providers take.
    """

    default_transcribe_s: float = 0.0
    default_describe_s: float = 0.0
    default_synthesize_s: float = 0.0
    transcribe_s: dict[int, float] = field(default_factory=dict)
    describe_s: dict[int, float] = field(default_factory=dict)
    synthesize_s: dict[int, float] = field(default_factory=dict)

    def for_transcribe(self, chunk: int) -> float:
        return self.transcribe_s.get(chunk, self.default_transcribe_s)

    def for_describe(self, chunk: int) -> float:
        return self.describe_s.get(chunk, self.default_describe_s)

    def for_synthesize(self, chunk: int) -> float:
        return self.synthesize_s.get(chunk, self.default_synthesize_s)


class SimElapsed:
    """Accumulates simulated seconds charged by pipeline stages and retries."""

    def __init__(self):
        self.seconds = 0.0

    def charge(self, seconds: float) -> None:
        self.seconds += seconds

    @property
    def ms(self) -> int:
        return round(self.seconds * 1000)

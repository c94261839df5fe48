import pytest

from meetmuse.config import ServiceConfig, SessionConfig
from meetmuse.providers import (
    MockDescriptionProvider,
    MockMusicProvider,
    MockTranscriptionProvider,
)
from meetmuse.session import SessionRunner
from meetmuse.synth import ClipCache


@pytest.fixture
def cfg() -> SessionConfig:
    return SessionConfig()


@pytest.fixture
def service_cfg(tmp_path) -> ServiceConfig:
    return ServiceConfig.from_dict(
        {"cache_dir": str(tmp_path / "cache"), "log_dir": str(tmp_path / "logs")}
    )


@pytest.fixture
def mock_providers():
    return (
        MockTranscriptionProvider(),
        MockDescriptionProvider(),
        MockMusicProvider(),
    )


@pytest.fixture
def scripted_transcripts() -> dict[int, str]:
    return {k: f"Casual conversation about topic number {k} and weekend plans." for k in range(7)}


def make_runner(
    service_cfg: ServiceConfig,
    tmp_path,
    session_id: str = "test-session",
    push=None,
    timings=None,
    providers=None,
    scripted: dict[int, str] | None = None,
    log_sink=None,
) -> SessionRunner:
    transcription, description, music = providers or (
        MockTranscriptionProvider(),
        MockDescriptionProvider(),
        MockMusicProvider(),
    )
    return SessionRunner(
        session_id,
        service_cfg,
        transcription,
        description,
        music,
        cache=ClipCache(tmp_path / "runner-cache"),
        push=push,
        timings=timings,
        scripted_transcripts=scripted,
        log_sink=log_sink,
    )

"""Live HTTP adapters for the three pipeline stages.

Endpoints and credentials come from environment variables only:

    MEETMUSE_TRANSCRIBE_URL / MEETMUSE_TRANSCRIBE_KEY
    MEETMUSE_DESCRIBE_URL   / MEETMUSE_DESCRIBE_KEY / MEETMUSE_DESCRIBE_MODEL
    MEETMUSE_MUSIC_URL      / MEETMUSE_MUSIC_KEY

Network and HTTP-level failures surface as retryable ProviderError; the
``on_exchange`` hook receives a redacted record of each request/response pair
for the session event log (no credentials, bodies truncated).
"""

from __future__ import annotations

import base64
import io
import json
import os
from typing import Callable

import numpy as np
import requests

from ..audio import MUSIC_RATE, read_wav, wav_bytes
from ..ingest import TranscriptFragment
from .base import ProviderError

ExchangeHook = Callable[[dict], None]

_BODY_LOG_LIMIT = 500


def _env(name: str) -> str:
    value = os.environ.get(name, "")
    if not value:
        raise ProviderError(f"environment variable {name} is not set")
    return value


def _redacted(body: str) -> str:
    if len(body) > _BODY_LOG_LIMIT:
        return body[:_BODY_LOG_LIMIT] + f"...[{len(body)} chars]"
    return body


class _HttpAdapter:
    def __init__(self, url_var: str, key_var: str, on_exchange: ExchangeHook | None = None):
        self._url_var = url_var
        self._key_var = key_var
        self.on_exchange = on_exchange
        self.timeout_s = 45.0

    def _post(self, *, files=None, json_body=None, request_note: str = "") -> requests.Response:
        url = _env(self._url_var)
        headers = {"Authorization": f"Bearer {_env(self._key_var)}"}
        try:
            resp = requests.post(
                url, headers=headers, files=files, json=json_body, timeout=self.timeout_s
            )
        except requests.RequestException as exc:
            raise ProviderError(f"request to {url} failed: {exc}") from exc
        if self.on_exchange is not None:
            is_text = resp.headers.get("content-type", "").startswith(
                ("application/json", "text/")
            )
            self.on_exchange(
                {
                    "endpoint": url,
                    "status": resp.status_code,
                    "request": _redacted(request_note or json.dumps(json_body or {})),
                    "response": _redacted(resp.text) if is_text else f"<{len(resp.content)} bytes>",
                }
            )
        if resp.status_code != 200:
            raise ProviderError(f"{url} returned HTTP {resp.status_code}")
        return resp


class HttpTranscriptionProvider(_HttpAdapter):
    """Multipart WAV upload to a speech-to-text service.

    Accepts either a verbose response with ``segments`` (start/end/text) or a
    flat ``text`` body; fragments are attributed to ``speaker`` because the
    submitted buffer only ever contains the designated speaker's audio.
    """

    provider_id = "http-transcription"

    def __init__(self, speaker: str = "interviewee", on_exchange: ExchangeHook | None = None):
        super().__init__("MEETMUSE_TRANSCRIBE_URL", "MEETMUSE_TRANSCRIBE_KEY", on_exchange)
        self.speaker = speaker

    def transcribe(self, audio: bytes, sample_rate: int) -> list[TranscriptFragment]:
        samples = np.frombuffer(audio, dtype="<i2")
        wav = wav_bytes(samples, sample_rate)
        resp = self._post(
            files={"file": ("chunk.wav", io.BytesIO(wav), "audio/wav")},
            request_note=f"<wav upload, {len(wav)} bytes>",
        )
        try:
            body = resp.json()
        except ValueError as exc:
            raise ProviderError("transcription response is not JSON") from exc
        if isinstance(body.get("segments"), list):
            return [
                TranscriptFragment(
                    text=str(seg.get("text", "")),
                    start_s=float(seg.get("start", 0.0)),
                    end_s=float(seg.get("end", 0.0)),
                    speaker=self.speaker,
                )
                for seg in body["segments"]
            ]
        if "text" in body:
            duration = len(samples) / sample_rate
            return [TranscriptFragment(str(body["text"]), 0.0, duration, self.speaker)]
        raise ProviderError("transcription response carries neither segments nor text")


class HttpDescriptionProvider(_HttpAdapter):
    """Chat-completion request producing the music description text."""

    provider_id = "http-description"

    def __init__(self, temperature: float = 0.7, on_exchange: ExchangeHook | None = None):
        super().__init__("MEETMUSE_DESCRIBE_URL", "MEETMUSE_DESCRIBE_KEY", on_exchange)
        self.temperature = temperature

    def complete(self, prompt: str) -> str:
        body = {
            "model": os.environ.get("MEETMUSE_DESCRIBE_MODEL", "gpt-4"),
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        }
        resp = self._post(json_body=body)
        try:
            return str(resp.json()["choices"][0]["message"]["content"])
        except (ValueError, KeyError, IndexError) as exc:
            raise ProviderError(f"malformed description response: {exc}") from exc


class HttpMusicProvider(_HttpAdapter):
    """Text-to-music request returning a WAV clip.

    The response may be raw WAV bytes, or JSON carrying ``audio_b64`` or an
    ``audio_url`` to fetch.  MP3 responses are rejected: no decoder is
    available in this deployment.
    """

    provider_id = "http-music"

    def __init__(self, on_exchange: ExchangeHook | None = None):
        super().__init__("MEETMUSE_MUSIC_URL", "MEETMUSE_MUSIC_KEY", on_exchange)

    def render(self, description: str, duration_s: float, seed: int) -> np.ndarray:
        resp = self._post(
            json_body={"prompt": description, "duration": duration_s, "seed": seed}
        )
        content_type = resp.headers.get("content-type", "")
        if content_type.startswith("application/json"):
            try:
                body = resp.json()
            except ValueError as exc:
                raise ProviderError("music response is not valid JSON") from exc
            if "audio_b64" in body:
                audio = base64.b64decode(body["audio_b64"])
            elif "audio_url" in body:
                try:
                    fetched = requests.get(body["audio_url"], timeout=self.timeout_s)
                except requests.RequestException as exc:
                    raise ProviderError(f"fetching audio_url failed: {exc}") from exc
                if fetched.status_code != 200:
                    raise ProviderError(f"audio_url returned HTTP {fetched.status_code}")
                audio = fetched.content
            else:
                raise ProviderError("music response JSON carries no audio")
        else:
            audio = resp.content
        return _decode_music(audio)


def _decode_music(audio: bytes) -> np.ndarray:
    if audio[:3] == b"ID3" or audio[:2] in (b"\xff\xfb", b"\xff\xf3", b"\xff\xf2"):
        raise ProviderError("music response is MP3; only WAV is supported here")
    try:
        samples, rate = read_wav(audio)
    except Exception as exc:
        raise ProviderError(f"cannot decode music response as WAV: {exc}") from exc
    if rate != MUSIC_RATE:
        samples = _resample(samples, rate, MUSIC_RATE)
    return samples


def _resample(samples: np.ndarray, src_rate: int, dst_rate: int) -> np.ndarray:
    # Linear interpolation is plenty for background music at these rates.
    n_out = round(len(samples) * dst_rate / src_rate)
    x_out = np.linspace(0, len(samples) - 1, n_out)
    return np.rint(np.interp(x_out, np.arange(len(samples)), samples.astype(np.float64))).astype(
        "<i2"
    )

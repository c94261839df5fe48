#!/usr/bin/env python3
"""Boot a local server with mock providers and print ready-to-use join tokens.

The created session runs on the virtual clock, so it bursts to completion
the instant both roles have joined; point two WebSocket clients (or the
frontend dev server) at the printed tokens.
"""

from pathlib import Path
import sys
import threading
import time

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import requests
import uvicorn

from meetmuse.config import ServiceConfig
from meetmuse.server import create_app

HOST, PORT = "127.0.0.1", 8765


def main() -> int:
    out = Path(__file__).resolve().parents[1] / "out"
    cfg = ServiceConfig.from_dict(
        {"cache_dir": str(out / "clip-cache"), "log_dir": str(out / "logs")}
    )
    server = uvicorn.Server(
        uvicorn.Config(create_app(cfg), host=HOST, port=PORT, log_level="warning")
    )
    threading.Thread(target=server.run, daemon=True).start()
    while not server.started:
        time.sleep(0.05)

    info = requests.post(f"http://{HOST}:{PORT}/sessions", json={}).json()
    print(f"server   : ws://{HOST}:{PORT}/ws")
    print(f"session  : {info['session_id']}  ({info['segment_count']} segments)")
    for role, token in info["tokens"].items():
        print(f"{role:11}: {token}")
    print(f"log      : http://{HOST}:{PORT}/sessions/{info['session_id']}/log")
    print("press Ctrl-C to stop")
    try:
        while True:
            time.sleep(1)
    except KeyboardInterrupt:
        return 0


if __name__ == "__main__":
    sys.exit(main())

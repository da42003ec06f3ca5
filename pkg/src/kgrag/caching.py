"""Write-once, content-addressed on-disk cache for HTTP response bodies.

Shared by the LLM gateway and the knowledge-base client so that a warm
cache makes every re-run a zero-network, byte-identical replay.
"""

from __future__ import annotations

import json
import os
import threading
import time
from pathlib import Path


class DiskCache:
    """Cache layout: {root}/{first-2-hex}/{key}.json, entries immutable once written."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str) -> bytes | None:
        path = self._path(key)
        if not path.exists():
            return None
        entry = json.loads(path.read_text(encoding="utf-8"))
        return entry["response"].encode("utf-8")

    def put(self, key: str, request_body: bytes, response_body: bytes) -> None:
        path = self._path(key)
        if path.exists():  # entries are immutable
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        entry = {
            "key": key,
            "request": request_body.decode("utf-8", "replace"),
            "response": response_body.decode("utf-8", "replace"),
            "created_at": time.time(),
        }
        # write-temp-then-rename keeps concurrent writers from exposing partial files
        tmp = path.parent / f".{key}.{os.getpid()}.{threading.get_ident()}.tmp"
        tmp.write_text(json.dumps(entry, ensure_ascii=False), encoding="utf-8")
        os.replace(tmp, path)

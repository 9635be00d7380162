"""Shared Data Layer: namespaced, versioned key-value store for RIC components."""

from __future__ import annotations

import json
from dataclasses import dataclass


@dataclass(frozen=True)
class SdlRecord:
    namespace: str
    key: str
    value: bytes
    version: int


class SharedDataLayer:
    """In-memory last-write-wins store; every write bumps the key's version.

    With ``journal_path`` set, each write is also appended as one JSON line
    (value hex-encoded). The journal is for inspection only and is never
    read back.
    """

    def __init__(self, journal_path: str | None = None):
        self._data: dict[tuple[str, str], SdlRecord] = {}
        self._journal = open(journal_path, "a", encoding="utf-8") if journal_path else None

    def put(self, namespace: str, key: str, value: bytes) -> int:
        old = self._data.get((namespace, key))
        rec = SdlRecord(namespace, key, bytes(value), old.version + 1 if old else 1)
        self._data[(namespace, key)] = rec
        if self._journal is not None:
            self._journal.write(json.dumps({"ns": namespace, "key": key, "version": rec.version,
                                            "value": rec.value.hex()}) + "\n")
            self._journal.flush()
        return rec.version

    def get(self, namespace: str, key: str) -> tuple[bytes, int] | None:
        rec = self._data.get((namespace, key))
        return (rec.value, rec.version) if rec else None

    def records(self, namespace: str) -> list[SdlRecord]:
        return sorted((r for (ns, _), r in self._data.items() if ns == namespace), key=lambda r: r.key)

    def close(self):
        if self._journal is not None:
            self._journal.close()
            self._journal = None

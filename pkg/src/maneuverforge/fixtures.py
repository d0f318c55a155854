"""Record/replay store for structured generation calls.

One JSONL line per call: {"request_messages": [...],
"output_schema_hash": "...", "response_json": {...}}. Replay matches by
call order and verifies the schema hash; it never inspects the messages.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .errors import FixtureExhausted, FixtureMismatch


def schema_hash(schema: dict) -> str:
    canonical = json.dumps(schema, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class FixtureWriter:
    """Appends one record per generate() call."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def append(self, messages: list[dict], schema: dict, response: dict) -> None:
        record = {
            "request_messages": messages,
            "output_schema_hash": schema_hash(schema),
            "response_json": response,
        }
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


class FixtureReader:
    """Plays records back in order. The cursor is single-trial state: do not
    share one reader across concurrent trials."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._records = []
        with self.path.open(encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    self._records.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise FixtureMismatch(
                        f"{self.path}:{line_no}: not valid JSON: {exc}") from None
        self._cursor = 0

    def __len__(self) -> int:
        return len(self._records)

    @property
    def remaining(self) -> int:
        return len(self._records) - self._cursor

    def next(self, schema: dict) -> dict:
        if self._cursor >= len(self._records):
            raise FixtureExhausted(
                f"fixture {self.path} exhausted after {self._cursor} record(s)")
        record = self._records[self._cursor]
        self._cursor += 1
        expected = schema_hash(schema)
        got = record.get("output_schema_hash")
        if got != expected:
            raise FixtureMismatch(
                f"fixture record {self._cursor} was made for schema "
                f"{got}, expected {expected}")
        return json.loads(json.dumps(record["response_json"]))

"""Append-only JSONL manifest for pipeline runs.

Each line is one ManifestRecord; a sample accumulates records as it moves
PROBED -> S1 -> S2 -> BUILT, and the latest record per sample defines its
current stage.  With the (default) fixed clock, the recorded timestamp is a
constant so identical runs produce byte-identical files.
"""

from __future__ import annotations

import datetime
import enum
import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional

from .types import AvJigsawError, FilterReport, MediaMeta, SCHEMA_VERSION

MANIFEST_NAME = "manifest.jsonl"
FIXED_TIMESTAMP = "1970-01-01T00:00:00Z"


class ManifestError(AvJigsawError):
    pass


class Stage(str, enum.Enum):
    PROBED = "PROBED"
    S1_PASS = "S1_PASS"
    S1_REJECT = "S1_REJECT"
    S2_PASS = "S2_PASS"
    S2_REJECT = "S2_REJECT"
    DEFERRED = "DEFERRED"
    BUILT = "BUILT"


TERMINAL_STAGES = frozenset({Stage.S1_REJECT, Stage.S2_REJECT, Stage.BUILT})

_ORDER = {Stage.PROBED: 0, Stage.S1_PASS: 1, Stage.S1_REJECT: 1,
          Stage.S2_PASS: 2, Stage.S2_REJECT: 2, Stage.DEFERRED: 2, Stage.BUILT: 3}


@dataclass(frozen=True)
class ManifestRecord:
    sample_id: str
    source_path: str
    stage: Stage
    timestamp: str
    source: Optional[str] = None
    meta: Optional[MediaMeta] = None
    report: Optional[FilterReport] = None
    puzzle_path: Optional[str] = None

    def to_dict(self) -> dict:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "sample_id": self.sample_id,
            "source_path": self.source_path,
            "stage": self.stage.value,
            "timestamp": self.timestamp,
            "source": self.source,
        }
        if self.meta is not None:
            doc["meta"] = self.meta.to_dict()
        if self.report is not None:
            doc["report"] = self.report.to_dict()
        if self.puzzle_path is not None:
            doc["puzzle_path"] = self.puzzle_path
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ManifestRecord":
        return cls(
            sample_id=doc["sample_id"],
            source_path=doc["source_path"],
            stage=Stage(doc["stage"]),
            timestamp=doc["timestamp"],
            source=doc.get("source"),
            meta=MediaMeta.from_dict(doc["meta"]) if doc.get("meta") else None,
            report=FilterReport.from_dict(doc["report"]) if doc.get("report") else None,
            puzzle_path=doc.get("puzzle_path"),
        )


class ManifestWriter:
    """Serialized appender; safe to share across worker threads."""

    def __init__(self, path, fixed_clock: bool = True):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.fixed_clock = fixed_clock
        self._lock = threading.Lock()

    def now(self) -> str:
        if self.fixed_clock:
            return FIXED_TIMESTAMP
        return datetime.datetime.now(datetime.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")

    def append(self, record: ManifestRecord) -> None:
        line = json.dumps(record.to_dict()) + "\n"
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()


def read_manifest(path) -> List[ManifestRecord]:
    """Parse a manifest; a malformed line reports its 1-based line number."""
    path = Path(path)
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(ManifestRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError) as e:
                raise ManifestError("CORRUPT_MANIFEST", f"line {lineno}: {e}") from e
    return records


def latest_stages(records: List[ManifestRecord]) -> Dict[str, ManifestRecord]:
    """Latest record per sample id, honoring the stage order on ties."""
    latest: Dict[str, ManifestRecord] = {}
    for rec in records:
        prev = latest.get(rec.sample_id)
        if prev is None or _ORDER[rec.stage] >= _ORDER[prev.stage]:
            latest[rec.sample_id] = rec
    return latest


def iter_built(records: List[ManifestRecord]) -> Iterator[ManifestRecord]:
    for rec in latest_stages(records).values():
        if rec.stage is Stage.BUILT:
            yield rec

"""Corpus data model and its newline-delimited JSON persistence.

A manifest is a UTF-8 text file with one JSON object per non-empty line,
each carrying ``"schema": 1``. Every other module reads and writes these
files; records are treated as immutable values (updates go through
:func:`with_stage` / ``dataclasses.replace``) so they are safe to hand to
worker threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Optional

from .errors import ManifestError

SCHEMA_VERSION = 1

# Canonical pipeline stage names, in execution order.
STAGES = (
    "sample",
    "clean",
    "transcribe",
    "filter",
    "punct",
    "numexpand",
    "align",
    "numrevert",
)

REGIONS = ("north", "central", "south")
TRANSCRIPT_ORIGINS = ("manual", "provided", "generated")

PENDING = "pending"
PASSED = "passed"
REJECTED = "rejected"

# Slack for float comparisons on word intervals.
_EPS = 1e-9


def _round3(value: float) -> float:
    """Times are persisted as decimal seconds with at most 3 fractional digits."""
    return round(float(value), 3)


def stage_manifest_name(stage: str) -> str:
    """File name for a stage's output manifest, e.g. 02_clean.jsonl."""
    return f"{STAGES.index(stage) + 1:02d}_{stage}.jsonl"


@dataclass(frozen=True)
class AlignedWord:
    """One word with start/end times in seconds."""

    text: str
    start_s: float
    end_s: float

    def __post_init__(self):
        if not self.text or any(c.isspace() for c in self.text):
            raise ManifestError(f"aligned word text must be one non-empty word, got {self.text!r}")
        if not (0.0 <= self.start_s <= self.end_s + _EPS):
            raise ManifestError(
                f"aligned word {self.text!r} has invalid interval ({self.start_s}, {self.end_s})"
            )

    def to_dict(self) -> dict:
        return {"text": self.text, "start_s": _round3(self.start_s), "end_s": _round3(self.end_s)}

    @classmethod
    def from_dict(cls, payload: dict) -> "AlignedWord":
        return cls(text=payload["text"], start_s=payload["start_s"], end_s=payload["end_s"])


@dataclass(frozen=True)
class NumericSpanMapping:
    """Digit-form to spoken-form correspondence carried from number expansion to reversion.

    ``word_index_start``/``word_index_count`` index into the word sequence of
    the expanded (spoken-form) transcript.
    """

    digit_form: str
    spoken_form: str
    word_index_start: int
    word_index_count: int

    def __post_init__(self):
        if not self.digit_form or not all(c in "0123456789" for c in self.digit_form):
            raise ManifestError(f"digit_form must be a decimal-digit string, got {self.digit_form!r}")
        if self.word_index_count < 1:
            raise ManifestError("word_index_count must be >= 1")
        if self.word_index_start < 0:
            raise ManifestError("word_index_start must be >= 0")
        if len(self.spoken_form.split()) != self.word_index_count:
            raise ManifestError(
                f"spoken_form {self.spoken_form!r} does not split into {self.word_index_count} words"
            )

    def to_dict(self) -> dict:
        return {
            "digit_form": self.digit_form,
            "spoken_form": self.spoken_form,
            "word_index_start": self.word_index_start,
            "word_index_count": self.word_index_count,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "NumericSpanMapping":
        return cls(
            digit_form=payload["digit_form"],
            spoken_form=payload["spoken_form"],
            word_index_start=payload["word_index_start"],
            word_index_count=payload["word_index_count"],
        )


@dataclass(frozen=True)
class StageStatus:
    """Outcome of one pipeline stage for one record."""

    state: str
    reason: Optional[str] = None

    def __post_init__(self):
        if self.state not in (PENDING, PASSED, REJECTED):
            raise ManifestError(f"unknown stage state {self.state!r}")
        if self.state == REJECTED and not self.reason:
            raise ManifestError("rejected stage status requires a reason")

    def to_dict(self) -> dict:
        payload: dict = {"state": self.state}
        if self.reason is not None:
            payload["reason"] = self.reason
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "StageStatus":
        return cls(state=payload["state"], reason=payload.get("reason"))


@dataclass
class UtteranceRecord:
    """One audio sample with transcript, provenance, labels, and per-stage status."""

    utterance_id: str
    source_dataset: str
    audio_path: str
    sample_rate_hz: int
    duration_s: float
    transcript: Optional[str] = None
    transcript_origin: Optional[str] = None
    speaker_id: Optional[str] = None
    group_key: Optional[str] = None
    region: Optional[str] = None
    words: Optional[list[AlignedWord]] = None
    numeric_mappings: Optional[list[NumericSpanMapping]] = None
    stage_status: dict[str, StageStatus] = field(default_factory=dict)
    ts_text: Optional[str] = None

    def __post_init__(self):
        # Records loaded from source datasets default to "provided" transcripts;
        # manual/generated must be stated explicitly.
        if self.transcript is not None and self.transcript_origin is None:
            self.transcript_origin = "provided"

    def validate(self) -> None:
        if not self.utterance_id:
            raise ManifestError("utterance_id must be non-empty")
        if self.sample_rate_hz <= 0:
            raise ManifestError(f"{self.utterance_id}: sample_rate_hz must be positive")
        if self.duration_s < 0:
            raise ManifestError(f"{self.utterance_id}: duration_s must be non-negative")
        if self.transcript_origin is not None and self.transcript_origin not in TRANSCRIPT_ORIGINS:
            raise ManifestError(
                f"{self.utterance_id}: unknown transcript_origin {self.transcript_origin!r}"
            )
        if self.region is not None and self.region not in REGIONS:
            raise ManifestError(f"{self.utterance_id}: unknown region {self.region!r}")
        clean = self.stage_status.get("clean")
        if clean is not None and clean.state == PASSED and self.duration_s <= 0:
            raise ManifestError(f"{self.utterance_id}: clean stage passed with duration_s <= 0")
        if self.words is not None:
            prev_end = 0.0
            prev_start = -1.0
            for w in self.words:
                if w.start_s < prev_start - _EPS:
                    raise ManifestError(f"{self.utterance_id}: words not sorted by start time")
                if w.start_s < prev_end - _EPS:
                    raise ManifestError(f"{self.utterance_id}: overlapping word intervals")
                if w.end_s > self.duration_s + _EPS:
                    raise ManifestError(
                        f"{self.utterance_id}: word {w.text!r} ends at {w.end_s} beyond "
                        f"duration {self.duration_s}"
                    )
                prev_start = w.start_s
                prev_end = w.end_s

    def is_rejected(self) -> bool:
        return any(s.state == REJECTED for s in self.stage_status.values())

    def rejection(self) -> Optional[tuple[str, str]]:
        """First (stage, reason) that rejected this record, in pipeline order."""
        for stage in STAGES:
            status = self.stage_status.get(stage)
            if status is not None and status.state == REJECTED:
                return stage, status.reason or ""
        return None

    def to_dict(self) -> dict:
        payload: dict = {
            "schema": SCHEMA_VERSION,
            "utterance_id": self.utterance_id,
            "source_dataset": self.source_dataset,
            "audio_path": self.audio_path,
            "sample_rate_hz": self.sample_rate_hz,
            "duration_s": _round3(self.duration_s),
        }
        if self.transcript is not None:
            payload["transcript"] = self.transcript
        if self.transcript_origin is not None:
            payload["transcript_origin"] = self.transcript_origin
        if self.speaker_id is not None:
            payload["speaker_id"] = self.speaker_id
        if self.group_key is not None:
            payload["group_key"] = self.group_key
        if self.region is not None:
            payload["region"] = self.region
        if self.words is not None:
            payload["words"] = [w.to_dict() for w in self.words]
        if self.numeric_mappings is not None:
            payload["numeric_mappings"] = [m.to_dict() for m in self.numeric_mappings]
        if self.stage_status:
            payload["stage_status"] = {k: v.to_dict() for k, v in self.stage_status.items()}
        if self.ts_text is not None:
            payload["ts_text"] = self.ts_text
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "UtteranceRecord":
        schema = payload.get("schema", SCHEMA_VERSION)
        if schema != SCHEMA_VERSION:
            raise ManifestError(f"unsupported manifest schema version {schema!r}")
        words = payload.get("words")
        mappings = payload.get("numeric_mappings")
        record = cls(
            utterance_id=payload["utterance_id"],
            source_dataset=payload["source_dataset"],
            audio_path=payload["audio_path"],
            sample_rate_hz=payload["sample_rate_hz"],
            duration_s=payload["duration_s"],
            transcript=payload.get("transcript"),
            transcript_origin=payload.get("transcript_origin"),
            speaker_id=payload.get("speaker_id"),
            group_key=payload.get("group_key"),
            region=payload.get("region"),
            words=[AlignedWord.from_dict(w) for w in words] if words is not None else None,
            numeric_mappings=[NumericSpanMapping.from_dict(m) for m in mappings]
            if mappings is not None
            else None,
            stage_status={
                k: StageStatus.from_dict(v) for k, v in payload.get("stage_status", {}).items()
            },
            ts_text=payload.get("ts_text"),
        )
        record.validate()
        return record


def with_stage(record: UtteranceRecord, stage: str, state: str, reason: str | None = None) -> UtteranceRecord:
    """Return a copy of ``record`` with ``stage`` set to ``state``.

    A stage that has been rejected never transitions back to passed.
    """
    if stage not in STAGES:
        raise ManifestError(f"unknown stage {stage!r}")
    prior = record.stage_status.get(stage)
    if prior is not None and prior.state == REJECTED and state == PASSED:
        raise ManifestError(
            f"{record.utterance_id}: stage {stage!r} cannot transition from rejected to passed"
        )
    status = dict(record.stage_status)
    status[stage] = StageStatus(state=state, reason=reason)
    return replace(record, stage_status=status)


def record_to_line(record: UtteranceRecord) -> str:
    return json.dumps(record.to_dict(), ensure_ascii=False, separators=(",", ":"))


def iter_manifest(path: str | Path) -> Iterator[UtteranceRecord]:
    """Yield records in file order; raises ManifestError with the offending line number."""
    seen: set[str] = set()
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            try:
                record = UtteranceRecord.from_dict(payload)
            except (KeyError, TypeError) as exc:
                raise ManifestError(f"missing or malformed field: {exc}", line=lineno) from exc
            except ManifestError as exc:
                if exc.line is None:
                    raise ManifestError(str(exc), line=lineno) from exc
                raise
            if record.utterance_id in seen:
                raise ManifestError(
                    f"duplicate utterance_id {record.utterance_id!r}", line=lineno
                )
            seen.add(record.utterance_id)
            yield record


def read_manifest(path: str | Path) -> list[UtteranceRecord]:
    return list(iter_manifest(path))


def write_manifest(records: Iterable[UtteranceRecord], path: str | Path) -> None:
    """Write records as one JSON object per line; atomic via rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    seen: set[str] = set()
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        for record in records:
            record.validate()
            if record.utterance_id in seen:
                raise ManifestError(f"duplicate utterance_id {record.utterance_id!r}")
            seen.add(record.utterance_id)
            fh.write(record_to_line(record))
            fh.write("\n")
    tmp.replace(path)


@dataclass(frozen=True)
class StageReportRow:
    group: str
    hours_passed: float
    hours_rejected: float


def stage_report(
    records: Iterable[UtteranceRecord], group_by: str = "source_dataset"
) -> list[StageReportRow]:
    """Hours passed/rejected per group, sorted descending by passed hours.

    A record counts as rejected if any stage rejected it; missing region
    values group under "unknown". Hours are reported to 2 decimals but the
    underlying sums are exact, so totals are conserved across grouping keys.
    """
    if group_by not in ("source_dataset", "region"):
        raise ValueError(f"unsupported group_by {group_by!r}")
    passed: dict[str, float] = {}
    rejected: dict[str, float] = {}
    for record in records:
        key = getattr(record, group_by) or "unknown"
        bucket = rejected if record.is_rejected() else passed
        bucket[key] = bucket.get(key, 0.0) + record.duration_s
    groups = sorted(
        set(passed) | set(rejected),
        key=lambda g: (-passed.get(g, 0.0), g),
    )
    return [
        StageReportRow(
            group=g,
            hours_passed=round(passed.get(g, 0.0) / 3600.0, 2),
            hours_rejected=round(rejected.get(g, 0.0) / 3600.0, 2),
        )
        for g in groups
    ]

"""Timestamp alignment stage: drive the aligner, validate, quantize, serialize.

Word timestamps are snapped to a fixed grid (20 ms by default, so ticks run
0..1500 over a 30 s clip) and serialized as textual tokens of the form
``<|1.24|>word<|1.56|>`` for training-data export.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from decimal import ROUND_HALF_UP, Decimal
from typing import Optional, Sequence

from .adapters import AdapterHandle, AdapterRequest, invoke
from .errors import AdapterTransportError, ManifestError, TimestampRangeError
from .manifest import PASSED, REJECTED, AlignedWord, UtteranceRecord, with_stage

MAX_CLIP_SECONDS = 30.0
DEFAULT_STEP_S = 0.02

_TOKEN_RE = re.compile(r"<\|(\d+\.\d{2})\|>(\S+?)<\|(\d+\.\d{2})\|>")

# Interval validation slack for float arithmetic.
_EPS = 1e-9


def _step_decimal(step_s: float) -> Decimal:
    step = Decimal(repr(step_s))
    if step <= 0 or (Decimal("30") % step) != 0:
        raise ValueError(f"step {step_s} must be positive and divide 30.0 evenly")
    return step


def max_ticks_for(step_s: float = DEFAULT_STEP_S) -> int:
    return int(Decimal("30") / _step_decimal(step_s))


@dataclass(frozen=True)
class QuantizedTimestamp:
    """A grid-aligned timestamp: seconds = ticks * step exactly."""

    ticks: int
    step_s: float = DEFAULT_STEP_S
    max_ticks: int = 1500

    def __post_init__(self):
        if not 0 <= self.ticks <= self.max_ticks:
            raise TimestampRangeError(f"ticks {self.ticks} outside [0, {self.max_ticks}]")

    @property
    def seconds(self) -> float:
        return float(Decimal(self.ticks) * _step_decimal(self.step_s))

    @property
    def token(self) -> str:
        return f"<|{format_token_seconds(self.ticks, self.step_s)}|>"


def format_token_seconds(ticks: int, step_s: float = DEFAULT_STEP_S) -> str:
    value = (Decimal(ticks) * _step_decimal(step_s)).quantize(Decimal("0.01"))
    return str(value)


def quantize(t_seconds: float, step_s: float = DEFAULT_STEP_S) -> QuantizedTimestamp:
    """Round to the nearest grid tick, ties rounding up.

    The quotient is computed on the decimal rendering of the input, so values
    written with finite decimals (e.g. 0.01, 0.03) land exactly on ties and
    round up as specified; error is at most step/2. Accepts t in
    [0, 30 + step/2]; the upper boundary tie clamps to the last tick.
    """
    step = _step_decimal(step_s)
    limit = max_ticks_for(step_s)
    if t_seconds < 0 or Decimal(repr(float(t_seconds))) > Decimal("30") + step / 2:
        raise TimestampRangeError(
            f"timestamp {t_seconds} outside [0, {float(Decimal('30') + step / 2)}]"
        )
    quotient = Decimal(repr(float(t_seconds))) / step
    ticks = int(quotient.quantize(Decimal(1), rounding=ROUND_HALF_UP))
    if ticks > limit:
        ticks = limit
    return QuantizedTimestamp(ticks=ticks, step_s=step_s, max_ticks=limit)


def quantize_words(
    words: Sequence[AlignedWord],
    step_s: float = DEFAULT_STEP_S,
    max_seconds: Optional[float] = None,
) -> list[AlignedWord]:
    """Snap every word boundary to the grid.

    Quantization is monotone, so ordering and non-overlap survive; a word may
    collapse to a zero-length interval rather than be inflated. When
    ``max_seconds`` is given (the clip duration), ticks are clamped to the
    last grid point inside the clip so no timestamp escapes [0, duration].
    """
    cap: Optional[int] = None
    if max_seconds is not None:
        step = _step_decimal(step_s)
        cap = int(Decimal(repr(float(max_seconds))) / step)  # floor
    out = []
    for word in words:
        start_ticks = quantize(word.start_s, step_s).ticks
        end_ticks = quantize(word.end_s, step_s).ticks
        if cap is not None:
            start_ticks = min(start_ticks, cap)
            end_ticks = min(end_ticks, cap)
        out.append(
            AlignedWord(
                text=word.text,
                start_s=QuantizedTimestamp(start_ticks, step_s).seconds,
                end_s=QuantizedTimestamp(end_ticks, step_s).seconds,
            )
        )
    return out


def serialize_timestamp_tokens(words: Sequence[AlignedWord], step_s: float = DEFAULT_STEP_S) -> str:
    """Emit ``<|start|>word<|end|>`` per word, space-separated, 2-decimal seconds."""
    parts = []
    for word in words:
        start = f"{word.start_s:.2f}"
        end = f"{word.end_s:.2f}"
        parts.append(f"<|{start}|>{word.text}<|{end}|>")
    return " ".join(parts)


def parse_timestamp_tokens(text: str, step_s: float = DEFAULT_STEP_S) -> list[AlignedWord]:
    """Inverse of serialize_timestamp_tokens; rejects any malformed input."""
    if not text:
        return []
    words = []
    for chunk in text.split(" "):
        match = _TOKEN_RE.fullmatch(chunk)
        if match is None:
            raise ManifestError(f"malformed timestamp token {chunk!r}")
        start = float(Decimal(match.group(1)))
        end = float(Decimal(match.group(3)))
        words.append(AlignedWord(text=match.group(2), start_s=start, end_s=end))
    return words


def _interval_problem(words: Sequence[AlignedWord], duration_s: float) -> Optional[str]:
    prev_end = 0.0
    prev_start = -1.0
    for word in words:
        if word.start_s < -_EPS or word.end_s > duration_s + _EPS:
            return f"word {word.text!r} interval ({word.start_s}, {word.end_s}) outside [0, {duration_s}]"
        if word.start_s < prev_start - _EPS:
            return f"word {word.text!r} starts before its predecessor"
        if word.start_s < prev_end - _EPS:
            return f"word {word.text!r} overlaps its predecessor"
        prev_start = word.start_s
        prev_end = word.end_s
    return None


def apply_alignment(
    rec: UtteranceRecord,
    words: Sequence[AlignedWord],
    step_s: float = DEFAULT_STEP_S,
) -> UtteranceRecord:
    """Validate aligner output against the record and attach quantized words.

    On any violation the record is rejected with an auditable reason, never
    silently repaired. On success the record carries quantized words, the
    align stage passes, and ``ts_text`` holds the serialized tokens.
    """
    transcript_words = (rec.transcript or "").split()
    got = [w.text for w in words]
    if got != transcript_words:
        if len(got) != len(transcript_words):
            reason = f"word count mismatch {len(transcript_words)}≠{len(got)}"
        else:
            index = next(i for i, (a, b) in enumerate(zip(transcript_words, got)) if a != b)
            reason = f"word text mismatch at index {index}"
        return with_stage(rec, "align", REJECTED, reason)
    problem = _interval_problem(words, rec.duration_s)
    if problem is not None:
        return with_stage(rec, "align", REJECTED, problem)
    quantized = quantize_words(words, step_s, max_seconds=rec.duration_s)
    updated = replace(rec, words=quantized, ts_text=serialize_timestamp_tokens(quantized, step_s))
    return with_stage(updated, "align", PASSED)


def align_record(
    rec: UtteranceRecord,
    aligner: AdapterHandle,
    step_s: float = DEFAULT_STEP_S,
    audio_path: Optional[str] = None,
) -> UtteranceRecord:
    """Run one record through the alignment adapter.

    Transport failures raise AdapterTransportError (retryable); model-level
    failures reject the record.
    """
    if not rec.transcript:
        return with_stage(rec, "align", REJECTED, "no transcript to align")
    request = AdapterRequest(
        id=rec.utterance_id,
        task="align",
        audio_path=audio_path or rec.audio_path,
        text=rec.transcript,
    )
    response = invoke(aligner, [request])[0]
    if response.error is not None:
        if response.is_transport_error:
            raise AdapterTransportError(response.error)
        return with_stage(rec, "align", REJECTED, f"aligner error: {response.error}")
    if response.words is None:
        return with_stage(rec, "align", REJECTED, "aligner returned no words")
    return apply_alignment(rec, response.words, step_s)

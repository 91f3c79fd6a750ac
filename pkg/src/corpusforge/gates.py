"""Accept/reject logic for the filtering stages.

All gates are pure functions returning a GateDecision; thresholds are strict
(a WER exactly at the threshold rejects). Decisions are appended to per-stage
audit logs in the same line-delimited format as manifests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from .errors import ManifestError
from .manifest import UtteranceRecord
from .metrics import WerBreakdown, wer
from .textnorm import CharProfile, check_char_whitelist, normalize_for_wer

PASSED = "passed"
REJECTED = "rejected"


@dataclass(frozen=True)
class GateDecision:
    utterance_id: str
    stage: str
    verdict: str
    reason: Optional[str] = None
    evidence: Optional[WerBreakdown] = None

    def __post_init__(self):
        if self.verdict not in (PASSED, REJECTED):
            raise ManifestError(f"unknown verdict {self.verdict!r}")
        if self.verdict == REJECTED and not self.reason:
            raise ManifestError("rejected decision requires a reason")

    @property
    def passed(self) -> bool:
        return self.verdict == PASSED

    def to_dict(self) -> dict:
        payload: dict = {
            "utterance_id": self.utterance_id,
            "stage": self.stage,
            "verdict": self.verdict,
        }
        if self.reason is not None:
            payload["reason"] = self.reason
        if self.evidence is not None:
            payload["evidence"] = self.evidence.to_dict()
        return payload

    def to_line(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_dict(cls, payload: dict) -> "GateDecision":
        evidence = payload.get("evidence")
        return cls(
            utterance_id=payload["utterance_id"],
            stage=payload["stage"],
            verdict=payload["verdict"],
            reason=payload.get("reason"),
            evidence=WerBreakdown.from_dict(evidence) if evidence is not None else None,
        )


def clean_filter(
    rec: UtteranceRecord, profile: CharProfile, max_duration_s: float = 30.0
) -> GateDecision:
    """Step-1 cleaning gate: duration cap and transcript character whitelist.

    Also rejects non-positive durations, since a record cannot pass the clean
    stage with an empty clip.
    """
    if rec.duration_s > max_duration_s:
        return GateDecision(
            rec.utterance_id,
            "clean",
            REJECTED,
            reason=f"duration {rec.duration_s} > {max_duration_s}",
        )
    if rec.duration_s <= 0:
        return GateDecision(
            rec.utterance_id, "clean", REJECTED, reason=f"non-positive duration {rec.duration_s}"
        )
    if rec.transcript is not None:
        violation = check_char_whitelist(rec.transcript, profile)
        if violation is not None:
            return GateDecision(
                rec.utterance_id,
                "clean",
                REJECTED,
                reason=(
                    f"disallowed character {violation.char!r} "
                    f"at position {violation.position}"
                ),
            )
    return GateDecision(rec.utterance_id, "clean", PASSED)


def consensus_filter(
    hyp_a: Optional[str],
    hyp_b: Optional[str],
    threshold: float = 0.05,
    utterance_id: str = "",
) -> GateDecision:
    """Step-2 dual-transcriber agreement gate.

    WER is computed on normalized text in both directions and the verdict
    uses the maximum, so it is a function of the unordered hypothesis pair.
    Passes only when that WER is strictly below the threshold.
    """
    if hyp_a is None or hyp_b is None:
        return GateDecision(utterance_id, "transcribe", REJECTED, reason="no transcript")
    norm_a = normalize_for_wer(hyp_a)
    norm_b = normalize_for_wer(hyp_b)
    if not norm_a and not norm_b:
        return GateDecision(utterance_id, "transcribe", REJECTED, reason="empty transcripts")
    forward = wer(norm_a, norm_b)
    backward = wer(norm_b, norm_a)
    worst = forward if forward.wer >= backward.wer else backward
    if worst.wer < threshold:
        return GateDecision(utterance_id, "transcribe", PASSED, evidence=worst)
    return GateDecision(
        utterance_id,
        "transcribe",
        REJECTED,
        reason=f"wer {worst.wer:.2%} not below {threshold:.2%}",
        evidence=worst,
    )


def provided_transcript_filter(
    provided: str,
    hyp: Optional[str],
    threshold: float = 0.05,
    origin: str = "provided",
    utterance_id: str = "",
) -> GateDecision:
    """Step-3 gate comparing a dataset's transcript against a fresh hypothesis.

    Manually annotated transcripts pass unconditionally. On pass the provided
    transcript is what the record keeps; the hypothesis is only evidence.
    """
    if origin == "manual":
        return GateDecision(utterance_id, "filter", PASSED)
    if hyp is None:
        return GateDecision(utterance_id, "filter", REJECTED, reason="no hypothesis transcript")
    breakdown = wer(normalize_for_wer(provided), normalize_for_wer(hyp))
    if breakdown.wer < threshold:
        return GateDecision(utterance_id, "filter", PASSED, evidence=breakdown)
    return GateDecision(
        utterance_id,
        "filter",
        REJECTED,
        reason=f"wer {breakdown.wer:.2%} not below {threshold:.2%}",
        evidence=breakdown,
    )


def punct_fidelity_gate(
    raw_input: str, restored_output: str, utterance_id: str = ""
) -> GateDecision:
    """Step-4 gate: the restorer may only change case and punctuation.

    Passes iff input and output are identical after lowercasing and
    punctuation stripping on both sides.
    """
    norm_in = normalize_for_wer(raw_input)
    norm_out = normalize_for_wer(restored_output)
    if norm_in == norm_out:
        return GateDecision(utterance_id, "punct", PASSED)
    words_in = norm_in.split()
    words_out = norm_out.split()
    if len(words_in) != len(words_out):
        reason = f"word count {len(words_in)}→{len(words_out)}"
    else:
        index, before, after = next(
            (i, a, b) for i, (a, b) in enumerate(zip(words_in, words_out)) if a != b
        )
        reason = f"word {index} changed: {before!r}→{after!r}"
    return GateDecision(utterance_id, "punct", REJECTED, reason=reason)

"""Evaluation metrics: O-WER, N-WER, and collar-based word-timestamp scoring.

Corpus-level numbers are computed from pooled counts (S, D, I, reference
length, TP/FP/FN, IoU sums), never by averaging per-utterance ratios, so
per-record results merge associatively.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .manifest import AlignedWord
from .textnorm import normalize_for_wer, tokenize_words


@dataclass(frozen=True)
class WerBreakdown:
    """Substitution/deletion/insertion counts plus the resulting rate."""

    substitutions: int
    deletions: int
    insertions: int
    ref_len: int
    wer: float
    degenerate: bool = False

    @classmethod
    def from_counts(cls, substitutions: int, deletions: int, insertions: int, ref_len: int) -> "WerBreakdown":
        if ref_len > 0:
            rate = (substitutions + deletions + insertions) / ref_len
            degenerate = False
        elif insertions > 0:
            # Empty reference with hypothesis words: define wer = insertions / 1
            # and flag it instead of dividing by zero.
            rate = float(insertions)
            degenerate = True
        else:
            rate = 0.0
            degenerate = False
        return cls(substitutions, deletions, insertions, ref_len, rate, degenerate)

    def merge(self, other: "WerBreakdown") -> "WerBreakdown":
        return WerBreakdown.from_counts(
            self.substitutions + other.substitutions,
            self.deletions + other.deletions,
            self.insertions + other.insertions,
            self.ref_len + other.ref_len,
        )

    def to_dict(self) -> dict:
        payload = {
            "substitutions": self.substitutions,
            "deletions": self.deletions,
            "insertions": self.insertions,
            "ref_len": self.ref_len,
            "wer": self.wer,
        }
        if self.degenerate:
            payload["degenerate"] = True
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "WerBreakdown":
        return cls.from_counts(
            payload["substitutions"],
            payload["deletions"],
            payload["insertions"],
            payload["ref_len"],
        )


def wer_tokens(ref: Sequence[str], hyp: Sequence[str]) -> WerBreakdown:
    """Minimal edit counts between token sequences (all edits cost 1).

    Backtracking tie-break prefers substitution over deletion over insertion,
    making the S/D/I split deterministic; the total is the edit distance.
    """
    m, n = len(ref), len(hyp)
    # Full cost matrix; row i is edits between ref[:i] and hyp[:j].
    dist = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        dist[i][0] = i
    dist[0] = list(range(n + 1))
    for i in range(1, m + 1):
        ref_word = ref[i - 1]
        row = dist[i]
        prev = dist[i - 1]
        for j in range(1, n + 1):
            if ref_word == hyp[j - 1]:
                row[j] = prev[j - 1]
            else:
                best = prev[j - 1]
                if prev[j] < best:
                    best = prev[j]
                if row[j - 1] < best:
                    best = row[j - 1]
                row[j] = best + 1

    substitutions = deletions = insertions = 0
    i, j = m, n
    while i > 0 or j > 0:
        here = dist[i][j]
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and dist[i - 1][j - 1] == here:
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and dist[i - 1][j - 1] + 1 == here:
            substitutions += 1
            i -= 1
            j -= 1
        elif i > 0 and dist[i - 1][j] + 1 == here:
            deletions += 1
            i -= 1
        else:
            insertions += 1
            j -= 1
    return WerBreakdown.from_counts(substitutions, deletions, insertions, m)


def wer(reference: str, hypothesis: str) -> WerBreakdown:
    return wer_tokens(tokenize_words(reference), tokenize_words(hypothesis))


def o_wer(reference: str, hypothesis: str) -> WerBreakdown:
    """WER over raw tokens: capitalization and attached punctuation count."""
    return wer(reference, hypothesis)


def n_wer(reference: str, hypothesis: str) -> WerBreakdown:
    """WER after lowercasing and punctuation stripping on both sides."""
    return wer(normalize_for_wer(reference), normalize_for_wer(hypothesis))


@dataclass(frozen=True)
class TimestampEvalResult:
    """Word-timestamp match counts with F1 and mean IoU."""

    tp: int
    fp: int
    fn: int
    f1: float
    miou: float
    collar_s: float
    iou_sum: float = 0.0
    miou_matched_only: bool = False

    @classmethod
    def from_counts(
        cls,
        tp: int,
        fp: int,
        fn: int,
        iou_sum: float,
        collar_s: float,
        matched_only: bool = False,
        n_predicted: int | None = None,
    ) -> "TimestampEvalResult":
        denom = 2 * tp + fp + fn
        f1 = (2 * tp / denom) if denom > 0 else 1.0
        n_ref = tp + fn
        if matched_only:
            miou = (iou_sum / tp) if tp > 0 else 0.0
        elif n_ref > 0:
            miou = iou_sum / n_ref
        else:
            # No reference words: vacuously perfect only when nothing was predicted.
            predicted = fp if n_predicted is None else n_predicted
            miou = 1.0 if predicted == 0 else 0.0
        return cls(tp, fp, fn, f1, miou, collar_s, iou_sum, matched_only)

    def merge(self, other: "TimestampEvalResult") -> "TimestampEvalResult":
        if other.collar_s != self.collar_s or other.miou_matched_only != self.miou_matched_only:
            raise ValueError("cannot merge timestamp results with different settings")
        return TimestampEvalResult.from_counts(
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn + other.fn,
            self.iou_sum + other.iou_sum,
            self.collar_s,
            self.miou_matched_only,
        )


def _interval_iou(a: AlignedWord, b: AlignedWord) -> float:
    inter = min(a.end_s, b.end_s) - max(a.start_s, b.start_s)
    union = max(a.end_s, b.end_s) - min(a.start_s, b.start_s)
    if union <= 0.0:
        # Both intervals are the same zero-length point.
        return 1.0
    return max(inter, 0.0) / union


def timestamp_eval(
    reference: Sequence[AlignedWord],
    predicted: Sequence[AlignedWord],
    collar_s: float = 0.2,
    miou_matched_only: bool = False,
) -> TimestampEvalResult:
    """Greedy one-to-one matching of predicted words against reference words.

    A prediction matches an unmatched reference word when the normalized
    texts are equal and both the start and end deviations are within the
    collar. mIoU averages over all reference words (unmatched scoring 0)
    unless ``miou_matched_only`` is set.
    """
    if collar_s <= 0:
        raise ValueError(f"collar_s must be positive, got {collar_s}")
    matched = [False] * len(reference)
    ref_norms = [normalize_for_wer(w.text) for w in reference]
    tp = 0
    iou_sum = 0.0
    for pred in predicted:
        pred_norm = normalize_for_wer(pred.text)
        for ri, ref_word in enumerate(reference):
            if matched[ri]:
                continue
            if ref_word.start_s > pred.start_s + collar_s:
                break  # reference is sorted by start; nothing further can match
            if (
                ref_norms[ri] == pred_norm
                and abs(pred.start_s - ref_word.start_s) <= collar_s
                and abs(pred.end_s - ref_word.end_s) <= collar_s
            ):
                matched[ri] = True
                tp += 1
                iou_sum += _interval_iou(ref_word, pred)
                break
    fp = len(predicted) - tp
    fn = len(reference) - tp
    return TimestampEvalResult.from_counts(
        tp, fp, fn, iou_sum, collar_s, miou_matched_only, n_predicted=len(predicted)
    )

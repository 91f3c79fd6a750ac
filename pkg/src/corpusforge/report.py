"""Report generators: stage-size accounting and the per-dataset metric table."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .manifest import STAGES, UtteranceRecord, read_manifest, stage_manifest_name
from .metrics import TimestampEvalResult, WerBreakdown, n_wer, o_wer, timestamp_eval


def _hours(seconds: float) -> float:
    return round(seconds / 3600.0, 2)


def build_run_report(output_dir: str | Path, group_by: str = "source_dataset") -> dict:
    """Fold the per-stage manifests into hour totals.

    Returns a payload with one row per group carrying Original, Sampled, and
    Final hours plus retained hours after every stage, and a matching Total
    row. "Original" counts everything that entered the run, "Sampled" what
    survived the sampling stage, "Final" what survived all stages.
    """
    if group_by not in ("source_dataset", "region"):
        raise ValueError(f"unsupported group_by {group_by!r}")
    out = Path(output_dir)
    original: dict[str, float] = {}
    passed_per_stage: dict[str, dict[str, float]] = {stage: {} for stage in STAGES}
    stages_present: list[str] = []
    for stage in STAGES:
        stage_path = out / stage_manifest_name(stage)
        if not stage_path.exists():
            break
        stages_present.append(stage)
        for record in read_manifest(stage_path):
            group = getattr(record, group_by) or "unknown"
            if stage == STAGES[0]:
                original[group] = original.get(group, 0.0) + record.duration_s
            if not record.is_rejected():
                bucket = passed_per_stage[stage]
                bucket[group] = bucket.get(group, 0.0) + record.duration_s
    if not stages_present:
        raise FileNotFoundError(f"no stage manifests found under {out}")
    last_stage = stages_present[-1]
    groups = sorted(original, key=lambda g: (-original[g], g))
    rows = []
    for group in groups:
        row = {
            "group": group,
            "original_h": _hours(original.get(group, 0.0)),
            "sampled_h": _hours(passed_per_stage[STAGES[0]].get(group, 0.0)),
            "final_h": _hours(passed_per_stage[last_stage].get(group, 0.0)),
            "stages_h": {
                stage: _hours(passed_per_stage[stage].get(group, 0.0))
                for stage in stages_present
            },
        }
        rows.append(row)
    totals = {
        "group": "Total",
        "original_h": _hours(sum(original.values())),
        "sampled_h": _hours(sum(passed_per_stage[STAGES[0]].values())),
        "final_h": _hours(sum(passed_per_stage[last_stage].values())),
        "stages_h": {
            stage: _hours(sum(passed_per_stage[stage].values())) for stage in stages_present
        },
    }
    return {
        "group_by": group_by,
        "stages": stages_present,
        "rows": rows,
        "total": totals,
        "complete": last_stage == STAGES[-1],
    }


def format_run_report(payload: dict, seed: int) -> str:
    """Plain-text run report; columns Original | Sampled | Final plus stage detail."""
    lines = [f"pipeline run report | seed={seed} | grouped by {payload['group_by']}"]
    header = f"{'group':<16}{'Original':>10}{'Sampled':>10}{'Final':>10}"
    lines.append(header)
    lines.append("-" * len(header))
    for row in payload["rows"] + [payload["total"]]:
        lines.append(
            f"{row['group']:<16}{row['original_h']:>10.2f}{row['sampled_h']:>10.2f}"
            f"{row['final_h']:>10.2f}"
        )
    lines.append("")
    lines.append("retained hours by stage (Total):")
    for stage in payload["stages"]:
        lines.append(f"  {stage:<12}{payload['total']['stages_h'][stage]:>10.2f}")
    return "\n".join(lines) + "\n"


def write_run_report(payload: dict, seed: int, output_dir: str | Path) -> Path:
    out = Path(output_dir)
    (out / "report.json").write_text(
        json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True), encoding="utf-8"
    )
    report_path = out / "report.txt"
    report_path.write_text(format_run_report(payload, seed), encoding="utf-8")
    return report_path


@dataclass(frozen=True)
class ScoreRow:
    group: str
    o_wer: float
    n_wer: float
    f1: Optional[float]
    miou: Optional[float]
    n_utterances: int


def score_manifests(
    reference: Sequence[UtteranceRecord],
    hypothesis: Sequence[UtteranceRecord],
    collar_s: float = 0.2,
    miou_matched_only: bool = False,
) -> list[ScoreRow]:
    """Per-dataset O-WER / N-WER / F1 / mIoU, pooled from per-record counts.

    Records are matched by utterance_id; a reference record with no matching
    hypothesis scores as an empty hypothesis. Timestamp metrics are reported
    only for groups where reference words exist.
    """
    hyp_by_id = {r.utterance_id: r for r in hypothesis}
    o_pool: dict[str, WerBreakdown] = {}
    n_pool: dict[str, WerBreakdown] = {}
    ts_pool: dict[str, TimestampEvalResult] = {}
    counts: dict[str, int] = {}

    def pooled(pool: dict, group: str, item):
        pool[group] = pool[group].merge(item) if group in pool else item

    for ref in reference:
        group = ref.source_dataset
        counts[group] = counts.get(group, 0) + 1
        hyp = hyp_by_id.get(ref.utterance_id)
        hyp_text = (hyp.transcript if hyp else "") or ""
        ref_text = ref.transcript or ""
        pooled(o_pool, group, o_wer(ref_text, hyp_text))
        pooled(n_pool, group, n_wer(ref_text, hyp_text))
        if ref.words:
            hyp_words = (hyp.words if hyp else None) or []
            pooled(
                ts_pool,
                group,
                timestamp_eval(ref.words, hyp_words, collar_s, miou_matched_only),
            )

    rows = []
    for group in sorted(counts):
        ts = ts_pool.get(group)
        rows.append(
            ScoreRow(
                group=group,
                o_wer=o_pool[group].wer,
                n_wer=n_pool[group].wer,
                f1=ts.f1 if ts else None,
                miou=ts.miou if ts else None,
                n_utterances=counts[group],
            )
        )
    if rows:
        o_all = None
        n_all = None
        ts_all = None
        for group in counts:
            o_all = o_pool[group] if o_all is None else o_all.merge(o_pool[group])
            n_all = n_pool[group] if n_all is None else n_all.merge(n_pool[group])
            if group in ts_pool:
                ts_all = ts_pool[group] if ts_all is None else ts_all.merge(ts_pool[group])
        rows.append(
            ScoreRow(
                group="Overall",
                o_wer=o_all.wer,
                n_wer=n_all.wer,
                f1=ts_all.f1 if ts_all else None,
                miou=ts_all.miou if ts_all else None,
                n_utterances=sum(counts.values()),
            )
        )
    return rows


def format_score_table(rows: Sequence[ScoreRow], collar_s: float, seed: int | None = None) -> str:
    """Per-dataset metric table; O-WER/N-WER/F1/mIoU rendered as percentages."""
    head = f"scoring report | collar={collar_s}s"
    if seed is not None:
        head += f" | seed={seed}"
    lines = [head]
    header = f"{'dataset':<16}{'#utts':>7}{'O-WER':>9}{'N-WER':>9}{'F1':>9}{'mIoU':>9}"
    lines.append(header)
    lines.append("-" * len(header))

    def pct(value: Optional[float]) -> str:
        return f"{value * 100:.2f}" if value is not None else "-"

    for row in rows:
        lines.append(
            f"{row.group:<16}{row.n_utterances:>7}{pct(row.o_wer):>9}{pct(row.n_wer):>9}"
            f"{pct(row.f1):>9}{pct(row.miou):>9}"
        )
    return "\n".join(lines) + "\n"

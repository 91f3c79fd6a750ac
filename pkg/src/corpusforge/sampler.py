"""Diversity sampling: cap selected duration per speaker/channel/region group."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .manifest import UtteranceRecord

GROUP_FIELDS = ("speaker_id", "group_key", "region")
ORDERS = ("manifest_order", "shuffled")


@dataclass(frozen=True)
class SamplingPolicy:
    """Duration cap per group, e.g. 600 s per speaker_id."""

    group_field: str
    cap_seconds: float
    order: str = "manifest_order"
    seed: int = 0

    def __post_init__(self):
        if self.group_field not in GROUP_FIELDS:
            raise ValueError(f"group_field must be one of {GROUP_FIELDS}, got {self.group_field!r}")
        if self.cap_seconds <= 0:
            raise ValueError(f"cap_seconds must be positive, got {self.cap_seconds}")
        if self.order not in ORDERS:
            raise ValueError(f"order must be one of {ORDERS}, got {self.order!r}")


def sample_by_group(
    records: list[UtteranceRecord], policy: SamplingPolicy
) -> list[UtteranceRecord]:
    """Greedy no-overshoot selection under a per-group duration cap.

    Records are considered in policy order (manifest order or a seeded
    shuffle) and a record is kept only if its group's running total plus its
    duration stays within the cap. Records missing the group field are
    exempt from capping. The returned list preserves input relative order.
    """
    indices = list(range(len(records)))
    if policy.order == "shuffled":
        random.Random(policy.seed).shuffle(indices)

    totals: dict[str, float] = {}
    selected: set[int] = set()
    for idx in indices:
        record = records[idx]
        group = getattr(record, policy.group_field)
        if group is None:
            selected.add(idx)
            continue
        running = totals.get(group, 0.0)
        if running + record.duration_s <= policy.cap_seconds:
            totals[group] = running + record.duration_s
            selected.add(idx)
    return [records[i] for i in sorted(selected)]

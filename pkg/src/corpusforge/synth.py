"""Synthetic corpus generation for desk-scale validation.

Emits sine-tone WAV stubs, a manifest, and per-clip ``<wav>.txt`` sidecars
holding the true transcript (what the mock transcribers corrupt). Everything
is seeded and deterministic. Sample counts are kept on the millisecond grid
(multiples of rate/1000) so durations survive resampling and 3-decimal
serialization exactly.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import AudioBuffer, save_wav
from .manifest import UtteranceRecord, write_manifest

# Vietnamese-ish vocabulary; every character passes the vi profile whitelist.
VOCAB = (
    "xin", "chào", "bạn", "tôi", "là", "người", "việt", "nam", "hôm", "nay",
    "trời", "đẹp", "quá", "cảm", "ơn", "rất", "nhiều", "đi", "học", "về",
    "nhà", "ăn", "cơm", "uống", "nước", "nói", "chuyện", "vui", "vẻ", "làm",
    "việc", "chăm", "chỉ", "mùa", "xuân", "hoa", "nở", "khắp", "nơi", "em",
)

REGION_NAMES = ("north", "central", "south")


@dataclass
class SynthSpec:
    """Knobs for the generated corpus; fractions are per-record probabilities."""

    n_records: int
    seed: int = 0
    duration_min_s: float = 2.0
    duration_max_s: float = 8.0
    region_mix: dict[str, float] = field(
        default_factory=lambda: {"north": 2.0, "central": 1.0, "south": 1.0}
    )
    no_transcript_fraction: float = 0.0
    manual_fraction: float = 0.0
    provided_error_fraction: float = 0.0
    overlong_fraction: float = 0.0
    badchar_fraction: float = 0.0
    digit_fraction: float = 0.3
    max_digit_value: int = 99999
    words_min: int = 4
    words_max: int = 12
    n_speakers: int = 20
    n_channels: int = 8
    sample_rates: tuple[int, ...] = (16000,)
    sources: tuple[str, ...] = ("synthA", "synthB")
    amplitude: float = 0.25

    def __post_init__(self):
        if self.n_records < 0:
            raise ValueError("n_records must be >= 0")
        if not (0 < self.duration_min_s <= self.duration_max_s):
            raise ValueError("need 0 < duration_min_s <= duration_max_s")
        for rate in self.sample_rates:
            if rate % 1000 != 0:
                raise ValueError(f"sample rates must be multiples of 1000 Hz, got {rate}")


def allocate_regions(n: int, mix: dict[str, float]) -> list[str]:
    """Largest-remainder allocation: exact counts for exact ratios."""
    total = sum(mix.values())
    if total <= 0:
        raise ValueError("region mix weights must sum to a positive value")
    quotas = {region: n * weight / total for region, weight in mix.items()}
    counts = {region: math.floor(q) for region, q in quotas.items()}
    leftover = n - sum(counts.values())
    by_remainder = sorted(mix, key=lambda r: (-(quotas[r] - counts[r]), r))
    for region in by_remainder[:leftover]:
        counts[region] += 1
    out: list[str] = []
    for region in sorted(counts):
        out.extend([region] * counts[region])
    return out


def _make_transcript(rng: random.Random, spec: SynthSpec) -> str:
    n_words = rng.randint(spec.words_min, spec.words_max)
    words = [rng.choice(VOCAB) for _ in range(n_words)]
    if rng.random() < spec.digit_fraction:
        for _ in range(rng.randint(1, 2)):
            token = str(rng.randint(0, spec.max_digit_value))
            words.insert(rng.randrange(len(words) + 1), token)
    return " ".join(words)


def _plant_error(rng: random.Random, transcript: str) -> str:
    words = transcript.split()
    idx = rng.randrange(len(words))
    replacement = rng.choice([w for w in VOCAB if w != words[idx]])
    words[idx] = replacement
    return " ".join(words)


def _sine_wav(rng: random.Random, duration_s: float, rate: int, amplitude: float) -> AudioBuffer:
    # Snap the frame count to the millisecond grid so duration_s is exact
    # at 3 decimals and survives integer-ratio resampling.
    frames_per_ms = rate // 1000
    n = max(frames_per_ms, round(duration_s * 1000) * frames_per_ms)
    freq = rng.uniform(100.0, 400.0)
    t = np.arange(n) / rate
    samples = amplitude * np.sin(2 * np.pi * freq * t)
    return AudioBuffer(samples=samples, sample_rate_hz=rate)


def generate_synthetic_corpus(spec: SynthSpec, out_dir: str | Path) -> list[UtteranceRecord]:
    """Write manifest.jsonl, audio stubs, and truth sidecars under out_dir."""
    out = Path(out_dir)
    audio_dir = out / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(spec.seed)

    regions = allocate_regions(spec.n_records, spec.region_mix)
    rng.shuffle(regions)

    records: list[UtteranceRecord] = []
    for i in range(spec.n_records):
        utt_id = f"utt_{i:05d}"
        rate = rng.choice(spec.sample_rates)
        if rng.random() < spec.overlong_fraction:
            duration = rng.uniform(31.0, 45.0)
        else:
            duration = rng.uniform(spec.duration_min_s, spec.duration_max_s)
        truth = _make_transcript(rng, spec)
        plant_badchar = rng.random() < spec.badchar_fraction

        buf = _sine_wav(rng, duration, rate, spec.amplitude)
        rel_path = f"audio/{utt_id}.wav"
        save_wav(buf, out / rel_path)
        (out / (rel_path + ".txt")).write_text(truth + "\n", encoding="utf-8")

        transcript: str | None
        origin: str | None
        if rng.random() < spec.no_transcript_fraction:
            transcript, origin = None, None
        elif rng.random() < spec.manual_fraction:
            transcript, origin = truth, "manual"
        else:
            origin = "provided"
            transcript = truth
            if rng.random() < spec.provided_error_fraction:
                transcript = _plant_error(rng, truth)
        if transcript is not None and plant_badchar:
            transcript = transcript + " $" + str(rng.randint(1, 99))

        records.append(
            UtteranceRecord(
                utterance_id=utt_id,
                source_dataset=rng.choice(spec.sources),
                audio_path=rel_path,
                sample_rate_hz=rate,
                duration_s=round(buf.duration_s, 3),
                transcript=transcript,
                transcript_origin=origin,
                speaker_id=f"spk{rng.randrange(spec.n_speakers):03d}",
                group_key=f"ch{rng.randrange(spec.n_channels):02d}",
                region=regions[i],
            )
        )

    write_manifest(records, out / "manifest.jsonl")
    return records


def mock_pipeline_config(spec: SynthSpec, noise: dict | None = None) -> dict:
    """Ready-to-run config mapping with seeded mocks for this corpus.

    ``noise`` configures the second transcriber; pass ``{}`` for a noise-free
    pair.
    """
    if noise is None:
        noise = {"substitution_rate": 0.02, "deletion_rate": 0.01, "insertion_rate": 0.01}
    return {
        "char_profile": "vi",
        "seed": spec.seed,
        "number_lexicon": "vi",
        "adapters": {
            "transcribe_a": {"kind": "mock_asr", "seed": spec.seed + 1},
            "transcribe_b": {"kind": "mock_asr", "seed": spec.seed + 2, **noise},
            "punctuate": {"kind": "mock_punctuator", "seed": spec.seed + 3},
            "align": {
                "kind": "mock_aligner",
                "mode": "jittered",
                "seed": spec.seed + 4,
                "max_jitter_s": 0.02,
            },
        },
    }

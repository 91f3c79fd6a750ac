from __future__ import annotations

import random

import pytest

from corpusforge.manifest import AlignedWord, UtteranceRecord


@pytest.fixture
def rng():
    return random.Random(1234)


def make_record(
    utt_id: str = "utt_0",
    source: str = "srcA",
    duration_s: float = 2.0,
    **kwargs,
) -> UtteranceRecord:
    defaults = dict(
        utterance_id=utt_id,
        source_dataset=source,
        audio_path=f"audio/{utt_id}.wav",
        sample_rate_hz=16000,
        duration_s=duration_s,
    )
    defaults.update(kwargs)
    return UtteranceRecord(**defaults)


def uniform_words(text: str, duration_s: float) -> list[AlignedWord]:
    tokens = text.split()
    step = duration_s / len(tokens)
    return [
        AlignedWord(text=tok, start_s=i * step, end_s=(i + 1) * step)
        for i, tok in enumerate(tokens)
    ]

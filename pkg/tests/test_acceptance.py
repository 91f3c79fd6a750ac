"""Acceptance suite: one test per criterion, one printed line per criterion.

Run with ``pytest tests/test_acceptance.py -v -s``. Criterion 10's first half
(reference adapter protocol conformance) lives in the separate adapter
package's own test suite; its second half, the primary suite running with
mocks only and no external component present, is exactly what this file does.
"""

from __future__ import annotations

import itertools
import random
import time

import pytest

from corpusforge.adapters import MockAsr
from corpusforge.align import (
    QuantizedTimestamp,
    parse_timestamp_tokens,
    quantize,
    serialize_timestamp_tokens,
)
from corpusforge.gates import consensus_filter, punct_fidelity_gate
from corpusforge.manifest import STAGES, AlignedWord, read_manifest, stage_report
from corpusforge.metrics import timestamp_eval, wer, wer_tokens
from corpusforge.numwords import get_lexicon
from corpusforge.pipeline import PipelineConfig, run_pipeline
from corpusforge.report import format_score_table, score_manifests
from corpusforge.synth import SynthSpec, generate_synthetic_corpus, mock_pipeline_config
from corpusforge.textnorm import expand_numbers, revert_numbers

from conftest import make_record, uniform_words


def _report(criterion: int, detail: str) -> None:
    print(f"\n[criterion {criterion}] PASS  {detail}")


# -- 1. WER oracle equivalence ---------------------------------------------------

def _levenshtein_distance(ref, hyp) -> int:
    """Independent oracle: two-row iterative edit distance, no backtracking."""
    previous = list(range(len(hyp) + 1))
    for i, ref_tok in enumerate(ref, 1):
        current = [i] + [0] * len(hyp)
        for j, hyp_tok in enumerate(hyp, 1):
            current[j] = min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (ref_tok != hyp_tok),
            )
        previous = current
    return previous[-1]


def test_criterion_01_wer_oracle_equivalence():
    started = time.perf_counter()
    symbols = ("a", "b", "c")
    sequences = [()]
    for length in range(1, 7):
        sequences.extend(itertools.product(symbols, repeat=length))
    assert len(sequences) == 1093

    checked = 0
    for ref in sequences:
        for hyp in sequences:
            breakdown = wer_tokens(ref, hyp)
            edits = breakdown.substitutions + breakdown.deletions + breakdown.insertions
            expected = _levenshtein_distance(ref, hyp)
            assert edits == expected, (ref, hyp)
            if ref:
                assert breakdown.wer == expected / len(ref)
            checked += 1

    rng = random.Random(20_240_601)
    alphabet = ["w%d" % k for k in range(12)]
    for _ in range(10_000):
        ref = [rng.choice(alphabet) for _ in range(rng.randint(7, 40))]
        hyp = [rng.choice(alphabet) for _ in range(rng.randint(7, 40))]
        breakdown = wer_tokens(ref, hyp)
        edits = breakdown.substitutions + breakdown.deletions + breakdown.insertions
        assert edits == _levenshtein_distance(ref, hyp)
        checked += 1

    elapsed = time.perf_counter() - started
    assert elapsed < 60.0, f"runtime {elapsed:.1f}s exceeds 60s"
    _report(1, f"wer equals brute-force oracle on {checked:,} pairs in {elapsed:.1f}s")


# -- 2. Gate boundary ---------------------------------------------------------------

def test_criterion_02_gate_boundary():
    ref20 = " ".join(f"w{i}" for i in range(20))
    hyp20 = ("zz " + ref20.split(" ", 1)[1])
    decision20 = consensus_filter(ref20, hyp20, 0.05)
    assert decision20.evidence.wer == 0.05
    assert decision20.verdict == "rejected"

    ref21 = " ".join(f"w{i}" for i in range(21))
    hyp21 = ("zz " + ref21.split(" ", 1)[1])
    decision21 = consensus_filter(ref21, hyp21, 0.05)
    assert decision21.evidence.wer == pytest.approx(1 / 21)
    assert decision21.verdict == "passed"
    _report(2, "WER exactly 5.00% rejected (strict <); 1/21 accepted")


# -- 3. Synthetic retention vs analytic oracle ----------------------------------------

def test_criterion_03_synthetic_retention(tmp_path):
    started = time.perf_counter()
    spec = SynthSpec(
        n_records=1000,
        seed=303,
        duration_min_s=1.0,
        duration_max_s=2.0,
        no_transcript_fraction=1.0,
        words_min=6,
        words_max=14,
    )
    corpus = tmp_path / "corpus"
    records = generate_synthetic_corpus(spec, corpus)
    noise = {"substitution_rate": 0.02, "deletion_rate": 0.01, "insertion_rate": 0.01}
    config = PipelineConfig.from_dict(mock_pipeline_config(spec, noise=noise))
    result = run_pipeline(config, corpus / "manifest.jsonl", tmp_path / "run")

    mock_a = MockAsr(seed=spec.seed + 1)
    mock_b = MockAsr(seed=spec.seed + 2, **noise)
    final = {r.utterance_id: r for r in result.final_records}
    mismatches = 0
    retained = 0
    for record in records:
        truth = (corpus / (record.audio_path + ".txt")).read_text(encoding="utf-8").strip()
        hyp_a = mock_a.corrupt(truth, record.utterance_id)
        hyp_b = mock_b.corrupt(truth, record.utterance_id)
        expected = consensus_filter(hyp_a, hyp_b, config.wer_threshold).verdict
        got = final[record.utterance_id].stage_status["transcribe"].state
        if got != expected:
            mismatches += 1
        if got == "passed":
            retained += 1
    elapsed = time.perf_counter() - started
    assert mismatches == 0, f"{mismatches} verdict mismatches"
    assert elapsed < 120.0, f"runtime {elapsed:.1f}s exceeds 2min"
    _report(
        3,
        f"1000-record retention ({retained} kept) matches the per-sample "
        f"oracle with 0 mismatches in {elapsed:.1f}s",
    )


# -- 4. Number round trip ----------------------------------------------------------------

def test_criterion_04_number_round_trip():
    rng = random.Random(404)
    vocab = ["xin", "chào", "đồng", "tốn", "về", "nhà", "em", "trời"]
    lexicons = [get_lexicon("vi"), get_lexicon("en")]
    failures = 0
    for case in range(10_000):
        lexicon = lexicons[case % 2]
        tokens = [rng.choice(vocab) for _ in range(rng.randint(1, 8))]
        for _ in range(rng.randint(1, 3)):
            digit = str(rng.randint(0, 10**9))
            if rng.random() < 0.3:
                digit += rng.choice([",", ".", "!", "?"])
            tokens.insert(rng.randrange(len(tokens) + 1), digit)
        text = " ".join(tokens)
        expanded, mappings = expand_numbers(text, lexicon)
        duration_ms = rng.randint(800, 20_000)
        words = uniform_words(expanded, duration_ms / 1000.0)
        reverted = revert_numbers(words, mappings)
        if " ".join(w.text for w in reverted) != text:
            failures += 1
            continue
        collapsed_before = 0  # words removed by earlier span merges
        for mapping in sorted(mappings, key=lambda m: m.word_index_start):
            span = words[mapping.word_index_start : mapping.word_index_start + mapping.word_index_count]
            merged = reverted[mapping.word_index_start - collapsed_before]
            collapsed_before += mapping.word_index_count - 1
            if (merged.start_s, merged.end_s) != (span[0].start_s, span[-1].end_s):
                failures += 1
    assert failures == 0
    _report(4, "10,000 expand→align→revert round trips exact; merged intervals are span hulls")


# -- 5. Quantization -------------------------------------------------------------------

def test_criterion_05_quantization():
    rng = random.Random(505)
    values = [rng.uniform(0.0, 30.0) for _ in range(10_000)]
    for value in values:
        q = quantize(value)
        assert abs(q.seconds - value) <= 0.010 + 1e-12
        assert abs(q.seconds * 50 - round(q.seconds * 50)) < 1e-9  # exact multiple of 0.02
    previous = -1
    for value in sorted(values):
        ticks = quantize(value).ticks
        assert ticks >= previous
        previous = ticks
    for _ in range(500):
        n = rng.randint(1, 12)
        ticks = sorted(rng.sample(range(1501), k=min(2 * n, 1500)))
        words = [
            AlignedWord(f"w{i}", QuantizedTimestamp(ticks[i]).seconds, QuantizedTimestamp(ticks[i + 1]).seconds)
            for i in range(0, len(ticks) - 1, 2)
        ]
        text = serialize_timestamp_tokens(words)
        assert parse_timestamp_tokens(text) == words
        assert serialize_timestamp_tokens(parse_timestamp_tokens(text)) == text
    _report(5, "10,000 quantizations within 10ms on the 0.02 grid; tokens round-trip byte-exact")


# -- 6. Punctuation-fidelity gate ---------------------------------------------------------

def test_criterion_06_punct_fidelity_gate():
    rng = random.Random(606)
    vocab = ["xin", "chào", "việt", "nam", "hôm", "nay", "trời", "đẹp", "đi", "học"]
    punct = [",", ".", "!", "?"]
    passed = rejected = 0
    for _ in range(10_000):
        words = [rng.choice(vocab) for _ in range(rng.randint(2, 12))]
        raw = " ".join(words)
        formatted = []
        for word in words:
            if rng.random() < 0.5:
                word = word.capitalize()
            if rng.random() < 0.3:
                word += rng.choice(punct)
            formatted.append(word)
        if punct_fidelity_gate(raw, " ".join(formatted)).passed:
            passed += 1
    assert passed == 10_000

    for _ in range(10_000):
        words = [rng.choice(vocab) for _ in range(rng.randint(2, 12))]
        raw = " ".join(words)
        edited = list(words)
        op = rng.choice(["insert", "delete", "substitute"])
        if op == "insert":
            edited.insert(rng.randrange(len(edited) + 1), rng.choice(vocab))
        elif op == "delete":
            del edited[rng.randrange(len(edited))]
        else:
            idx = rng.randrange(len(edited))
            edited[idx] = next(w for w in vocab if w != edited[idx])
        if not punct_fidelity_gate(raw, " ".join(edited)).passed:
            rejected += 1
    assert rejected == 10_000
    _report(6, "format-only outputs pass 100%; token edits rejected 100% (10,000 cases each)")


# -- 7. Timestamp metrics ---------------------------------------------------------------

def test_criterion_07_timestamp_metrics():
    rng = random.Random(707)
    reference = uniform_words("xin chào việt nam em", 2.5)
    identity = timestamp_eval(reference, reference, 0.2)
    assert identity.f1 == 1.0 and identity.miou == 1.0
    assert timestamp_eval(reference, [], 0.2).f1 == 0.0

    interval = timestamp_eval(
        [AlignedWord("w", 1.00, 2.00)], [AlignedWord("w", 1.10, 1.90)], 0.2
    )
    assert interval.tp == 1 and abs(interval.miou - 0.800) <= 1e-9

    for _ in range(1000):
        n = rng.randint(1, 8)
        ref = uniform_words(" ".join(f"w{i}" for i in range(n)), 4.0)
        pred = []
        for w in ref:
            start = max(0.0, w.start_s + rng.uniform(-0.35, 0.35))
            pred.append(AlignedWord(w.text, start, max(start, w.end_s + rng.uniform(-0.35, 0.35))))
        collars = sorted([rng.uniform(0.01, 0.5), rng.uniform(0.01, 0.5)])
        assert (
            timestamp_eval(ref, pred, collars[0]).tp <= timestamp_eval(ref, pred, collars[1]).tp
        )
    _report(7, "identity F1/mIoU = 1.0; empty F1 = 0; IoU 0.800±1e-9; collar monotone on 1000 cases")


# -- 8. Pipeline monotonicity and resume ----------------------------------------------------

def test_criterion_08_pipeline_monotonicity_and_resume(tmp_path):
    spec = SynthSpec(
        n_records=150,
        seed=808,
        duration_min_s=1.0,
        duration_max_s=3.0,
        no_transcript_fraction=0.3,
        manual_fraction=0.15,
        provided_error_fraction=0.25,
        overlong_fraction=0.05,
        badchar_fraction=0.05,
        sample_rates=(8000, 16000, 32000),
    )
    corpus = tmp_path / "corpus"
    generate_synthetic_corpus(spec, corpus)
    config = PipelineConfig.from_dict(mock_pipeline_config(spec))
    manifest = corpus / "manifest.jsonl"

    straight = run_pipeline(config, manifest, tmp_path / "run_straight")
    hours = []
    for stage in STAGES:
        records = read_manifest(straight.stage_paths[stage])
        hours.append(sum(r.duration_s for r in records if not r.is_rejected()) / 3600.0)
    for earlier, later in zip(hours, hours[1:]):
        assert later <= earlier + 1e-9, f"retained hours increased: {hours}"

    interrupted = run_pipeline(config, manifest, tmp_path / "run_resumed", stop_after="punct")
    assert not interrupted.completed
    resumed = run_pipeline(config, manifest, tmp_path / "run_resumed")
    assert resumed.completed
    assert (
        (tmp_path / "run_straight/final.jsonl").read_bytes()
        == (tmp_path / "run_resumed/final.jsonl").read_bytes()
    )
    _report(8, "retained hours non-increasing over 8 stages; resumed run byte-identical")


# -- 9. Report shape --------------------------------------------------------------------

def test_criterion_09_report_shape(tmp_path):
    rng = random.Random(909)
    records = []
    raw_rows = []
    for i in range(120):
        source = rng.choice(["dsA", "dsB", "dsC"])
        region = rng.choice(["north", "central", "south", None])
        duration = rng.randint(1, 3000) / 1.0
        rejected = rng.random() < 0.35
        record = make_record(f"u{i}", source=source, duration_s=duration, region=region)
        if rejected:
            from corpusforge.manifest import with_stage

            record = with_stage(record, "clean", "rejected", "r")
        records.append(record)
        raw_rows.append((source, region or "unknown", duration, rejected))

    for group_by, column in (("source_dataset", 0), ("region", 1)):
        rows = stage_report(records, group_by=group_by)
        # independent spreadsheet-style summation
        passed_sum: dict[str, float] = {}
        rejected_sum: dict[str, float] = {}
        for source, region, duration, rejected in raw_rows:
            key = (source, region)[column]
            bucket = rejected_sum if rejected else passed_sum
            bucket[key] = bucket.get(key, 0.0) + duration
        assert {r.group for r in rows} == set(passed_sum) | set(rejected_sum)
        for row in rows:
            assert row.hours_passed == round(passed_sum.get(row.group, 0.0) / 3600, 2)
            assert row.hours_rejected == round(rejected_sum.get(row.group, 0.0) / 3600, 2)
        ordered = [r.hours_passed for r in rows]
        assert ordered == sorted(ordered, reverse=True)

    # scorer table: per-dataset rows + Overall, columns O-WER/N-WER/F1/mIoU
    ref = [
        make_record("a", source="dsA", transcript="Xin chào.", words=uniform_words("Xin chào.", 1.0)),
        make_record("b", source="dsB", transcript="một hai ba", words=uniform_words("một hai ba", 1.5)),
    ]
    hyp = [
        make_record("a", source="dsA", transcript="xin chào", words=uniform_words("xin chào", 1.0)),
        make_record("b", source="dsB", transcript="một hai ba", words=uniform_words("một hai ba", 1.5)),
    ]
    score_rows = score_manifests(ref, hyp, collar_s=0.2)
    assert [r.group for r in score_rows] == ["dsA", "dsB", "Overall"]
    table = format_score_table(score_rows, 0.2, seed=909)
    header = table.splitlines()[1]
    for column in ("O-WER", "N-WER", "F1", "mIoU"):
        assert column in header
    assert "collar=0.2" in table and "seed=909" in table
    _report(9, "stage report and scorer reproduce the expected column structures; totals match")

"""Stage-sequential, record-parallel pipeline execution with resume.

Each stage writes its own manifest (``01_sample.jsonl`` .. ``08_numrevert.jsonl``)
plus a per-stage audit log of gate decisions; a rerun over the same output
directory skips stages whose manifest already exists, so an interrupted run
resumes to a byte-identical result. Records rejected at a stage never enter
the next one.
"""

from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import yaml

from . import align as align_mod
from .adapters import (
    AdapterHandle,
    AdapterRequest,
    AdapterResponse,
    ProcessAdapter,
    build_adapter,
    invoke,
)
from .audio import load_wav, peak_normalize, resample, save_wav
from .errors import (
    AdapterTransportError,
    AudioFormatError,
    ConfigError,
    MappingError,
    UnexpandableNumberError,
)
from .gates import (
    GateDecision,
    clean_filter,
    consensus_filter,
    provided_transcript_filter,
    punct_fidelity_gate,
)
from .manifest import (
    PASSED,
    REJECTED,
    STAGES,
    UtteranceRecord,
    read_manifest,
    stage_manifest_name,
    with_stage,
    write_manifest,
)
from .numwords import get_lexicon
from .sampler import SamplingPolicy, sample_by_group
from .textnorm import expand_numbers, extract_mapping_from_pair, get_profile, revert_numbers

ADAPTER_ROLES = ("transcribe_a", "transcribe_b", "punctuate", "normalize_numbers", "align")


@dataclass
class PipelineConfig:
    """All knobs in one place; defaults follow the reference processing recipe."""

    char_profile: str = "vi"
    max_duration_s: float = 30.0
    target_sample_rate_hz: int = 16000
    target_peak: float = 0.95
    wer_threshold: float = 0.05
    quantization_step_s: float = 0.02
    collar_s: float = 0.2
    worker_pool_size: int = 4
    batch_size: int = 16
    timeout_s: float = 120.0
    seed: int = 0
    sampling: dict[str, SamplingPolicy] = field(default_factory=dict)
    adapters: dict[str, dict] = field(default_factory=dict)
    number_lexicon: str = "vi"
    numexpand_via: str = "lexicon"
    resample_quality: str = "linear"
    process_audio: bool = True
    miou_matched_only: bool = False

    def validate(self) -> None:
        if not 0 < self.wer_threshold <= 1:
            raise ConfigError(f"wer_threshold must be in (0, 1], got {self.wer_threshold}")
        if not 0 < self.target_peak <= 1:
            raise ConfigError(f"target_peak must be in (0, 1], got {self.target_peak}")
        if self.collar_s <= 0:
            raise ConfigError(f"collar_s must be positive, got {self.collar_s}")
        if not 0 < self.max_duration_s <= align_mod.MAX_CLIP_SECONDS:
            raise ConfigError(
                f"max_duration_s must be in (0, {align_mod.MAX_CLIP_SECONDS}] "
                f"(the timestamp grid ceiling), got {self.max_duration_s}"
            )
        try:
            align_mod.max_ticks_for(self.quantization_step_s)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.target_sample_rate_hz < 1000:
            raise ConfigError(f"target_sample_rate_hz must be >= 1000")
        if self.worker_pool_size < 1 or self.batch_size < 1:
            raise ConfigError("worker_pool_size and batch_size must be >= 1")
        if self.timeout_s <= 0:
            raise ConfigError("timeout_s must be positive")
        if self.numexpand_via not in ("lexicon", "adapter"):
            raise ConfigError(f"numexpand_via must be lexicon or adapter, got {self.numexpand_via!r}")
        if self.resample_quality not in ("linear", "sinc"):
            raise ConfigError(f"resample_quality must be linear or sinc")
        get_profile(self.char_profile)
        get_lexicon(self.number_lexicon)
        for role in self.adapters:
            if role not in ADAPTER_ROLES:
                raise ConfigError(f"unknown adapter role {role!r}; expected one of {ADAPTER_ROLES}")

    def to_dict(self) -> dict:
        payload = {
            "char_profile": self.char_profile,
            "max_duration_s": self.max_duration_s,
            "target_sample_rate_hz": self.target_sample_rate_hz,
            "target_peak": self.target_peak,
            "wer_threshold": self.wer_threshold,
            "quantization_step_s": self.quantization_step_s,
            "collar_s": self.collar_s,
            "worker_pool_size": self.worker_pool_size,
            "batch_size": self.batch_size,
            "timeout_s": self.timeout_s,
            "seed": self.seed,
            "sampling": {
                source: {
                    "group_field": p.group_field,
                    "cap_seconds": p.cap_seconds,
                    "order": p.order,
                    "seed": p.seed,
                }
                for source, p in self.sampling.items()
            },
            "adapters": self.adapters,
            "number_lexicon": self.number_lexicon,
            "numexpand_via": self.numexpand_via,
            "resample_quality": self.resample_quality,
            "process_audio": self.process_audio,
            "miou_matched_only": self.miou_matched_only,
        }
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "PipelineConfig":
        data = dict(payload)
        sampling = {
            source: SamplingPolicy(**policy) for source, policy in data.pop("sampling", {}).items()
        }
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        config = cls(sampling=sampling, **data)
        config.validate()
        return config

    @classmethod
    def from_yaml(cls, path: str | Path) -> "PipelineConfig":
        with Path(path).open("r", encoding="utf-8") as fh:
            payload = yaml.safe_load(fh) or {}
        if not isinstance(payload, dict):
            raise ConfigError(f"config file {path} must hold a mapping")
        return cls.from_dict(payload)


@dataclass
class RunResult:
    output_dir: Path
    completed: bool
    stage_paths: dict[str, Path]
    final_manifest: Optional[Path] = None
    report_path: Optional[Path] = None

    @property
    def final_records(self) -> list[UtteranceRecord]:
        if self.final_manifest is None:
            raise ValueError("run did not complete; no final manifest")
        return read_manifest(self.final_manifest)


class _Run:
    """One pipeline execution over one output directory."""

    def __init__(self, config: PipelineConfig, input_manifest: Path, output_dir: Path):
        self.config = config
        self.input_path = input_manifest
        self.input_root = input_manifest.resolve().parent
        self.out = output_dir
        self.audit_dir = output_dir / "audit"
        self._handles: dict[str, AdapterHandle] = {}
        self._process_locks: dict[int, threading.Lock] = {}
        self.profile = get_profile(config.char_profile)
        self.lexicon = get_lexicon(config.number_lexicon)

    # -- adapters ---------------------------------------------------------

    def adapter(self, role: str) -> AdapterHandle:
        if role not in self._handles:
            spec = self.config.adapters.get(role)
            if spec is None:
                raise ConfigError(f"stage requires adapter role {role!r} but none is configured")
            self._handles[role] = build_adapter(dict(spec))
        return self._handles[role]

    def close(self) -> None:
        for handle in self._handles.values():
            close = getattr(handle, "close", None)
            if close is not None:
                close()

    def _invoke_batched(
        self, handle: AdapterHandle, requests: list[AdapterRequest]
    ) -> list[AdapterResponse]:
        """Bounded-parallel batched invocation; responses in request order."""
        size = self.config.batch_size
        batches = [requests[i : i + size] for i in range(0, len(requests), size)]
        if len(batches) <= 1:
            return invoke(handle, requests) if requests else []
        lock: Optional[threading.Lock] = None
        if isinstance(handle, ProcessAdapter):
            # A subprocess handle serves one in-flight batch at a time.
            lock = self._process_locks.setdefault(id(handle), threading.Lock())

        def run_batch(batch: list[AdapterRequest]) -> list[AdapterResponse]:
            if lock is not None:
                with lock:
                    return invoke(handle, batch)
            return invoke(handle, batch)

        with ThreadPoolExecutor(max_workers=self.config.worker_pool_size) as pool:
            results = list(pool.map(run_batch, batches))
        return [response for batch in results for response in batch]

    @staticmethod
    def _check_transport(stage: str, responses: Sequence[AdapterResponse]) -> None:
        for response in responses:
            if response.error is not None and response.is_transport_error:
                raise AdapterTransportError(
                    f"stage {stage!r} aborted ({response.error}); rerun to resume"
                )

    def resolve_audio(self, record: UtteranceRecord) -> str:
        """Post-clean records point into the output dir; otherwise the input dir."""
        for root in (self.out, self.input_root):
            candidate = root / record.audio_path
            if candidate.exists():
                return str(candidate)
        return str(self.input_root / record.audio_path)

    # -- stages -----------------------------------------------------------

    def run_stage(
        self, stage: str, entering: list[UtteranceRecord]
    ) -> tuple[list[UtteranceRecord], list[GateDecision]]:
        handler: Callable = getattr(self, f"_stage_{stage}")
        return handler(entering)

    def _stage_sample(self, entering):
        selected_ids: set[str] = set()
        policies: dict[str, Optional[SamplingPolicy]] = {}
        by_source: dict[str, list[UtteranceRecord]] = {}
        for record in entering:
            by_source.setdefault(record.source_dataset, []).append(record)
        for source, records in by_source.items():
            policy = self.config.sampling.get(source, self.config.sampling.get("*"))
            policies[source] = policy
            if policy is None:
                selected_ids.update(r.utterance_id for r in records)
            else:
                selected_ids.update(r.utterance_id for r in sample_by_group(records, policy))
        out, decisions = [], []
        for record in entering:
            if record.utterance_id in selected_ids:
                out.append(with_stage(record, "sample", PASSED))
                decisions.append(GateDecision(record.utterance_id, "sample", PASSED))
            else:
                policy = policies[record.source_dataset]
                assert policy is not None
                group = getattr(record, policy.group_field)
                reason = (
                    f"sampling cap {policy.cap_seconds:g}s reached for "
                    f"{policy.group_field}={group!r}"
                )
                out.append(with_stage(record, "sample", REJECTED, reason))
                decisions.append(GateDecision(record.utterance_id, "sample", REJECTED, reason))
        return out, decisions

    def _clean_one(self, record: UtteranceRecord) -> tuple[UtteranceRecord, GateDecision]:
        cfg = self.config
        if not cfg.process_audio:
            decision = clean_filter(record, self.profile, cfg.max_duration_s)
            state = PASSED if decision.passed else REJECTED
            return with_stage(record, "clean", state, decision.reason), decision
        src = Path(self.resolve_audio(record))
        try:
            buf = load_wav(src)
        except (FileNotFoundError, AudioFormatError) as exc:
            decision = GateDecision(
                record.utterance_id, "clean", REJECTED, reason=f"audio error: {exc}"
            )
            return with_stage(record, "clean", REJECTED, decision.reason), decision
        measured = replace(record, duration_s=round(buf.duration_s, 3))
        decision = clean_filter(measured, self.profile, cfg.max_duration_s)
        if not decision.passed:
            return with_stage(measured, "clean", REJECTED, decision.reason), decision
        buf = peak_normalize(buf, cfg.target_peak)
        buf = resample(buf, cfg.target_sample_rate_hz, cfg.resample_quality)
        rel = f"audio/{record.utterance_id}.wav"
        save_wav(buf, self.out / rel)
        sidecar = Path(str(src) + ".txt")
        if sidecar.exists():
            (self.out / (rel + ".txt")).write_text(
                sidecar.read_text(encoding="utf-8"), encoding="utf-8"
            )
        updated = replace(
            measured,
            audio_path=rel,
            sample_rate_hz=cfg.target_sample_rate_hz,
            duration_s=round(buf.duration_s, 3),
        )
        return with_stage(updated, "clean", PASSED), decision

    def _stage_clean(self, entering):
        (self.out / "audio").mkdir(parents=True, exist_ok=True)
        with ThreadPoolExecutor(max_workers=self.config.worker_pool_size) as pool:
            results = list(pool.map(self._clean_one, entering))
        return [r for r, _ in results], [d for _, d in results]

    def _stage_transcribe(self, entering):
        need = [r for r in entering if r.transcript is None]
        responses_a: dict[str, AdapterResponse] = {}
        responses_b: dict[str, AdapterResponse] = {}
        if need:
            requests = [
                AdapterRequest(id=r.utterance_id, task="transcribe", audio_path=self.resolve_audio(r))
                for r in need
            ]
            got_a = self._invoke_batched(self.adapter("transcribe_a"), requests)
            got_b = self._invoke_batched(self.adapter("transcribe_b"), requests)
            self._check_transport("transcribe", got_a)
            self._check_transport("transcribe", got_b)
            responses_a = {resp.id: resp for resp in got_a}
            responses_b = {resp.id: resp for resp in got_b}
        out, decisions = [], []
        for record in entering:
            if record.transcript is not None:
                # Provided/manual transcripts take the filter stage instead.
                out.append(with_stage(record, "transcribe", PASSED))
                decisions.append(GateDecision(record.utterance_id, "transcribe", PASSED))
                continue
            resp_a = responses_a[record.utterance_id]
            resp_b = responses_b[record.utterance_id]
            failure = resp_a.error or resp_b.error
            if failure is not None:
                reason = f"transcription failed: {failure}"
                out.append(with_stage(record, "transcribe", REJECTED, reason))
                decisions.append(GateDecision(record.utterance_id, "transcribe", REJECTED, reason))
                continue
            decision = consensus_filter(
                resp_a.text, resp_b.text, self.config.wer_threshold, record.utterance_id
            )
            if decision.passed:
                record = replace(record, transcript=resp_a.text, transcript_origin="generated")
                out.append(with_stage(record, "transcribe", PASSED))
            else:
                out.append(with_stage(record, "transcribe", REJECTED, decision.reason))
            decisions.append(decision)
        return out, decisions

    def _stage_filter(self, entering):
        need = [r for r in entering if r.transcript_origin == "provided"]
        responses: dict[str, AdapterResponse] = {}
        if need:
            requests = [
                AdapterRequest(id=r.utterance_id, task="transcribe", audio_path=self.resolve_audio(r))
                for r in need
            ]
            got = self._invoke_batched(self.adapter("transcribe_a"), requests)
            self._check_transport("filter", got)
            responses = {resp.id: resp for resp in got}
        out, decisions = [], []
        for record in entering:
            if record.transcript_origin == "manual":
                decision = provided_transcript_filter(
                    record.transcript or "",
                    None,
                    self.config.wer_threshold,
                    "manual",
                    record.utterance_id,
                )
            elif record.transcript_origin == "provided":
                resp = responses[record.utterance_id]
                if resp.error is not None:
                    reason = f"transcription failed: {resp.error}"
                    out.append(with_stage(record, "filter", REJECTED, reason))
                    decisions.append(GateDecision(record.utterance_id, "filter", REJECTED, reason))
                    continue
                decision = provided_transcript_filter(
                    record.transcript or "",
                    resp.text,
                    self.config.wer_threshold,
                    "provided",
                    record.utterance_id,
                )
            else:
                # Generated transcripts already passed the consensus gate.
                decision = GateDecision(record.utterance_id, "filter", PASSED)
            state = PASSED if decision.passed else REJECTED
            out.append(with_stage(record, "filter", state, decision.reason))
            decisions.append(decision)
        return out, decisions

    def _stage_punct(self, entering):
        requests = [
            AdapterRequest(id=r.utterance_id, task="punctuate", text=r.transcript or "")
            for r in entering
        ]
        got = self._invoke_batched(self.adapter("punctuate"), requests)
        self._check_transport("punct", got)
        responses = {resp.id: resp for resp in got}
        out, decisions = [], []
        for record in entering:
            resp = responses[record.utterance_id]
            if resp.error is not None:
                reason = f"punctuation failed: {resp.error}"
                out.append(with_stage(record, "punct", REJECTED, reason))
                decisions.append(GateDecision(record.utterance_id, "punct", REJECTED, reason))
                continue
            decision = punct_fidelity_gate(
                record.transcript or "", resp.text or "", record.utterance_id
            )
            if decision.passed:
                record = replace(record, transcript=resp.text)
                out.append(with_stage(record, "punct", PASSED))
            else:
                out.append(with_stage(record, "punct", REJECTED, decision.reason))
            decisions.append(decision)
        return out, decisions

    def _stage_numexpand(self, entering):
        out, decisions = [], []
        responses: dict[str, AdapterResponse] = {}
        if self.config.numexpand_via == "adapter":
            requests = [
                AdapterRequest(id=r.utterance_id, task="normalize_numbers", text=r.transcript or "")
                for r in entering
            ]
            got = self._invoke_batched(self.adapter("normalize_numbers"), requests)
            self._check_transport("numexpand", got)
            responses.update({resp.id: resp for resp in got})
        for record in entering:
            transcript = record.transcript or ""
            try:
                if self.config.numexpand_via == "lexicon":
                    expanded, mappings = expand_numbers(transcript, self.lexicon)
                else:
                    resp = responses[record.utterance_id]
                    if resp.error is not None:
                        raise MappingError(f"normalizer failed: {resp.error}")
                    expanded = resp.text or ""
                    mappings = extract_mapping_from_pair(transcript, expanded)
            except (UnexpandableNumberError, MappingError) as exc:
                reason = str(exc)
                out.append(with_stage(record, "numexpand", REJECTED, reason))
                decisions.append(GateDecision(record.utterance_id, "numexpand", REJECTED, reason))
                continue
            record = replace(
                record, transcript=expanded, numeric_mappings=mappings if mappings else None
            )
            out.append(with_stage(record, "numexpand", PASSED))
            decisions.append(GateDecision(record.utterance_id, "numexpand", PASSED))
        return out, decisions

    def _stage_align(self, entering):
        requests = [
            AdapterRequest(
                id=r.utterance_id,
                task="align",
                audio_path=self.resolve_audio(r),
                text=r.transcript or "",
            )
            for r in entering
        ]
        got = self._invoke_batched(self.adapter("align"), requests)
        self._check_transport("align", got)
        responses = {resp.id: resp for resp in got}
        out, decisions = [], []
        step = self.config.quantization_step_s
        for record in entering:
            resp = responses[record.utterance_id]
            if resp.error is not None:
                reason = f"aligner error: {resp.error}"
                updated = with_stage(record, "align", REJECTED, reason)
            elif resp.words is None:
                updated = with_stage(record, "align", REJECTED, "aligner returned no words")
            else:
                updated = align_mod.apply_alignment(record, resp.words, step)
            status = updated.stage_status["align"]
            out.append(updated)
            decisions.append(
                GateDecision(record.utterance_id, "align", status.state, status.reason)
            )
        return out, decisions

    def _stage_numrevert(self, entering):
        out, decisions = [], []
        step = self.config.quantization_step_s
        for record in entering:
            try:
                final_words = revert_numbers(record.words or [], record.numeric_mappings or [])
            except MappingError as exc:
                reason = str(exc)
                out.append(with_stage(record, "numrevert", REJECTED, reason))
                decisions.append(GateDecision(record.utterance_id, "numrevert", REJECTED, reason))
                continue
            record = replace(
                record,
                words=final_words,
                transcript=" ".join(w.text for w in final_words),
                ts_text=align_mod.serialize_timestamp_tokens(final_words, step),
            )
            out.append(with_stage(record, "numrevert", PASSED))
            decisions.append(GateDecision(record.utterance_id, "numrevert", PASSED))
        return out, decisions


def _write_audit(decisions: list[GateDecision], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        for decision in decisions:
            fh.write(decision.to_line())
            fh.write("\n")
    tmp.replace(path)


def _clear_previous_outputs(out: Path) -> None:
    """Drop stage/final/report/audit files so a non-resumed run cannot later
    get mixed with leftovers from an earlier, longer run."""
    for stage in STAGES:
        (out / stage_manifest_name(stage)).unlink(missing_ok=True)
        (out / "audit" / f"{stage}.jsonl").unlink(missing_ok=True)
    for name in ("final.jsonl", "report.json", "report.txt"):
        (out / name).unlink(missing_ok=True)


def _config_snapshot_guard(config: PipelineConfig, out: Path, resume: bool) -> None:
    snapshot_path = out / "run_config.json"
    rendered = json.dumps(config.to_dict(), ensure_ascii=False, sort_keys=True, indent=2)
    if snapshot_path.exists() and resume:
        if snapshot_path.read_text(encoding="utf-8") != rendered:
            raise ConfigError(
                f"output dir {out} was produced with a different config; "
                "use a fresh output dir or delete it to rerun"
            )
    else:
        if not resume:
            _clear_previous_outputs(out)
        snapshot_path.write_text(rendered, encoding="utf-8")


def run_pipeline(
    config: PipelineConfig,
    input_manifest: str | Path,
    output_dir: str | Path,
    stop_after: Optional[str] = None,
    resume: bool = True,
) -> RunResult:
    """Execute the stages in order over the input manifest.

    ``stop_after`` halts after the named stage (useful for partial runs and
    for exercising resume); rerunning over the same output directory picks up
    where the stage manifests left off.
    """
    config.validate()
    if stop_after is not None and stop_after not in STAGES:
        raise ConfigError(f"unknown stage {stop_after!r}")
    input_path = Path(input_manifest)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _config_snapshot_guard(config, out, resume)

    records = read_manifest(input_path)
    order = [r.utterance_id for r in records]
    current: dict[str, UtteranceRecord] = {r.utterance_id: r for r in records}
    alive = list(order)

    run = _Run(config, input_path, out)
    stage_paths: dict[str, Path] = {}
    completed = False
    try:
        for stage in STAGES:
            stage_path = out / stage_manifest_name(stage)
            stage_paths[stage] = stage_path
            entering = [current[utt_id] for utt_id in alive]
            if resume and stage_path.exists():
                processed = read_manifest(stage_path)
                if [r.utterance_id for r in processed] != alive:
                    raise ConfigError(
                        f"stage file {stage_path} does not match the resumed run; "
                        "delete the output dir to start over"
                    )
            else:
                processed, decisions = run.run_stage(stage, entering)
                _write_audit(decisions, run.audit_dir / f"{stage}.jsonl")
                write_manifest(processed, stage_path)
            for record in processed:
                current[record.utterance_id] = record
            alive = [r.utterance_id for r in processed if not r.is_rejected()]
            if stage == stop_after:
                break
        else:
            completed = True
    finally:
        run.close()

    result = RunResult(output_dir=out, completed=completed, stage_paths=stage_paths)
    if completed:
        final_path = out / "final.jsonl"
        write_manifest([current[utt_id] for utt_id in order], final_path)
        result.final_manifest = final_path
        from .report import build_run_report, write_run_report

        payload = build_run_report(out)
        result.report_path = write_run_report(payload, config.seed, out)
    return result


def merge_minimal(
    full: list[UtteranceRecord], refined: list[UtteranceRecord]
) -> list[UtteranceRecord]:
    """Merge minimally processed records with refined ones; refined wins on id collision.

    Output order: the full manifest's order with replacements in place, then
    refined-only records appended in their own order.
    """
    refined_by_id = {r.utterance_id: r for r in refined}
    merged = [refined_by_id.pop(r.utterance_id, r) for r in full]
    merged.extend(r for r in refined if r.utterance_id in refined_by_id)
    return merged


def resample_merged_records(
    records: list[UtteranceRecord],
    audio_root: str | Path,
    out_dir: str | Path,
    target_hz: int = 16000,
    quality: str = "linear",
) -> list[UtteranceRecord]:
    """Re-run the clean stage's resample on records lacking the target rate."""
    audio_root = Path(audio_root)
    out = Path(out_dir)
    (out / "audio").mkdir(parents=True, exist_ok=True)
    fixed = []
    for record in records:
        if record.sample_rate_hz == target_hz:
            fixed.append(record)
            continue
        buf = load_wav(audio_root / record.audio_path)
        buf = resample(buf, target_hz, quality)
        rel = f"audio/{record.utterance_id}.wav"
        save_wav(buf, out / rel)
        fixed.append(
            replace(
                record,
                audio_path=rel,
                sample_rate_hz=target_hz,
                duration_s=round(buf.duration_s, 3),
            )
        )
    return fixed

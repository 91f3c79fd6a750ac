"""Boundary to external ML models: one JSON-lines protocol, many backends.

Wire schema (exact field names, one object per line):

    request:  {"id": "...", "task": "...", "audio_path": "...", "text": "..."}
    response: {"id": "...", "text": "...", "words": [{"w": ..., "s": ..., "e": ...}], "error": "..."}

Times are decimal seconds. Optional fields are omitted when absent. The
default transport is a child process's stdin/stdout; an HTTP binding posts
the same bodies. Deterministic mock backends cover every task so the whole
pipeline runs offline.
"""

from __future__ import annotations

import json
import queue
import random
import subprocess
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence

from . import audio
from .errors import AdapterError
from .manifest import AlignedWord
from .numwords import NumberLexicon
from .textnorm import expand_numbers

TASKS = ("transcribe", "punctuate", "normalize_numbers", "align")

# Errors synthesized by the transport layer (as opposed to errors reported by
# the adapter itself) carry this prefix, so callers can tell retryable
# failures apart from per-sample model failures.
TRANSPORT_ERROR_PREFIX = "transport:"


@dataclass(frozen=True)
class AdapterRequest:
    id: str
    task: str
    audio_path: Optional[str] = None
    text: Optional[str] = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise AdapterError(f"unknown task {self.task!r}")
        if self.task in ("transcribe", "align") and not self.audio_path:
            raise AdapterError(f"task {self.task!r} requires audio_path")
        if self.task in ("punctuate", "normalize_numbers", "align") and self.text is None:
            raise AdapterError(f"task {self.task!r} requires text")

    def to_dict(self) -> dict:
        payload: dict = {"id": self.id, "task": self.task}
        if self.audio_path is not None:
            payload["audio_path"] = self.audio_path
        if self.text is not None:
            payload["text"] = self.text
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "AdapterRequest":
        return cls(
            id=payload["id"],
            task=payload["task"],
            audio_path=payload.get("audio_path"),
            text=payload.get("text"),
        )


@dataclass(frozen=True)
class AdapterResponse:
    id: str
    text: Optional[str] = None
    words: Optional[tuple[AlignedWord, ...]] = None
    error: Optional[str] = None

    def __post_init__(self):
        populated = sum(x is not None for x in (self.text, self.words, self.error))
        if populated != 1:
            raise AdapterError(
                f"response {self.id!r} must populate exactly one of text/words/error"
            )

    @property
    def is_transport_error(self) -> bool:
        return self.error is not None and self.error.startswith(TRANSPORT_ERROR_PREFIX)

    def to_dict(self) -> dict:
        payload: dict = {"id": self.id}
        if self.text is not None:
            payload["text"] = self.text
        if self.words is not None:
            payload["words"] = [{"w": w.text, "s": w.start_s, "e": w.end_s} for w in self.words]
        if self.error is not None:
            payload["error"] = self.error
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "AdapterResponse":
        words = payload.get("words")
        return cls(
            id=payload["id"],
            text=payload.get("text"),
            words=tuple(AlignedWord(w["w"], w["s"], w["e"]) for w in words)
            if words is not None
            else None,
            error=payload.get("error"),
        )


def request_to_line(request: AdapterRequest) -> str:
    return json.dumps(request.to_dict(), ensure_ascii=False, separators=(",", ":"))


def request_from_line(line: str) -> AdapterRequest:
    return AdapterRequest.from_dict(json.loads(line))


def response_to_line(response: AdapterResponse) -> str:
    return json.dumps(response.to_dict(), ensure_ascii=False, separators=(",", ":"))


def response_from_line(line: str) -> AdapterResponse:
    return AdapterResponse.from_dict(json.loads(line))


class AdapterHandle(Protocol):
    def process(self, requests: Sequence[AdapterRequest]) -> list[AdapterResponse]: ...


def invoke(backend: AdapterHandle, requests: Sequence[AdapterRequest]) -> list[AdapterResponse]:
    """Send a batch and return responses in request order, matched by id.

    Per-request failures come back as error responses and never abort the
    batch; requests left unanswered by the backend get transport errors.
    """
    ids = [r.id for r in requests]
    if len(set(ids)) != len(ids):
        raise AdapterError("duplicate request ids in batch")
    try:
        raw = backend.process(requests)
    except Exception as exc:  # backend crash: every id gets a transport error
        return [
            AdapterResponse(id=r.id, error=f"{TRANSPORT_ERROR_PREFIX} backend failed: {exc}")
            for r in requests
        ]
    by_id = {resp.id: resp for resp in raw}
    return [
        by_id.get(r.id, AdapterResponse(id=r.id, error=f"{TRANSPORT_ERROR_PREFIX} no response"))
        for r in requests
    ]


class InProcessAdapter:
    """Base for in-process backends with per-request error isolation."""

    task: str = ""

    def process(self, requests: Sequence[AdapterRequest]) -> list[AdapterResponse]:
        responses = []
        for request in requests:
            try:
                if self.task and request.task != self.task:
                    raise AdapterError(f"backend serves {self.task!r}, got {request.task!r}")
                responses.append(self.handle_one(request))
            except Exception as exc:
                responses.append(AdapterResponse(id=request.id, error=str(exc)))
        return responses

    def handle_one(self, request: AdapterRequest) -> AdapterResponse:
        raise NotImplementedError

    def close(self) -> None:
        pass


class FnAdapter(InProcessAdapter):
    """Wraps a plain function; handy for tests and fault injection."""

    def __init__(self, fn: Callable[[AdapterRequest], AdapterResponse], task: str = ""):
        self.fn = fn
        self.task = task

    def handle_one(self, request: AdapterRequest) -> AdapterResponse:
        return self.fn(request)


def _request_rng(seed: int, request_id: str) -> random.Random:
    # Keyed per request so results are independent of batch order and of
    # worker scheduling.
    return random.Random(f"{seed}:{request_id}")


# Nonsense tokens disjoint from any real transcript vocabulary, so an injected
# substitution/insertion always counts as an error against the reference.
CORRUPTION_VOCAB = (
    "drok", "blen", "quix", "snib", "vulp", "crag", "zemp", "flin",
    "gorv", "plax", "trud", "skom", "yilt", "wost", "brax", "nulf",
)


class MockAsr(InProcessAdapter):
    """Deterministic fake transcriber.

    Reads the true transcript from the ``<audio_path>.txt`` sidecar and
    corrupts it word by word at the configured substitution/deletion/insertion
    rates. Bit-reproducible: the RNG is keyed by (seed, request id).
    """

    task = "transcribe"

    def __init__(
        self,
        substitution_rate: float = 0.0,
        deletion_rate: float = 0.0,
        insertion_rate: float = 0.0,
        seed: int = 0,
    ):
        rates = (substitution_rate, deletion_rate, insertion_rate)
        if any(r < 0 for r in rates) or sum(rates) > 1.0:
            raise ValueError(f"rates must be >= 0 and sum <= 1, got {rates}")
        self.substitution_rate = substitution_rate
        self.deletion_rate = deletion_rate
        self.insertion_rate = insertion_rate
        self.seed = seed

    def corrupt(self, text: str, request_id: str) -> str:
        rng = _request_rng(self.seed, request_id)
        out: list[str] = []
        s, d, i = self.substitution_rate, self.deletion_rate, self.insertion_rate
        for word in text.split():
            roll = rng.random()
            if roll < s:
                choices = [w for w in CORRUPTION_VOCAB if w != word]
                out.append(rng.choice(choices))
            elif roll < s + d:
                continue
            elif roll < s + d + i:
                out.append(word)
                out.append(rng.choice(CORRUPTION_VOCAB))
            else:
                out.append(word)
        return " ".join(out)

    def handle_one(self, request: AdapterRequest) -> AdapterResponse:
        sidecar = Path(str(request.audio_path) + ".txt")
        if not sidecar.exists():
            raise AdapterError(f"missing reference transcript sidecar {sidecar}")
        reference = sidecar.read_text(encoding="utf-8").strip()
        return AdapterResponse(id=request.id, text=self.corrupt(reference, request.id))


class MockAligner(InProcessAdapter):
    """Splits the clip duration over the request's words.

    ``uniform`` places boundaries evenly; ``jittered`` perturbs interior
    boundaries by at most ``max_jitter_s`` while preserving ordering,
    non-overlap, and the [0, duration] range. ``duration_fn`` overrides
    reading the duration from the WAV header (useful without audio files).
    """

    task = "align"

    def __init__(
        self,
        mode: str = "uniform",
        seed: int = 0,
        max_jitter_s: float = 0.0,
        duration_fn: Optional[Callable[[AdapterRequest], float]] = None,
    ):
        if mode not in ("uniform", "jittered"):
            raise ValueError(f"mode must be uniform or jittered, got {mode!r}")
        self.mode = mode
        self.seed = seed
        self.max_jitter_s = max_jitter_s
        self.duration_fn = duration_fn

    def handle_one(self, request: AdapterRequest) -> AdapterResponse:
        words = (request.text or "").split()
        if not words:
            raise AdapterError("empty text for alignment")
        if self.duration_fn is not None:
            duration = self.duration_fn(request)
        else:
            duration = audio.wav_duration_s(request.audio_path)
        boundaries = [i * duration / len(words) for i in range(len(words) + 1)]
        if self.mode == "jittered" and self.max_jitter_s > 0:
            rng = _request_rng(self.seed, request.id)
            for i in range(1, len(words)):
                jitter = rng.uniform(-self.max_jitter_s, self.max_jitter_s)
                boundaries[i] = min(max(boundaries[i] + jitter, 0.0), duration)
            for i in range(1, len(words) + 1):  # restore monotonicity after jitter
                boundaries[i] = max(boundaries[i], boundaries[i - 1])
        aligned = tuple(
            AlignedWord(text=w, start_s=boundaries[i], end_s=boundaries[i + 1])
            for i, w in enumerate(words)
        )
        return AdapterResponse(id=request.id, words=aligned)


class MockPunctuator(InProcessAdapter):
    """Deterministic punctuation/capitalization restorer.

    Capitalizes the first word, inserts a comma roughly every few words, and
    appends a final period; with ``word_drop_rate`` > 0 it sometimes drops a
    word, which the fidelity gate must catch.
    """

    task = "punctuate"

    def __init__(self, seed: int = 0, comma_every: int = 7, word_drop_rate: float = 0.0):
        self.seed = seed
        self.comma_every = comma_every
        self.word_drop_rate = word_drop_rate

    def handle_one(self, request: AdapterRequest) -> AdapterResponse:
        words = (request.text or "").split()
        if not words:
            return AdapterResponse(id=request.id, text="")
        rng = _request_rng(self.seed, request.id)
        if self.word_drop_rate > 0 and rng.random() < self.word_drop_rate and len(words) > 1:
            del words[rng.randrange(len(words))]
        out = []
        for i, word in enumerate(words):
            if i == 0:
                word = word[0].upper() + word[1:]
            if (
                self.comma_every > 0
                and i > 0
                and i < len(words) - 1
                and (i + 1) % self.comma_every == 0
                and word[-1] not in ",.!?"
            ):
                word = word + ","
            out.append(word)
        if out[-1][-1] not in ".!?":
            out[-1] = out[-1] + "."
        return AdapterResponse(id=request.id, text=" ".join(out))


class MockNormalizer(InProcessAdapter):
    """Verbalizes digit tokens with a built-in lexicon, like the real model would.

    Tokens outside lexicon coverage are left unchanged.
    """

    task = "normalize_numbers"

    def __init__(self, lexicon: NumberLexicon):
        self.lexicon = lexicon

    def handle_one(self, request: AdapterRequest) -> AdapterResponse:
        try:
            expanded, _ = expand_numbers(request.text or "", self.lexicon)
        except Exception:
            expanded = request.text or ""
        return AdapterResponse(id=request.id, text=expanded)


class ProcessAdapter:
    """JSON-lines stdio client for an external adapter process.

    One batch in flight at a time. A startup handshake line (an object with
    "role" and no "id") is tolerated and recorded. Unanswered ids get
    transport errors after ``timeout_s`` without traffic; a dead process
    fails the outstanding ids, not the run.
    """

    def __init__(self, cmd: Sequence[str], timeout_s: float = 120.0, cwd: str | None = None):
        self.cmd = list(cmd)
        self.timeout_s = timeout_s
        self.cwd = cwd
        self.handshake: Optional[dict] = None
        self._proc: Optional[subprocess.Popen] = None
        self._lines: "queue.Queue[Optional[str]]" = queue.Queue()

    def _ensure_started(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            return
        self._proc = subprocess.Popen(
            self.cmd,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            cwd=self.cwd,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        self._lines = queue.Queue()

        def reader(proc: subprocess.Popen, sink: "queue.Queue[Optional[str]]") -> None:
            assert proc.stdout is not None
            for line in proc.stdout:
                sink.put(line)
            sink.put(None)  # EOF marker

        threading.Thread(target=reader, args=(self._proc, self._lines), daemon=True).start()

    def process(self, requests: Sequence[AdapterRequest]) -> list[AdapterResponse]:
        self._ensure_started()
        assert self._proc is not None and self._proc.stdin is not None
        pending = {r.id for r in requests}
        responses: dict[str, AdapterResponse] = {}
        try:
            for request in requests:
                self._proc.stdin.write(request_to_line(request) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            return [
                AdapterResponse(id=r.id, error=f"{TRANSPORT_ERROR_PREFIX} write failed: {exc}")
                for r in requests
            ]
        while pending:
            try:
                line = self._lines.get(timeout=self.timeout_s)
            except queue.Empty:
                for rid in sorted(pending):
                    responses[rid] = AdapterResponse(
                        id=rid, error=f"{TRANSPORT_ERROR_PREFIX} timeout after {self.timeout_s}s"
                    )
                break
            if line is None:
                for rid in sorted(pending):
                    responses[rid] = AdapterResponse(
                        id=rid, error=f"{TRANSPORT_ERROR_PREFIX} backend exited"
                    )
                break
            line = line.strip()
            if not line:
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError:
                continue  # noise on stdout; unanswered ids will surface as transport errors
            if "id" not in payload and "role" in payload:
                self.handshake = payload
                continue
            try:
                response = AdapterResponse.from_dict(payload)
            except Exception:
                continue
            if response.id in pending:
                pending.discard(response.id)
                responses[response.id] = response
        return [
            responses.get(
                r.id, AdapterResponse(id=r.id, error=f"{TRANSPORT_ERROR_PREFIX} no response")
            )
            for r in requests
        ]

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            try:
                if self._proc.stdin is not None:
                    self._proc.stdin.close()
                self._proc.wait(timeout=5)
            except Exception:
                self._proc.kill()
        self._proc = None

    def __enter__(self) -> "ProcessAdapter":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


class HttpAdapter:
    """HTTP binding: POSTs one request object per message, same bodies as stdio."""

    def __init__(self, url: str, timeout_s: float = 120.0, client=None):
        import httpx

        self.url = url
        self.timeout_s = timeout_s
        self._client = client or httpx.Client(timeout=timeout_s)

    def process(self, requests: Sequence[AdapterRequest]) -> list[AdapterResponse]:
        responses = []
        for request in requests:
            try:
                reply = self._client.post(self.url, json=request.to_dict())
                reply.raise_for_status()
                responses.append(AdapterResponse.from_dict(reply.json()))
            except Exception as exc:
                responses.append(
                    AdapterResponse(
                        id=request.id, error=f"{TRANSPORT_ERROR_PREFIX} http failed: {exc}"
                    )
                )
        return responses

    def close(self) -> None:
        self._client.close()


def build_adapter(spec: dict) -> AdapterHandle:
    """Construct a backend from its config mapping ({"kind": ..., options...})."""
    options = dict(spec)
    kind = options.pop("kind", None)
    if kind == "mock_asr":
        return MockAsr(**options)
    if kind == "mock_aligner":
        return MockAligner(**options)
    if kind == "mock_punctuator":
        return MockPunctuator(**options)
    if kind == "mock_normalizer":
        from .numwords import get_lexicon

        return MockNormalizer(get_lexicon(options.pop("lexicon", "vi")))
    if kind == "process":
        return ProcessAdapter(**options)
    if kind == "http":
        return HttpAdapter(**options)
    raise AdapterError(f"unknown adapter kind {kind!r}")

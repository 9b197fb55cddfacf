"""Wire protocol and client for external NER model backends.

Two transports carry the same JSON messages: HTTP (POST /v1/predict,
GET /v1/health) and newline-delimited JSON over a child process's
stdin/stdout. Tags, not spans, travel on the wire: token alignment is fixed
by the request, so length validation is trivial. The protocol is documented
bit-exactly in docs/protocol.md with shared golden files.

The in-process mock transport implements the published MOCK rule so the
test suite never needs a real model or a running adapter.
"""

from __future__ import annotations

import json
import re
import threading
import time
import urllib.error
import urllib.request
import uuid
from dataclasses import dataclass
from typing import Protocol, Sequence

from .annotations import Sentence, TagSequence, parse_tag
from .errors import (
    BackendUnavailableError,
    InvalidTagError,
    LabelSetMismatchError,
    ProtocolError,
)
from .labels import LabelSet, label_set_hash

PROTO_VERSION = 1

MOCK_MODEL_ID = "mock-v1"
MOCK_MAX_BATCH = 16

# Published MOCK tagging rule: per token, first hit in this order wins and
# yields B-<label>; anything else is O. Rules for labels absent from the
# configured label set are skipped. Mirrored by the reference adapter.
MOCK_GAZETTEER: tuple[tuple[str, frozenset[str]], ...] = (
    ("PATIENT", frozenset({"Linda", "Martinez", "Nguyen", "Soraya"})),
    ("DOCTOR", frozenset({"Brown", "Watson", "Okafor"})),
    ("HOSPITAL", frozenset({"Mercy", "Hopkins"})),
    ("CITY", frozenset({"Boston", "Ankara", "Cluj"})),
)
MOCK_PATTERNS: tuple[tuple[str, str], ...] = (
    ("MEDICAL RECORD", r"^[0-9]{7}$"),
    ("ZIP", r"^[0-9]{5}$"),
    ("USERNAME", r"^[a-z]{2,}[0-9]{1,4}$"),
)


def canonical_json(payload: dict) -> str:
    """Canonical serialization shared by engine and adapters: sorted keys,
    no insignificant whitespace, UTF-8 characters unescaped."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def canonical_json_bytes(payload: dict) -> bytes:
    return canonical_json(payload).encode("utf-8")


@dataclass(frozen=True)
class PredictRequest:
    doc_id: str
    language_code: str
    sentences: tuple[Sentence, ...]
    request_id: str

    @classmethod
    def build(cls, doc, sentences: Sequence[Sentence], request_id: str | None = None):
        return cls(
            doc_id=doc.doc_id,
            language_code=doc.language_code,
            sentences=tuple(sentences),
            request_id=request_id or uuid.uuid4().hex,
        )

    def to_wire(self) -> dict:
        return {
            "proto_version": PROTO_VERSION,
            "request_id": self.request_id,
            "doc_id": self.doc_id,
            "language_code": self.language_code,
            "sentences": [
                {
                    "text": _sentence_text(s),
                    "tokens": [
                        {"text": t.text, "start": t.start, "end": t.end} for t in s.tokens
                    ],
                }
                for s in self.sentences
            ],
        }


def _sentence_text(sentence: Sentence) -> str:
    out: list[str] = []
    pos = sentence.start
    for token in sentence.tokens:
        out.append(" " * (token.start - pos))
        out.append(token.text)
        pos = token.end
    return "".join(out)


@dataclass(frozen=True)
class PredictResponse:
    model_id: str
    latency_ms: float
    sentences: tuple[TagSequence, ...]
    request_id: str

    @classmethod
    def from_wire(
        cls, payload: dict, request: PredictRequest, labels: LabelSet | None = None
    ) -> "PredictResponse":
        if not isinstance(payload, dict):
            raise ProtocolError(f"expected a JSON object, got {type(payload).__name__}")
        if "error" in payload:
            error = payload["error"]
            raise ProtocolError(
                f"backend error {error.get('code', '?')}: {error.get('message', '')}",
                sentence_index=error.get("sentence_index"),
            )
        if payload.get("proto_version") != PROTO_VERSION:
            raise ProtocolError(f"unsupported proto_version {payload.get('proto_version')!r}")
        sentences = payload.get("sentences")
        if not isinstance(sentences, list) or len(sentences) != len(request.sentences):
            got = len(sentences) if isinstance(sentences, list) else "no"
            raise ProtocolError(
                f"response has {got} sentences for a {len(request.sentences)}-sentence request"
            )
        sequences: list[TagSequence] = []
        for index, (entry, sent) in enumerate(zip(sentences, request.sentences)):
            tags = entry.get("tags") if isinstance(entry, dict) else None
            if not isinstance(tags, list) or len(tags) != len(sent.tokens):
                got = len(tags) if isinstance(tags, list) else "no"
                raise ProtocolError(
                    f"{got} tags for {len(sent.tokens)} tokens", sentence_index=index
                )
            for tag in tags:
                try:
                    _, lab = parse_tag(tag)
                except (InvalidTagError, TypeError) as exc:
                    raise ProtocolError(str(exc), sentence_index=index) from exc
                if lab is not None and labels is not None and labels.try_resolve(lab) is None:
                    raise ProtocolError(f"unknown tag label {lab!r}", sentence_index=index)
            sequences.append(TagSequence(tuple(tags)))
        return cls(
            model_id=str(payload.get("model_id", "")),
            latency_ms=float(payload.get("latency_ms", 0.0)),
            sentences=tuple(sequences),
            request_id=str(payload.get("request_id", request.request_id)),
        )


@dataclass(frozen=True)
class BackendInfo:
    model_id: str
    label_set_hash: str
    max_batch: int
    labels: tuple[str, ...] | None = None


class Transport(Protocol):
    def request(self, payload: dict) -> dict: ...

    def health(self) -> dict: ...


class HttpTransport:
    """JSON-over-HTTP transport for a shared on-prem inference server."""

    def __init__(self, base_url: str, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def _call(self, req: urllib.request.Request) -> dict:
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as response:
                body = response.read()
        except urllib.error.HTTPError as exc:
            body = exc.read()
            if exc.code >= 500:
                raise BackendUnavailableError(f"HTTP {exc.code} from {req.full_url}") from exc
            try:
                return json.loads(body)
            except json.JSONDecodeError:
                raise ProtocolError(f"HTTP {exc.code} from {req.full_url}") from exc
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise BackendUnavailableError(f"cannot reach {req.full_url}: {exc}") from exc
        try:
            return json.loads(body)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"non-JSON response from {req.full_url}") from exc

    def request(self, payload: dict) -> dict:
        req = urllib.request.Request(
            f"{self.base_url}/v1/predict",
            data=canonical_json_bytes(payload),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        return self._call(req)

    def health(self) -> dict:
        return self._call(urllib.request.Request(f"{self.base_url}/v1/health"))


class SubprocessTransport:
    """NDJSON over a child process's stdin/stdout, one message per line.

    Suited to air-gapped single-box deployments. The child is spawned lazily
    and calls are serialized per child.
    """

    def __init__(self, command: Sequence[str], timeout: float = 60.0):
        self.command = tuple(command)
        self.timeout = timeout
        self._proc = None
        self._lock = threading.Lock()

    def _ensure_child(self):
        import subprocess

        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    list(self.command),
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                )
            except OSError as exc:
                raise BackendUnavailableError(f"cannot start {self.command}: {exc}") from exc
        return self._proc

    def _roundtrip(self, payload: dict) -> dict:
        with self._lock:
            proc = self._ensure_child()
            try:
                proc.stdin.write(canonical_json_bytes(payload) + b"\n")
                proc.stdin.flush()
                line = proc.stdout.readline()
            except (BrokenPipeError, OSError) as exc:
                raise BackendUnavailableError(f"backend process died: {exc}") from exc
        if not line:
            raise BackendUnavailableError("backend process closed its stdout")
        try:
            return json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"non-JSON line from backend: {exc}") from exc

    def request(self, payload: dict) -> dict:
        return self._roundtrip({**payload, "op": "predict"})

    def health(self) -> dict:
        return self._roundtrip({"op": "health", "proto_version": PROTO_VERSION})

    def close(self):
        if self._proc is not None and self._proc.poll() is None:
            self._proc.terminate()
            self._proc.wait(timeout=5)
        self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def mock_tags(token_texts: Sequence[str], labels: LabelSet) -> list[str]:
    """Apply the published deterministic MOCK tagging rule."""
    tags: list[str] = []
    for text in token_texts:
        tag = "O"
        for label, gazetteer in MOCK_GAZETTEER:
            if labels.try_resolve(label) is not None and text in gazetteer:
                tag = "B-" + LabelSet.tag_name(label)
                break
        else:
            for label, pattern in MOCK_PATTERNS:
                if labels.try_resolve(label) is not None and re.match(pattern, text):
                    tag = "B-" + LabelSet.tag_name(label)
                    break
        tags.append(tag)
    return tags


def mock_predict_payload(payload: dict, labels: LabelSet) -> dict:
    """Answer a predict payload dict per the MOCK rule (pure; latency pinned 0)."""
    if payload.get("proto_version") != PROTO_VERSION:
        return {
            "proto_version": PROTO_VERSION,
            "error": {
                "code": "unsupported_version",
                "message": f"unsupported proto_version {payload.get('proto_version')!r}",
            },
        }
    sentences = []
    for entry in payload.get("sentences", []):
        token_texts = [t["text"] for t in entry.get("tokens", [])]
        sentences.append({"tags": mock_tags(token_texts, labels)})
    return {
        "proto_version": PROTO_VERSION,
        "request_id": payload.get("request_id", ""),
        "model_id": MOCK_MODEL_ID,
        "latency_ms": 0,
        "sentences": sentences,
    }


def mock_health_payload(labels: LabelSet) -> dict:
    return {
        "proto_version": PROTO_VERSION,
        "model_id": MOCK_MODEL_ID,
        "label_set_hash": label_set_hash(labels),
        "max_batch": MOCK_MAX_BATCH,
        "labels": sorted(labels.model_labels),
    }


class InProcessMockTransport:
    """Mock backend living inside the engine process; used by the test suite."""

    def __init__(self, labels: LabelSet):
        self.labels = labels
        self.seen_request_ids: list[str] = []

    def request(self, payload: dict) -> dict:
        self.seen_request_ids.append(payload.get("request_id", ""))
        return mock_predict_payload(payload, self.labels)

    def health(self) -> dict:
        return mock_health_payload(self.labels)


class BackendClient:
    """Validating client over any transport, with retry on transport errors.

    Retries use exponential backoff and resend the same request_id, so
    backends can treat duplicates as repeats. Malformed responses are never
    retried.
    """

    def __init__(
        self,
        transport: Transport,
        labels: LabelSet | None = None,
        retries: int = 2,
        backoff: float = 0.2,
    ):
        self.transport = transport
        self.labels = labels
        self.retries = retries
        self.backoff = backoff

    def _with_retries(self, call):
        attempt = 0
        while True:
            try:
                return call()
            except BackendUnavailableError:
                if attempt >= self.retries:
                    raise
                time.sleep(self.backoff * (2**attempt))
                attempt += 1

    def predict(self, request: PredictRequest) -> PredictResponse:
        payload = request.to_wire()
        raw = self._with_retries(lambda: self.transport.request(payload))
        return PredictResponse.from_wire(raw, request, self.labels)

    def healthcheck(self) -> BackendInfo:
        raw = self._with_retries(self.transport.health)
        if not isinstance(raw, dict) or "label_set_hash" not in raw:
            raise ProtocolError("health response missing label_set_hash")
        info = BackendInfo(
            model_id=str(raw.get("model_id", "")),
            label_set_hash=str(raw["label_set_hash"]),
            max_batch=int(raw.get("max_batch", 1)),
            labels=tuple(raw["labels"]) if isinstance(raw.get("labels"), list) else None,
        )
        if self.labels is not None:
            expected = label_set_hash(self.labels)
            if info.label_set_hash != expected:
                detail = f"engine {expected} != backend {info.label_set_hash}"
                if info.labels is not None:
                    extra = sorted(set(info.labels) - set(self.labels.model_labels))
                    missing = sorted(set(self.labels.model_labels) - set(info.labels))
                    if extra:
                        detail += f"; backend has extra labels {extra}"
                    if missing:
                        detail += f"; backend is missing labels {missing}"
                raise LabelSetMismatchError(f"label set mismatch: {detail}")
        return info


def healthcheck(transport: Transport, labels: LabelSet | None = None) -> BackendInfo:
    """Convenience wrapper: verify a backend's label set before first use."""
    return BackendClient(transport, labels).healthcheck()

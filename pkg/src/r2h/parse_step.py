"""Response normalization into numbered step instructions.

Free-form helper responses are rewritten as step lists either by a deterministic
rule backend (offline, used in CI) or by a remote completion backend that fills
the response into a one-shot prompt and parses the continuation.
"""
from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field

import httpx

DEFAULT_EXEMPLAR = (
    "Commander says: 'Yes to the kitchen. Go to the left of the fireplace and then "
    "all the way up the stairs'. Step by step: 1. Yes. 2. go to the kitchen 3. go the "
    "left of the fireplace, 4. go upstairs.\n"
    'Commander says: "____". step by step: 1.'
)

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")
_NUMBERED = re.compile(r"^\s*1\s*[.)]")
_NUMBER_MARK = re.compile(r"(?:^|\s)\d+\s*[.)]\s*")
_CONNECTIVE_SPLIT = re.compile(
    r",\s*then\s+|\s+and\s+then\s+|\s+then\s+|,\s*and\s+|\s+and\s+|\s+till\s+|\s+until\s+|;\s*"
)
_LEADING_CONNECTIVE = re.compile(r"^(?:and|so|ok|okay|well|then)\b[\s,]*")
_APOLOGY = re.compile(r"^(?:sorry|apologies|my apologies|my bad|oops)\b")
_ACK = re.compile(r"^(yeah|yes|yep|sure)\b[\s,]*")
_FILLER_PREFIX = re.compile(
    r"^(?:i would|i'd|i think|i guess|you should|you can|you need to|you want to|please)\b\s*"
)
_BARE_DIRECTION = re.compile(r"^(?:the\s+)?(right|left)$")
_REWRITES = (
    (re.compile(r"^go into\b"), "enter"),
    (re.compile(r"^go in to\b"), "enter"),
    (re.compile(r"^exit it\b"), "exit"),
)


class ParseStepError(ValueError):
    """Parsing failed; carries the raw backend response for fallback handling."""

    def __init__(self, message: str, raw_response: str | None = None):
        super().__init__(message)
        self.raw_response = raw_response


@dataclass(frozen=True)
class StepInstruction:
    index: int  # 1-based
    text: str


@dataclass(frozen=True)
class PromptTemplate:
    exemplar_block: str = DEFAULT_EXEMPLAR
    blank_marker: str = "____"


def build_prompt(r: str, t: PromptTemplate = PromptTemplate()) -> str:
    """Substitute the response into the template blank."""
    r = r.strip()
    if not r:
        raise ParseStepError("response must be nonempty")
    return t.exemplar_block.replace(t.blank_marker, r)


def _finish(clause: str) -> str | None:
    clause = clause.strip(" ,;")
    clause = re.sub(r"[.!?]+$", "", clause).strip()
    if not clause or clause in ("it", "me"):
        return None
    return clause[0].upper() + clause[1:] + "."


def _normalize_clause(clause: str) -> str | None:
    clause = _LEADING_CONNECTIVE.sub("", clause).strip()
    clause = re.sub(r"^you\s+", "", clause)
    while True:
        stripped = _FILLER_PREFIX.sub("", clause)
        if stripped == clause:
            break
        clause = stripped.strip()
    for pattern, repl in _REWRITES:
        clause = pattern.sub(repl, clause)
    bare = _BARE_DIRECTION.match(clause.rstrip(" ."))
    if bare:
        clause = f"go {bare.group(1)}"
    return _finish(clause)


def _parse_numbered(text: str) -> list[str]:
    parts = [p.strip() for p in _NUMBER_MARK.split(text)]
    steps = []
    for part in parts:
        done = _finish(part)
        if done:
            steps.append(done)
    return steps


def rule_parse(r: str) -> list[StepInstruction]:
    """Deterministic splitter: sentences, coordinating connectives, filler removal."""
    text = " ".join(r.split())
    if not text:
        raise ParseStepError("response must be nonempty")
    lowered = text.lower()
    if _NUMBERED.match(lowered):
        steps = _parse_numbered(lowered)
        return _as_instructions(steps, fallback=lowered)

    steps: list[str] = []
    for sentence in _SENTENCE_SPLIT.split(lowered):
        sentence = _LEADING_CONNECTIVE.sub("", sentence.strip())
        if not sentence:
            continue
        if _APOLOGY.match(sentence):
            continue
        ack = _ACK.match(sentence)
        if ack:
            steps.append(ack.group(1).capitalize() + ".")
            sentence = sentence[ack.end():].strip()
            if not sentence:
                continue
        for clause in _CONNECTIVE_SPLIT.split(sentence):
            done = _normalize_clause(clause)
            if done:
                steps.append(done)
    return _as_instructions(steps, fallback=lowered)


def _as_instructions(steps: list[str], fallback: str) -> list[StepInstruction]:
    if not steps:
        steps = [_finish(fallback) or "Stop."]
    return [StepInstruction(i + 1, s) for i, s in enumerate(steps)]


def steps_to_target(steps: list[StepInstruction]) -> str:
    """Numbered lowercase training target: "1. <s1> 2. <s2> ..."."""
    return " ".join(f"{s.index}. {s.text.lower()}" for s in steps)


@dataclass
class RuleBackend:
    kind: str = "rule"


@dataclass
class RemoteBackend:
    """HTTP completion backend: POST {prompt, max_tokens, temperature} -> {text}."""

    endpoint: str
    kind: str = "remote"
    model: str | None = None
    timeout: float = 10.0
    max_tokens: int = 128
    retries: int = 2
    max_inflight: int = 4
    template: PromptTemplate = PromptTemplate()
    transport: httpx.BaseTransport | None = None  # injectable for tests
    _gate: threading.Semaphore = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._gate = threading.Semaphore(self.max_inflight)

    def complete(self, prompt: str) -> str:
        payload: dict = {"prompt": prompt, "max_tokens": self.max_tokens, "temperature": 0}
        if self.model:
            payload["model"] = self.model
        last_error: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                with self._gate:
                    with httpx.Client(transport=self.transport, timeout=self.timeout) as client:
                        resp = client.post(self.endpoint, json=payload)
                resp.raise_for_status()
                return resp.json()["text"]
            except (httpx.HTTPError, KeyError, ValueError) as err:
                last_error = err
        raise ParseStepError(f"remote completion failed: {last_error}", raw_response=None)


CompletionBackend = RuleBackend | RemoteBackend


def parse_by_step(r: str, backend: CompletionBackend = RuleBackend()) -> list[StepInstruction]:
    """Normalize a response into numbered step instructions via the chosen backend."""
    if not r.strip():
        raise ParseStepError("response must be nonempty")
    if isinstance(backend, RuleBackend):
        return rule_parse(r)
    prompt = build_prompt(r, backend.template)
    completion = backend.complete(prompt)
    steps = _parse_numbered("1. " + completion.strip().lower())
    if not steps:
        raise ParseStepError("remote backend returned no parsable steps",
                             raw_response=completion)
    return [StepInstruction(i + 1, s) for i, s in enumerate(steps)]

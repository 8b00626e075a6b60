"""Ask a chat-completion service which reference validates each factual point.

The prompt lists the numbered documents and the point, and requests ONLY
the winning reference number(s), comma-separated, at most C of them; no
chain-of-thought, since reasoning tokens dominate cost at this call
volume. Replies become binary 1/0 score rows so the generic top-C
selection applies uniformly across matchers.
"""

from __future__ import annotations

import json
import re
import threading
import time
from dataclasses import dataclass
from hashlib import sha256
from pathlib import Path
from typing import Protocol

from .domain import FactualPoint, RagBundle
from .scoring import ScoringContext
from .tokenizer import DEFAULT_CONFIG, TokenizerConfig

# Accepts exactly: optional whitespace, comma/space-separated integers.
_REPLY_RE = re.compile(r"\s*\d+(?:(?:\s*,\s*|\s+)\d+)*\s*")

PROMPT_TEMPLATE_V1 = (
    "You are given {doc_count} numbered reference documents and one statement.\n"
    "\n"
    "{documents}\n"
    "\n"
    "Statement: {point}\n"
    "\n"
    "Which reference document(s) support the statement? Reply with ONLY the\n"
    "winning reference number(s), comma-separated, at most {max_citations}.\n"
)

STRICT_REMINDER = (
    "\nYour previous reply could not be parsed. Reply with digits and commas"
    " only, for example `2` or `1,3`. No other text.\n"
)


class LlmError(Exception):
    pass


class LlmTransportError(LlmError):
    def __init__(self, message: str, attempts: int):
        super().__init__(message)
        self.attempts = attempts


class ReplayExhaustedError(LlmError):
    pass


@dataclass(frozen=True)
class LlmClientConfig:
    endpoint: str = ""
    model: str = ""
    timeout_s: float = 30.0
    max_retries: int = 2
    temperature: float = 0.0

    def __post_init__(self) -> None:
        # Citation picking wants determinism, not creativity.
        if self.temperature != 0.0:
            raise ValueError("temperature is fixed at 0")


@dataclass(frozen=True)
class PromptConfig:
    template: str = PROMPT_TEMPLATE_V1
    strict_reminder: str = STRICT_REMINDER
    max_doc_tokens: int = 512


DEFAULT_PROMPT = PromptConfig()


class LlmClient(Protocol):
    def complete(self, prompt: str) -> str: ...


def prompt_key(prompt: str) -> str:
    return sha256(prompt.encode("utf-8")).hexdigest()[:16]


class ReplayLlmClient:
    """Serves canned replies from a JSONL fixture; no network, fully
    deterministic.

    Two fixture styles: lines of {"key": prompt_key(prompt), "reply": ...}
    are looked up by prompt (safe under concurrency and resume), lines of
    {"reply": ...} are consumed in order.
    """

    def __init__(self, path: str | Path):
        self._lock = threading.Lock()
        self._queue: list[str] = []
        self._by_key: dict[str, str] = {}
        for line in Path(path).read_text("utf-8").splitlines():
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if "key" in record:
                self._by_key[record["key"]] = record["reply"]
            else:
                self._queue.append(record["reply"])

    def complete(self, prompt: str) -> str:
        if self._by_key:
            key = prompt_key(prompt)
            try:
                return self._by_key[key]
            except KeyError:
                raise ReplayExhaustedError(f"no canned reply for prompt key {key}") from None
        with self._lock:
            if not self._queue:
                raise ReplayExhaustedError("replay fixture exhausted")
            return self._queue.pop(0)


class HttpChatLlmClient:
    """Minimal chat-completions client (OpenAI-style wire format)."""

    def __init__(self, config: LlmClientConfig, client=None):
        import httpx

        self.config = config
        self._client = client or httpx.Client(timeout=config.timeout_s)

    def complete(self, prompt: str) -> str:
        import httpx

        body = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        }
        last_error = "no attempt made"
        attempts = self.config.max_retries + 1
        for attempt in range(1, attempts + 1):
            try:
                response = self._client.post(self.config.endpoint, json=body)
            except httpx.HTTPError as exc:
                last_error = f"transport error: {exc}"
            else:
                if response.status_code >= 500:
                    last_error = f"server error {response.status_code}"
                elif response.status_code >= 400:
                    raise LlmTransportError(
                        f"request rejected ({response.status_code})", attempts=attempt
                    )
                else:
                    data = response.json()
                    return data["choices"][0]["message"]["content"]
            if attempt < attempts:
                time.sleep(0.2 * attempt)
        raise LlmTransportError(last_error, attempts=attempts)


def parse_reply(reply: str) -> list[int] | None:
    """Strict reply grammar; returns None on any deviation."""
    if not _REPLY_RE.fullmatch(reply):
        return None
    return [int(x) for x in re.findall(r"\d+", reply)]


def _truncate_words(text: str, limit: int) -> tuple[str, bool]:
    words = text.split()
    if len(words) <= limit:
        return text, False
    return " ".join(words[:limit]), True


def build_prompt(point: FactualPoint, bundle: RagBundle,
                 config: PromptConfig = DEFAULT_PROMPT) -> tuple[str, list[int]]:
    """Render the matching prompt; also reports which documents were truncated."""
    truncated: list[int] = []
    blocks = []
    for doc in bundle.documents:
        text, cut = _truncate_words(doc.text, config.max_doc_tokens)
        if cut:
            truncated.append(doc.index)
        blocks.append(f"[{doc.index + 1}] {text}")
    prompt = config.template.format(
        doc_count=len(bundle.documents),
        documents="\n".join(blocks),
        point=point.text,
        max_citations=max(point.citation_count, 1),
    )
    return prompt, truncated


def match_point(
    point: FactualPoint,
    bundle: RagBundle,
    client: LlmClient,
    *,
    prompt_config: PromptConfig | None = None,
    tokenizer_config: TokenizerConfig = DEFAULT_CONFIG,
    diagnostics: list[str] | None = None,
) -> list[float]:
    """Score row for one point: 1.0 for documents the model picked, else 0.0.

    Unparseable replies get one retry with a stricter reminder, then fall
    back to this point's keyword scores. Out-of-range numbers are ignored
    with a diagnostic. Points with no citations skip the call entirely
    (there is nothing to re-attribute).
    """
    notes = diagnostics if diagnostics is not None else []
    doc_count = len(bundle.documents)
    if point.citation_count == 0:
        return [0.0] * doc_count

    config = prompt_config or DEFAULT_PROMPT
    prompt, truncated = build_prompt(point, bundle, config)
    for doc_index in truncated:
        notes.append(
            f"point {point.ordinal}: document {doc_index} truncated to "
            f"{config.max_doc_tokens} tokens in prompt"
        )

    numbers = parse_reply(client.complete(prompt))
    if numbers is None:
        numbers = parse_reply(client.complete(prompt + config.strict_reminder))
    if numbers is None:
        notes.append(f"point {point.ordinal}: llm reply unparseable twice; using keyword scores")
        return ScoringContext(bundle.documents, tokenizer_config=tokenizer_config).keyword_row(point)

    row = [0.0] * doc_count
    chosen = 0
    for number in numbers:
        if chosen >= point.citation_count:
            notes.append(f"point {point.ordinal}: llm returned more than {point.citation_count} numbers; extras ignored")
            break
        if 1 <= number <= doc_count:
            if row[number - 1] == 0.0:
                row[number - 1] = 1.0
                chosen += 1
        else:
            notes.append(f"point {point.ordinal}: llm reply number {number} out of range; ignored")
    return row

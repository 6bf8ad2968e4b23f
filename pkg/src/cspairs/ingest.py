"""Normalisation, sentence segmentation and admission gates for raw posts."""

import re
from dataclasses import dataclass
from pathlib import Path

import httpx

from .errors import BackendError, DataError
from .records import read_records

URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
MENTION_RUN_RE = re.compile(r"@\w+(?:\s+@\w+)*")
HASHTAG_RE = re.compile(r"#\w+\Z")
HAN_RUN_RE = re.compile(r"[一-鿿]+")

PLACEHOLDERS = ("@USER", "HTTPURL")
SENTENCE_END = ".!?…"
NO_SPACE_BEFORE = set(",.;:!?…)]}»”’%")
NO_SPACE_AFTER = set("([{«“‘¿¡")

MAX_CHARS = 200
MIN_TOKENS = 6


def is_han(ch: str) -> bool:
    return 0x4E00 <= ord(ch) <= 0x9FFF


@dataclass
class RawDocument:
    id: str
    text: str
    source_language_claim: str
    domain: str = "social"


@dataclass
class SentenceRecord:
    doc_id: str
    index: int
    text: str
    tokens: list[str]
    lang_claim: str | None = None

    @property
    def sentence_id(self) -> str:
        return f"{self.doc_id}:{self.index}"


def normalize(text: str) -> str:
    """Replace URLs with HTTPURL and collapse each run of mentions into one @USER.

    Total and idempotent; emojis, hashtags and all other text pass through.
    """
    text = URL_RE.sub("HTTPURL", text)
    return MENTION_RUN_RE.sub("@USER", text)


def tokenize(text: str, han_tokenizer=None) -> list[str]:
    """Whitespace tokenization with punctuation split off word edges.

    @USER, HTTPURL, hashtags and symbol-only chunks (emoji, punctuation runs)
    stay atomic.  Han character runs are handed to `han_tokenizer` when one is
    configured and split into single characters otherwise.
    """
    tokens: list[str] = []
    for chunk in text.split():
        tokens.extend(_split_chunk(chunk, han_tokenizer))
    return tokens


def _split_chunk(chunk, han_tokenizer):
    if chunk in PLACEHOLDERS or HASHTAG_RE.match(chunk):
        return [chunk]
    if not any(ch.isalnum() for ch in chunk):
        return [chunk]
    i, j = 0, len(chunk)
    while i < j and not (chunk[i].isalnum() or chunk[i] in "#@"):
        i += 1
    while j > i and not chunk[j - 1].isalnum():
        j -= 1
    parts = []
    if i > 0:
        parts.append(chunk[:i])
    parts.extend(_split_han_runs(chunk[i:j], han_tokenizer))
    if j < len(chunk):
        parts.append(chunk[j:])
    return [p for p in parts if p]


def _split_han_runs(core, han_tokenizer):
    parts = []
    pos = 0
    for m in HAN_RUN_RE.finditer(core):
        if m.start() > pos:
            parts.append(core[pos:m.start()])
        run = m.group(0)
        parts.extend(han_tokenizer(run) if han_tokenizer else list(run))
        pos = m.end()
    if pos < len(core):
        parts.append(core[pos:])
    return parts


def detokenize(tokens: list[str]) -> str:
    return detokenize_with_offsets(tokens)[0]


def detokenize_with_offsets(tokens: list[str]):
    """Render tokens back to text; returns (text, per-token char spans)."""
    text = ""
    spans = []
    for tok in tokens:
        if text and not (tok and tok[0] in NO_SPACE_BEFORE) and text[-1] not in NO_SPACE_AFTER:
            text += " "
        start = len(text)
        text += tok
        spans.append((start, len(text)))
    return text, spans


def obscenity_gate(tokens, obscene_lexicon) -> bool:
    """True iff no token, case-folded, is in the obscene lexicon."""
    return not any(t.casefold() in obscene_lexicon for t in tokens)


def length_gate(sentence: SentenceRecord, max_chars: int = MAX_CHARS,
                min_tokens: int = MIN_TOKENS) -> bool:
    return len(sentence.text) <= max_chars and len(sentence.tokens) >= min_tokens


class FallbackSegmenter:
    """Deterministic rule segmenter: split after terminal punctuation that is
    followed by whitespace and an uppercase letter or a han character."""

    def boundaries(self, text: str) -> list[tuple[int, int]]:
        if not text.strip():
            return []
        bounds = []
        start = 0
        n = len(text)
        i = 0
        while i < n:
            if text[i] in SENTENCE_END:
                j = i + 1
                while j < n and text[j] in SENTENCE_END:
                    j += 1
                k = j
                while k < n and text[k].isspace():
                    k += 1
                if k > j and k < n and (text[k].isupper() or is_han(text[k])):
                    bounds.append((start, j))
                    start = k
                    i = k
                    continue
                i = j
            else:
                i += 1
        if start < n:
            bounds.append((start, n))
        return bounds


class HttpSegmenter:
    """Client for a segmentation endpoint: {text} -> {char_offsets: [[s, e], ...]}."""

    def __init__(self, url: str, timeout: float = 30.0, transport=None):
        self.url = url
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def boundaries(self, text: str) -> list[tuple[int, int]]:
        try:
            resp = self._client.post(self.url, json={"text": text})
            resp.raise_for_status()
            payload = resp.json()
        except httpx.HTTPError as exc:
            raise BackendError(f"segmentation backend {self.url}: {exc}") from exc
        try:
            return [(int(s), int(e)) for s, e in payload["char_offsets"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendError(f"segmentation backend {self.url}: malformed response") from exc


def segment(document_text: str, backend, doc_id: str = "", lang_claim=None,
            han_tokenizer=None) -> list[SentenceRecord]:
    """Cut a document into sentences using the configured backend."""
    sentences = []
    for s, e in backend.boundaries(document_text):
        sent = document_text[s:e].strip()
        if not sent:
            continue
        sentences.append(SentenceRecord(doc_id, len(sentences), sent,
                                        tokenize(sent, han_tokenizer), lang_claim))
    return sentences


def load_obscene_lexicon(path) -> frozenset:
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        word = line.strip().casefold()
        if word:
            words.add(word)
    return frozenset(words)


def read_corpus(path) -> list[RawDocument]:
    """Read the input corpus: one document per line with fields
    {id, text, lang_claim, domain}."""
    _, rows = read_records(path)
    docs = []
    seen = set()
    for row in rows:
        try:
            doc = RawDocument(row["id"], row["text"], row.get("lang_claim", ""),
                              row.get("domain", "social"))
        except KeyError as exc:
            raise DataError(f"{path}: document missing field {exc}") from exc
        if not doc.text:
            raise DataError(f"{path}: document {doc.id} has empty text")
        if doc.id in seen:
            raise DataError(f"{path}: duplicate document id {doc.id}")
        seen.add(doc.id)
        docs.append(doc)
    return docs

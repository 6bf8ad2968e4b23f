"""Token-level code-switch status labels and the admission heuristics that
depend on them.

Every token gets exactly one label: the non-English language of the pair
("lang1"), "english", or "other" with a sub-reason (mixed, named_entity,
neutral, unknown).
"""

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import DataError
from .ingest import PLACEHOLDERS, SentenceRecord, is_han

NE_CAPITALIZED_FRACTION = 0.75
UNKNOWN_MAX_FRACTION = 0.5
UMLAUT_CHARS = set("äöüÄÖÜ")

LABEL_KINDS = ("lang1", "english", "other")
OTHER_REASONS = ("mixed", "named_entity", "neutral", "unknown")


@dataclass(frozen=True)
class CsLabel:
    kind: str
    reason: str | None = None

    def __post_init__(self):
        if self.kind not in LABEL_KINDS:
            raise DataError(f"unknown label kind {self.kind!r}")
        if self.kind == "other" and self.reason not in OTHER_REASONS:
            raise DataError(f"label 'other' needs a reason, got {self.reason!r}")

    def __str__(self):
        return self.kind if self.reason is None else f"{self.kind}:{self.reason}"

    @classmethod
    def parse(cls, s: str) -> "CsLabel":
        kind, _, reason = s.partition(":")
        return cls(kind, reason or None)


LANG1 = CsLabel("lang1")
ENGLISH = CsLabel("english")
OTHER_MIXED = CsLabel("other", "mixed")
OTHER_NAMED_ENTITY = CsLabel("other", "named_entity")
OTHER_NEUTRAL = CsLabel("other", "neutral")
OTHER_UNKNOWN = CsLabel("other", "unknown")


@dataclass
class CsSentence:
    doc_id: str
    index: int
    text: str
    tokens: list[str]
    labels: list[CsLabel]
    lang_claim: str | None = None

    def __post_init__(self):
        if len(self.labels) != len(self.tokens):
            raise DataError(
                f"sentence {self.doc_id}:{self.index}: "
                f"{len(self.labels)} labels for {len(self.tokens)} tokens")

    @property
    def sentence_id(self) -> str:
        return f"{self.doc_id}:{self.index}"

    def to_record(self) -> dict:
        rec = {
            "doc_id": self.doc_id,
            "index": self.index,
            "text": self.text,
            "tokens": list(self.tokens),
            "labels": [str(l) for l in self.labels],
        }
        if self.lang_claim is not None:
            rec["lang_claim"] = self.lang_claim
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "CsSentence":
        return cls(rec["doc_id"], rec["index"], rec["text"], list(rec["tokens"]),
                   [CsLabel.parse(l) for l in rec["labels"]], rec.get("lang_claim"))


@dataclass(frozen=True)
class LexiconSet:
    """Case-folded wordlists and borrowing lists for one language pair."""

    lang1_words: frozenset
    english_words: frozenset
    borrowings_to_english: frozenset = frozenset()
    borrowings_from_english: frozenset = frozenset()
    homographs: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if not self.homographs <= (self.lang1_words & self.english_words):
            raise DataError("homographs must be a subset of both wordlists")


def is_word(token: str) -> bool:
    """True for tokens eligible for wordlist lookup: not a placeholder,
    hashtag, or digit/symbol-only chunk."""
    if token in PLACEHOLDERS or token.startswith("#"):
        return False
    return any(ch.isalpha() for ch in token)


def _capitalized(token: str) -> bool:
    return bool(token) and token[0].isupper()


def tag_tokens(sentence: SentenceRecord, lexicons: LexiconSet) -> CsSentence:
    """Assign each token a label by wordlist lookup.

    Words found in both lists are interlingual homographs and stay unknown;
    non-word tokens are language-neutral.
    """
    labels = []
    for tok in sentence.tokens:
        if not is_word(tok):
            labels.append(OTHER_NEUTRAL)
            continue
        w = tok.casefold()
        in_l1 = w in lexicons.lang1_words
        in_en = w in lexicons.english_words
        if in_l1 and in_en:
            labels.append(OTHER_UNKNOWN)
        elif in_l1:
            labels.append(LANG1)
        elif in_en:
            labels.append(ENGLISH)
        else:
            labels.append(OTHER_UNKNOWN)
    return CsSentence(sentence.doc_id, sentence.index, sentence.text,
                      list(sentence.tokens), labels, sentence.lang_claim)


def reassign_borrowings(cs: CsSentence, lexicons: LexiconSet) -> CsSentence:
    """Borrowed words are fully assimilated and must not count as switches:
    relabel them language-neutral."""
    labels = list(cs.labels)
    for i, tok in enumerate(cs.tokens):
        w = tok.casefold()
        if labels[i] == LANG1 and w in lexicons.borrowings_from_english:
            labels[i] = OTHER_NEUTRAL
        elif labels[i] == ENGLISH and w in lexicons.borrowings_to_english:
            labels[i] = OTHER_NEUTRAL
    return replace(cs, labels=labels)


def mark_named_entity_runs(cs: CsSentence,
                           min_fraction: float = NE_CAPITALIZED_FRACTION) -> CsSentence:
    """Relabel probable named entities found by the capitalization heuristic.

    Within each maximal run of word tokens, greedily take leftmost-longest
    windows that start and end on a capitalized token, span at least two
    tokens, and keep the capitalized fraction above `min_fraction`; every
    token inside such a window becomes other:named_entity.  Non-word tokens
    break runs.
    """
    labels = list(cs.labels)
    toks = cs.tokens
    i = 0
    n = len(toks)
    while i < n:
        if not is_word(toks[i]):
            i += 1
            continue
        j = i
        while j < n and is_word(toks[j]):
            j += 1
        k = i
        while k < j:
            if not _capitalized(toks[k]):
                k += 1
                continue
            caps = 0
            best = None
            for m in range(k, j):
                if _capitalized(toks[m]):
                    caps += 1
                    if m > k and caps / (m - k + 1) > min_fraction:
                        best = m + 1
            if best is not None:
                for t in range(k, best):
                    labels[t] = OTHER_NAMED_ENTITY
                k = best
            else:
                k += 1
        i = j
    return replace(cs, labels=labels)


def unknown_gate(cs: CsSentence, max_fraction: float = UNKNOWN_MAX_FRACTION) -> bool:
    """Keep only sentences where unknown words are strictly below the cap.

    The denominator counts word tokens only; a sentence with no word tokens
    is rejected outright.
    """
    words = [l for t, l in zip(cs.tokens, cs.labels) if is_word(t)]
    if not words:
        return False
    unknown = sum(1 for l in words if l == OTHER_UNKNOWN)
    return unknown / len(words) < max_fraction


def han_lid(sentence: SentenceRecord) -> CsSentence:
    """Character-range labelling for Chinese-English data: han-only tokens are
    Lang1, Latin-letter tokens are English, han/Latin mixtures are
    other:mixed, everything else neutral."""
    labels = []
    for tok in sentence.tokens:
        has_han = any(is_han(ch) for ch in tok)
        has_latin = any(ch.isalpha() and not is_han(ch) for ch in tok)
        if has_han and has_latin:
            labels.append(OTHER_MIXED)
        elif has_han:
            labels.append(LANG1)
        elif has_latin:
            labels.append(ENGLISH)
        else:
            labels.append(OTHER_NEUTRAL)
    return CsSentence(sentence.doc_id, sentence.index, sentence.text,
                      list(sentence.tokens), labels, sentence.lang_claim)


def consistency_check(cs: CsSentence, mono_lid_backend, claimed_language: str) -> bool:
    """Second-pass LID: the string of Lang1 tokens must identify as the
    claimed language."""
    lang1_text = " ".join(t for t, l in zip(cs.tokens, cs.labels) if l == LANG1)
    if not lang1_text:
        return False
    predicted, _ = mono_lid_backend.identify(lang1_text)
    return predicted == claimed_language


def cs_qualification(cs: CsSentence) -> bool:
    """A sentence qualifies as code-switched when it has at least one switch
    point and a run of two or more adjacent tokens of each language."""
    from .pairgen import find_switch_points

    if not find_switch_points(cs):
        return False

    def has_run(target):
        return any(a == target and b == target
                   for a, b in zip(cs.labels, cs.labels[1:]))

    return has_run(LANG1) and has_run(ENGLISH)


def umlaut_gate(cs: CsSentence, lexicons: LexiconSet) -> bool:
    """Optional filter: reject sentences containing umlaut words that the
    Lang1 wordlist does not know."""
    for tok in cs.tokens:
        if any(ch in UMLAUT_CHARS for ch in tok) and tok.casefold() not in lexicons.lang1_words:
            return False
    return True


def load_wordlist(path) -> frozenset:
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        word = line.strip().casefold()
        if word:
            words.add(word)
    return frozenset(words)


def load_bilingual_dictionary(path) -> list:
    """Tab-separated pairs (lang1 entry, english entry), one per line."""
    entries = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected two tab-separated fields")
        entries.append((parts[0], parts[1]))
    return entries


def remove_identical_dictionary_entries(lang1_words, english_words, entries):
    """Drop words that a bilingual dictionary maps to an identical form in
    the other language; such words are useless for LID."""
    identical = {w1.casefold() for w1, w2 in entries if w1.casefold() == w2.casefold()}
    return frozenset(lang1_words) - identical, frozenset(english_words) - identical


def load_lexicons(manifest_path) -> LexiconSet:
    """Load a LexiconSet from a manifest mapping role -> wordlist path.

    Roles: lang1_words, english_words, borrowings_to_english,
    borrowings_from_english, and optionally bilingual_dictionary.  Paths are
    resolved relative to the manifest file.
    """
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{manifest_path}: invalid manifest: {exc}") from exc

    def resolve(role, required=False):
        rel = manifest.get(role)
        if rel is None:
            if required:
                raise DataError(f"{manifest_path}: manifest missing role {role!r}")
            return None
        return manifest_path.parent / rel

    lang1 = load_wordlist(resolve("lang1_words", required=True))
    english = load_wordlist(resolve("english_words", required=True))
    dict_path = resolve("bilingual_dictionary")
    if dict_path is not None:
        lang1, english = remove_identical_dictionary_entries(
            lang1, english, load_bilingual_dictionary(dict_path))

    def optional_list(role):
        path = resolve(role)
        return load_wordlist(path) if path is not None else frozenset()

    return LexiconSet(
        lang1_words=lang1,
        english_words=english,
        borrowings_to_english=optional_list("borrowings_to_english"),
        borrowings_from_english=optional_list("borrowings_from_english"),
        homographs=lang1 & english,
    )

"""Clients for external annotation backends, plus a small built-in language
identifier that serves as a deterministic stand-in during tests."""

import math
from collections import Counter
from importlib import resources

import httpx

from .errors import BackendError


class HttpLanguageId:
    """Client for a monolingual LID endpoint: {text} -> {language, confidence}."""

    def __init__(self, url: str, timeout: float = 30.0, transport=None):
        self.url = url
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def identify(self, text: str):
        try:
            resp = self._client.post(self.url, json={"text": text})
            resp.raise_for_status()
            payload = resp.json()
        except httpx.HTTPError as exc:
            raise BackendError(f"language id backend {self.url}: {exc}") from exc
        try:
            return str(payload["language"]), float(payload["confidence"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendError(f"language id backend {self.url}: malformed response") from exc


def _trigrams(text: str) -> Counter:
    grams = Counter()
    for word in text.casefold().split():
        padded = f" {word} "
        for i in range(len(padded) - 2):
            grams[padded[i:i + 3]] += 1
    return grams


class TrigramLanguageId:
    """Character-trigram cosine-profile classifier.

    Trained on the small seed texts bundled with the package; deterministic
    and dependency-free, which makes it suitable as the monolingual LID
    backend in tests.
    """

    def __init__(self, profiles: dict):
        self._profiles = {}
        for lang, counts in profiles.items():
            norm = math.sqrt(sum(c * c for c in counts.values()))
            if norm == 0:
                continue
            self._profiles[lang] = {g: c / norm for g, c in counts.items()}
        if not self._profiles:
            raise BackendError("trigram classifier has no usable profiles")

    @classmethod
    def from_seed_texts(cls, texts: dict) -> "TrigramLanguageId":
        return cls({lang: _trigrams(text) for lang, text in texts.items()})

    @classmethod
    def bundled(cls, languages=("de", "en")) -> "TrigramLanguageId":
        texts = {}
        for lang in languages:
            ref = resources.files("cspairs").joinpath(f"data/seed_{lang}.txt")
            try:
                texts[lang] = ref.read_text(encoding="utf-8")
            except FileNotFoundError as exc:
                raise BackendError(f"no bundled seed text for language {lang!r}") from exc
        return cls.from_seed_texts(texts)

    def identify(self, text: str):
        grams = _trigrams(text)
        norm = math.sqrt(sum(c * c for c in grams.values()))
        if norm == 0:
            first = sorted(self._profiles)[0]
            return first, 0.0
        sims = {}
        for lang, profile in self._profiles.items():
            dot = sum(profile.get(g, 0.0) * c for g, c in grams.items())
            sims[lang] = dot / norm
        best = max(sorted(sims), key=lambda l: sims[l])
        total = sum(sims.values())
        confidence = sims[best] / total if total > 0 else 0.0
        return best, confidence

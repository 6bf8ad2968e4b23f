"""Sentence log-probability collection from scorer backends, and the derived
accuracy and margin measures.

Scores are natural-log probabilities of the raw sentence text; no length
normalization is ever applied.  Masked-LM backends are expected to report
their pseudo-log-likelihood as the sentence score; that contract is theirs.
"""

import math
import time
from dataclasses import dataclass
from pathlib import Path

import httpx

from .errors import BackendError, DataError


@dataclass(frozen=True)
class ScoredPair:
    pair_id: str
    logp_observed: float
    logp_manipulated: float
    scorer_id: str = ""


@dataclass(frozen=True)
class ScoreFailure:
    pair_id: str
    reason: str


@dataclass
class ScoreRun:
    scored: list
    failures: list

    @property
    def failed_ids(self):
        return [f.pair_id for f in self.failures]


def margin(scored_pair: ScoredPair) -> float:
    """Log-probability advantage of the observed sentence over the variant."""
    return scored_pair.logp_observed - scored_pair.logp_manipulated


def accuracy(scored_pairs) -> float:
    """Fraction of pairs where the observed sentence scores strictly higher;
    ties count against the scorer."""
    scored_pairs = list(scored_pairs)
    if not scored_pairs:
        raise DataError("empty challenge set")
    hits = sum(1 for sp in scored_pairs if sp.logp_observed > sp.logp_manipulated)
    return hits / len(scored_pairs)


def read_score_file(path) -> dict:
    """Whitespace-separated columns: pair_id, logp_observed, logp_manipulated.
    Lines starting with '#' are comments."""
    scores = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise DataError(f"{path}:{lineno}: expected 3 columns, got {len(parts)}")
        try:
            scores[parts[0]] = (float(parts[1]), float(parts[2]))
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: bad score value: {exc}") from exc
    return scores


def write_score_file(path, scored_pairs) -> None:
    lines = ["# pair_id logp_observed logp_manipulated  (natural log)"]
    for sp in scored_pairs:
        lines.append(f"{sp.pair_id} {sp.logp_observed!r} {sp.logp_manipulated!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


class FileScorer:
    """Scores read from a pre-computed score file."""

    def __init__(self, path, scorer_id: str = "file"):
        self.id = scorer_id
        self._scores = read_score_file(path)

    def score_items(self, items):
        results = {}
        failures = {}
        for pair_id, _obs, _man in items:
            if pair_id in self._scores:
                results[pair_id] = self._scores[pair_id]
            else:
                failures[pair_id] = "missing from score file"
        return results, failures


class EndpointScorer:
    """Client for a scoring endpoint: {texts: [...]} -> {logprobs: [...]},
    responses in request order.  Items are sent in batches; a batch that
    still fails after the configured retries marks all its pairs failed."""

    def __init__(self, url, scorer_id: str = "endpoint", batch_size: int = 32,
                 retries: int = 3, retry_delay: float = 0.5, timeout: float = 120.0,
                 transport=None):
        self.id = scorer_id
        self.url = url
        self.batch_size = batch_size
        self.retries = retries
        self.retry_delay = retry_delay
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def _post(self, texts):
        last = None
        for attempt in range(self.retries):
            try:
                resp = self._client.post(self.url, json={"texts": texts})
                resp.raise_for_status()
                return resp.json()
            except httpx.HTTPError as exc:
                last = exc
                if attempt + 1 < self.retries and self.retry_delay:
                    time.sleep(self.retry_delay)
        raise BackendError(f"scorer endpoint {self.url}: {last}")

    def score_items(self, items):
        results = {}
        failures = {}
        for start in range(0, len(items), self.batch_size):
            batch = items[start:start + self.batch_size]
            texts = []
            for _pair_id, obs, man in batch:
                texts.extend((obs, man))
            try:
                payload = self._post(texts)
                logprobs = payload["logprobs"]
                if not isinstance(logprobs, list) or len(logprobs) != len(texts):
                    raise BackendError("malformed response")
                values = [float(v) for v in logprobs]
            except (BackendError, KeyError, TypeError, ValueError) as exc:
                for pair_id, _obs, _man in batch:
                    failures[pair_id] = f"transport/response failure: {exc}"
                continue
            for k, (pair_id, _obs, _man) in enumerate(batch):
                results[pair_id] = (values[2 * k], values[2 * k + 1])
        return results, failures


def score_pairs(pairs, backend) -> ScoreRun:
    """Score every pair with one backend.

    Raw sentence texts are submitted as-is.  Failed items are recorded and the
    run continues; output is sorted by pair id.
    """
    items = [(p.pair_id, p.observed.text, p.manipulated.text) for p in pairs]
    results, failed = backend.score_items(items)
    scored = []
    failures = [ScoreFailure(pid, reason) for pid, reason in failed.items()]
    for pair_id, _obs_text, _man_text in items:
        if pair_id not in results:
            continue
        obs, man = results[pair_id]
        if not (math.isfinite(obs) and math.isfinite(man)):
            failures.append(ScoreFailure(pair_id, "non-finite score"))
            continue
        scored.append(ScoredPair(pair_id, obs, man, backend.id))
    scored.sort(key=lambda sp: sp.pair_id)
    failures.sort(key=lambda f: f.pair_id)
    return ScoreRun(scored, failures)

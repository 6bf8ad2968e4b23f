"""Assignment planning and durable storage for forced-choice judgments."""

import hashlib
import json
import os
import random
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from ..errors import DataError
from ..records import canonical_json

BATCH_SIZE = 67


def presentation_position(seed: int, pair_id: str, annotator_id: str) -> str:
    """Side ("A" or "B") on which the observed sentence is shown.

    A pure function of (seed, pair, annotator), so presentation never changes
    across service restarts.
    """
    digest = hashlib.sha256(f"{seed}:{pair_id}:{annotator_id}".encode("utf-8")).digest()
    return "A" if digest[0] % 2 == 0 else "B"


def issue_token(seed: int, annotator_id: str) -> str:
    return hashlib.sha256(f"{seed}:token:{annotator_id}".encode("utf-8")).hexdigest()[:20]


@dataclass
class Assignment:
    pair_id: str
    annotators: list


@dataclass
class Plan:
    seed: int
    k: int
    batch_size: int
    annotators: list
    tokens: dict          # annotator id -> opaque session token
    assignments: list     # one Assignment per pair
    batches: dict         # annotator id -> ordered batches of pair ids

    def observed_position(self, pair_id: str, annotator_id: str) -> str:
        return presentation_position(self.seed, pair_id, annotator_id)

    def annotator_pairs(self, annotator_id: str) -> list:
        return [pid for batch in self.batches[annotator_id] for pid in batch]

    def batch_index_of(self, annotator_id: str, pair_id: str) -> int:
        for idx, batch in enumerate(self.batches[annotator_id]):
            if pair_id in batch:
                return idx
        raise DataError(f"pair {pair_id} not assigned to {annotator_id}")

    def annotator_for_token(self, token: str) -> str | None:
        for annotator, t in self.tokens.items():
            if t == token:
                return annotator
        return None

    def to_record(self) -> dict:
        return {
            "seed": self.seed,
            "k": self.k,
            "batch_size": self.batch_size,
            "annotators": list(self.annotators),
            "tokens": dict(self.tokens),
            "assignments": [{"pair_id": a.pair_id, "annotators": list(a.annotators)}
                            for a in self.assignments],
            "batches": {a: [list(b) for b in bs] for a, bs in self.batches.items()},
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Plan":
        return cls(rec["seed"], rec["k"], rec["batch_size"], list(rec["annotators"]),
                   dict(rec["tokens"]),
                   [Assignment(a["pair_id"], list(a["annotators"])) for a in rec["assignments"]],
                   {a: [list(b) for b in bs] for a, bs in rec["batches"].items()})

    def save(self, path) -> None:
        Path(path).write_text(canonical_json(self.to_record()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Plan":
        return cls.from_record(json.loads(Path(path).read_text(encoding="utf-8")))


def plan_assignments(pair_ids, pool, k: int, seed: int,
                     batch_size: int = BATCH_SIZE) -> Plan:
    """Assign each pair to k distinct annotators with balanced load.

    Greedy least-loaded selection with seeded tie-breaking keeps per-annotator
    loads within one pair of each other; each annotator's pairs are then cut
    into ordered batches of `batch_size` (the final batch may be smaller).
    """
    pool = list(pool)
    pair_ids = list(pair_ids)
    if len(set(pool)) != len(pool):
        raise DataError("duplicate annotator ids in pool")
    if k < 1:
        raise DataError("k must be at least 1")
    if len(pool) < k:
        raise DataError(f"pool of {len(pool)} annotators cannot cover k={k}")
    if len(set(pair_ids)) != len(pair_ids):
        raise DataError("duplicate pair ids")
    rng = random.Random(f"{seed}:plan")
    load = {a: 0 for a in pool}
    per_annotator = {a: [] for a in pool}
    assignments = []
    for pid in pair_ids:
        ranked = sorted(pool, key=lambda a: (load[a], rng.random()))
        chosen = ranked[:k]
        for a in chosen:
            load[a] += 1
            per_annotator[a].append(pid)
        assignments.append(Assignment(pid, chosen))
    batches = {a: [pids[i:i + batch_size] for i in range(0, len(pids), batch_size)]
               for a, pids in per_annotator.items()}
    tokens = {a: issue_token(seed, a) for a in pool}
    return Plan(seed, k, batch_size, pool, tokens, assignments, batches)


@dataclass(frozen=True)
class JudgmentRecord:
    annotator_id: str
    pair_id: str
    choice: str               # "A" or "B" as submitted
    resolved_choice: str      # "observed" or "manipulated"
    observed_position: str    # where the observed sentence was shown
    batch_index: int
    timestamp: float

    def to_record(self) -> dict:
        return {
            "annotator_id": self.annotator_id,
            "pair_id": self.pair_id,
            "choice": self.choice,
            "resolved_choice": self.resolved_choice,
            "observed_position": self.observed_position,
            "batch_index": self.batch_index,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "JudgmentRecord":
        return cls(rec["annotator_id"], rec["pair_id"], rec["choice"],
                   rec["resolved_choice"], rec["observed_position"],
                   rec["batch_index"], rec["timestamp"])


class DuplicateJudgment(DataError):
    def __init__(self, original: JudgmentRecord):
        super().__init__(f"already judged: {original.annotator_id}/{original.pair_id}")
        self.original = original


class JudgmentLog:
    """Append-only judgment store with write-then-ack durability.

    Every append is flushed and fsynced before it returns, so an acknowledged
    judgment survives any later crash.  Recovery tolerates a torn trailing
    line (a crash before the ack) by truncating it away.  A periodic snapshot
    records parsed state plus a safe byte offset so reopening does not rescan
    the whole log.
    """

    def __init__(self, path, snapshot_every: int = 100):
        self.path = Path(path)
        self.snapshot_path = Path(str(path) + ".snapshot")
        self.snapshot_every = snapshot_every
        self._lock = threading.Lock()
        self._records: list[JudgmentRecord] = []
        self._seen: dict = {}
        self._since_snapshot = 0
        self._recover()

    def _recover(self) -> None:
        offset = 0
        if self.snapshot_path.exists():
            snap = json.loads(self.snapshot_path.read_text(encoding="utf-8"))
            offset = snap["offset"]
            for rec in snap["records"]:
                self._admit(JudgmentRecord.from_record(rec))
        if not self.path.exists():
            self.path.touch()
            return
        good_end = offset
        with open(self.path, "rb") as fh:
            fh.seek(offset)
            for raw in fh:
                if not raw.endswith(b"\n"):
                    break
                try:
                    rec = JudgmentRecord.from_record(json.loads(raw.decode("utf-8")))
                except (ValueError, KeyError):
                    break
                self._admit(rec)
                good_end += len(raw)
        if self.path.stat().st_size > good_end:
            with open(self.path, "r+b") as fh:
                fh.truncate(good_end)

    def _admit(self, rec: JudgmentRecord) -> None:
        key = (rec.annotator_id, rec.pair_id)
        if key not in self._seen:
            self._seen[key] = rec
            self._records.append(rec)

    def append(self, rec: JudgmentRecord) -> JudgmentRecord:
        """Duplicate check and durable write under one lock; the record is on
        disk when this returns."""
        with self._lock:
            key = (rec.annotator_id, rec.pair_id)
            if key in self._seen:
                raise DuplicateJudgment(self._seen[key])
            line = canonical_json(rec.to_record()) + "\n"
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())
            self._seen[key] = rec
            self._records.append(rec)
            self._since_snapshot += 1
            if self._since_snapshot >= self.snapshot_every:
                self._write_snapshot()
        return rec

    def _write_snapshot(self) -> None:
        snap = {"offset": self.path.stat().st_size,
                "records": [r.to_record() for r in self._records]}
        tmp = Path(str(self.snapshot_path) + ".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(canonical_json(snap))
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self.snapshot_path)
        self._since_snapshot = 0

    def records(self) -> list:
        with self._lock:
            return list(self._records)

    def get(self, annotator_id: str, pair_id: str) -> JudgmentRecord | None:
        with self._lock:
            return self._seen.get((annotator_id, pair_id))

    def judged_pairs(self, annotator_id: str) -> set:
        with self._lock:
            return {pid for (a, pid) in self._seen if a == annotator_id}

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)


def export_judgments(log: JudgmentLog, plan: Plan | None = None,
                     annotator: str | None = None,
                     complete_batches_only: bool = False) -> list:
    """Resolved judgment records in stable order, ready for the statistics
    module."""
    records = log.records()
    if annotator is not None:
        records = [r for r in records if r.annotator_id == annotator]
    if complete_batches_only:
        if plan is None:
            raise DataError("complete-batch filtering needs the plan")
        complete = set()
        for ann, batches in plan.batches.items():
            judged = {r.pair_id for r in records if r.annotator_id == ann}
            for idx, batch in enumerate(batches):
                if set(batch) <= judged:
                    complete.add((ann, idx))
        records = [r for r in records if (r.annotator_id, r.batch_index) in complete]
    records.sort(key=lambda r: (r.annotator_id, r.batch_index, r.pair_id))
    return [r.to_record() for r in records]


def new_judgment(annotator_id: str, pair_id: str, choice: str,
                 observed_position: str, batch_index: int) -> JudgmentRecord:
    if choice not in ("A", "B"):
        raise DataError(f"choice must be A or B, got {choice!r}")
    resolved = "observed" if choice == observed_position else "manipulated"
    return JudgmentRecord(annotator_id, pair_id, choice, resolved,
                          observed_position, batch_index, time.time())

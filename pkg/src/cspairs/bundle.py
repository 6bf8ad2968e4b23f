"""Per-sentence annotation bundles: translations, alignments, POS tags,
dependency parses and NER spans produced offline by external tools."""

from dataclasses import dataclass, replace
from pathlib import Path

from .errors import DataError, ValidationError
from .lid import OTHER_NAMED_ENTITY, CsSentence

BUNDLE_SCHEMA = 1
LEVENSHTEIN_MIN_DISTANCE = 5


@dataclass
class Translation:
    tokens: list[str]
    text: str


@dataclass
class AnnotationBundle:
    sentence_id: str
    language_pair: str
    cs: CsSentence
    translation_l1: Translation
    translation_en: Translation
    align_l1: list          # (cs_index, l1_index) links, order preserved
    align_en: list          # (cs_index, en_index) links
    pos_l1: list
    pos_en: list
    deps_l1: list           # (head_index, dependent_index, relation); head -1 is the root
    deps_en: list
    ner_l1: list            # (start, end) token spans
    ner_en: list

    def to_record(self) -> dict:
        return {
            "schema": BUNDLE_SCHEMA,
            "sentence_id": self.sentence_id,
            "language_pair": self.language_pair,
            "cs": self.cs.to_record(),
            "translation_l1": {"tokens": self.translation_l1.tokens, "text": self.translation_l1.text},
            "translation_en": {"tokens": self.translation_en.tokens, "text": self.translation_en.text},
            "align_l1": [list(link) for link in self.align_l1],
            "align_en": [list(link) for link in self.align_en],
            "pos_l1": list(self.pos_l1),
            "pos_en": list(self.pos_en),
            "deps_l1": [list(e) for e in self.deps_l1],
            "deps_en": [list(e) for e in self.deps_en],
            "ner_l1": [list(s) for s in self.ner_l1],
            "ner_en": [list(s) for s in self.ner_en],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "AnnotationBundle":
        if rec.get("schema") != BUNDLE_SCHEMA:
            raise DataError(f"bundle {rec.get('sentence_id')}: unsupported schema {rec.get('schema')}")
        return cls(
            sentence_id=rec["sentence_id"],
            language_pair=rec["language_pair"],
            cs=CsSentence.from_record(rec["cs"]),
            translation_l1=Translation(list(rec["translation_l1"]["tokens"]), rec["translation_l1"]["text"]),
            translation_en=Translation(list(rec["translation_en"]["tokens"]), rec["translation_en"]["text"]),
            align_l1=[tuple(link) for link in rec["align_l1"]],
            align_en=[tuple(link) for link in rec["align_en"]],
            pos_l1=list(rec["pos_l1"]),
            pos_en=list(rec["pos_en"]),
            deps_l1=[(e[0], e[1], e[2]) for e in rec["deps_l1"]],
            deps_en=[(e[0], e[1], e[2]) for e in rec["deps_en"]],
            ner_l1=[tuple(s) for s in rec["ner_l1"]],
            ner_en=[tuple(s) for s in rec["ner_en"]],
        )


@dataclass(frozen=True)
class MweSpan:
    sentence_ref: str       # "cs", "translation_l1" or "translation_en"
    start: int
    end: int
    entry: str


def _check_alignment(name, links, n_cs, n_trans):
    for k, (i, j) in enumerate(links):
        if not 0 <= i < n_cs:
            raise ValidationError(f"{name} link {k}: cs_index {i} out of range")
        if not 0 <= j < n_trans:
            raise ValidationError(f"{name} link {k}: trans_index {j} out of range")


def _check_tree(name, edges, n):
    heads = {}
    for h, d, _rel in edges:
        if not 0 <= d < n or not -1 <= h < n or h == d or d in heads:
            raise ValidationError(f"{name}: not a tree")
        heads[d] = h
    if len(heads) != n or sum(1 for h in heads.values() if h == -1) != 1:
        raise ValidationError(f"{name}: not a tree")
    for d in range(n):
        seen = set()
        node = d
        while node != -1:
            if node in seen:
                raise ValidationError(f"{name}: not a tree")
            seen.add(node)
            node = heads[node]


def _check_spans(name, spans, n):
    for k, (s, e) in enumerate(spans):
        if not (0 <= s < e <= n):
            raise ValidationError(f"{name} span {k}: out of range")


def validate_bundle(bundle: AnnotationBundle) -> AnnotationBundle:
    """Check all bundle invariants; raises ValidationError naming the failing
    field.  One-to-many and unaligned links are fine."""
    n_cs = len(bundle.cs.tokens)
    for side, trans, align, pos, deps, ner in (
        ("l1", bundle.translation_l1, bundle.align_l1, bundle.pos_l1, bundle.deps_l1, bundle.ner_l1),
        ("en", bundle.translation_en, bundle.align_en, bundle.pos_en, bundle.deps_en, bundle.ner_en),
    ):
        n = len(trans.tokens)
        if n == 0:
            raise ValidationError(f"translation_{side}: empty")
        if len(pos) != n:
            raise ValidationError(f"pos_{side}: length {len(pos)} != tokens length {n}")
        _check_alignment(f"align_{side}", align, n_cs, n)
        _check_tree(f"deps_{side}", deps, n)
        _check_spans(f"ner_{side}", ner, n)
    return bundle


def _inside(j, spans) -> bool:
    return any(s <= j < e for s, e in spans)


def ner_override(bundle: AnnotationBundle) -> AnnotationBundle:
    """Tokens aligned into an NE span of either translation become
    other:named_entity, unless they already carry an 'other' label."""
    hits = set()
    for i, j in bundle.align_l1:
        if _inside(j, bundle.ner_l1):
            hits.add(i)
    for i, j in bundle.align_en:
        if _inside(j, bundle.ner_en):
            hits.add(i)
    labels = list(bundle.cs.labels)
    for i in hits:
        if labels[i].kind != "other":
            labels[i] = OTHER_NAMED_ENTITY
    return replace(bundle, cs=replace(bundle.cs, labels=labels))


def load_mwe_lexicon(path) -> frozenset:
    """Multi-word entries, one per line; case-folded token tuples."""
    entries = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        toks = tuple(line.strip().casefold().split())
        if len(toks) >= 2:
            entries.add(toks)
    return frozenset(entries)


def tag_mwes(tokens, mwe_lexicon, sentence_ref: str = "cs") -> list[MweSpan]:
    """Leftmost-longest, non-overlapping matches of lexicon entries against
    the case-folded token sequence."""
    if isinstance(tokens, CsSentence):
        tokens = tokens.tokens
    if not mwe_lexicon:
        return []
    lowered = [t.casefold() for t in tokens]
    max_len = max(len(e) for e in mwe_lexicon)
    spans = []
    i = 0
    while i < len(lowered):
        match = None
        for length in range(min(max_len, len(lowered) - i), 1, -1):
            cand = tuple(lowered[i:i + length])
            if cand in mwe_lexicon:
                match = cand
                break
        if match:
            spans.append(MweSpan(sentence_ref, i, i + len(match), " ".join(match)))
            i += len(match)
        else:
            i += 1
    return spans


def levenshtein(a: str, b: str) -> int:
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[-1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def levenshtein_table(xs, ys):
    """All pairwise distances between two string lists as an (len(xs),
    len(ys)) matrix.

    The row DP runs over the whole cross product at once, which makes
    corpus-scale screening feasible; for a single long pair the scalar
    `levenshtein` is cheaper.
    """
    import numpy as np

    xs = list(xs)
    ys = list(ys)
    nx, ny = len(xs), len(ys)
    ans = np.zeros((nx, ny), dtype=np.int32)
    if nx == 0 or ny == 0:
        return ans
    la = max(len(s) for s in xs)
    lb = max(len(s) for s in ys)
    len_x = np.array([len(s) for s in xs])
    len_y = np.array([len(s) for s in ys])
    # padded char codes; distinct fill values so padding never matches
    ax = np.full((nx, max(la, 1)), -1, dtype=np.int32)
    for i, s in enumerate(xs):
        ax[i, :len(s)] = [ord(c) for c in s]
    ay = np.full((ny, max(lb, 1)), -2, dtype=np.int32)
    for i, s in enumerate(ys):
        ay[i, :len(s)] = [ord(c) for c in s]

    def harvest(row_stack, i):
        sel = np.nonzero(len_x == i)[0]
        if sel.size:
            rows = row_stack[:, sel, :]
            idx = np.broadcast_to(len_y[None, None, :], (1, sel.size, ny))
            ans[sel, :] = np.take_along_axis(rows, idx, axis=0)[0]

    prev = np.empty((lb + 1, nx, ny), dtype=np.int32)
    for j in range(lb + 1):
        prev[j] = j
    harvest(prev, 0)
    cur = np.empty_like(prev)
    for i in range(1, la + 1):
        cur[0] = i
        ci = ax[:, i - 1]
        for j in range(1, lb + 1):
            cost = (ci[:, None] != ay[None, :, j - 1]).astype(np.int32)
            np.minimum(prev[j] + 1, cur[j - 1] + 1, out=cur[j])
            np.minimum(cur[j], prev[j - 1] + cost, out=cur[j])
        harvest(cur, i)
        prev, cur = cur, prev
    return ans


def residue_gate_reason(cs_text: str, translation_l1: Translation,
                        translation_en: Translation, pos_l1, pos_en,
                        min_distance: int = LEVENSHTEIN_MIN_DISTANCE) -> str | None:
    """Why a sentence fails the residue gate, or None if it passes.

    A translation within `min_distance` edits of the source means the sentence
    was probably not code-switched (or switching survived translation); an X
    POS tag marks unintelligible, fragmented or untranslated material.
    """
    if levenshtein(cs_text, translation_l1.text) < min_distance:
        return "translation_too_close"
    if levenshtein(cs_text, translation_en.text) < min_distance:
        return "translation_too_close"
    if "X" in pos_l1 or "X" in pos_en:
        return "x_pos_tag"
    return None


def translation_cs_residue_gate(bundle: AnnotationBundle,
                                min_distance: int = LEVENSHTEIN_MIN_DISTANCE) -> bool:
    return residue_gate_reason(bundle.cs.text, bundle.translation_l1,
                               bundle.translation_en, bundle.pos_l1,
                               bundle.pos_en, min_distance) is None


def annotation_to_record(bundle: AnnotationBundle) -> dict:
    """Wire form of the per-sentence annotations, as produced offline by the
    external translation/alignment/parsing tools: the bundle record minus
    labels, with the source tokens echoed for consistency checking."""
    rec = bundle.to_record()
    cs = rec.pop("cs")
    rec["cs_text"] = cs["text"]
    rec["cs_tokens"] = cs["tokens"]
    return rec


def bundle_from_annotation_record(rec: dict, cs: CsSentence | None = None,
                                  language_pair: str | None = None) -> AnnotationBundle:
    """Join a wire annotation record with its labeled sentence.

    Without a sentence (standalone validation), an unlabeled stand-in is built
    from the echoed tokens.
    """
    if rec.get("schema") != BUNDLE_SCHEMA:
        raise DataError(f"annotation {rec.get('sentence_id')}: unsupported schema {rec.get('schema')}")
    tokens = list(rec["cs_tokens"])
    if cs is None:
        from .lid import OTHER_NEUTRAL as _NEUTRAL
        cs = CsSentence(rec["sentence_id"], 0, rec["cs_text"], tokens,
                        [_NEUTRAL] * len(tokens))
    elif list(cs.tokens) != tokens:
        raise DataError(f"annotation {rec['sentence_id']}: token mismatch with labeled sentence")
    full = dict(rec)
    full.pop("cs_text", None)
    full.pop("cs_tokens", None)
    full["cs"] = cs.to_record()
    if language_pair is not None:
        full["language_pair"] = language_pair
    elif "language_pair" not in full:
        raise DataError(f"annotation {rec['sentence_id']}: no language_pair")
    bundle = AnnotationBundle.from_record(full)
    bundle.cs = cs
    return bundle

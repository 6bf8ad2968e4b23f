"""Minimal-pair generation.

A candidate manipulation replaces one word adjacent to a switch point with its
aligned span from the opposite-language translation.  Candidates survive a
series of constraints (contiguous alignment, unaligned-neighbour handling,
noun exclusion, multi-word expressions, switch-point count) and the corpus
assembly then enforces one pair per sentence and one occurrence of each
lexical difference per language pair.
"""

import random
from dataclasses import dataclass

from .bundle import AnnotationBundle, tag_mwes
from .errors import DataError
from .ingest import detokenize, detokenize_with_offsets
from .lid import ENGLISH, LANG1, CsLabel, CsSentence

PAIR_SCHEMA = 1
DEFAULT_CAP = 1000


@dataclass(frozen=True)
class SwitchPoint:
    left_index: int
    right_index: int
    adjacent: bool


@dataclass
class Manipulation:
    side: str                       # which side of the switch point was replaced
    removed_start: int
    removed_end: int
    inserted_tokens: list[str]
    inserted_language: CsLabel
    source_links: list              # alignment links that produced the span
    source_span: tuple              # token span in the source translation

    def to_record(self) -> dict:
        return {
            "side": self.side,
            "removed_span": [self.removed_start, self.removed_end],
            "inserted_tokens": list(self.inserted_tokens),
            "inserted_language": str(self.inserted_language),
            "source_links": [list(l) for l in self.source_links],
            "source_span": list(self.source_span),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Manipulation":
        return cls(rec["side"], rec["removed_span"][0], rec["removed_span"][1],
                   list(rec["inserted_tokens"]), CsLabel.parse(rec["inserted_language"]),
                   [tuple(l) for l in rec["source_links"]], tuple(rec["source_span"]))


@dataclass
class MinimalPair:
    pair_id: str
    language_pair: str
    observed: CsSentence
    manipulated: CsSentence
    manipulation: Manipulation
    changed_word_pos: str | None
    pos_source_eligible: bool
    lexical_difference: tuple
    doc_id: str
    sentence_id: str
    seed: int

    def to_record(self) -> dict:
        return {
            "schema": PAIR_SCHEMA,
            "pair_id": self.pair_id,
            "language_pair": self.language_pair,
            "observed": self.observed.to_record(),
            "manipulated": self.manipulated.to_record(),
            "manipulation": self.manipulation.to_record(),
            "changed_word_pos": self.changed_word_pos,
            "pos_source_eligible": self.pos_source_eligible,
            "lexical_difference": list(self.lexical_difference),
            "provenance": {"doc_id": self.doc_id, "sentence_id": self.sentence_id,
                           "seed": self.seed},
        }

    @classmethod
    def from_record(cls, rec: dict) -> "MinimalPair":
        if rec.get("schema") != PAIR_SCHEMA:
            raise DataError(f"pair {rec.get('pair_id')}: unsupported schema {rec.get('schema')}")
        return cls(
            pair_id=rec["pair_id"],
            language_pair=rec["language_pair"],
            observed=CsSentence.from_record(rec["observed"]),
            manipulated=CsSentence.from_record(rec["manipulated"]),
            manipulation=Manipulation.from_record(rec["manipulation"]),
            changed_word_pos=rec["changed_word_pos"],
            pos_source_eligible=rec["pos_source_eligible"],
            lexical_difference=tuple(rec["lexical_difference"]),
            doc_id=rec["provenance"]["doc_id"],
            sentence_id=rec["provenance"]["sentence_id"],
            seed=rec["provenance"]["seed"],
        )


@dataclass
class PairCandidate:
    manipulation: Manipulation
    manipulated: CsSentence
    lexical_difference: tuple
    changed_word_pos: str | None
    pos_source_eligible: bool


def find_switch_points(cs: CsSentence) -> list[SwitchPoint]:
    """One switch point per boundary between consecutive language-labelled
    tokens of differing language; 'other' tokens are transparent."""
    idxs = [i for i, l in enumerate(cs.labels) if l.kind != "other"]
    points = []
    for a, b in zip(idxs, idxs[1:]):
        if cs.labels[a] != cs.labels[b]:
            points.append(SwitchPoint(a, b, b == a + 1))
    return points


def _side(bundle: AnnotationBundle, label: CsLabel):
    """Alignment, translation, POS list, parse and name for one language."""
    if label == LANG1:
        return (bundle.align_l1, bundle.translation_l1, bundle.pos_l1,
                bundle.deps_l1, "translation_l1")
    if label == ENGLISH:
        return (bundle.align_en, bundle.translation_en, bundle.pos_en,
                bundle.deps_en, "translation_en")
    raise DataError(f"no translation side for label {label}")


def _aligned_indices(align, cs_index):
    return sorted({j for i, j in align if i == cs_index})


def token_pos(bundle: AnnotationBundle, cs_index: int) -> set:
    """UPOS tags of a token, projected from its own language's translation."""
    label = bundle.cs.labels[cs_index]
    if label.kind == "other":
        return set()
    align, _, pos, _, _ = _side(bundle, label)
    return {pos[j] for i, j in align if i == cs_index}


def minority_language(cs: CsSentence) -> CsLabel:
    """The language with fewer tokens; ties go to English."""
    n_l1 = sum(1 for l in cs.labels if l == LANG1)
    n_en = sum(1 for l in cs.labels if l == ENGLISH)
    return ENGLISH if n_en <= n_l1 else LANG1


def is_integrative(cs: CsSentence, bundle: AnnotationBundle) -> bool:
    """True when a dependency edge of the majority-language parse, projected
    through the alignment, connects minority-language material to the rest of
    the sentence.  Minority tokens without any alignment coverage make the
    sentence non-integrative."""
    if not find_switch_points(cs):
        raise DataError(f"sentence {cs.sentence_id}: no switch point")
    minority = minority_language(cs)
    majority = LANG1 if minority == ENGLISH else ENGLISH
    align, _, _, deps, _ = _side(bundle, majority)
    minority_idx = {i for i, l in enumerate(cs.labels) if l == minority}
    majority_idx = {i for i, l in enumerate(cs.labels) if l == majority}
    by_trans = {}
    for i, j in align:
        by_trans.setdefault(j, []).append(i)
    for h, d, _rel in deps:
        if h < 0:
            continue
        for a in by_trans.get(h, ()):
            for b in by_trans.get(d, ()):
                if (a in minority_idx and b in majority_idx) or \
                   (b in minority_idx and a in majority_idx):
                    return True
    return False


def _dep_between(deps, idx, span) -> bool:
    return any((h == idx and d in span) or (d == idx and h in span)
               for h, d, _rel in deps)


def _extend_over_unaligned(trans, deps, aligned, s, e):
    """Grow the span over a single unaligned neighbour per flank when a
    dependency edge ties the neighbour to the span.  A chain of two or more
    unaligned neighbours disqualifies the candidate; returns (s, e, chain)."""
    n = len(trans.tokens)
    span = set(range(s, e))
    s2, e2 = s, e
    left = s - 1
    if left >= 0 and left not in aligned and _dep_between(deps, left, span):
        if left - 1 >= 0 and (left - 1) not in aligned:
            return s, e, True
        s2 = left
    right = e
    if right < n and right not in aligned and _dep_between(deps, right, span):
        if right + 1 < n and (right + 1) not in aligned:
            return s, e, True
        e2 = right + 1
    return s2, e2, False


def _next_non_other(cs, start, step):
    i = start
    while 0 <= i < len(cs.tokens):
        if cs.labels[i].kind != "other":
            return i
        i += step
    return None


def _noun_flanks(cs, bundle, sp, side, w_idx, w_label, target_pos, s2, e2) -> bool:
    """The noun-exclusion rule: reject the candidate when a NOUN flanks the
    affected switch point in either the observed or the manipulated sentence."""
    if "NOUN" in token_pos(bundle, sp.left_index) or "NOUN" in token_pos(bundle, sp.right_index):
        return True
    if side == "right":
        inner = target_pos[e2 - 1]
        nxt = _next_non_other(cs, w_idx + 1, +1)
        outer = nxt if nxt is not None and cs.labels[nxt] == w_label else None
    else:
        inner = target_pos[s2]
        prv = _next_non_other(cs, w_idx - 1, -1)
        outer = prv if prv is not None and cs.labels[prv] == w_label else None
    if inner == "NOUN":
        return True
    if outer is not None and "NOUN" in token_pos(bundle, outer):
        return True
    return False


def enumerate_candidates(cs: CsSentence, bundle: AnnotationBundle, mwes) -> list[Manipulation]:
    """All manipulations of single words adjacent to adjacent switch points.

    For each side of each string-adjacent switch point, the word is replaced
    by its aligned span from the opposite-language translation, one-to-many
    alignments inserting the full contiguous span.  Candidates are dropped
    when the aligned span is empty or non-contiguous, when a NOUN flanks the
    affected switch point before or after the manipulation, or when the
    removed word or inserted span would split a multi-word expression.
    """
    candidates = []
    cs_mwes = [m for m in mwes if m.sentence_ref == "cs"]
    for sp in find_switch_points(cs):
        if not sp.adjacent:
            continue
        for side in ("left", "right"):
            w_idx = sp.left_index if side == "left" else sp.right_index
            other_idx = sp.right_index if side == "left" else sp.left_index
            w_label = cs.labels[w_idx]
            target_label = cs.labels[other_idx]
            if w_label.kind == "other":
                continue
            align, trans, pos, deps, trans_ref = _side(bundle, target_label)
            js = _aligned_indices(align, w_idx)
            if not js or js != list(range(js[0], js[-1] + 1)):
                continue
            s, e = js[0], js[-1] + 1
            aligned_targets = {j for _, j in align}
            s2, e2, chain = _extend_over_unaligned(trans, deps, aligned_targets, s, e)
            if chain:
                continue
            if any(m.start <= w_idx < m.end for m in cs_mwes):
                continue
            trans_mwes = [m for m in mwes if m.sentence_ref == trans_ref]
            if any(max(s2, m.start) < min(e2, m.end) and not (s2 <= m.start and m.end <= e2)
                   for m in trans_mwes):
                continue
            if _noun_flanks(cs, bundle, sp, side, w_idx, w_label, pos, s2, e2):
                continue
            candidates.append(Manipulation(
                side=side,
                removed_start=w_idx,
                removed_end=w_idx + 1,
                inserted_tokens=list(trans.tokens[s2:e2]),
                inserted_language=target_label,
                source_links=[(w_idx, j) for j in js],
                source_span=(s2, e2),
            ))
    return candidates


def apply_manipulation(cs: CsSentence, manipulation: Manipulation) -> CsSentence:
    """Realize a manipulation: splice the inserted tokens over the removed
    span, relabel them, and re-render the text.  Inserted tokens keep the
    translation's casing except for a forced initial capital when they replace
    the sentence-initial token."""
    rs, re_ = manipulation.removed_start, manipulation.removed_end
    if rs == re_ and not manipulation.inserted_tokens:
        raise DataError("identity manipulation")
    if not (0 <= rs < re_ <= len(cs.tokens)):
        raise DataError(f"manipulation span [{rs}, {re_}) invalid for {len(cs.tokens)} tokens")
    if not manipulation.inserted_tokens:
        raise DataError("empty insertion")
    inserted = list(manipulation.inserted_tokens)
    if rs == 0:
        inserted[0] = inserted[0][:1].upper() + inserted[0][1:]
    tokens = list(cs.tokens[:rs]) + inserted + list(cs.tokens[re_:])
    labels = list(cs.labels[:rs]) + [manipulation.inserted_language] * len(inserted) \
        + list(cs.labels[re_:])
    return CsSentence(cs.doc_id, cs.index, detokenize(tokens), tokens, labels, cs.lang_claim)


def switch_count_gate(pair: MinimalPair) -> bool:
    """Sentence complexity must stay constant: equal switch-point counts."""
    return len(find_switch_points(pair.observed)) == len(find_switch_points(pair.manipulated))


def _changed_word_pos(bundle: AnnotationBundle, manipulation: Manipulation):
    """POS of the changed word, read off its aligned word in the same-language
    translation; eligible for POS analysis only when that alignment is a
    single identical word."""
    w_idx = manipulation.removed_start
    w = bundle.cs.tokens[w_idx]
    own_label = bundle.cs.labels[w_idx]
    align, trans, pos, _, _ = _side(bundle, own_label)
    js = _aligned_indices(align, w_idx)
    if len(js) != 1:
        return None, False
    tag = pos[js[0]]
    return tag, trans.tokens[js[0]].casefold() == w.casefold()


def candidates_for_bundle(bundle: AnnotationBundle, mwe_lexicon=frozenset()):
    """All surviving pair candidates for one sentence.

    Returns (candidates, rejection_reason); the reason is set exactly when the
    candidate list is empty.
    """
    cs = bundle.cs
    if not find_switch_points(cs):
        return [], "no_switch_point"
    if not is_integrative(cs, bundle):
        return [], "non_integrative"
    mwes = []
    if mwe_lexicon:
        mwes += tag_mwes(cs.tokens, mwe_lexicon, "cs")
        mwes += tag_mwes(bundle.translation_l1.tokens, mwe_lexicon, "translation_l1")
        mwes += tag_mwes(bundle.translation_en.tokens, mwe_lexicon, "translation_en")
    out = []
    for man in enumerate_candidates(cs, bundle, mwes):
        manipulated = apply_manipulation(cs, man)
        if manipulated.tokens == cs.tokens:
            continue
        if len(find_switch_points(manipulated)) != len(find_switch_points(cs)):
            continue
        removed = " ".join(cs.tokens[man.removed_start:man.removed_end]).casefold()
        inserted = " ".join(man.inserted_tokens).casefold()
        pos_tag, eligible = _changed_word_pos(bundle, man)
        out.append(PairCandidate(man, manipulated, (removed, inserted), pos_tag, eligible))
    if not out:
        return [], "no_candidates"
    return out, None


def assemble_corpus(candidate_groups, seed: int, cap: int = DEFAULT_CAP):
    """Reduce per-sentence candidates into the released pair list.

    Sentences are processed in (doc_id, index) order; each contributes at most
    one pair, chosen uniformly at random by a per-sentence generator keyed on
    (seed, doc id, index) so results do not depend on corpus chunking.  A
    candidate whose lexical difference was already used for the language pair
    is skipped in favour of the remaining candidates of that sentence.

    Returns (pairs, rejection_counts).
    """
    groups = sorted(candidate_groups, key=lambda g: (g[0].cs.doc_id, g[0].cs.index))
    used = set()
    pairs = []
    rejected = {"duplicate_difference": 0, "over_cap": 0}
    for bundle, cands in groups:
        if not cands:
            continue
        if len(pairs) >= cap:
            rejected["over_cap"] += 1
            continue
        rng = random.Random(f"{seed}:{bundle.cs.doc_id}:{bundle.cs.index}")
        order = list(cands)
        rng.shuffle(order)
        chosen = None
        for cand in order:
            if (bundle.language_pair, cand.lexical_difference) not in used:
                chosen = cand
                break
        if chosen is None:
            rejected["duplicate_difference"] += 1
            continue
        used.add((bundle.language_pair, chosen.lexical_difference))
        pairs.append(MinimalPair(
            pair_id=f"{bundle.language_pair}-{len(pairs) + 1:05d}",
            language_pair=bundle.language_pair,
            observed=bundle.cs,
            manipulated=chosen.manipulated,
            manipulation=chosen.manipulation,
            changed_word_pos=chosen.changed_word_pos,
            pos_source_eligible=chosen.pos_source_eligible,
            lexical_difference=chosen.lexical_difference,
            doc_id=bundle.cs.doc_id,
            sentence_id=bundle.cs.sentence_id,
            seed=seed,
        ))
    return pairs, rejected


def generate_pairs(bundles, seed: int, cap: int = DEFAULT_CAP, mwe_lexicon=frozenset()):
    """Candidate enumeration plus corpus assembly over a bundle stream.

    Returns (pairs, rejection_counts) where the counts cover every input
    sentence that produced no pair.
    """
    rejected = {}
    groups = []
    for bundle in bundles:
        cands, reason = candidates_for_bundle(bundle, mwe_lexicon)
        if reason is not None:
            rejected[reason] = rejected.get(reason, 0) + 1
            continue
        groups.append((bundle, cands))
    pairs, assembly_rejected = assemble_corpus(groups, seed, cap)
    for reason, count in assembly_rejected.items():
        if count:
            rejected[reason] = rejected.get(reason, 0) + count
    return pairs, rejected


def differing_char_spans(pair: MinimalPair):
    """Character spans of the differing material in both rendered texts,
    for bold-face presentation."""
    _, obs_spans = detokenize_with_offsets(pair.observed.tokens)
    _, man_spans = detokenize_with_offsets(pair.manipulated.tokens)
    rs, re_ = pair.manipulation.removed_start, pair.manipulation.removed_end
    ins_end = rs + len(pair.manipulation.inserted_tokens)
    observed_span = (obs_spans[rs][0], obs_spans[re_ - 1][1])
    manipulated_span = (man_spans[rs][0], man_spans[ins_end - 1][1])
    return observed_span, manipulated_span

import pytest

from cspairs.bundle import AnnotationBundle, Translation
from cspairs.ingest import detokenize
from cspairs.lid import (ENGLISH, LANG1, OTHER_MIXED, OTHER_NAMED_ENTITY,
                         OTHER_NEUTRAL, OTHER_UNKNOWN, CsSentence, LexiconSet)

SHORTHAND = {
    "l1": LANG1,
    "en": ENGLISH,
    "o": OTHER_NEUTRAL,
    "unk": OTHER_UNKNOWN,
    "ne": OTHER_NAMED_ENTITY,
    "mix": OTHER_MIXED,
}


def L(spec: str):
    """Parse a compact label spec like 'en en l1 o'."""
    return [SHORTHAND[part] for part in spec.split()]


def mkcs(tokens, labels, doc_id="d", index=0, lang_claim=None) -> CsSentence:
    if isinstance(labels, str):
        labels = L(labels)
    return CsSentence(doc_id, index, detokenize(tokens), list(tokens), labels,
                      lang_claim)


def mkbundle(cs, trans_l1, align_l1, pos_l1, deps_l1,
             trans_en, align_en, pos_en, deps_en,
             ner_l1=(), ner_en=(), language_pair="de-en",
             sentence_id=None) -> AnnotationBundle:
    return AnnotationBundle(
        sentence_id=sentence_id or cs.sentence_id,
        language_pair=language_pair,
        cs=cs,
        translation_l1=Translation(list(trans_l1), detokenize(list(trans_l1))),
        translation_en=Translation(list(trans_en), detokenize(list(trans_en))),
        align_l1=[tuple(x) for x in align_l1],
        align_en=[tuple(x) for x in align_en],
        pos_l1=list(pos_l1),
        pos_en=list(pos_en),
        deps_l1=[tuple(x) for x in deps_l1],
        deps_en=[tuple(x) for x in deps_en],
        ner_l1=[tuple(x) for x in ner_l1],
        ner_en=[tuple(x) for x in ner_en],
    )


@pytest.fixture
def small_lexicons() -> LexiconSet:
    de = {"und", "ich", "sagte", "etwas", "leiser", "singen", "sonst", "ruf",
          "die", "polizei", "das", "war", "nicht", "müsli", "downloaden",
          "heute", "wir"}
    en = {"and", "i", "said", "maybe", "the", "police", "a", "little",
          "die", "was", "not", "müsli", "happy", "we", "today"}
    return LexiconSet(
        lang1_words=frozenset(de),
        english_words=frozenset(en),
        borrowings_to_english=frozenset({"müsli"}),
        borrowings_from_english=frozenset({"downloaden", "happy"}),
        homographs=frozenset(de) & frozenset(en),
    )


def fig1_bundle() -> AnnotationBundle:
    """The flagship example: an English opening clause switching into German,
    with "etwas" aligned to "little", "a" unaligned but dependent on it, and
    the discourse verb linking the clauses in the German parse."""
    cs = mkcs(
        ["And", "I", "said", "maybe", "etwas", "leiser", "singen", ",",
         "sonst", "ruf", "ich", "die", "Polizei"],
        "en en en en l1 l1 l1 o l1 l1 l1 unk l1",
        doc_id="g01",
    )
    return mkbundle(
        cs,
        trans_l1=["Und", "ich", "sagte", "vielleicht", "etwas", "leiser",
                  "singen", ",", "sonst", "ruf", "ich", "die", "Polizei"],
        align_l1=[(0, 0), (1, 1), (2, 2), (4, 4), (5, 5), (6, 6), (7, 7),
                  (8, 8), (9, 9), (10, 10), (11, 11), (12, 12)],
        pos_l1=["CCONJ", "PRON", "VERB", "ADV", "ADV", "ADJ", "VERB", "PUNCT",
                "ADV", "VERB", "PRON", "DET", "NOUN"],
        deps_l1=[(-1, 2, "root"), (2, 0, "cc"), (2, 1, "nsubj"),
                 (2, 6, "ccomp"), (6, 3, "advmod"), (5, 4, "advmod"),
                 (6, 5, "advmod"), (2, 7, "punct"), (9, 8, "advmod"),
                 (2, 9, "parataxis"), (9, 10, "nsubj"), (12, 11, "det"),
                 (9, 12, "obj")],
        trans_en=["And", "I", "said", "maybe", "sing", "a", "little",
                  "quieter", ",", "otherwise", "I", "call", "the", "police"],
        align_en=[(0, 0), (1, 1), (2, 2), (3, 3), (4, 6), (5, 7), (6, 4),
                  (7, 8), (8, 9), (9, 11), (10, 10), (11, 12), (12, 13)],
        pos_en=["CCONJ", "PRON", "VERB", "ADV", "VERB", "DET", "ADV", "ADJ",
                "PUNCT", "ADV", "PRON", "VERB", "DET", "NOUN"],
        deps_en=[(-1, 2, "root"), (2, 0, "cc"), (2, 1, "nsubj"),
                 (2, 4, "ccomp"), (4, 3, "advmod"), (4, 7, "advmod"),
                 (7, 6, "advmod"), (6, 5, "det"), (2, 8, "punct"),
                 (11, 9, "advmod"), (11, 10, "nsubj"), (2, 11, "parataxis"),
                 (13, 12, "det"), (11, 13, "obj")],
    )


@pytest.fixture
def fig1():
    return fig1_bundle()


def tiny_bundle(i: int, doc_id=None):
    """Four-token sentence with two candidates and per-index lexical
    differences; cheap raw material for corpus-level tests."""
    dea, deb = f"dea{i}", f"deb{i}"
    ena, enb = f"ena{i}", f"enb{i}"
    cs = mkcs([dea, deb, ena, enb], "l1 l1 en en", doc_id=doc_id or f"t{i:04d}")
    return mkbundle(
        cs,
        trans_l1=[dea, deb, f"x{i}", f"y{i}"],
        align_l1=[(0, 0), (1, 1), (2, 2), (3, 3)],
        pos_l1=["ADV", "ADV", "ADV", "ADV"],
        deps_l1=[(-1, 1, "root"), (1, 0, "a"), (1, 2, "b"), (1, 3, "c")],
        trans_en=[f"p{i}", f"q{i}", ena, enb],
        align_en=[(0, 0), (1, 1), (2, 2), (3, 3)],
        pos_en=["ADV", "ADV", "ADV", "ADV"],
        deps_en=[(-1, 1, "root"), (1, 0, "a"), (1, 2, "b"), (1, 3, "c")],
    )


def make_pairs(n: int, seed: int = 0):
    """Generate n distinct minimal pairs from tiny bundles."""
    from cspairs.pairgen import generate_pairs

    pairs, _ = generate_pairs([tiny_bundle(i) for i in range(n)], seed=seed,
                              cap=n)
    assert len(pairs) == n
    return pairs

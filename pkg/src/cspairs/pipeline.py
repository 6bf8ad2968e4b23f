"""End-to-end pipeline: each stage reads the previous stage's artifact file
and writes its own, stamped with the configuration hash and seed so artifacts
from different runs cannot be mixed."""

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import bundle as bundle_mod
from . import ingest as ingest_mod
from . import lid as lid_mod
from . import pairgen, scoring, stats
from .backends import HttpLanguageId, TrigramLanguageId
from .errors import DataError
from .ingest import FallbackSegmenter, HttpSegmenter
from .lid import CsSentence
from .records import config_hash, read_records, write_records

STAGES = ("ingest", "lid", "bundle", "genpairs", "score", "stats")


@dataclass
class PipelineConfig:
    language_pair: str = "de-en"
    seed: int = 0
    corpus: str | None = None
    obscene_list: str | None = None
    lexicon_manifest: str | None = None
    annotations: str | None = None
    mwe_lexicon: str | None = None
    scores: str | None = None
    scorer_endpoint: str | None = None
    segmenter: str = "fallback"          # "fallback" or an endpoint URL
    mono_lid: str = "builtin"            # "builtin" or an endpoint URL
    lid_mode: str = "wordlist"           # "wordlist" or "han"
    umlaut_filter: bool = False
    workdir: str = "artifacts"
    stages: list = field(default_factory=lambda: list(STAGES))
    max_chars: int = 200
    min_tokens: int = 6
    unknown_max_fraction: float = 0.5
    ne_capitalized_fraction: float = 0.75
    levenshtein_min_distance: int = 5
    pair_cap: int = 1000
    permutation_resamples: int = 10000
    alpha: float = 0.05
    batch_size: int = 67

    def validate(self) -> None:
        for stage in self.stages:
            if stage not in STAGES:
                raise DataError(f"unknown stage {stage!r}")
        if self.lid_mode not in ("wordlist", "han"):
            raise DataError(f"unknown lid_mode {self.lid_mode!r}")
        if self.max_chars < 1 or self.min_tokens < 1:
            raise DataError("length thresholds must be positive")
        if not 0 < self.unknown_max_fraction <= 1:
            raise DataError("unknown_max_fraction must be in (0, 1]")
        if not 0 < self.ne_capitalized_fraction < 1:
            raise DataError("ne_capitalized_fraction must be in (0, 1)")
        if self.levenshtein_min_distance < 0:
            raise DataError("levenshtein_min_distance must be >= 0")
        if self.pair_cap < 1 or self.permutation_resamples < 1:
            raise DataError("pair_cap and permutation_resamples must be positive")
        if not 0 < self.alpha < 1:
            raise DataError("alpha must be in (0, 1)")
        if self.batch_size < 1:
            raise DataError("batch_size must be positive")

    @property
    def hash(self) -> str:
        return config_hash(dataclasses.asdict(self))

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"config {path}: {exc}") from exc
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise DataError(f"config {path}: unknown keys {sorted(unknown)}")
        return cls(**raw)


@dataclass
class StageStep:
    stage: str
    unit: str
    input: int
    output: int
    rejected: dict

    def check(self) -> None:
        if sum(self.rejected.values()) != self.input - self.output:
            raise DataError(f"stage {self.stage}: rejection counts do not add up")

    def to_record(self) -> dict:
        return {"stage": self.stage, "unit": self.unit, "input": self.input,
                "output": self.output, "rejected": dict(sorted(self.rejected.items()))}


def _artifact_path(config: PipelineConfig, name: str) -> Path:
    return Path(config.workdir) / f"{name}.ndjson"


def _meta(config: PipelineConfig, stage: str) -> dict:
    return {"stage": stage, "config_hash": config.hash, "seed": config.seed, "schema": 1}


def _read_artifact(config: PipelineConfig, name: str, stage: str):
    path = _artifact_path(config, name)
    if not path.exists():
        raise DataError(f"stage {stage}: missing artifact {path}")
    meta, rows = read_records(path)
    if meta is None or meta.get("config_hash") != config.hash:
        raise DataError(f"stage {stage}: artifact {path} was produced by a different configuration")
    return rows


def _require(config: PipelineConfig, attr: str, stage: str) -> str:
    value = getattr(config, attr)
    if not value:
        raise DataError(f"stage {stage}: config field {attr!r} is required")
    return value


def run_ingest(config: PipelineConfig) -> list:
    docs = ingest_mod.read_corpus(_require(config, "corpus", "ingest"))
    obscene = (ingest_mod.load_obscene_lexicon(config.obscene_list)
               if config.obscene_list else frozenset())
    if config.segmenter == "fallback":
        segmenter = FallbackSegmenter()
    else:
        segmenter = HttpSegmenter(config.segmenter)
    doc_rejected = {"obscene": 0}
    sent_rejected = {"too_few_tokens": 0, "too_long": 0}
    sentences = []
    n_segmented = 0
    for doc in docs:
        text = ingest_mod.normalize(doc.text)
        if not ingest_mod.obscenity_gate(ingest_mod.tokenize(text), obscene):
            doc_rejected["obscene"] += 1
            continue
        for sent in ingest_mod.segment(text, segmenter, doc.id, doc.source_language_claim):
            n_segmented += 1
            if len(sent.tokens) < config.min_tokens:
                sent_rejected["too_few_tokens"] += 1
            elif len(sent.text) > config.max_chars:
                sent_rejected["too_long"] += 1
            else:
                sentences.append(sent)
    write_records(_artifact_path(config, "sentences"),
                  [{"doc_id": s.doc_id, "index": s.index, "text": s.text,
                    "tokens": s.tokens, "lang_claim": s.lang_claim}
                   for s in sentences],
                  meta=_meta(config, "ingest"))
    return [
        StageStep("ingest", "documents", len(docs), len(docs) - doc_rejected["obscene"],
                  doc_rejected),
        StageStep("ingest", "sentences", n_segmented, len(sentences), sent_rejected),
    ]


def _lang1_code(config: PipelineConfig) -> str:
    return config.language_pair.split("-")[0]


def _mono_lid_backend(config: PipelineConfig):
    if config.mono_lid == "builtin":
        return TrigramLanguageId.bundled((_lang1_code(config), "en"))
    return HttpLanguageId(config.mono_lid)


def run_lid(config: PipelineConfig) -> list:
    rows = _read_artifact(config, "sentences", "lid")
    rejected = {"umlaut_word": 0, "unknown_ratio": 0, "lid_mismatch": 0,
                "not_cs_qualified": 0}
    kept = []
    if config.lid_mode == "wordlist":
        lexicons = lid_mod.load_lexicons(_require(config, "lexicon_manifest", "lid"))
        backend = _mono_lid_backend(config)
    else:
        lexicons = backend = None
    for row in rows:
        sent = ingest_mod.SentenceRecord(row["doc_id"], row["index"], row["text"],
                                         list(row["tokens"]), row.get("lang_claim"))
        if config.lid_mode == "han":
            cs = lid_mod.han_lid(sent)
        else:
            cs = lid_mod.tag_tokens(sent, lexicons)
            cs = lid_mod.reassign_borrowings(cs, lexicons)
            cs = lid_mod.mark_named_entity_runs(cs, config.ne_capitalized_fraction)
            if config.umlaut_filter and not lid_mod.umlaut_gate(cs, lexicons):
                rejected["umlaut_word"] += 1
                continue
        if not lid_mod.unknown_gate(cs, config.unknown_max_fraction):
            rejected["unknown_ratio"] += 1
            continue
        if config.lid_mode == "wordlist":
            claimed = cs.lang_claim or _lang1_code(config)
            if not lid_mod.consistency_check(cs, backend, claimed):
                rejected["lid_mismatch"] += 1
                continue
        if not lid_mod.cs_qualification(cs):
            rejected["not_cs_qualified"] += 1
            continue
        kept.append(cs)
    write_records(_artifact_path(config, "labeled"),
                  [cs.to_record() for cs in kept], meta=_meta(config, "lid"))
    return [StageStep("lid", "sentences", len(rows), len(kept), rejected)]


def run_bundle(config: PipelineConfig) -> list:
    rows = _read_artifact(config, "labeled", "bundle")
    ann_path = Path(_require(config, "annotations", "bundle"))
    if not ann_path.exists():
        raise DataError(f"stage bundle: missing annotations file {ann_path}")
    _, ann_rows = read_records(ann_path)
    annotations = {rec["sentence_id"]: rec for rec in ann_rows}
    rejected = {"missing_annotation": 0, "translation_too_close": 0, "x_pos_tag": 0}
    kept = []
    for row in rows:
        cs = CsSentence.from_record(row)
        rec = annotations.get(cs.sentence_id)
        if rec is None:
            rejected["missing_annotation"] += 1
            continue
        try:
            bundle = bundle_mod.bundle_from_annotation_record(
                rec, cs=cs, language_pair=config.language_pair)
            bundle_mod.validate_bundle(bundle)
        except DataError as exc:
            raise DataError(f"stage bundle: item {cs.sentence_id}: {exc}") from exc
        bundle = bundle_mod.ner_override(bundle)
        reason = bundle_mod.residue_gate_reason(
            bundle.cs.text, bundle.translation_l1, bundle.translation_en,
            bundle.pos_l1, bundle.pos_en, config.levenshtein_min_distance)
        if reason is not None:
            rejected[reason] += 1
            continue
        kept.append(bundle)
    write_records(_artifact_path(config, "bundles"),
                  [b.to_record() for b in kept], meta=_meta(config, "bundle"))
    return [StageStep("bundle", "sentences", len(rows), len(kept), rejected)]


def run_genpairs(config: PipelineConfig) -> list:
    rows = _read_artifact(config, "bundles", "genpairs")
    bundles = [bundle_mod.AnnotationBundle.from_record(rec) for rec in rows]
    mwe = (bundle_mod.load_mwe_lexicon(config.mwe_lexicon)
           if config.mwe_lexicon else frozenset())
    pairs, rejected = pairgen.generate_pairs(bundles, config.seed, config.pair_cap, mwe)
    write_records(_artifact_path(config, "pairs"),
                  [p.to_record() for p in pairs], meta=_meta(config, "genpairs"))
    return [StageStep("genpairs", "sentences", len(bundles), len(pairs), rejected)]


def run_score(config: PipelineConfig) -> list:
    rows = _read_artifact(config, "pairs", "score")
    pairs = [pairgen.MinimalPair.from_record(rec) for rec in rows]
    if config.scores:
        if not Path(config.scores).exists():
            raise DataError(f"stage score: missing score file {config.scores}")
        backend = scoring.FileScorer(config.scores)
    elif config.scorer_endpoint:
        backend = scoring.EndpointScorer(config.scorer_endpoint)
    else:
        raise DataError("stage score: config needs 'scores' or 'scorer_endpoint'")
    run = scoring.score_pairs(pairs, backend)
    write_records(_artifact_path(config, "scored"),
                  [{"pair_id": sp.pair_id, "logp_observed": sp.logp_observed,
                    "logp_manipulated": sp.logp_manipulated, "scorer_id": sp.scorer_id}
                   for sp in run.scored],
                  meta=_meta(config, "score"))
    return [StageStep("score", "pairs", len(pairs), len(run.scored),
                      {"score_failure": len(run.failures)})]


def run_stats(config: PipelineConfig) -> list:
    pair_rows = _read_artifact(config, "pairs", "stats")
    scored_rows = _read_artifact(config, "scored", "stats")
    pairs = [pairgen.MinimalPair.from_record(rec) for rec in pair_rows]
    scored = [scoring.ScoredPair(r["pair_id"], r["logp_observed"],
                                 r["logp_manipulated"], r.get("scorer_id", ""))
              for r in scored_rows]
    out = []
    if scored:
        out.append({"kind": "accuracy", "value": scoring.accuracy(scored)})
        margins = [scoring.margin(sp) for sp in scored]
        out.append({"kind": "mean_margin", "value": sum(margins) / len(margins)})
        cfg = stats.PermutationConfig(resamples=config.permutation_resamples,
                                      alpha=config.alpha, seed=config.seed)
        out.extend(stats.pos_margin_analysis(pairs, scored, cfg).to_records())
    write_records(_artifact_path(config, "stats"), out, meta=_meta(config, "stats"))
    return [StageStep("stats", "pairs", len(scored), len(scored), {})]


_STAGE_RUNNERS = {
    "ingest": run_ingest,
    "lid": run_lid,
    "bundle": run_bundle,
    "genpairs": run_genpairs,
    "score": run_score,
    "stats": run_stats,
}


def run_pipeline(config: PipelineConfig) -> dict:
    """Execute the enabled stages in order and return the funnel summary.

    Any stage failure halts the run; artifacts from completed stages stay on
    disk.  The summary reports input/output/rejection counts per stage and
    the invariant input - output = sum(rejections) is checked for every step.
    """
    config.validate()
    Path(config.workdir).mkdir(parents=True, exist_ok=True)
    steps = []
    for stage in STAGES:
        if stage not in config.stages:
            continue
        for step in _STAGE_RUNNERS[stage](config):
            step.check()
            steps.append(step)
    summary = {"config_hash": config.hash, "seed": config.seed,
               "steps": [s.to_record() for s in steps]}
    summary_path = Path(config.workdir) / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                            encoding="utf-8")
    return summary

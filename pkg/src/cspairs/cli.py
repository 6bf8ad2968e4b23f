"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 backend error.
"""

import json
import sys
from pathlib import Path

import click

from . import bundle as bundle_mod
from . import ingest as ingest_mod
from . import lid as lid_mod
from . import pairgen, scoring, stats
from .backends import HttpLanguageId, TrigramLanguageId
from .errors import BackendError, DataError
from .judge import JudgmentLog, Plan, export_judgments, plan_assignments
from .pipeline import PipelineConfig, run_pipeline
from .records import read_records, write_records


@click.group()
@click.option("--seed", type=int, default=0, show_default=True, help="Global random seed.")
@click.option("--lang-pair", default="de-en", show_default=True, help="Language pair code.")
@click.pass_context
def cli(ctx, seed, lang_pair):
    """Build, score and judge minimal pairs of code-switched text."""
    ctx.obj = {"seed": seed, "lang_pair": lang_pair}


@cli.command("ingest")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--obscene-list", type=click.Path(exists=True))
@click.option("--segmenter", default="fallback", show_default=True,
              help="'fallback' or a segmentation endpoint URL.")
def ingest_cmd(in_path, out_path, obscene_list, segmenter):
    """Normalize, segment and gate a raw corpus."""
    docs = ingest_mod.read_corpus(in_path)
    obscene = (ingest_mod.load_obscene_lexicon(obscene_list)
               if obscene_list else frozenset())
    backend = (ingest_mod.FallbackSegmenter() if segmenter == "fallback"
               else ingest_mod.HttpSegmenter(segmenter))
    out = []
    for doc in docs:
        text = ingest_mod.normalize(doc.text)
        if not ingest_mod.obscenity_gate(ingest_mod.tokenize(text), obscene):
            continue
        for sent in ingest_mod.segment(text, backend, doc.id, doc.source_language_claim):
            if ingest_mod.length_gate(sent):
                out.append({"doc_id": sent.doc_id, "index": sent.index,
                            "text": sent.text, "tokens": sent.tokens,
                            "lang_claim": sent.lang_claim})
    write_records(out_path, out)
    click.echo(f"{len(out)} sentences kept from {len(docs)} documents")


@cli.command("lid")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--lexicons", "manifest", type=click.Path(exists=True))
@click.option("--mono-lid", default="builtin", show_default=True)
@click.option("--mode", default="wordlist", type=click.Choice(["wordlist", "han"]))
@click.pass_context
def lid_cmd(ctx, in_path, out_path, manifest, mono_lid, mode):
    """Label tokens with their code-switch status and apply the LID gates."""
    _, rows = read_records(in_path)
    lang1 = ctx.obj["lang_pair"].split("-")[0]
    if mode == "wordlist":
        if not manifest:
            raise click.UsageError("--lexicons is required in wordlist mode")
        lexicons = lid_mod.load_lexicons(manifest)
        backend = (TrigramLanguageId.bundled((lang1, "en")) if mono_lid == "builtin"
                   else HttpLanguageId(mono_lid))
    kept = []
    for row in rows:
        sent = ingest_mod.SentenceRecord(row["doc_id"], row["index"], row["text"],
                                         list(row["tokens"]), row.get("lang_claim"))
        if mode == "han":
            cs = lid_mod.han_lid(sent)
        else:
            cs = lid_mod.tag_tokens(sent, lexicons)
            cs = lid_mod.reassign_borrowings(cs, lexicons)
            cs = lid_mod.mark_named_entity_runs(cs)
        if not lid_mod.unknown_gate(cs):
            continue
        if mode == "wordlist" and not lid_mod.consistency_check(
                cs, backend, cs.lang_claim or lang1):
            continue
        if not lid_mod.cs_qualification(cs):
            continue
        kept.append(cs.to_record())
    write_records(out_path, kept)
    click.echo(f"{len(kept)} sentences kept from {len(rows)}")


@cli.group("bundle")
def bundle_group():
    """Validate and gate per-sentence annotation records."""


@bundle_group.command("validate")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
def bundle_validate(in_path):
    """Check every annotation record's invariants."""
    _, rows = read_records(in_path)
    for rec in rows:
        b = bundle_mod.bundle_from_annotation_record(rec, language_pair=rec.get("language_pair", "?"))
        bundle_mod.validate_bundle(b)
    click.echo(f"{len(rows)} records valid")


@bundle_group.command("gate")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--min-distance", default=bundle_mod.LEVENSHTEIN_MIN_DISTANCE,
              show_default=True)
def bundle_gate(in_path, out_path, min_distance):
    """Drop records whose translations betray residual or missing switching."""
    _, rows = read_records(in_path)
    kept = []
    for rec in rows:
        b = bundle_mod.bundle_from_annotation_record(rec, language_pair=rec.get("language_pair", "?"))
        bundle_mod.validate_bundle(b)
        reason = bundle_mod.residue_gate_reason(
            b.cs.text, b.translation_l1, b.translation_en, b.pos_l1, b.pos_en,
            min_distance)
        if reason is None:
            kept.append(rec)
    write_records(out_path, kept)
    click.echo(f"{len(kept)} of {len(rows)} records kept")


@cli.command("genpairs")
@click.option("--bundles", "bundles_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None, help="Overrides the global seed.")
@click.option("--cap", type=int, default=pairgen.DEFAULT_CAP, show_default=True)
@click.option("--lang-pair", "lang_pair", default=None)
@click.option("--mwe-lexicon", type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def genpairs_cmd(ctx, bundles_path, seed, cap, lang_pair, mwe_lexicon, out_path):
    """Generate minimal pairs from annotated, labeled sentences."""
    seed = ctx.obj["seed"] if seed is None else seed
    lang_pair = lang_pair or ctx.obj["lang_pair"]
    _, rows = read_records(bundles_path)
    bundles = [bundle_mod.AnnotationBundle.from_record(rec) for rec in rows
               if rec.get("language_pair") == lang_pair]
    mwe = bundle_mod.load_mwe_lexicon(mwe_lexicon) if mwe_lexicon else frozenset()
    pairs, rejected = pairgen.generate_pairs(bundles, seed, cap, mwe)
    write_records(out_path, [p.to_record() for p in pairs])
    click.echo(f"{len(pairs)} pairs from {len(bundles)} sentences "
               f"(rejected: {json.dumps(rejected, sort_keys=True)})")


@cli.command("score")
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True))
@click.option("--endpoint", default=None, help="Scorer endpoint URL.")
@click.option("--scores", "scores_path", default=None, type=click.Path(exists=True),
              help="Pre-computed score file.")
@click.option("--out", "out_path", required=True, type=click.Path())
def score_cmd(pairs_path, endpoint, scores_path, out_path):
    """Attach scorer log-probabilities to pairs."""
    if bool(endpoint) == bool(scores_path):
        raise click.UsageError("exactly one of --endpoint / --scores is required")
    _, rows = read_records(pairs_path)
    pairs = [pairgen.MinimalPair.from_record(rec) for rec in rows]
    backend = (scoring.FileScorer(scores_path) if scores_path
               else scoring.EndpointScorer(endpoint))
    run = scoring.score_pairs(pairs, backend)
    write_records(out_path, [{"pair_id": sp.pair_id, "logp_observed": sp.logp_observed,
                              "logp_manipulated": sp.logp_manipulated,
                              "scorer_id": sp.scorer_id} for sp in run.scored])
    click.echo(f"{len(run.scored)} pairs scored, {len(run.failures)} failed")
    for failure in run.failures:
        click.echo(f"failed {failure.pair_id}: {failure.reason}", err=True)


def _read_vector(path):
    values = []
    for line in Path(path).read_text(encoding="utf-8").split():
        values.append(float(line))
    return values


def _emit(report, fmt):
    if fmt == "table":
        click.echo(report.to_table())
    else:
        for rec in report.to_records():
            click.echo(json.dumps(rec, sort_keys=True))


def _load_scored(path):
    _, rows = read_records(path)
    return [scoring.ScoredPair(r["pair_id"], r["logp_observed"],
                               r["logp_manipulated"], r.get("scorer_id", ""))
            for r in rows]


@cli.group("stats")
@click.option("--resamples", type=int, default=10000, show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--method", default="auto", type=click.Choice(["auto", "exact", "montecarlo"]))
@click.option("--format", "fmt", default="table", type=click.Choice(["table", "records"]))
@click.pass_context
def stats_group(ctx, resamples, alpha, method, fmt):
    """Statistical analyses over pairs, scores and judgments."""
    ctx.obj["perm"] = stats.PermutationConfig(resamples=resamples, alpha=alpha,
                                              seed=ctx.obj["seed"], method=method)
    ctx.obj["fmt"] = fmt


@stats_group.command("perm-paired")
@click.argument("a_file", type=click.Path(exists=True))
@click.argument("b_file", type=click.Path(exists=True))
@click.pass_context
def perm_paired_cmd(ctx, a_file, b_file):
    p = stats.paired_permutation_test(_read_vector(a_file), _read_vector(b_file),
                                      ctx.obj["perm"])
    click.echo(f"p = {p}")


@stats_group.command("perm-unpaired")
@click.argument("a_file", type=click.Path(exists=True))
@click.argument("b_file", type=click.Path(exists=True))
@click.option("--statistic", default="mean", type=click.Choice(["mean", "median"]))
@click.pass_context
def perm_unpaired_cmd(ctx, a_file, b_file, statistic):
    p = stats.unpaired_permutation_test(_read_vector(a_file), _read_vector(b_file),
                                        ctx.obj["perm"], statistic=statistic)
    click.echo(f"p = {p}")


@stats_group.command("kappa")
@click.option("--matrix", "matrix_path", type=click.Path(exists=True),
              help="Whitespace-separated count matrix, one item per row.")
@click.option("--judgments", "judgments_path", type=click.Path(exists=True),
              help="Judgment export to build the matrix from.")
def kappa_cmd(matrix_path, judgments_path):
    if bool(matrix_path) == bool(judgments_path):
        raise click.UsageError("exactly one of --matrix / --judgments is required")
    if matrix_path:
        rows = [[int(v) for v in line.split()]
                for line in Path(matrix_path).read_text(encoding="utf-8").splitlines()
                if line.strip()]
        matrix = stats.JudgmentMatrix(rows)
    else:
        _, judgments = read_records(judgments_path)
        matrix = stats.judgments_to_matrix(judgments)
    click.echo(f"kappa = {stats.fleiss_kappa(matrix)}")


@stats_group.command("agreement")
@click.option("--judgments", "judgments_path", required=True, type=click.Path(exists=True))
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True))
@click.pass_context
def agreement_cmd(ctx, judgments_path, pairs_path):
    _, judgments = read_records(judgments_path)
    _, pair_rows = read_records(pairs_path)
    report = stats.gold_agreement(judgments, [r["pair_id"] for r in pair_rows])
    if ctx.obj["fmt"] == "records":
        click.echo(json.dumps(report.to_record(), sort_keys=True))
    else:
        for annotator, acc in sorted(report.per_annotator.items()):
            click.echo(f"{annotator}: {acc:.3f}")
        click.echo(f"pooled: {report.pooled:.3f} over {report.n_judgments} judgments")


@stats_group.command("pos")
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True))
@click.option("--scored", "scored_path", required=True, type=click.Path(exists=True))
@click.pass_context
def pos_cmd(ctx, pairs_path, scored_path):
    _, pair_rows = read_records(pairs_path)
    pairs = [pairgen.MinimalPair.from_record(rec) for rec in pair_rows]
    report = stats.pos_margin_analysis(pairs, _load_scored(scored_path), ctx.obj["perm"])
    _emit(report, ctx.obj["fmt"])


@stats_group.command("buckets")
@click.option("--judgments", "judgments_path", required=True, type=click.Path(exists=True))
@click.option("--scored", "scored_path", required=True, type=click.Path(exists=True))
@click.option("--raters", type=int, default=None)
@click.pass_context
def buckets_cmd(ctx, judgments_path, scored_path, raters):
    _, judgments = read_records(judgments_path)
    report = stats.margin_vs_agreement(judgments, _load_scored(scored_path),
                                       n_raters=raters, config=ctx.obj["perm"])
    _emit(report, ctx.obj["fmt"])


@cli.group("judge")
def judge_group():
    """Forced-choice judgment collection."""


@judge_group.command("plan")
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True))
@click.option("--pool", required=True, help="Comma-separated annotator ids.")
@click.option("--k", type=int, default=1, show_default=True)
@click.option("--batch-size", type=int, default=67, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def judge_plan_cmd(ctx, pairs_path, pool, k, batch_size, out_path):
    """Assign pairs to annotators and issue session tokens."""
    _, rows = read_records(pairs_path)
    pair_ids = sorted(r["pair_id"] for r in rows)
    plan = plan_assignments(pair_ids, pool.split(","), k, ctx.obj["seed"], batch_size)
    plan.save(out_path)
    for annotator in plan.annotators:
        click.echo(f"{annotator}: token {plan.tokens[annotator]}, "
                   f"{len(plan.annotator_pairs(annotator))} pairs in "
                   f"{len(plan.batches[annotator])} batches")


@judge_group.command("serve")
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True))
@click.option("--plan", "plan_path", required=True, type=click.Path())
@click.option("--log", "log_path", default="judgments.ndjson", show_default=True,
              type=click.Path())
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
def judge_serve_cmd(pairs_path, plan_path, log_path, port, host):
    """Run the judgment service."""
    import uvicorn

    from .judge.service import create_app, load_pair_views

    views = load_pair_views(pairs_path)
    plan = Plan.load(plan_path) if Path(plan_path).exists() else None
    app = create_app(views, plan=plan, log=JudgmentLog(log_path), plan_path=plan_path)
    uvicorn.run(app, host=host, port=port)


@judge_group.command("export")
@click.option("--log", "log_path", type=click.Path(exists=True))
@click.option("--plan", "plan_path", type=click.Path(exists=True))
@click.option("--url", default=None, help="Running service to export from.")
@click.option("--annotator", default=None)
@click.option("--complete-batches-only", is_flag=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def judge_export_cmd(log_path, plan_path, url, annotator, complete_batches_only, out_path):
    """Write resolved judgment records for the statistics commands."""
    if url:
        import httpx

        params = {"complete_batches_only": complete_batches_only}
        if annotator:
            params["annotator"] = annotator
        try:
            resp = httpx.get(url.rstrip("/") + "/export", params=params, timeout=30.0)
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise BackendError(f"judgment service {url}: {exc}") from exc
        records = resp.json()["records"]
    else:
        if not log_path:
            raise click.UsageError("either --url or --log is required")
        plan = Plan.load(plan_path) if plan_path else None
        records = export_judgments(JudgmentLog(log_path), plan=plan,
                                   annotator=annotator,
                                   complete_batches_only=complete_batches_only)
    write_records(out_path, records)
    click.echo(f"{len(records)} judgments exported")


@cli.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def run_cmd(config_path):
    """Run the configured pipeline stages in order."""
    summary = run_pipeline(PipelineConfig.from_file(config_path))
    for step in summary["steps"]:
        rejected = ", ".join(f"{k}={v}" for k, v in step["rejected"].items() if v)
        click.echo(f"{step['stage']:<10} {step['unit']:<10} "
                   f"in={step['input']:<6} out={step['output']:<6} {rejected}")


def main(argv=None) -> None:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.Abort:
        sys.exit(1)
    except click.UsageError as exc:
        exc.show()
        sys.exit(1)
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(2)
    except BackendError as exc:
        click.echo(f"backend error: {exc}", err=True)
        sys.exit(3)


if __name__ == "__main__":
    main()

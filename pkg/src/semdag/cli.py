"""Command-line interface: one subcommand per pipeline stage plus `run`.

Exit codes: 0 on success, 1 on any hard failure, 2 on configuration errors.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .collection import (
    DEFAULT_FILTER_TERMS,
    FunnelLedger,
    funnel_report,
    keyword_filter,
    load_metadata_records,
    render_funnel_table,
)
from .document import ingest_parsed_document
from .errors import ConfigError, SemdagError
from .export import export_dataset, import_external, render_data_card
from .metrics import (
    MetricReport,
    compare_pair,
    dataset_statistics,
    domain_tag_counts,
    render_metric_table,
)
from .pipeline import load_config, run_pipeline
from .review import CandidateStore
from .serialization import parse_semantic_dag


@click.group()
def main() -> None:
    """Build, validate, measure, and export document-grounded semantic DAGs."""


def _fail(message: str, code: int = 1) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_config(path: str):
    try:
        return load_config(path)
    except ConfigError as exc:
        _fail(str(exc), code=2)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--stop-after", default=None, help="End the run after this stage.")
@click.option("--dry-run", is_flag=True, help="Print planned work without executing.")
def run(config_path: str, stop_after: str | None, dry_run: bool) -> None:
    """Run the full pipeline described by a config file."""
    config = _load_config(config_path)
    try:
        summary = run_pipeline(config, stop_after=stop_after, dry_run=dry_run)
    except ConfigError as exc:
        _fail(str(exc), code=2)
    except SemdagError as exc:
        _fail(str(exc))
    click.echo(json.dumps(summary, indent=2, sort_keys=True))
    if summary.get("errors"):
        sys.exit(1)


@main.command()
@click.option("--metadata", "metadata_path", required=True, type=click.Path(exists=True))
@click.option("--terms", default=",".join(DEFAULT_FILTER_TERMS), show_default=True, help="Comma-separated filter terms.")
@click.option("--source", default=None, help="Only consider records from this source.")
@click.option("--limit", default=None, type=int, help="Stop after this many records.")
@click.option("--out", "out_path", default=None, type=click.Path(), help="Write decisions as JSONL.")
def collect(metadata_path: str, terms: str, source: str | None, limit: int | None, out_path: str | None) -> None:
    """Keyword-filter repository metadata."""
    term_list = tuple(t.strip() for t in terms.split(",") if t.strip())
    rows = []
    count = 0
    try:
        for meta in load_metadata_records(metadata_path):
            if source is not None and meta.source_repo != source:
                continue
            count += 1
            if limit is not None and count > limit:
                break
            decision = keyword_filter(meta, term_list)
            rows.append({"paper_id": meta.paper_id, "source": meta.source_repo, "keep": decision.keep, "hits": list(decision.hits)})
    except SemdagError as exc:
        _fail(str(exc))
    output = "\n".join(json.dumps(r, ensure_ascii=False, sort_keys=True) for r in rows) + "\n"
    if out_path:
        Path(out_path).write_text(output, encoding="utf-8")
    else:
        click.echo(output, nl=False)
    kept = sum(1 for r in rows if r["keep"])
    click.echo(f"kept {kept}/{len(rows)} records", err=True)


@main.command()
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True), help="Directory of interchange documents.")
def ingest(in_dir: str) -> None:
    """Validate interchange documents."""
    failures = 0
    for path in sorted(Path(in_dir).glob("*.json")):
        try:
            doc = ingest_parsed_document(path)
            click.echo(f"{path.name}: ok ({len(doc.blocks)} blocks, {len(doc.figures)} figures, {len(doc.chunks)} chunks)")
        except SemdagError as exc:
            failures += 1
            click.echo(f"{path.name}: FAILED: {exc}", err=True)
    if failures:
        sys.exit(1)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--in", "in_dir", default=None, type=click.Path(exists=True), help="Corpus root override.")
@click.option("--profile", "profile_name", default=None, help="Vision profile override.")
def classify(config_path: str, in_dir: str | None, profile_name: str | None) -> None:
    """Classify candidate figures (runs the pipeline through the classify stage)."""
    config = _load_config(config_path)
    if in_dir is not None:
        config.corpus_root = Path(in_dir)
    if profile_name is not None:
        config.stage_profiles["classify"] = profile_name
        try:
            from .pipeline import validate_config

            validate_config(config)
        except ConfigError as exc:
            _fail(str(exc), code=2)
    try:
        summary = run_pipeline(config, stop_after="classify")
    except SemdagError as exc:
        _fail(str(exc))
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--decisions", "decisions_path", default=None, type=click.Path(exists=True), help="Classification decision log (defaults to the run dir's log).")
@click.option("--profile", "profile_name", default=None, help="Annotation profile override.")
def annotate(config_path: str, decisions_path: str | None, profile_name: str | None) -> None:
    """Annotate accepted figures (runs the pipeline through the annotate stage)."""
    config = _load_config(config_path)
    if profile_name is not None:
        config.stage_profiles["annotate"] = profile_name
    if decisions_path is not None:
        import shutil

        config.run_dir.mkdir(parents=True, exist_ok=True)
        shutil.copy(decisions_path, config.run_dir / "classify.jsonl")
    try:
        summary = run_pipeline(config, stop_after="annotate")
    except SemdagError as exc:
        _fail(str(exc))
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--annotators", default=None, help="Comma-separated annotator profile names (exactly 3).")
@click.option("--judge", "judge_name", default=None, help="Judge profile name.")
def judge(config_path: str, annotators: str | None, judge_name: str | None) -> None:
    """Run the LLM-as-a-judge protocol over pending candidates."""
    config = _load_config(config_path)
    if annotators is not None:
        config.judge_annotators = tuple(a.strip() for a in annotators.split(","))
    if judge_name is not None:
        config.judge_profile = judge_name
    config.judge_enabled = True
    try:
        from .pipeline import validate_config

        validate_config(config)
        summary = run_pipeline(config, stop_after="judge")
    except ConfigError as exc:
        _fail(str(exc), code=2)
    except SemdagError as exc:
        _fail(str(exc))
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


@main.command("review-serve")
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--corpus", "corpus_dir", default=".", type=click.Path())
@click.option("--port", default=8040, show_default=True, type=int)
@click.option("--static", "static_dir", default=None, type=click.Path(), help="Directory of built UI assets.")
def review_serve(store_dir: str, corpus_dir: str, port: int, static_dir: str | None) -> None:
    """Serve the review HTTP API (and the UI when assets are provided)."""
    from .review_service import serve

    serve(store_dir, corpus_dir, port=port, static_dir=static_dir)


@main.command()
@click.option("--ref", "ref_dir", required=True, type=click.Path(exists=True), help="Directory of reference graphs.")
@click.option("--pred", "pred_dir", required=True, type=click.Path(exists=True), help="Directory of predicted graphs.")
@click.option("--aliases", type=click.Choice(["on", "off"]), default="off", show_default=True)
@click.option("--counts", default=None, help="predicted,true_dag,kept counts for DC/E2E (e.g. 57,50,50).")
@click.option("--decisions", "decisions_path", default=None, type=click.Path(exists=True), help="Classification decision log (JSONL).")
@click.option("--truth", "truth_path", default=None, type=click.Path(exists=True), help="Ground truth: JSON mapping figure_id -> true-DAG boolean.")
@click.option("--kept", "kept_count", default=None, type=int, help="Kept count for E2E when using --decisions.")
@click.option("--out", "out_path", default=None, type=click.Path(), help="Write the machine-readable report here.")
def metrics(
    ref_dir: str,
    pred_dir: str,
    aliases: str,
    counts: str | None,
    decisions_path: str | None,
    truth_path: str | None,
    kept_count: int | None,
    out_path: str | None,
) -> None:
    """Compare reference and predicted graph directories (matched by filename)."""
    ref_paths = {p.name: p for p in sorted(Path(ref_dir).glob("*.json"))}
    pred_paths = {p.name: p for p in sorted(Path(pred_dir).glob("*.json"))}
    shared = sorted(set(ref_paths) & set(pred_paths))
    if not shared:
        _fail("no filename-matched reference/prediction pairs found")
    pairs = []
    for name in shared:
        ref = parse_semantic_dag(ref_paths[name].read_bytes())
        pred = parse_semantic_dag(pred_paths[name].read_bytes())
        pairs.append(compare_pair(name, ref, pred, use_aliases=aliases == "on"))
    if counts:
        predicted, true_dag, kept = (int(x) for x in counts.split(","))
    elif decisions_path and truth_path:
        from .classify import read_decisions

        decisions = [d for d in read_decisions(decisions_path) if d.accepted]
        if not decisions:
            _fail("decision log contains no accepted figures")
        truth = json.loads(Path(truth_path).read_text(encoding="utf-8"))
        predicted = len(decisions)
        true_dag = sum(1 for d in decisions if truth.get(d.figure_id, False))
        kept = kept_count if kept_count is not None else len(pairs)
    else:
        predicted = true_dag = kept = len(pairs)
    report = MetricReport(pairs=tuple(pairs), predicted=predicted, true_dags=true_dag, kept=kept)
    click.echo(render_metric_table([("run", report)]))
    payload = json.dumps(report.to_dict(), ensure_ascii=False, indent=2, sort_keys=True) + "\n"
    if out_path:
        Path(out_path).write_text(payload, encoding="utf-8")
    else:
        click.echo(payload, nl=False)


@main.command()
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def export(store_dir: str, out_dir: str) -> None:
    """Export a store of kept candidates as a release bundle."""
    try:
        manifest = export_dataset(CandidateStore(store_dir), out_dir)
    except SemdagError as exc:
        _fail(str(exc))
    click.echo(json.dumps(manifest, indent=2, sort_keys=True))


@main.command("import-external")
@click.option("--records", "records_path", required=True, type=click.Path(exists=True), help="JSONL of external graph records.")
@click.option("--format", "format_name", default="generic", show_default=True, help="Source format name (provenance tag).")
@click.option("--out", "out_dir", required=True, type=click.Path())
def import_external_cmd(records_path: str, format_name: str, out_dir: str) -> None:
    """Import an external synthetic DAG dataset as semantic DAGs."""
    records = [json.loads(line) for line in Path(records_path).read_text(encoding="utf-8").splitlines() if line.strip()]
    accepted, rejected = import_external(records, source_name="synthetic")
    from .export import export_graphs

    manifest = export_graphs(accepted, out_dir)
    for rejection in rejected:
        click.echo(f"rejected {rejection.record_id}: {rejection.detail}", err=True)
    click.echo(json.dumps({"imported": len(accepted), "rejected": len(rejected), "manifest": manifest}, indent=2, sort_keys=True))
    if rejected:
        sys.exit(1)


@main.command()
@click.option("--ledger", "ledger_path", required=True, type=click.Path(exists=True), help="Funnel ledger JSON.")
@click.option("--out", "out_path", default=None, type=click.Path(), help="Write the machine-readable report here.")
def funnel(ledger_path: str, out_path: str | None) -> None:
    """Render a funnel ledger as the retention table."""
    ledger = FunnelLedger.from_dict(json.loads(Path(ledger_path).read_text(encoding="utf-8")))
    try:
        rows = funnel_report(ledger)
    except SemdagError as exc:
        _fail(str(exc))
    click.echo(render_funnel_table(rows))
    if out_path:
        payload = [
            {"source": r.source, "stage": r.stage, "count": r.count, "retention_pct": r.retention_pct, "label": r.retention_label}
            for r in rows
        ]
        Path(out_path).write_text(json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8")


@main.command()
@click.option("--release", "release_dir", required=True, type=click.Path(exists=True), help="Release bundle directory.")
@click.option("--funnel", "ledger_path", default=None, type=click.Path(exists=True), help="Optional funnel ledger JSON.")
@click.option("--out", "out_path", default=None, type=click.Path())
def datacard(release_dir: str, ledger_path: str | None, out_path: str | None) -> None:
    """Render the data card for a release bundle."""
    from .export import load_release

    dags = load_release(release_dir)
    rows = None
    if ledger_path:
        ledger = FunnelLedger.from_dict(json.loads(Path(ledger_path).read_text(encoding="utf-8")))
        rows = funnel_report(ledger)
    card = render_data_card(dataset_statistics(dags), domain_tag_counts(dags), rows)
    if out_path:
        Path(out_path).write_text(card, encoding="utf-8")
    else:
        click.echo(card)


if __name__ == "__main__":
    main()

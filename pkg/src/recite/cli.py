"""Command-line interface: correct / eval / prep / segment / serve.

Exit codes: 0 success, 2 invalid input (bad flags, malformed files,
validation failures), 3 provider failure (embedding or LLM backends).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import corrector, dataset_prep, domain, evaluation
from .embeddings import EmbeddingError, make_provider
from .llm_matcher import (
    HttpChatLlmClient,
    LlmClientConfig,
    LlmError,
    PromptConfig,
    ReplayLlmClient,
)
from .scoring import MATCHERS, HybridConfig, ScoringContext, ScoringError
from .segmenter import StreamingSegmenter
from .tokenizer import DEFAULT_CONFIG, TokenizerConfig, load_stopwords

EXIT_INVALID_INPUT = 2
EXIT_PROVIDER_FAILURE = 3


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_json(path: Path, what: str) -> dict:
    try:
        return json.loads(path.read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        _fail(EXIT_INVALID_INPUT, f"cannot read {what} {path}: {exc}")
        raise AssertionError  # unreachable


def _build_llm_client(config_path: Path | None):
    if config_path is None:
        return None, None
    data = _load_json(config_path, "llm config")
    prompt = PromptConfig(max_doc_tokens=int(data.get("max_doc_tokens", 512)))
    kind = data.get("kind", "http")
    if kind == "replay":
        return ReplayLlmClient(data["path"]), prompt
    config = LlmClientConfig(
        endpoint=data.get("endpoint", ""),
        model=data.get("model", ""),
        timeout_s=float(data.get("timeout_s", 30.0)),
        max_retries=int(data.get("max_retries", 2)),
    )
    return HttpChatLlmClient(config), prompt


def _build_context(bundle_docs, method, lambda_, embedder_path, llm_config_path,
                   cache_dir, stopwords_path=None):
    embedder = None
    if method == "bertscore":
        descriptor = _load_json(embedder_path, "embedder descriptor") if embedder_path else {"kind": "test"}
        embedder = make_provider(descriptor, cache_dir=cache_dir)
    llm_client, prompt = (None, None)
    if method == "llm":
        if llm_config_path is None:
            _fail(EXIT_INVALID_INPUT, "--llm-config is required with --method llm")
        llm_client, prompt = _build_llm_client(llm_config_path)
    tokenizer_config = DEFAULT_CONFIG
    if stopwords_path is not None:
        tokenizer_config = TokenizerConfig(stopwords=load_stopwords(stopwords_path))
    return ScoringContext(
        bundle_docs,
        tokenizer_config=tokenizer_config,
        hybrid_config=HybridConfig(keyword_weight=lambda_),
        embedder=embedder,
        llm_client=llm_client,
        llm_prompt_config=prompt,
    )


@click.group()
@click.version_option(package_name="recite")
def main() -> None:
    """Citation correction and audit tooling for RAG answers."""


@main.command("correct")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              required=True, help="Bundle JSON (query, documents, answer).")
@click.option("--method", type=click.Choice(MATCHERS), default="keyword", show_default=True)
@click.option("--lambda", "lambda_", type=float, default=0.8, show_default=True,
              help="Keyword weight for the hybrid matcher, in [0, 1].")
@click.option("--stream", is_flag=True, help="Read answer chunks from stdin, write corrected stream to stdout.")
@click.option("--output", "output_path", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--embedder", "embedder_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Embedding provider descriptor JSON (bertscore method).")
@click.option("--llm-config", "llm_config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="LLM client config JSON (llm method).")
@click.option("--cache-dir", type=click.Path(file_okay=False, path_type=Path),
              help="On-disk embedding cache directory.")
@click.option("--stopwords", "stopwords_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Override the shipped stopword list (one token per line).")
def cli_correct(input_path, method, lambda_, stream, output_path, embedder_path,
                llm_config_path, cache_dir, stopwords_path) -> None:
    """Re-score citations of one answer bundle and rewrite its markers."""
    if not 0.0 <= lambda_ <= 1.0:
        raise click.UsageError(f"--lambda {lambda_} outside valid range [0, 1]")
    bundle = domain.bundle_from_dict(_load_json(input_path, "bundle"))
    violations = domain.validate_bundle(bundle, check_citations=False)
    if violations:
        _fail(EXIT_INVALID_INPUT, "invalid bundle: " + "; ".join(violations))
    context = _build_context(bundle.documents, method, lambda_, embedder_path,
                             llm_config_path, cache_dir, stopwords_path)
    try:
        if stream:
            session = corrector.StreamingCorrector(
                bundle.documents, method, context=context, bundle=bundle)
            while True:
                chunk = sys.stdin.read(4096)
                if not chunk:
                    break
                sys.stdout.write(session.feed(chunk))
                sys.stdout.flush()
            tail, result = session.finish()
            sys.stdout.write(tail)
            sys.stdout.flush()
        else:
            result = corrector.correct(bundle, method, context=context)
    except corrector.BundleValidationError as exc:
        _fail(EXIT_INVALID_INPUT, str(exc))
    except (ScoringError, EmbeddingError, LlmError) as exc:
        _fail(EXIT_PROVIDER_FAILURE, str(exc))
    payload = domain.correction_to_json_bytes(result)
    if output_path is not None:
        output_path.write_bytes(payload)
    elif not stream:
        sys.stdout.buffer.write(payload)


@main.command("eval")
@click.option("--annotations", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              required=True, help="AuditRecord JSONL, one audited question per line.")
@click.option("--metric-floor", type=float, default=0.8, show_default=True)
@click.option("--max-hallucinated", type=int, default=1, show_default=True)
@click.option("--output", "output_path", type=click.Path(dir_okay=False, path_type=Path),
              help="Write the report JSON here.")
@click.option("--json", "json_only", is_flag=True, help="Print report JSON instead of the table.")
def cli_eval(annotations, metric_floor, max_hallucinated, output_path, json_only) -> None:
    """Compute per-question metrics and mean question-level accuracy."""
    try:
        records = evaluation.load_audit_records(annotations)
    except evaluation.AuditFormatError as exc:
        _fail(EXIT_INVALID_INPUT, f"{annotations}: {exc}")
    thresholds = evaluation.MqlaThresholds(metric_floor=metric_floor,
                                           max_hallucinated=max_hallucinated)
    report = evaluation.mqla(records, thresholds)
    payload = evaluation.report_to_json_bytes(report)
    if output_path is not None:
        output_path.write_bytes(payload)
    if json_only:
        sys.stdout.buffer.write(payload)
    else:
        click.echo(evaluation.format_report_table(report))


main.add_command(cli_eval, name="report")


@main.command("prep")
@click.option("--strategy", type=click.Choice([dataset_prep.STRATEGY_SIMILAR_DOC,
                                               dataset_prep.STRATEGY_RAG_GROUNDING]),
              required=True)
@click.option("--corpus", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Corpus JSONL with id/text fields (similar_doc strategy).")
@click.option("--bundles", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Bundle JSONL (rag_grounding strategy).")
@click.option("--llm-config", "llm_config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              required=True)
@click.option("--embedder", "embedder_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Similarity backend embedder descriptor (similar_doc strategy).")
@click.option("--schedule", default=",".join(map(str, dataset_prep.DEFAULT_HARDNESS_SCHEDULE)),
              show_default=True, help="Comma-separated hardness ranks.")
@click.option("--max-pairs", type=int, default=dataset_prep.DEFAULT_MAX_PAIRS_PER_POINT,
              show_default=True)
@click.option("--output", "output_path", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.option("--checkpoint", "checkpoint_path", type=click.Path(dir_okay=False, path_type=Path))
def cli_prep(strategy, corpus, bundles, llm_config_path, embedder_path, schedule,
             max_pairs, output_path, checkpoint_path) -> None:
    """Mine training triplets with checkpointed, resumable output."""
    client, _ = _build_llm_client(llm_config_path)
    try:
        if strategy == dataset_prep.STRATEGY_SIMILAR_DOC:
            if corpus is None:
                raise click.UsageError("--corpus is required for similar_doc")
            docs = dataset_prep.load_corpus(corpus)
            descriptor = _load_json(embedder_path, "embedder descriptor") if embedder_path else {"kind": "test"}
            backend = dataset_prep.EmbeddingSimilarityBackend(docs, make_provider(descriptor))
            ranks = tuple(int(x) for x in schedule.split(",") if x.strip())
            counters = dataset_prep.run_similar_doc_prep(
                docs, backend, client, output_path, checkpoint_path, schedule=ranks)
        else:
            if bundles is None:
                raise click.UsageError("--bundles is required for rag_grounding")
            bundle_list = [domain.bundle_from_dict(d)
                           for d in domain.iter_jsonl(Path(bundles).read_text("utf-8"))]
            counters = dataset_prep.run_grounding_prep(
                bundle_list, client, output_path, checkpoint_path, max_pairs_per_point=max_pairs)
    except (LlmError, EmbeddingError) as exc:
        _fail(EXIT_PROVIDER_FAILURE, str(exc))
    click.echo(
        f"emitted {counters.emitted} triplets "
        f"(skipped: {counters.skipped_refusal} refusals, {counters.skipped_rank} rank, "
        f"{counters.skipped_verdict} verdict; {counters.failed} failures)",
        err=True,
    )


@main.command("segment")
@click.option("--doc-count", type=int, required=True, help="Number of retrieved documents R.")
def cli_segment(doc_count) -> None:
    """Read answer chunks from stdin; print one JSON line per factual point."""
    if doc_count < 1:
        raise click.UsageError("--doc-count must be >= 1")
    session = StreamingSegmenter(doc_count)

    def emit(points):
        for point in points:
            sys.stdout.write(json.dumps(domain.point_to_dict(point), ensure_ascii=False) + "\n")
            sys.stdout.flush()

    while True:
        chunk = sys.stdin.read(4096)
        if not chunk:
            break
        emit(session.feed(chunk))
    emit(session.flush())


@main.command("serve")
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-dir", type=click.Path(file_okay=False, path_type=Path), required=True,
              help="Directory for audit session persistence.")
@click.option("--ui-dir", type=click.Path(file_okay=False, path_type=Path),
              help="Static annotation UI bundle to host at /.")
def cli_serve(port, host, data_dir, ui_dir) -> None:
    """Run the HTTP correction + annotation service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(data_dir, ui_dir=ui_dir), host=host, port=port)


if __name__ == "__main__":
    main()

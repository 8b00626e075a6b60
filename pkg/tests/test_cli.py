import json

import pytest
from click.testing import CliRunner

from recite.cli import main
from recite.llm_matcher import prompt_key

from conftest import FIXTURE_DIR


@pytest.fixture
def runner():
    return CliRunner()


def test_correct_reproduces_golden_file(runner, tmp_path):
    out = tmp_path / "out.json"
    result = runner.invoke(main, [
        "correct", "--input", f"{FIXTURE_DIR}/bundle.json",
        "--method", "keyword", "--output", str(out),
    ])
    assert result.exit_code == 0, result.output
    golden = open(f"{FIXTURE_DIR}/golden_correction.json", "rb").read()
    assert out.read_bytes() == golden


def test_correct_missing_input_exits_2(runner):
    result = runner.invoke(main, ["correct", "--input", "does-not-exist.json"])
    assert result.exit_code == 2


def test_correct_lambda_out_of_range_exits_2(runner):
    result = runner.invoke(main, [
        "correct", "--input", f"{FIXTURE_DIR}/bundle.json", "--lambda", "1.2",
    ])
    assert result.exit_code == 2
    assert "range" in result.output


def test_correct_invalid_bundle_exits_2(runner, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"query": " ", "documents": [], "answer": "x"}), "utf-8")
    result = runner.invoke(main, ["correct", "--input", str(bad)])
    assert result.exit_code == 2
    assert "invalid bundle" in result.output


def test_correct_provider_failure_exits_3(runner, tmp_path):
    fixture = tmp_path / "replies.jsonl"
    fixture.write_text("", "utf-8")  # exhausted immediately
    config = tmp_path / "llm.json"
    config.write_text(json.dumps({"kind": "replay", "path": str(fixture)}), "utf-8")
    result = runner.invoke(main, [
        "correct", "--input", f"{FIXTURE_DIR}/bundle.json",
        "--method", "llm", "--llm-config", str(config),
    ])
    assert result.exit_code == 3


def test_correct_llm_method_with_replay_fixture(runner, tmp_path):
    fixture = tmp_path / "replies.jsonl"
    fixture.write_text('{"reply": "1"}\n{"reply": "2"}\n', "utf-8")
    config = tmp_path / "llm.json"
    config.write_text(json.dumps({"kind": "replay", "path": str(fixture)}), "utf-8")
    out = tmp_path / "out.json"
    result = runner.invoke(main, [
        "correct", "--input", f"{FIXTURE_DIR}/bundle.json",
        "--method", "llm", "--llm-config", str(config), "--output", str(out),
    ])
    assert result.exit_code == 0, result.output
    data = json.loads(out.read_text())
    assert data["points"][0]["corrected_citations"] == [0]
    assert data["points"][1]["corrected_citations"] == [1]


def test_correct_bertscore_runs_offline(runner, tmp_path):
    out = tmp_path / "out.json"
    descriptor = tmp_path / "embedder.json"
    descriptor.write_text(json.dumps({"kind": "test", "dimension": 16}), "utf-8")
    result = runner.invoke(main, [
        "correct", "--input", f"{FIXTURE_DIR}/bundle.json",
        "--method", "bertscore", "--embedder", str(descriptor), "--output", str(out),
    ])
    assert result.exit_code == 0, result.output
    assert json.loads(out.read_text())["points"]


def test_correct_stream_mode(runner, tmp_path):
    golden = json.load(open(f"{FIXTURE_DIR}/golden_correction.json"))
    bundle = json.load(open(f"{FIXTURE_DIR}/bundle.json"))
    result = runner.invoke(main, [
        "correct", "--input", f"{FIXTURE_DIR}/bundle.json", "--stream",
    ], input=bundle["answer"])
    assert result.exit_code == 0, result.output
    assert result.output == golden["corrected_answer"]


def test_eval_fixture_report(runner, tmp_path):
    out = tmp_path / "report.json"
    result = runner.invoke(main, [
        "eval", "--annotations", f"{FIXTURE_DIR}/audits_10q.jsonl", "--output", str(out),
    ])
    assert result.exit_code == 0, result.output
    assert "mean question-level accuracy: 0.5000" in result.output
    report = json.loads(out.read_text())
    assert report["mean_accuracy"] == 0.5
    assert report["total_incorrectly_cited"] == 4
    assert report["total_hallucinated"] == 4


def test_eval_empty_file_exits_2(runner, tmp_path):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("", "utf-8")
    result = runner.invoke(main, ["eval", "--annotations", str(empty)])
    assert result.exit_code == 2


def test_eval_malformed_line_names_line_number(runner, tmp_path):
    path = tmp_path / "audits.jsonl"
    good = json.dumps({"question_id": "a", "facts": [
        {"text": "f", "relevant": True, "supported_by_citation": True,
         "present_in_any_retrieved_doc": True}]})
    path.write_text(good + "\nbroken\n", "utf-8")
    result = runner.invoke(main, ["eval", "--annotations", str(path)])
    assert result.exit_code == 2
    assert "line 2" in result.output


def test_prep_unknown_strategy_exits_2(runner):
    result = runner.invoke(main, ["prep", "--strategy", "magic", "--output", "x.jsonl"])
    assert result.exit_code == 2


def test_prep_similar_doc_end_to_end(runner, tmp_path):
    corpus_path = tmp_path / "corpus.jsonl"
    docs = [{"id": f"d{i}", "text": f"topic{i} alpha beta gamma delta"} for i in range(6)]
    corpus_path.write_text("\n".join(json.dumps(d) for d in docs), "utf-8")

    # keyed replay fixture covering every prompt the run will issue
    from recite.dataset_prep import (
        CorpusDocument, EmbeddingSimilarityBackend, build_fact_prompt)
    from recite.embeddings import HashEmbeddingProvider

    embedder = tmp_path / "embedder.json"
    embedder.write_text(json.dumps({"kind": "test", "dimension": 8}), "utf-8")

    corpus = [CorpusDocument(d["id"], d["text"]) for d in docs]
    backend = EmbeddingSimilarityBackend(corpus, HashEmbeddingProvider(dimension=8))
    lines = []
    by_id = {d.id: d for d in corpus}
    for doc in corpus:
        ranking = backend.rank(doc.id)
        for n in (3, 2):
            neg = by_id[ranking[n - 1]]
            prompt = build_fact_prompt(doc.text, neg.text)
            lines.append(json.dumps({"key": prompt_key(prompt), "reply": f"fact about {doc.id} not {neg.id}"}))
    replay = tmp_path / "replies.jsonl"
    replay.write_text("\n".join(lines), "utf-8")
    config = tmp_path / "llm.json"
    config.write_text(json.dumps({"kind": "replay", "path": str(replay)}), "utf-8")

    out1 = tmp_path / "run1.jsonl"
    out2 = tmp_path / "run2.jsonl"
    for out in (out1, out2):
        result = runner.invoke(main, [
            "prep", "--strategy", "similar_doc", "--corpus", str(corpus_path),
            "--llm-config", str(config), "--embedder", str(embedder),
            "--schedule", "3,2",
            "--output", str(out), "--checkpoint", str(tmp_path / f"{out.stem}.ckpt"),
        ])
        assert result.exit_code == 0, result.output
        assert "emitted 12 triplets" in result.output
    assert out1.read_bytes() == out2.read_bytes()


def test_correct_stopword_override(runner, tmp_path):
    # stopwording away point 0's entire vocabulary zeroes its keyword row,
    # so selection falls back to the retrieval-score tie-break
    stopfile = tmp_path / "stop.txt"
    stopfile.write_text("the\nwheat\ncrop\nyield\nrose\nsharply\n", "utf-8")
    out = tmp_path / "out.json"
    result = runner.invoke(main, [
        "correct", "--input", f"{FIXTURE_DIR}/bundle.json",
        "--stopwords", str(stopfile), "--output", str(out),
    ])
    assert result.exit_code == 0, result.output
    data = json.loads(out.read_text())
    assert data["points"][0]["scores"] == [0.0, 0.0, 0.0]
    assert data["points"][0]["corrected_citations"] == [0]  # highest retrieval score


def test_report_alias(runner):
    result = runner.invoke(main, ["report", "--annotations", f"{FIXTURE_DIR}/audits_10q.jsonl"])
    assert result.exit_code == 0
    assert "mean question-level accuracy" in result.output


def test_segment_command_streams_jsonl(runner):
    result = runner.invoke(main, ["segment", "--doc-count", "3"],
                           input="A is tall [1]. B bowls fast [2,3].")
    assert result.exit_code == 0, result.output
    lines = [json.loads(line) for line in result.output.strip().splitlines()]
    assert [l["citations"] for l in lines] == [[0], [1, 2]]
    assert [l["text"] for l in lines] == ["A is tall .", "B bowls fast ."]

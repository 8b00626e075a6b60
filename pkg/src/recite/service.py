"""HTTP service: correction endpoint plus the audit-session workflow.

Sessions persist as one JSON file each under the data directory (written
atomically, reloaded on boot), so audits survive process restarts without
a database. Annotation writes are versioned: a PUT carrying a stale
version gets 409 instead of clobbering another auditor's work.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
import time
import uuid
from pathlib import Path
from typing import Any, Mapping

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse, PlainTextResponse

from . import corrector, domain, evaluation
from .scoring import MATCHERS, HybridConfig, ScoringContext, ScoringError
from .embeddings import EmbeddingError, make_provider
from .segmenter import segment


class SessionStore:
    """File-per-session persistence with per-session write locks."""

    def __init__(self, data_dir: str | Path):
        self._dir = Path(data_dir)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._locks: dict[str, threading.Lock] = {}
        self._sessions: dict[str, dict[str, Any]] = {}
        for path in sorted(self._dir.glob("session-*.json")):
            session = json.loads(path.read_text("utf-8"))
            self._sessions[session["id"]] = session

    def _session_lock(self, session_id: str) -> threading.Lock:
        with self._lock:
            return self._locks.setdefault(session_id, threading.Lock())

    def _path(self, session_id: str) -> Path:
        return self._dir / f"session-{session_id}.json"

    def create(self, session: dict[str, Any]) -> None:
        with self._session_lock(session["id"]):
            self._sessions[session["id"]] = session
            self._persist(session)

    def get(self, session_id: str) -> dict[str, Any] | None:
        return self._sessions.get(session_id)

    def all_sessions(self) -> list[dict[str, Any]]:
        return [self._sessions[k] for k in sorted(self._sessions)]

    def update(self, session_id: str, expected_version: int,
               mutate) -> tuple[dict[str, Any] | None, bool]:
        """Apply mutate(session) if the version matches; returns (session, ok)."""
        with self._session_lock(session_id):
            session = self._sessions.get(session_id)
            if session is None:
                return None, False
            if session["version"] != expected_version:
                return session, False
            mutate(session)
            session["version"] += 1
            self._persist(session)
            return session, True

    def _persist(self, session: Mapping[str, Any]) -> None:
        path = self._path(session["id"])
        fd, tmp = tempfile.mkstemp(dir=self._dir, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(session, fh, ensure_ascii=False)
        os.replace(tmp, path)


def _new_session(bundle: domain.RagBundle, correction: domain.CorrectionResult) -> dict[str, Any]:
    points = segment(bundle.answer, bundle.document_count)
    cited: list[str] = []
    by_ordinal = {p.ordinal: p for p in correction.points}
    for point in points:
        record = by_ordinal.get(point.ordinal)
        indices = record.corrected_citations if record and record.changed else point.cited_indices()
        for index in indices:
            if 0 <= index < bundle.document_count:
                url = bundle.documents[index].url
                if url and url not in cited:
                    cited.append(url)
    facts = [
        {
            "index": p.ordinal,
            "text": p.text,
            "citations": list(by_ordinal[p.ordinal].corrected_citations
                              if p.ordinal in by_ordinal and by_ordinal[p.ordinal].changed
                              else p.cited_indices()),
            "relevant": None,
            "supported_by_citation": None,
            "present_in_any_retrieved_doc": None,
        }
        for p in points
    ]
    return {
        "id": uuid.uuid4().hex[:12],
        "version": 0,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "query": bundle.query.text,
        "corrected_answer": correction.corrected_answer,
        "documents": [
            {"index": d.index, "id": d.id, "url": d.url, "text": d.text,
             "retrieval_score": d.retrieval_score}
            for d in bundle.documents
        ],
        "facts": facts,
        "cited_urls": [{"url": url, "relevant": None} for url in cited],
        "keywords": [],
        "subquestions": [],
    }


def session_to_audit_record(session: Mapping[str, Any]) -> evaluation.AuditRecord:
    """Freeze a session's current annotations; unjudged toggles default False.

    The live report endpoint and the JSONL export both go through this
    function, so report numbers always match an eval run on the export.
    """
    return evaluation.AuditRecord(
        question_id=session["id"],
        cited_urls=tuple(
            evaluation.AuditedUrl(u["url"], bool(u["relevant"])) for u in session["cited_urls"]
        ),
        keywords=tuple(
            evaluation.AuditedKeyword(k["text"], bool(k["relevant"])) for k in session["keywords"]
        ),
        facts=tuple(
            evaluation.AuditedFact(
                f["text"],
                bool(f["relevant"]),
                bool(f["supported_by_citation"]),
                bool(f["present_in_any_retrieved_doc"]),
            )
            for f in session["facts"]
        ),
        subquestions=tuple(
            evaluation.AuditedSubquestion(s["text"], bool(s["addressed"]))
            for s in session["subquestions"]
        ),
    )


def _error(status: int, message: str, **extra: Any) -> JSONResponse:
    return JSONResponse({"error": message, **extra}, status_code=status)


_FACT_FLAGS = ("relevant", "supported_by_citation", "present_in_any_retrieved_doc")


def _fragment_violations(session: Mapping[str, Any], fragment: Mapping[str, Any]) -> list[str]:
    violations: list[str] = []
    for entry in fragment.get("facts", []):
        index = entry.get("index")
        if not isinstance(index, int) or not 0 <= index < len(session["facts"]):
            violations.append(f"facts.index: {index!r} does not name a session fact")
            continue
        target = session["facts"][index]
        merged = {flag: entry.get(flag, target[flag]) for flag in _FACT_FLAGS}
        if merged["supported_by_citation"] and not merged["present_in_any_retrieved_doc"]:
            violations.append(
                f"facts[{index}]: supported_by_citation requires present_in_any_retrieved_doc"
            )
    known_urls = {u["url"] for u in session["cited_urls"]}
    for entry in fragment.get("cited_urls", []):
        if entry.get("url") not in known_urls:
            violations.append(f"cited_urls.url: {entry.get('url')!r} is not cited by this session")
    for name in ("keywords", "subquestions"):
        for entry in fragment.get(name, []):
            if not str(entry.get("text", "")).strip():
                violations.append(f"{name}.text: must be non-empty")
    return violations


def _merge_fragment(session: dict[str, Any], fragment: Mapping[str, Any]) -> None:
    """Upsert a validated annotation fragment into the session."""
    for entry in fragment.get("facts", []):
        target = session["facts"][entry["index"]]
        target.update({flag: entry[flag] for flag in _FACT_FLAGS if flag in entry})
    for entry in fragment.get("cited_urls", []):
        for u in session["cited_urls"]:
            if u["url"] == entry["url"]:
                u["relevant"] = bool(entry.get("relevant"))
    for name, key in (("keywords", "relevant"), ("subquestions", "addressed")):
        for entry in fragment.get(name, []):
            text = str(entry["text"]).strip()
            value = bool(entry.get(key))
            for existing in session[name]:
                if existing["text"] == text:
                    existing[key] = value
                    break
            else:
                session[name].append({"text": text, key: value})


def create_app(data_dir: str | Path, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="recite", version="0.1.0")
    store = SessionStore(data_dir)

    async def _read_json(request: Request) -> Any:
        try:
            return json.loads(await request.body())
        except json.JSONDecodeError:
            return None

    @app.post("/v1/correct")
    async def correct_endpoint(request: Request, method: str = "keyword",
                               keyword_weight: float = 0.8) -> Response:
        if method not in MATCHERS:
            return _error(400, f"unknown method {method!r}", violations=[f"method: {method!r}"])
        if method == "llm":
            return _error(400, "llm method is not available over HTTP; use the CLI",
                          violations=["method: llm requires a client config"])
        body = await _read_json(request)
        if not isinstance(body, dict):
            return _error(400, "request body must be a bundle JSON object",
                          violations=["body: not a JSON object"])
        bundle = domain.bundle_from_dict(body)
        violations = domain.validate_bundle(bundle, check_citations=False)
        if violations:
            return _error(400, "invalid bundle", violations=violations)
        embedder = make_provider({"kind": "test"}) if method == "bertscore" else None
        context = ScoringContext(bundle.documents,
                                 hybrid_config=HybridConfig(keyword_weight=keyword_weight),
                                 embedder=embedder)
        try:
            result = corrector.correct(bundle, method, context=context)
        except corrector.BundleValidationError as exc:
            return _error(400, "invalid bundle", violations=exc.violations)
        except (ScoringError, EmbeddingError) as exc:
            return _error(502, f"provider failure: {exc}")
        return Response(content=domain.correction_to_json_bytes(result),
                        media_type="application/json")

    @app.post("/v1/sessions")
    async def create_session(request: Request) -> Response:
        body = await _read_json(request)
        if not isinstance(body, dict) or "bundle" not in body:
            return _error(400, "body must contain a bundle",
                          violations=["bundle: missing"])
        bundle = domain.bundle_from_dict(body["bundle"])
        violations = domain.validate_bundle(bundle, check_citations=False)
        if violations:
            return _error(400, "invalid bundle", violations=violations)
        if "correction" in body:
            correction = domain.correction_from_dict(body["correction"])
        else:
            correction = corrector.correct(bundle, body.get("method", "keyword"))
        session = _new_session(bundle, correction)
        store.create(session)
        return JSONResponse({"id": session["id"], "version": session["version"]},
                            status_code=201)

    @app.get("/v1/sessions/{session_id}")
    async def get_session(session_id: str) -> Response:
        session = store.get(session_id)
        if session is None:
            return _error(404, f"unknown session {session_id}")
        return JSONResponse(session)

    @app.put("/v1/sessions/{session_id}/annotations")
    async def put_annotations(session_id: str, request: Request) -> Response:
        session = store.get(session_id)
        if session is None:
            return _error(404, f"unknown session {session_id}")
        body = await _read_json(request)
        if not isinstance(body, dict) or not isinstance(body.get("version"), int):
            return _error(400, "body must carry the integer session version",
                          violations=["version: missing or not an integer"])
        violations = _fragment_violations(session, body)
        if violations:
            return _error(400, "invalid annotation fragment", violations=violations)
        updated, ok = store.update(session_id, body["version"],
                                   lambda target: _merge_fragment(target, body))
        if updated is None:
            return _error(404, f"unknown session {session_id}")
        if not ok:
            return _error(409, "version conflict", current_version=updated["version"])
        return JSONResponse({"version": updated["version"]})

    @app.get("/v1/sessions/{session_id}/report")
    async def session_report(session_id: str) -> Response:
        session = store.get(session_id)
        if session is None:
            return _error(404, f"unknown session {session_id}")
        report = evaluation.mqla([session_to_audit_record(session)])
        return Response(content=evaluation.report_to_json_bytes(report),
                        media_type="application/json")

    @app.get("/v1/export")
    async def export_records() -> Response:
        lines = [
            json.dumps(evaluation.record_to_dict(session_to_audit_record(session)),
                       ensure_ascii=False)
            for session in store.all_sessions()
        ]
        return PlainTextResponse("\n".join(lines) + ("\n" if lines else ""),
                                 media_type="application/x-ndjson")

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app

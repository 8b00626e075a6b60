"""Post-processing toolkit that detects and corrects citation errors in
RAG-generated answers, plus the audit metrics and training-data prep that
go with it."""

from .domain import (
    Citation,
    CorrectionResult,
    FactualPoint,
    Query,
    RagBundle,
    RetrievedDocument,
    ScoreMatrix,
    bundle_from_dict,
    bundle_from_json,
    bundle_to_dict,
    bundle_to_json,
    validate_bundle,
)
from .segmenter import DEFAULT_SYNTAX, MarkerSyntax, StreamingSegmenter, segment
from .tokenizer import TokenizerConfig, tokenize
from .scoring import (
    HybridConfig,
    ScoringContext,
    score_bertscore,
    score_hybrid,
    score_keyword,
    score_matrix,
)
from .corrector import StreamingCorrector, correct, correct_stream, select_citations
from .evaluation import AuditRecord, MqlaReport, MqlaThresholds, mqla

__version__ = "0.1.0"

__all__ = [
    "AuditRecord",
    "Citation",
    "CorrectionResult",
    "DEFAULT_SYNTAX",
    "FactualPoint",
    "HybridConfig",
    "MarkerSyntax",
    "MqlaReport",
    "MqlaThresholds",
    "Query",
    "RagBundle",
    "RetrievedDocument",
    "ScoreMatrix",
    "ScoringContext",
    "StreamingCorrector",
    "StreamingSegmenter",
    "TokenizerConfig",
    "bundle_from_dict",
    "bundle_from_json",
    "bundle_to_dict",
    "bundle_to_json",
    "correct",
    "correct_stream",
    "mqla",
    "score_bertscore",
    "score_hybrid",
    "score_keyword",
    "score_matrix",
    "segment",
    "select_citations",
    "tokenize",
    "validate_bundle",
]

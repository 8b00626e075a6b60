"""Deterministic word tokenization feeding the lexical scorers.

Text is NFC-normalized before segmentation so composed and decomposed
forms of the same string tokenize identically on every platform. With the
defaults (lowercase, punctuation stripped, small English stopword list,
set semantics) "Yield of the wheat crop." becomes {yield, wheat, crop}.
"""

from __future__ import annotations

import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

TokenCollection = frozenset[str] | Counter

_WORD_RE = re.compile(r"\w+")
_STOPWORDS_RESOURCE = "stopwords_en_v1.txt"


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Load a stopword list, one token per line; blank lines ignored.

    Without a path, loads the versioned list shipped with the package.
    """
    if path is None:
        text = resources.files("recite.resources").joinpath(_STOPWORDS_RESOURCE).read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


DEFAULT_STOPWORDS = load_stopwords()


@dataclass(frozen=True)
class TokenizerConfig:
    lowercase: bool = True
    strip_punctuation: bool = True
    stopwords: frozenset[str] = field(default_factory=lambda: DEFAULT_STOPWORDS)
    multiset: bool = False


DEFAULT_CONFIG = TokenizerConfig()


def tokenize(text: str, config: TokenizerConfig = DEFAULT_CONFIG) -> TokenCollection:
    """Tokenize text per config; returns a frozenset, or Counter in multiset mode."""
    normalized = unicodedata.normalize("NFC", text)
    if config.lowercase:
        normalized = normalized.lower()
    if config.strip_punctuation:
        words = _WORD_RE.findall(normalized)
    else:
        words = normalized.split()
    kept = [w for w in words if w not in config.stopwords]
    if config.multiset:
        return Counter(kept)
    return frozenset(kept)

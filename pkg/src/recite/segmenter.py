"""Splits an answer into factual points delimited by citation markers.

A marker is an open delimiter, one or more comma-separated integers with
optional internal whitespace, and a close delimiter ("[2]", "[1, 3]").
Bracketed text that is not a plain number list ("[sic]") is never a marker.
Markers separated only by whitespace ("[1][2]", "[1] [2]") merge into one
citation set attributing the same span.

A point's span runs from the end of the previous point through its marker
run plus any directly trailing sentence punctuation and whitespace, so
"A is tall [1]. B bowls fast [2,3]." yields exactly two points whose texts
are "A is tall ." and "B bowls fast .". Spans tile the answer: joining the
span slices of all points reproduces the input byte for byte.

The streaming segmenter emits a point as soon as enough input has arrived
to prove its span can no longer change (a marker split across chunks never
produces a spurious point), and matches batch output exactly.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Iterable, Iterator

from .domain import Citation, FactualPoint

logger = logging.getLogger(__name__)

_TAIL_PUNCT = ".,;:!?" + "。．，、；：！？"  # ASCII + full-width sentence tails
_INNER_RE = re.compile(r"\s*\d+(?:\s*,\s*\d+)*\s*")
_NUMBER_RE = re.compile(r"\d+")


@dataclass(frozen=True)
class MarkerSyntax:
    """Configurable marker delimiters; content grammar is fixed.

    Deployments using "【n】" or "(n)" markers swap the delimiters; the
    number list between them is always 1-based comma-separated integers.
    """

    open: str = "["
    close: str = "]"

    def __post_init__(self) -> None:
        if not self.open or not self.close:
            raise ValueError("marker delimiters must be non-empty")
        if self.open[0].isspace() or self.open[0] in _TAIL_PUNCT:
            raise ValueError("marker open delimiter collides with sentence-tail characters")

    def render(self, doc_indices: Iterable[int]) -> str:
        """Render 0-based indices as 1-based marker text, ascending."""
        return self.open + ",".join(str(i + 1) for i in sorted(doc_indices)) + self.close


DEFAULT_SYNTAX = MarkerSyntax()


def _content_could_extend(rest: str, close: str) -> bool:
    # True when `rest` (bracket content reaching the buffer end) could still
    # grow into a valid marker body + close delimiter.
    for pos, ch in enumerate(rest):
        if ch.isdigit() or ch == "," or ch.isspace():
            continue
        return close.startswith(rest[pos:])
    return True


def _find_markers(
    text: str, syntax: MarkerSyntax, final: bool
) -> tuple[list[tuple[int, int, list[int]]], int | None]:
    """Locate complete markers as (start, end, numbers) triples.

    The second return value is the offset of a trailing bracket that could
    still become a marker with more input; None when the text is final or
    no such bracket exists.
    """
    markers: list[tuple[int, int, list[int]]] = []
    op, cl = syntax.open, syntax.close
    n = len(text)
    i = 0
    while i < n:
        j = text.find(op, i)
        if j < 0:
            return markers, None
        k = j + len(op)
        while True:
            if k >= n:
                if not final and _content_could_extend(text[j + len(op):], cl):
                    return markers, j
                i = j + len(op)  # unterminated bracket is prose
                break
            if text.startswith(cl, k):
                inner = text[j + len(op): k]
                if _INNER_RE.fullmatch(inner):
                    numbers = [int(x) for x in _NUMBER_RE.findall(inner)]
                    markers.append((j, k + len(cl), numbers))
                    i = k + len(cl)
                else:
                    i = j + len(op)
                break
            ch = text[k]
            if ch.isdigit() or ch == "," or ch.isspace():
                k += 1
                continue
            if not final and k + len(cl) > n and cl.startswith(text[k:]):
                return markers, j  # partial multi-char close at the edge
            i = j + len(op)  # invalid content: prose
            break
    return markers, None


@dataclass(frozen=True)
class _Segment:
    span_start: int
    span_end: int
    marker_spans: tuple[tuple[int, int], ...]
    numbers: tuple[int, ...]


def _scan(text: str, syntax: MarkerSyntax, final: bool) -> tuple[list[_Segment], int]:
    """Parse text into point geometries.

    Returns (segments, stable_end). In non-final mode only segments whose
    span can no longer change are returned, and stable_end is the offset up
    to which the parse is settled (prose before it is safe to pass through).
    """
    markers, pending = _find_markers(text, syntax, final)
    n = len(text)
    stable = n if pending is None else pending
    segments: list[_Segment] = []
    start = 0
    idx = 0
    while idx < len(markers):
        run = [markers[idx]]
        idx += 1
        while idx < len(markers):
            gap = text[run[-1][1]: markers[idx][0]]
            if gap == "" or gap.isspace():
                run.append(markers[idx])
                idx += 1
            else:
                break
        run_start = run[0][0]
        run_end = run[-1][1]
        t = run_end
        while t < n and (text[t].isspace() or text[t] in _TAIL_PUNCT):
            t += 1
        if not final:
            if t >= n:
                # Tail may keep growing, or a marker arriving later could
                # merge into this run.
                stable = min(stable, run_start)
                break
            if pending is not None and t == pending:
                gap = text[run_end:pending]
                if gap == "" or gap.isspace():
                    stable = min(stable, run_start)
                    break
        segments.append(
            _Segment(
                span_start=start,
                span_end=t,
                marker_spans=tuple((m[0], m[1]) for m in run),
                numbers=tuple(num for m in run for num in m[2]),
            )
        )
        start = t
    if final and start < n:
        segments.append(_Segment(span_start=start, span_end=n, marker_spans=(), numbers=()))
    return segments, stable


def _build_point(ordinal: int, text: str, seg: _Segment, base: int = 0) -> FactualPoint:
    pieces = []
    prev = seg.span_start
    for ms, me in seg.marker_spans:
        pieces.append(text[prev:ms])
        prev = me
    pieces.append(text[prev: seg.span_end])
    seen: set[int] = set()
    citations = []
    for number in seg.numbers:
        doc_index = number - 1
        if doc_index not in seen:
            seen.add(doc_index)
            citations.append(Citation(doc_index))
    return FactualPoint(
        ordinal=ordinal,
        text="".join(pieces).strip(),
        span=(seg.span_start + base, seg.span_end + base),
        citations=tuple(citations),
        marker_spans=tuple((s + base, e + base) for s, e in seg.marker_spans),
    )


def _warn_out_of_range(point: FactualPoint, doc_count: int) -> None:
    bad = [c.doc_index + 1 for c in point.citations if not 0 <= c.doc_index < doc_count]
    if bad:
        logger.warning(
            "point %d cites marker number(s) %s outside 1..%d; kept for correction",
            point.ordinal, bad, doc_count,
        )


def find_marker_numbers(text: str, syntax: MarkerSyntax = DEFAULT_SYNTAX) -> list[int]:
    """All 1-based citation numbers appearing in marker text, in order."""
    markers, _ = _find_markers(text, syntax, final=True)
    return [num for _, _, numbers in markers for num in numbers]


def segment(answer: str, doc_count: int, syntax: MarkerSyntax = DEFAULT_SYNTAX) -> list[FactualPoint]:
    """Split an answer into factual points; see the module docstring.

    Marker numbers outside 1..doc_count are kept (converted 0-based) and
    logged; correction overwrites them anyway. Requires doc_count >= 1.
    """
    if doc_count < 1:
        raise ValueError("doc_count must be >= 1")
    segments, _ = _scan(answer, syntax, final=True)
    points = [_build_point(i, answer, seg) for i, seg in enumerate(segments)]
    for point in points:
        _warn_out_of_range(point, doc_count)
    return points


class StreamingSegmenter:
    """Single-owner incremental segmenter over a chunked answer stream.

    feed() returns the points completed by that chunk; flush() returns any
    trailing point once the stream ends. The concatenation of all emitted
    points equals what batch segment() produces on the joined input.
    """

    def __init__(self, doc_count: int, syntax: MarkerSyntax = DEFAULT_SYNTAX) -> None:
        if doc_count < 1:
            raise ValueError("doc_count must be >= 1")
        self._doc_count = doc_count
        self._syntax = syntax
        self._buf = ""
        self._base = 0  # absolute offset of _buf[0] in the full answer
        self._ordinal = 0
        self._stable = 0  # absolute offset of settled parse
        self._finished = False

    @property
    def stable_boundary(self) -> int:
        """Absolute offset up to which the parse can no longer change."""
        return self._stable

    def feed(self, chunk: str) -> list[FactualPoint]:
        if self._finished:
            raise RuntimeError("segmenter already flushed")
        self._buf += chunk
        segments, stable = _scan(self._buf, self._syntax, final=False)
        self._stable = self._base + stable
        out = []
        consumed = 0
        for seg in segments:
            point = _build_point(self._ordinal, self._buf, seg, base=self._base)
            _warn_out_of_range(point, self._doc_count)
            out.append(point)
            self._ordinal += 1
            consumed = seg.span_end
        if consumed:
            self._buf = self._buf[consumed:]
            self._base += consumed
        return out

    def flush(self) -> list[FactualPoint]:
        if self._finished:
            return []
        self._finished = True
        segments, _ = _scan(self._buf, self._syntax, final=True)
        out = []
        for seg in segments:
            point = _build_point(self._ordinal, self._buf, seg, base=self._base)
            _warn_out_of_range(point, self._doc_count)
            out.append(point)
            self._ordinal += 1
        self._stable = self._base + len(self._buf)
        self._buf = ""
        return out


def segment_stream(
    chunks: Iterable[str], doc_count: int, syntax: MarkerSyntax = DEFAULT_SYNTAX
) -> Iterator[FactualPoint]:
    """Generator form of StreamingSegmenter for convenience."""
    session = StreamingSegmenter(doc_count, syntax)
    for chunk in chunks:
        yield from session.feed(chunk)
    yield from session.flush()

"""Corpus loading, Atom-feed fetching, tokenization, and chunking.

Documents arrive as JSONL (one object per line, keys ``id``/``title``/
``text``, optional ``source``) or from an Atom 1.0 feed. The chunker
implements the fixed-window baseline: ``chunk_size`` tokens per window,
stride ``chunk_size - floor(overlap_ratio * chunk_size)``.
"""

from __future__ import annotations

import json
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

from metarag.exceptions import (
    DuplicateId,
    FeedParseError,
    InvalidChunkParams,
    MalformedLine,
    MissingFile,
    NetworkError,
)

_ATOM_NS = "{http://www.w3.org/2005/Atom}"


@dataclass(frozen=True)
class Document:
    """One corpus unit; ``token_count`` is computed, never read from input."""

    doc_id: str
    title: str
    body: str
    source: str = ""
    token_count: int = field(default=0, compare=False)

    @staticmethod
    def make(doc_id: str, title: str, body: str, source: str = "") -> "Document":
        return Document(doc_id=doc_id, title=title, body=body, source=source,
                        token_count=count_tokens(body))


@dataclass(frozen=True)
class Chunk:
    doc_id: str
    index: int
    start_token: int
    end_token: int
    text: str


def count_tokens(text: str) -> int:
    """Number of maximal runs of non-whitespace characters."""
    return len(text.split())


def load_corpus(path) -> list[Document]:
    """Read a JSONL corpus file into Documents, in file order.

    Raises :class:`MissingFile`, :class:`MalformedLine` (with the
    offending line quoted), or :class:`DuplicateId`.
    """
    path = Path(path)
    if not path.exists():
        raise MissingFile(path)
    docs: list[Document] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLine(line_no, line.rstrip("\n"), str(exc)) from exc
            if not isinstance(obj, dict) or "id" not in obj or "title" not in obj \
                    or "text" not in obj:
                raise MalformedLine(line_no, line.rstrip("\n"),
                                    "expected keys id, title, text")
            doc_id = str(obj["id"])
            if not doc_id:
                raise MalformedLine(line_no, line.rstrip("\n"), "empty id")
            if doc_id in seen:
                raise DuplicateId(doc_id)
            seen.add(doc_id)
            docs.append(Document.make(doc_id, str(obj["title"]),
                                      str(obj["text"]),
                                      str(obj.get("source", ""))))
    return docs


def save_corpus(docs: list[Document], path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps({"id": doc.doc_id, "title": doc.title,
                                 "text": doc.body, "source": doc.source},
                                ensure_ascii=False) + "\n")


def fetch_remote(query: str, max_results: int, endpoint: str,
                 http_get=None) -> list[Document]:
    """Fetch documents from an Atom feed endpoint.

    Entries map id -> doc_id, title -> title, summary -> body; duplicate
    entry ids keep the first occurrence.
    """
    if max_results < 1:
        raise ValueError("max_results must be >= 1")
    http_get = http_get or _requests_get
    url = (f"{endpoint}?search_query={_urlquote(query)}"
           f"&start=0&max_results={max_results}")
    status, body = http_get(url)
    if status != 200:
        raise NetworkError(status)
    return parse_atom_feed(body)


def parse_atom_feed(xml_text: str) -> list[Document]:
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise FeedParseError(exc.position, str(exc)) from exc
    docs: list[Document] = []
    seen: set[str] = set()
    for entry in root.iter(f"{_ATOM_NS}entry"):
        doc_id = _text(entry, "id")
        if not doc_id or doc_id in seen:
            continue
        seen.add(doc_id)
        docs.append(Document.make(doc_id, _text(entry, "title"),
                                  _text(entry, "summary"), source=doc_id))
    return docs


def _text(entry, tag: str) -> str:
    node = entry.find(f"{_ATOM_NS}{tag}")
    return (node.text or "").strip() if node is not None else ""


def _urlquote(s: str) -> str:
    from urllib.parse import quote

    return quote(s, safe="")


def _requests_get(url: str):
    import requests

    resp = requests.get(url, timeout=60)
    return resp.status_code, resp.text


def chunk_spans(n_tokens: int, chunk_size: int = 256,
                overlap_ratio: float = 0.10) -> list[tuple[int, int]]:
    """Token-offset windows for a document of ``n_tokens`` tokens.

    Windows start at multiples of ``stride = chunk_size - overlap`` and
    generation stops at the first window reaching the document end, so
    only the final window may be shorter than ``chunk_size``.
    """
    if chunk_size < 2:
        raise InvalidChunkParams(f"chunk_size must be >= 2, got {chunk_size}")
    if not 0 <= overlap_ratio < 1:
        raise InvalidChunkParams(
            f"overlap_ratio must be in [0, 1), got {overlap_ratio}")
    if n_tokens == 0:
        return []
    overlap = math.floor(overlap_ratio * chunk_size)
    stride = chunk_size - overlap
    spans = []
    start = 0
    while True:
        end = start + chunk_size
        if end >= n_tokens:
            spans.append((start, n_tokens))
            return spans
        spans.append((start, end))
        start += stride


def chunk_document(doc: Document, chunk_size: int = 256,
                   overlap_ratio: float = 0.10) -> list[Chunk]:
    """Split ``doc`` into overlapping fixed-size token windows.

    Chunk text is the whitespace-normalized token slice; an empty
    document yields an empty list.
    """
    tokens = doc.body.split()
    spans = chunk_spans(len(tokens), chunk_size, overlap_ratio)
    return [Chunk(doc_id=doc.doc_id, index=i, start_token=start,
                  end_token=end, text=" ".join(tokens[start:end]))
            for i, (start, end) in enumerate(spans)]

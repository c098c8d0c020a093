"""Document enrichment: metadata flags/lists plus synthetic QA pairs.

The enrichment prompt asks for a strictly formatted response: six
numbered Yes/No lines, six numbered single-quoted list lines, then a
``Questions:`` block and an ``Answers:`` block with matching numbering.
The parser here is a tolerant reader: it survives stray prose between
sections and over-long lists (truncated with a warning), but structural
defects are hard errors.
"""

from __future__ import annotations

import json
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from metarag import prompts
from metarag.corpus import Document
from metarag.exceptions import (
    BadBoolean,
    BadList,
    CountMismatch,
    EmptyDocument,
    EmptyQuestions,
    EnrichmentParseError,
    MissingSection,
)
from metarag.gateway import CompletionRequest, parallel_map

logger = logging.getLogger(__name__)

FLAG_NAMES = ("categorizable", "applied", "has_github", "has_math",
              "industry_application", "has_benchmarks")
LIST_FIELDS = (("research_fields", 3), ("application_fields", 3),
               ("github_urls", 2), ("theorems", 3), ("companies", 3),
               ("metrics", 5))


@dataclass(frozen=True)
class DocMetadata:
    """Six Yes/No flags and their associated capped lists."""

    categorizable: bool = False
    applied: bool = False
    has_github: bool = False
    has_math: bool = False
    industry_application: bool = False
    has_benchmarks: bool = False
    research_fields: tuple[str, ...] = ()
    application_fields: tuple[str, ...] = ()
    github_urls: tuple[str, ...] = ()
    theorems: tuple[str, ...] = ()
    companies: tuple[str, ...] = ()
    metrics: tuple[str, ...] = ()

    @property
    def flags(self) -> tuple[bool, ...]:
        return tuple(getattr(self, name) for name in FLAG_NAMES)

    def lists(self) -> dict[str, tuple[str, ...]]:
        return {name: getattr(self, name) for name, _cap in LIST_FIELDS}

    def to_json(self) -> dict:
        out: dict = {name: flag for name, flag in zip(FLAG_NAMES, self.flags)}
        out.update({name: list(values) for name, values in self.lists().items()})
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "DocMetadata":
        kwargs: dict = {name: bool(obj.get(name, False)) for name in FLAG_NAMES}
        kwargs.update({name: tuple(obj.get(name, ())) for name, _ in LIST_FIELDS})
        return cls(**kwargs)


@dataclass(frozen=True)
class QaPair:
    question: str
    answer: str


@dataclass(frozen=True)
class EnrichedDocument:
    document: Document
    metadata: DocMetadata
    qas: tuple[QaPair, ...]


# --- response parsing -------------------------------------------------------

_NUMBERED_RE = re.compile(r"^\s*(\d+)\.\s*(.*)$")
_BOOL_RE = re.compile(r"^(yes|no)\b\.?\s*$", re.IGNORECASE)
_SECTION_RE = {
    "Questions": re.compile(r"^\s*questions\s*:\s*$", re.IGNORECASE),
    "Answers": re.compile(r"^\s*answers\s*:\s*$", re.IGNORECASE),
}


def parse_quoted_list(text: str) -> list[str]:
    """Parse ``['a', 'b']``-style literals: single quotes, backslash escapes.

    Raises :class:`BadList` on anything that does not fit the grammar.
    """
    s = text.strip()
    i = 0
    n = len(s)

    def skip_ws(j: int) -> int:
        while j < n and s[j].isspace():
            j += 1
        return j

    i = skip_ws(i)
    if i >= n or s[i] != "[":
        raise BadList(text, "expected '['")
    i = skip_ws(i + 1)
    items: list[str] = []
    if i < n and s[i] == "]":
        if s[i + 1:].strip():
            raise BadList(text, "trailing content after ']'")
        return items
    while True:
        if i >= n or s[i] != "'":
            raise BadList(text, "expected opening quote")
        i += 1
        buf: list[str] = []
        while i < n and s[i] != "'":
            if s[i] == "\\" and i + 1 < n:
                buf.append(s[i + 1])
                i += 2
            else:
                buf.append(s[i])
                i += 1
        if i >= n:
            raise BadList(text, "unterminated string")
        items.append("".join(buf))
        i = skip_ws(i + 1)
        if i < n and s[i] == ",":
            i = skip_ws(i + 1)
            continue
        if i < n and s[i] == "]":
            if s[i + 1:].strip():
                raise BadList(text, "trailing content after ']'")
            return items
        raise BadList(text, "expected ',' or ']'")


def _collect_numbered(lines: list[str]) -> list[str]:
    """Numbered items with continuation lines appended; blanks separate."""
    items: list[str] = []
    open_item = False
    for line in lines:
        match = _NUMBERED_RE.match(line)
        if match:
            items.append(match.group(2).strip())
            open_item = True
        elif line.strip() and open_item:
            items[-1] = f"{items[-1]} {line.strip()}"
        else:
            open_item = False
    return items


def parse_enrichment_response(text: str) -> tuple[DocMetadata, list[QaPair]]:
    """Parse the strict enrichment response format.

    Returns the metadata and the question/answer pairs, pairing question
    i with answer i. List caps are enforced by truncation with a logged
    warning; a flag of No wins over a non-empty list (list dropped).
    """
    lines = text.splitlines()

    q_at = _find_section(lines, "Questions", start=0)
    if q_at is None:
        raise MissingSection("Questions")
    a_at = _find_section(lines, "Answers", start=q_at + 1)
    if a_at is None:
        raise MissingSection("Answers")

    head = [ln for ln in lines[:q_at] if ln.strip()]
    if len(head) < 6:
        raise MissingSection("metadata flags")
    flags: list[bool] = []
    for line in head[:6]:
        match = _NUMBERED_RE.match(line)
        if not match or not _BOOL_RE.match(match.group(2)):
            raise BadBoolean(line)
        flags.append(match.group(2).strip().rstrip(".").lower() == "yes")
    if len(head) < 12:
        raise MissingSection("metadata lists")
    lists: list[list[str]] = []
    for line in head[6:12]:
        match = _NUMBERED_RE.match(line)
        if not match:
            raise BadList(line, "expected 'N. [...]'")
        lists.append(parse_quoted_list(match.group(2)))

    kwargs: dict = dict(zip(FLAG_NAMES, flags))
    for flag_name, (field_name, cap), values in zip(FLAG_NAMES, LIST_FIELDS, lists):
        if values and not kwargs[flag_name]:
            logger.warning("flag %s is No but %s is non-empty; dropping list",
                           flag_name, field_name)
            values = []
        if len(values) > cap:
            logger.warning("%s has %d entries, cap is %d; truncating",
                           field_name, len(values), cap)
            values = values[:cap]
        kwargs[field_name] = tuple(values)
    metadata = DocMetadata(**kwargs)

    questions = _collect_numbered(lines[q_at + 1:a_at])
    answers = _collect_numbered(lines[a_at + 1:])
    if not questions:
        raise EmptyQuestions()
    if len(questions) != len(answers):
        raise CountMismatch(len(questions), len(answers))
    qas = []
    for question, answer in zip(questions, answers):
        if "the text" in question.lower():
            logger.warning("question references 'the text': %r", question)
        qas.append(QaPair(question=question, answer=answer))
    return metadata, qas


def _find_section(lines: list[str], name: str, start: int) -> int | None:
    pattern = _SECTION_RE[name]
    for i in range(start, len(lines)):
        if pattern.match(lines[i]):
            return i
    return None


# --- enrichment calls -------------------------------------------------------

_RETRY_CODA = (
    "\nYour previous answer did not follow the required format. Please answer "
    "again, strictly following the format above: six numbered Yes/No lines, "
    "six numbered python lists, then the Questions and Answers blocks with "
    "matching numbering.\n"
)

ENRICHMENT_RETRY_TEMPLATE_ID = "enrichment_retry"

prompts.register_template(prompts.PromptTemplate(
    ENRICHMENT_RETRY_TEMPLATE_ID,
    prompts.get_template(prompts.ENRICHMENT_TEMPLATE_ID).text + _RETRY_CODA))


def enrich_document(doc: Document, categories: list[str], provider,
                    document_types: str = "research papers",
                    users_types: str = "scientists",
                    seed: int = 0) -> EnrichedDocument:
    """Enrich one document into metadata plus QA pairs.

    On a parse failure the prompt is retried once with a corrective coda;
    a second failure raises :class:`EnrichmentParseError`.
    """
    if not doc.body.strip():
        raise EmptyDocument(doc.doc_id)
    if not categories:
        raise ValueError("categories must be non-empty")
    bindings = {
        "document_types": document_types,
        "users_types": users_types,
        "text_categories": ", ".join(categories),
        "doc_title": doc.title,
        "doc_content": doc.body,
    }
    response = provider.complete(CompletionRequest(
        template_id=prompts.ENRICHMENT_TEMPLATE_ID, bindings=bindings,
        max_output_tokens=4096, temperature=0.0, seed=seed))
    try:
        metadata, qas = parse_enrichment_response(response.text)
    except EnrichmentParseError as first_error:
        logger.warning("enrichment parse failed for %s (%s); reprompting",
                       doc.doc_id, first_error)
        retry = provider.complete(CompletionRequest(
            template_id=ENRICHMENT_RETRY_TEMPLATE_ID, bindings=bindings,
            max_output_tokens=4096, temperature=0.0, seed=seed))
        metadata, qas = parse_enrichment_response(retry.text)
    return EnrichedDocument(document=doc, metadata=metadata, qas=tuple(qas))


@dataclass
class EnrichmentStats:
    documents: int = 0
    qa_pairs: int = 0
    question_histogram: Counter = field(default_factory=Counter)

    def to_json(self) -> dict:
        return {
            "documents": self.documents,
            "qa_pairs": self.qa_pairs,
            "question_histogram": {str(k): v for k, v in
                                   sorted(self.question_histogram.items())},
        }


def enrich_corpus(docs: list[Document], categories: list[str], provider,
                  document_types: str = "research papers",
                  users_types: str = "scientists",
                  seed: int = 0) -> tuple[list[EnrichedDocument], EnrichmentStats]:
    """Enrich documents with a bounded worker pool.

    Results are returned in doc_id order regardless of completion order.
    """
    def work(doc: Document) -> EnrichedDocument:
        return enrich_document(doc, categories, provider,
                               document_types=document_types,
                               users_types=users_types, seed=seed)

    enriched = parallel_map(work, docs, getattr(provider, "max_in_flight", 4))
    enriched.sort(key=lambda e: e.document.doc_id)
    stats = EnrichmentStats(documents=len(enriched))
    for item in enriched:
        stats.qa_pairs += len(item.qas)
        stats.question_histogram[len(item.qas)] += 1
    return enriched, stats


# --- enriched store ----------------------------------------------------------

def save_enriched(enriched: list[EnrichedDocument], path) -> None:
    """Write the enriched store: one JSON object per document.

    Document bodies are not persisted; downstream stages only need the
    id, title, metadata, and QA pairs.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for item in enriched:
            fh.write(json.dumps({
                "doc_id": item.document.doc_id,
                "title": item.document.title,
                "metadata": item.metadata.to_json(),
                "qas": [{"question": qa.question, "answer": qa.answer}
                        for qa in item.qas],
            }, ensure_ascii=False) + "\n")


def load_enriched(path) -> list[EnrichedDocument]:
    path = Path(path)
    out: list[EnrichedDocument] = []
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            doc = Document(doc_id=obj["doc_id"], title=obj.get("title", ""),
                           body="", source="", token_count=0)
            out.append(EnrichedDocument(
                document=doc,
                metadata=DocMetadata.from_json(obj.get("metadata", {})),
                qas=tuple(QaPair(q["question"], q["answer"])
                          for q in obj.get("qas", ()))))
    return out

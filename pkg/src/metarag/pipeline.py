"""The inference path: augment, retrieve in parallel, assemble, answer.

Also hosts the four benchmark configurations:

* ``chunk_naive`` — raw query against the chunk index
* ``chunk_aug``   — plain augmentation, then chunk search
* ``qa_aug``      — plain augmentation, then filtered QA search
* ``qa_mk``       — summary-conditioned augmentation, then filtered QA search

Chunk indexes carry no metadata tags, so the chunk configurations ignore
the query filter; their hits carry the chunk text in the answer slot and
an empty question.
"""

from __future__ import annotations

import json
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from metarag import prompts
from metarag.corpus import Document, chunk_document
from metarag.embedding import embed_batch
from metarag.exceptions import EmptyQuery, MissingResource, NoQuestionsFound
from metarag.gateway import CompletionRequest
from metarag.mk_summary import MkStore, MkSummary
from metarag.qa_index import (
    EMPTY_FILTER,
    MetadataFilter,
    QaIndex,
    QaRecord,
    SearchHit,
    build_index,
)

CONFIG_IDS = ("chunk_naive", "chunk_aug", "qa_aug", "qa_mk")

MAX_SUB_QUERIES = 5

_NUMBERED_RE = re.compile(r"^\s*\d+\.\s+(.*)$", re.MULTILINE)


@dataclass(frozen=True)
class QueryPlan:
    original_query: str
    filter: MetadataFilter
    mk_summary_used: bool
    sub_queries: tuple[str, ...]

    def to_json(self) -> dict:
        return {"original_query": self.original_query,
                "filter": self.filter.to_json(),
                "mk_summary_used": self.mk_summary_used,
                "sub_queries": list(self.sub_queries)}


@dataclass(frozen=True)
class AssembledContext:
    items: tuple[dict, ...]
    serialized: str


@dataclass(frozen=True)
class PipelineAnswer:
    plan: QueryPlan
    hits: tuple[SearchHit, ...]
    context: AssembledContext
    answer: str
    latency_ms: int

    def to_json(self) -> dict:
        return {"plan": self.plan.to_json(),
                "hits": [hit.to_json() for hit in self.hits],
                "context": {"items": list(self.context.items),
                            "serialized": self.context.serialized},
                "answer": self.answer,
                "latency_ms": self.latency_ms}


def parse_numbered_questions(text: str) -> list[str]:
    """Extract ``N. content`` lines, trimmed, in order; other lines ignored."""
    items = [m.strip() for m in _NUMBERED_RE.findall(text)]
    items = [item for item in items if item]
    if not items:
        raise NoQuestionsFound()
    return items


def augment_query(user_query: str, mk: MkSummary | None, provider,
                  seed: int = 0) -> QueryPlan:
    """Rewrite the query into up to five sub-queries.

    With ``mk`` absent the summary slot renders empty, which is the plain
    augmentation baseline.
    """
    if not user_query.strip():
        raise EmptyQuery()
    response = provider.complete(CompletionRequest(
        template_id=prompts.AUGMENTATION_TEMPLATE_ID,
        bindings={"mk_summary": mk.summary if mk else "",
                  "user_query": user_query},
        max_output_tokens=512, temperature=0.7, seed=seed))
    sub_queries = parse_numbered_questions(response.text)[:MAX_SUB_QUERIES]
    return QueryPlan(original_query=user_query,
                     filter=EMPTY_FILTER,
                     mk_summary_used=mk is not None,
                     sub_queries=tuple(sub_queries))


def retrieve_parallel(plan: QueryPlan, index: QaIndex, embedder,
                      k_per_query: int = 3) -> list[SearchHit]:
    """Search every sub-query, union hits by qa_id keeping the max score."""
    if k_per_query < 1:
        raise ValueError("k_per_query must be >= 1")
    queries = list(dict.fromkeys(plan.sub_queries))
    vectors = embed_batch(queries, embedder)

    def run(vector):
        return index.search(vector, plan.filter, k_per_query)

    if len(vectors) == 1:
        results = [run(vectors[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(vectors)) as pool:
            results = list(pool.map(run, vectors))

    best: dict[str, SearchHit] = {}
    for hits in results:
        for hit in hits:
            held = best.get(hit.qa_id)
            if held is None or hit.score > held.score:
                best[hit.qa_id] = hit
    return sorted(best.values(), key=lambda h: (-h.score, h.qa_id))


def assemble_context(hits: list[SearchHit], cap: int = 10) -> AssembledContext:
    """Top-``cap`` hits as ``{title, question, answer}`` objects plus JSON."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    items = []
    seen: set[str] = set()
    for hit in hits:
        if hit.qa_id in seen:
            continue
        seen.add(hit.qa_id)
        items.append({"title": hit.doc_title, "question": hit.question,
                      "answer": hit.answer})
        if len(items) == cap:
            break
    serialized = json.dumps(items, ensure_ascii=False, separators=(",", ":"))
    return AssembledContext(items=tuple(items), serialized=serialized)


def answer_query(user_query: str, plan: QueryPlan, context: AssembledContext,
                 provider, hits: tuple[SearchHit, ...] = (),
                 few_shot: str = "", seed: int = 0) -> PipelineAnswer:
    """Produce the final grounded answer.

    Deterministic providers report zero latency so identical runs emit
    identical output.
    """
    sub_queries = "\n".join(f"{i}. {q}"
                            for i, q in enumerate(plan.sub_queries, start=1))
    started = time.perf_counter()
    response = provider.complete(CompletionRequest(
        template_id=prompts.FINAL_ANSWER_TEMPLATE_ID,
        bindings={"user_query": user_query, "sub_queries": sub_queries,
                  "context_json": context.serialized, "few_shot": few_shot},
        max_output_tokens=2048, temperature=0.0, seed=seed))
    elapsed_ms = int((time.perf_counter() - started) * 1000)
    if getattr(provider, "deterministic", False):
        elapsed_ms = 0
    return PipelineAnswer(plan=plan, hits=tuple(hits), context=context,
                          answer=response.text, latency_ms=elapsed_ms)


@dataclass
class PipelineResources:
    """Everything a configuration needs at query time."""

    provider: object = None
    embedder: object = None
    qa_index: QaIndex | None = None
    chunk_index: QaIndex | None = None
    mk_store: MkStore | None = None
    k_per_query: int = 3
    context_cap: int = 10
    few_shot: str = ""


def build_chunk_index(docs: list[Document], embedder, chunk_size: int = 256,
                      overlap_ratio: float = 0.10) -> QaIndex:
    """Index fixed-window chunks with the same machinery as QA records.

    The chunk text doubles as the embedded key and the answer payload;
    tags stay empty (chunks carry no metadata).
    """
    records = []
    for doc in docs:
        for chunk in chunk_document(doc, chunk_size, overlap_ratio):
            records.append(QaRecord(
                qa_id=f"{chunk.doc_id}#c{chunk.index:04d}",
                doc_id=chunk.doc_id,
                doc_title=doc.title,
                question=chunk.text,
                answer=chunk.text,
                tags={}))
    return build_index(records, embedder)


def _require(resources: PipelineResources, name: str):
    value = getattr(resources, name)
    if value is None:
        raise MissingResource(name)
    return value


def run_configuration(config_id: str, user_query: str,
                      resources: PipelineResources,
                      flt: MetadataFilter = EMPTY_FILTER,
                      seed: int = 0) -> PipelineAnswer:
    """Run one of the four benchmark configurations end to end."""
    if config_id not in CONFIG_IDS:
        raise ValueError(f"unknown configuration {config_id!r}")
    if not user_query.strip():
        raise EmptyQuery()
    provider = _require(resources, "provider")
    embedder = _require(resources, "embedder")

    if config_id == "chunk_naive":
        plan = QueryPlan(original_query=user_query, filter=EMPTY_FILTER,
                         mk_summary_used=False, sub_queries=(user_query,))
    elif config_id == "chunk_aug":
        plan = augment_query(user_query, None, provider, seed=seed)
    elif config_id == "qa_aug":
        plan = augment_query(user_query, None, provider, seed=seed)
        plan = _with_filter(plan, flt)
    else:  # qa_mk
        store = _require(resources, "mk_store")
        mk = store.lookup(flt)
        plan = augment_query(user_query, mk, provider, seed=seed)
        plan = _with_filter(plan, flt)

    if config_id.startswith("chunk_"):
        index = _require(resources, "chunk_index")
    else:
        index = _require(resources, "qa_index")

    hits = retrieve_parallel(plan, index, embedder,
                             k_per_query=resources.k_per_query)
    if config_id.startswith("chunk_"):
        hits = [SearchHit(qa_id=h.qa_id, doc_title=h.doc_title, question="",
                          answer=h.answer, score=h.score) for h in hits]
    context = assemble_context(hits, cap=resources.context_cap)
    return answer_query(user_query, plan, context, provider,
                        hits=tuple(hits), few_shot=resources.few_shot,
                        seed=seed)


def _with_filter(plan: QueryPlan, flt: MetadataFilter) -> QueryPlan:
    return QueryPlan(original_query=plan.original_query, filter=flt,
                     mk_summary_used=plan.mk_summary_used,
                     sub_queries=plan.sub_queries)

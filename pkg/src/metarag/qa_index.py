"""The retrieval core: QA records, filtered top-k search, persistence, dedup.

Only questions are embedded; answers ride along as payload. Search is an
exact full scan (no approximate structure) so results are reproducible
and oracle-testable. Records are kept sorted by qa_id, which makes the
kernel's ascending-row tie-break equal to ascending-qa_id order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from metarag import _kernels
from metarag.embedding import embed_batch
from metarag.enrichment import EnrichedDocument
from metarag.exceptions import (
    CorruptIndex,
    DimensionHeaderMismatch,
    DimensionMismatch,
    DuplicateQaId,
)

_MAGIC = b"QAIX"
_VERSION = 1
_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True)
class QaRecord:
    """One synthetic question/answer, the unit of retrieval."""

    qa_id: str
    doc_id: str
    doc_title: str
    question: str
    answer: str
    tags: dict

    def to_json(self) -> dict:
        return {"qa_id": self.qa_id, "doc_id": self.doc_id,
                "doc_title": self.doc_title, "question": self.question,
                "answer": self.answer,
                "tags": {k: list(v) for k, v in self.tags.items()}}

    @classmethod
    def from_json(cls, obj: dict) -> "QaRecord":
        return cls(qa_id=obj["qa_id"], doc_id=obj["doc_id"],
                   doc_title=obj.get("doc_title", ""),
                   question=obj["question"], answer=obj["answer"],
                   tags={k: list(v) for k, v in obj.get("tags", {}).items()})


@dataclass(frozen=True)
class MetadataFilter:
    """Conjunction of (field, value) constraints over record tags."""

    constraints: tuple[tuple[str, str], ...] = ()

    @classmethod
    def of(cls, *pairs: tuple[str, str]) -> "MetadataFilter":
        return cls(constraints=tuple((str(f), str(v)) for f, v in pairs))

    @classmethod
    def from_string(cls, text: str) -> "MetadataFilter":
        """Parse ``field=value[,field=value...]``; empty string matches all."""
        pairs = []
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if "=" not in part:
                raise ValueError(f"expected field=value, got {part!r}")
            field, value = part.split("=", 1)
            pairs.append((field.strip(), value.strip()))
        return cls.of(*pairs)

    def matches(self, tags: dict) -> bool:
        return all(value in tags.get(field, ()) for field, value in
                   self.constraints)

    def canonical_key(self) -> str:
        return "|".join(sorted(f"{f}={v}" for f, v in self.constraints))

    def describe(self) -> str:
        return self.canonical_key() or "all documents"

    def to_json(self) -> list:
        return [[f, v] for f, v in self.constraints]

    @classmethod
    def from_json(cls, obj) -> "MetadataFilter":
        if isinstance(obj, dict):
            return cls.of(*sorted(obj.items()))
        return cls.of(*[(pair[0], pair[1]) for pair in obj])


EMPTY_FILTER = MetadataFilter()


@dataclass(frozen=True)
class SearchHit:
    qa_id: str
    doc_title: str
    question: str
    answer: str
    score: float

    def to_json(self) -> dict:
        return {"qa_id": self.qa_id, "doc_title": self.doc_title,
                "question": self.question, "answer": self.answer,
                "score": self.score}


class QaIndex:
    """Immutable vector index over QaRecords.

    ``vectors`` must be one L2-normalized row per record; rows are
    reordered together with records so that storage is in qa_id order.
    """

    def __init__(self, records: list[QaRecord], vectors: np.ndarray):
        vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        if vectors.ndim != 2 or vectors.shape[0] != len(records):
            raise ValueError("vectors must be a (len(records), dim) matrix")
        seen: set[str] = set()
        for record in records:
            if record.qa_id in seen:
                raise DuplicateQaId(record.qa_id)
            seen.add(record.qa_id)
        order = sorted(range(len(records)), key=lambda i: records[i].qa_id)
        self.records: list[QaRecord] = [records[i] for i in order]
        self.vectors: np.ndarray = np.ascontiguousarray(vectors[order])
        self.dim: int = int(vectors.shape[1])

    def __len__(self) -> int:
        return len(self.records)

    def search(self, query_vector: np.ndarray,
               flt: MetadataFilter = EMPTY_FILTER, k: int = 10) -> list[SearchHit]:
        if k < 1:
            raise ValueError("k must be >= 1")
        query = np.ascontiguousarray(query_vector, dtype=np.float32)
        if query.ndim != 1 or query.shape[0] != self.dim:
            raise DimensionMismatch(query.shape[-1] if query.ndim else 0,
                                    self.dim)
        mask = None
        if flt.constraints:
            mask = np.fromiter((1 if flt.matches(r.tags) else 0
                                for r in self.records),
                               dtype=np.uint8, count=len(self.records))
        idx, scores = _kernels.topk_inner_product(self.vectors, query, mask, k)
        return [SearchHit(qa_id=self.records[i].qa_id,
                          doc_title=self.records[i].doc_title,
                          question=self.records[i].question,
                          answer=self.records[i].answer,
                          score=float(s))
                for i, s in zip(idx, scores)]

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with (directory / "records.jsonl").open("w", encoding="utf-8") as fh:
            for record in self.records:
                fh.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")
        with (directory / "vectors.bin").open("wb") as fh:
            fh.write(_HEADER.pack(_MAGIC, _VERSION, len(self.records), self.dim))
            fh.write(np.ascontiguousarray(self.vectors, dtype="<f4").tobytes())

    @classmethod
    def load(cls, directory, expected_dim: int | None = None) -> "QaIndex":
        directory = Path(directory)
        records_path = directory / "records.jsonl"
        vectors_path = directory / "vectors.bin"
        if not records_path.exists() or not vectors_path.exists():
            raise CorruptIndex(f"missing index files in {directory}")
        records = []
        with records_path.open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    records.append(QaRecord.from_json(json.loads(line)))
        raw = vectors_path.read_bytes()
        if len(raw) < _HEADER.size:
            raise CorruptIndex("vectors file shorter than header")
        magic, version, count, dim = _HEADER.unpack_from(raw)
        if magic != _MAGIC:
            raise CorruptIndex(f"bad magic {magic!r}")
        if version != _VERSION:
            raise CorruptIndex(f"unsupported version {version}")
        if expected_dim is not None and dim != expected_dim:
            raise DimensionHeaderMismatch(dim, expected_dim)
        if count != len(records):
            raise CorruptIndex(f"header says {count} records, "
                               f"records.jsonl has {len(records)}")
        payload = raw[_HEADER.size:]
        if len(payload) != count * dim * 4:
            raise CorruptIndex("vectors file truncated")
        vectors = np.frombuffer(payload, dtype="<f4").reshape(count, dim)
        return cls(records, vectors.copy())


def build_index(records: list[QaRecord], embedder) -> QaIndex:
    """Embed every record's question and build the immutable index."""
    seen: set[str] = set()
    for record in records:
        if record.qa_id in seen:
            raise DuplicateQaId(record.qa_id)
        seen.add(record.qa_id)
    ordered = sorted(records, key=lambda r: r.qa_id)
    dim = getattr(embedder, "dim", 0)
    if not ordered:
        return QaIndex([], np.zeros((0, max(dim, 1)), dtype=np.float32))
    vectors = np.vstack(embed_batch([r.question for r in ordered], embedder))
    norms = np.linalg.norm(vectors.astype(np.float64), axis=1, keepdims=True)
    vectors = (vectors / norms).astype(np.float32)
    return QaIndex(ordered, vectors)


def search(index: QaIndex, query_vector: np.ndarray, flt: MetadataFilter,
           k: int) -> list[SearchHit]:
    return index.search(query_vector, flt, k)


def save_index(index: QaIndex, directory) -> None:
    index.save(directory)


def load_index(directory, expected_dim: int | None = None) -> QaIndex:
    return QaIndex.load(directory, expected_dim=expected_dim)


def dedup_questions(index: QaIndex, distance_threshold: float = 0.15
                    ) -> list[list[str]]:
    """Report near-duplicate question clusters; nothing is deleted.

    Average-linkage agglomerative clustering under cosine distance,
    cut where the minimum inter-cluster distance exceeds the threshold.
    Cluster members are in qa_id order, clusters ordered by first member.
    """
    if not 0 < distance_threshold < 2:
        raise ValueError("distance_threshold must be in (0, 2)")
    n = len(index)
    if n == 0:
        return []
    if n == 1:
        return [[index.records[0].qa_id]]
    from scipy.cluster.hierarchy import fcluster, linkage
    from scipy.spatial.distance import pdist

    condensed = pdist(index.vectors.astype(np.float64), metric="cosine")
    tree = linkage(condensed, method="average")
    labels = fcluster(tree, t=distance_threshold, criterion="distance")
    clusters: dict[int, list[str]] = {}
    for record, label in zip(index.records, labels):
        clusters.setdefault(int(label), []).append(record.qa_id)
    return sorted(clusters.values(), key=lambda member_ids: member_ids[0])


def records_from_enriched(enriched: list[EnrichedDocument]) -> list[QaRecord]:
    """QaRecords for every QA pair, tagged with the document's metadata lists.

    qa_id is ``doc_id#NNN`` with a zero-padded per-document ordinal so
    that lexicographic qa_id order matches generation order.
    """
    records = []
    for item in enriched:
        tags = {name: list(values) for name, values in
                item.metadata.lists().items() if values}
        for i, qa in enumerate(item.qas):
            records.append(QaRecord(
                qa_id=f"{item.document.doc_id}#{i:03d}",
                doc_id=item.document.doc_id,
                doc_title=item.document.title,
                question=qa.question,
                answer=qa.answer,
                tags=tags))
    return records

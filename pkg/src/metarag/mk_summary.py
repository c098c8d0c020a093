"""Meta Knowledge Summaries: one LLM summary per metadata filter.

A summary condenses every indexed question matching its filter (answers
never enter the prompt) and is looked up at query time to condition the
augmentation step.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from metarag import prompts
from metarag.exceptions import EmptyCluster
from metarag.gateway import CompletionRequest, parallel_map
from metarag.qa_index import MetadataFilter, QaIndex, QaRecord

# Deterministic default so identical runs write identical stores; pass
# now_iso() for wall-clock stamps.
DEFAULT_TIMESTAMP = "1970-01-01T00:00:00Z"

MAX_CLUSTER_QUESTIONS = 500


def now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class MkSummary:
    filter_key: str
    filter: MetadataFilter
    summary: str
    source_qa_ids: tuple[str, ...]
    created_at: str

    def to_json(self) -> dict:
        return {"filter_key": self.filter_key,
                "filter": self.filter.to_json(),
                "summary": self.summary,
                "source_qa_ids": list(self.source_qa_ids),
                "created_at": self.created_at}

    @classmethod
    def from_json(cls, obj: dict) -> "MkSummary":
        return cls(filter_key=obj["filter_key"],
                   filter=MetadataFilter.from_json(obj["filter"]),
                   summary=obj["summary"],
                   source_qa_ids=tuple(obj.get("source_qa_ids", ())),
                   created_at=obj.get("created_at", DEFAULT_TIMESTAMP))


def collect_cluster(index: QaIndex, flt: MetadataFilter) -> list[QaRecord]:
    """All records matching the filter, in qa_id order."""
    return [record for record in index.records if flt.matches(record.tags)]


def generate_mk_summary(cluster: list[QaRecord], flt: MetadataFilter, provider,
                        seed: int = 0,
                        created_at: str = DEFAULT_TIMESTAMP) -> MkSummary:
    """Summarize a question cluster with the summary prompt.

    Clusters beyond ``MAX_CLUSTER_QUESTIONS`` are downsampled
    deterministically (every ceil(n/500)-th record in qa_id order) to
    bound prompt size; ``source_qa_ids`` always lists the full cluster.
    """
    if not cluster:
        raise EmptyCluster()
    sampled = cluster
    if len(cluster) > MAX_CLUSTER_QUESTIONS:
        step = math.ceil(len(cluster) / MAX_CLUSTER_QUESTIONS)
        sampled = cluster[::step]
    questions = "\n".join(f"{i}. {record.question}"
                          for i, record in enumerate(sampled, start=1))
    response = provider.complete(CompletionRequest(
        template_id=prompts.MK_SUMMARY_TEMPLATE_ID,
        bindings={"field_values": flt.describe(), "questions": questions},
        max_output_tokens=1024, temperature=0.0, seed=seed))
    return MkSummary(filter_key=flt.canonical_key(), filter=flt,
                     summary=response.text,
                     source_qa_ids=tuple(r.qa_id for r in cluster),
                     created_at=created_at)


class MkStore:
    """Read-mostly store of summaries keyed by canonical filter key."""

    def __init__(self, summaries: list[MkSummary] | None = None):
        self._by_key: dict[str, MkSummary] = {}
        for summary in summaries or []:
            self.add(summary)

    def add(self, summary: MkSummary) -> None:
        self._by_key[summary.filter_key] = summary

    def lookup(self, flt: MetadataFilter) -> MkSummary | None:
        return self._by_key.get(flt.canonical_key())

    def __len__(self) -> int:
        return len(self._by_key)

    def summaries(self) -> list[MkSummary]:
        return [self._by_key[key] for key in sorted(self._by_key)]

    def save(self, path) -> None:
        path = Path(path)
        with path.open("w", encoding="utf-8") as fh:
            for summary in self.summaries():
                fh.write(json.dumps(summary.to_json(), ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, path) -> "MkStore":
        store = cls()
        with Path(path).open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    store.add(MkSummary.from_json(json.loads(line)))
        return store


def lookup_mk_summary(store: MkStore, flt: MetadataFilter) -> MkSummary | None:
    return store.lookup(flt)


def build_mk_store(index: QaIndex, filters: list[MetadataFilter], provider,
                   seed: int = 0, created_at: str = DEFAULT_TIMESTAMP,
                   skip_empty: bool = True) -> MkStore:
    """Generate summaries for every filter (parallel under the gateway limit).

    Filters matching no records are skipped (with ``skip_empty``) rather
    than failing the whole run.
    """
    clusters = [(flt, collect_cluster(index, flt)) for flt in filters]
    work = [(flt, cluster) for flt, cluster in clusters
            if cluster or not skip_empty]

    def summarize(item) -> MkSummary:
        flt, cluster = item
        return generate_mk_summary(cluster, flt, provider, seed=seed,
                                   created_at=created_at)

    summaries = parallel_map(summarize, work,
                             getattr(provider, "max_in_flight", 4))
    return MkStore(summaries)

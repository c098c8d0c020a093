"""Benchmark harness: query generation, LLM judging, aggregation, stats.

The judge sees the four configurations under shuffled anonymous labels
(Scientist1..4) so a configuration's identity can never leak into its
scores. Significance uses a two-sided paired t-test per metric, with the
Wilcoxon signed-rank statistic reported alongside as a robustness
companion.
"""

from __future__ import annotations

import json
import math
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

from metarag import prompts
from metarag.exceptions import (
    EmptyBenchmark,
    JudgeParseError,
    LengthMismatch,
    MissingMetric,
    OutOfRange,
    TooFewSamples,
)
from metarag.gateway import CompletionRequest, parallel_map
from metarag.pipeline import CONFIG_IDS, PipelineResources, run_configuration
from metarag.qa_index import MetadataFilter

METRIC_NAMES = ("recall", "precision", "specificity", "breadth", "depth",
                "relevancy")

DISPLAY_NAMES = {
    "chunk_naive": "Naive Search with Chunking",
    "chunk_aug": "Augmented Search with Chunking",
    "qa_aug": "Augmented QA Search",
    "qa_mk": "MK-Augmented QA Search",
}


@dataclass(frozen=True)
class MetricScores:
    recall: int
    precision: int
    specificity: int
    breadth: int
    depth: int
    relevancy: int

    def __post_init__(self):
        for name in METRIC_NAMES:
            value = getattr(self, name)
            if not 0 <= value <= 100:
                raise OutOfRange(name.capitalize(), value)

    def get(self, metric: str) -> int:
        return getattr(self, metric)

    def to_json(self) -> dict:
        return {name: getattr(self, name) for name in METRIC_NAMES}


@dataclass(frozen=True)
class JudgedQuery:
    query_id: str
    query: str
    per_config: dict  # config_id -> (MetricScores, justification)

    def to_json(self) -> dict:
        return {"query_id": self.query_id, "query": self.query,
                "per_config": {cfg: {"scores": scores.to_json(),
                                     "justification": justification}
                               for cfg, (scores, justification)
                               in self.per_config.items()}}

    @classmethod
    def from_json(cls, obj: dict) -> "JudgedQuery":
        per_config = {cfg: (MetricScores(**entry["scores"]),
                            entry.get("justification", ""))
                      for cfg, entry in obj["per_config"].items()}
        return cls(query_id=obj["query_id"], query=obj.get("query", ""),
                   per_config=per_config)


# --- evaluation queries ------------------------------------------------------

@dataclass(frozen=True)
class EvalQuery:
    query_id: str
    filter: MetadataFilter
    query: str


def generate_eval_queries(filters: list[MetadataFilter], count: int,
                          provider, seed: int = 0) -> list[EvalQuery]:
    """Generate ``count`` benchmark queries, round-robin over the filters."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if not filters:
        raise ValueError("filters must be non-empty")
    queries = []
    for i in range(count):
        flt = filters[i % len(filters)]
        response = provider.complete(CompletionRequest(
            template_id=prompts.EVAL_QUERY_TEMPLATE_ID,
            bindings={"field_values": flt.describe()},
            max_output_tokens=128, temperature=0.7, seed=seed + i))
        queries.append(EvalQuery(query_id=f"q{i:04d}", filter=flt,
                                 query=response.text.strip()))
    return queries


def save_eval_queries(queries: list[EvalQuery], path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for q in queries:
            fh.write(json.dumps({"query_id": q.query_id,
                                 "filter": q.filter.to_json(),
                                 "query": q.query}, ensure_ascii=False) + "\n")


def load_eval_queries(path) -> list[EvalQuery]:
    queries = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            queries.append(EvalQuery(
                query_id=obj["query_id"],
                filter=MetadataFilter.from_json(obj.get("filter", [])),
                query=obj["query"]))
    return queries


# --- judging -----------------------------------------------------------------

_BLOCK_HEADER_RE = re.compile(r"\*\*(Scientist\d+) Response\*\*")


def parse_judgment(text: str) -> MetricScores:
    """Extract the six ``**Name:** NN/100`` integer scores from a block."""
    values = {}
    for name in METRIC_NAMES:
        pattern = re.compile(rf"\*\*{name}:\*\*\s*(-?\d+)\s*/\s*100",
                             re.IGNORECASE)
        match = pattern.search(text)
        if not match:
            raise MissingMetric(name.capitalize())
        value = int(match.group(1))
        if not 0 <= value <= 100:
            raise OutOfRange(name.capitalize(), value)
        values[name] = value
    return MetricScores(**values)


def _split_blocks(text: str) -> dict[str, str]:
    blocks: dict[str, str] = {}
    matches = list(_BLOCK_HEADER_RE.finditer(text))
    for i, match in enumerate(matches):
        end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        blocks[match.group(1)] = text[match.start():end].strip()
    return blocks


def _label_sections(label: str, context: str, answer: str) -> str:
    return (f"**{label}**\n[RetrievedContext]\n{context}\n[/RetrievedContext]\n"
            f"[FinalAnswer]\n{answer}\n[/FinalAnswer]")


def judge_query(query: str, answers: dict, provider, seed: int = 0,
                query_id: str = "", per_call: bool = False) -> JudgedQuery:
    """Judge the four configurations' outputs for one query.

    ``answers`` maps config_id -> (retrieved context, final answer).
    Configurations are shown under Scientist1..4 labels in a seeded
    random order; with ``per_call`` each label is judged in a separate
    provider call instead of one four-section prompt.
    """
    if set(answers) != set(CONFIG_IDS):
        raise ValueError(f"expected configurations {sorted(CONFIG_IDS)}, "
                         f"got {sorted(answers)}")
    rng = random.Random(f"judge:{seed}:{query_id}")
    shuffled = list(CONFIG_IDS)
    rng.shuffle(shuffled)
    labels = {f"Scientist{i}": cfg for i, cfg in enumerate(shuffled, start=1)}

    def judge_once(section_labels: list[str]) -> dict[str, str]:
        sections = "\n\n".join(
            _label_sections(label, answers[labels[label]][0],
                            answers[labels[label]][1])
            for label in section_labels)
        response = provider.complete(CompletionRequest(
            template_id=prompts.JUDGE_TEMPLATE_ID,
            bindings={"query": query, "labels": ", ".join(section_labels),
                      "sections": sections},
            max_output_tokens=2048, temperature=0.0, seed=seed))
        return _split_blocks(response.text)

    if per_call:
        blocks = {}
        for label in labels:
            blocks.update(judge_once([label]))
    else:
        blocks = judge_once(list(labels))

    per_config = {}
    for label, cfg in labels.items():
        if label not in blocks:
            raise JudgeParseError(label)
        try:
            scores = parse_judgment(blocks[label])
        except (MissingMetric, OutOfRange) as exc:
            raise JudgeParseError(label, exc.name) from exc
        per_config[cfg] = (scores, blocks[label])
    return JudgedQuery(query_id=query_id, query=query, per_config=per_config)


# --- aggregation and statistics ------------------------------------------------

def aggregate(judged: list[JudgedQuery]) -> dict[str, dict[str, float]]:
    """Mean score per (configuration, metric), rounded to 2 decimals."""
    if not judged:
        raise EmptyBenchmark()
    means: dict[str, dict[str, float]] = {}
    configs = [cfg for cfg in CONFIG_IDS if cfg in judged[0].per_config]
    for cfg in configs:
        means[cfg] = {}
        for metric in METRIC_NAMES:
            values = [jq.per_config[cfg][0].get(metric) for jq in judged]
            means[cfg][metric] = round(sum(values) / len(values), 2)
    return means


@dataclass(frozen=True)
class PairedTestResult:
    t_stat: float
    p_value: float
    n: int
    wilcoxon_stat: float = math.nan
    wilcoxon_p: float = math.nan


def paired_test(a: list[float], b: list[float]) -> PairedTestResult:
    """Two-sided paired t-test on a - b.

    The p-value comes from the Student-t CDF with n-1 degrees of freedom
    via the regularized incomplete beta function. All-zero differences
    give (t=0, p=1); zero-variance nonzero differences give infinite t
    and p=0.
    """
    if len(a) != len(b):
        raise LengthMismatch(len(a), len(b))
    n = len(a)
    if n < 2:
        raise TooFewSamples(n)
    diffs = [x - y for x, y in zip(a, b)]
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        if mean == 0.0:
            t_stat, p_value = 0.0, 1.0
        else:
            t_stat = math.inf if mean > 0 else -math.inf
            p_value = 0.0
    else:
        t_stat = mean / math.sqrt(var / n)
        df = n - 1
        from scipy.special import betainc
        p_value = float(betainc(df / 2.0, 0.5, df / (df + t_stat * t_stat)))
        p_value = min(max(p_value, 0.0), 1.0)
    w_stat, w_p = _wilcoxon(diffs)
    return PairedTestResult(t_stat=t_stat, p_value=p_value, n=n,
                            wilcoxon_stat=w_stat, wilcoxon_p=w_p)


def _wilcoxon(diffs: list[float]) -> tuple[float, float]:
    nonzero = [d for d in diffs if d != 0.0]
    if not nonzero:
        return 0.0, 1.0
    from scipy.stats import wilcoxon as scipy_wilcoxon

    try:
        result = scipy_wilcoxon(nonzero)
    except ValueError:
        return 0.0, 1.0
    return float(result.statistic), float(result.pvalue)


@dataclass
class BenchmarkReport:
    per_query: list[JudgedQuery] = field(default_factory=list)
    means: dict = field(default_factory=dict)
    pairwise_tests: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "per_query": [jq.to_json() for jq in self.per_query],
            "means": self.means,
            "pairwise_tests": [
                {"config_a": a, "config_b": b, "metric": metric,
                 "t_stat": _num(result.t_stat), "p_value": result.p_value,
                 "n": result.n, "wilcoxon_stat": _num(result.wilcoxon_stat),
                 "wilcoxon_p": _num(result.wilcoxon_p)}
                for (a, b, metric), result in self.pairwise_tests.items()],
        }

    def save(self, path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, ensure_ascii=False, indent=2)
            fh.write("\n")

    @classmethod
    def from_json(cls, obj: dict) -> "BenchmarkReport":
        report = cls()
        report.per_query = [JudgedQuery.from_json(item)
                            for item in obj.get("per_query", [])]
        report.means = obj.get("means", {})
        for item in obj.get("pairwise_tests", []):
            key = (item["config_a"], item["config_b"], item["metric"])
            report.pairwise_tests[key] = PairedTestResult(
                t_stat=_unnum(item["t_stat"]), p_value=item["p_value"],
                n=item["n"], wilcoxon_stat=_unnum(item.get("wilcoxon_stat")),
                wilcoxon_p=_unnum(item.get("wilcoxon_p")))
        return report

    @classmethod
    def load(cls, path) -> "BenchmarkReport":
        with Path(path).open(encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def _num(value: float):
    if value is None or math.isnan(value):
        return None
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


def _unnum(value) -> float:
    if value is None:
        return math.nan
    if value == "inf":
        return math.inf
    if value == "-inf":
        return -math.inf
    return float(value)


def build_report(judged: list[JudgedQuery]) -> BenchmarkReport:
    """Aggregate judged queries into means plus all pairwise tests."""
    report = BenchmarkReport(per_query=list(judged))
    report.means = aggregate(judged)
    configs = [cfg for cfg in CONFIG_IDS if cfg in report.means]
    for i, cfg_a in enumerate(configs):
        for cfg_b in configs[i + 1:]:
            for metric in METRIC_NAMES:
                a = [jq.per_config[cfg_a][0].get(metric) for jq in judged]
                b = [jq.per_config[cfg_b][0].get(metric) for jq in judged]
                report.pairwise_tests[(cfg_a, cfg_b, metric)] = paired_test(a, b)
    return report


def run_benchmark(queries: list[EvalQuery], resources: PipelineResources,
                  judge_provider=None, seed: int = 0,
                  per_call_judging: bool = False) -> BenchmarkReport:
    """Run all four configurations on every query, judge, and aggregate."""
    judge_with = judge_provider or resources.provider

    def run_one(eval_query: EvalQuery) -> JudgedQuery:
        answers = {}
        for cfg in CONFIG_IDS:
            result = run_configuration(cfg, eval_query.query, resources,
                                       flt=eval_query.filter, seed=seed)
            answers[cfg] = (result.context.serialized, result.answer)
        return judge_query(eval_query.query, answers, judge_with, seed=seed,
                           query_id=eval_query.query_id,
                           per_call=per_call_judging)

    max_workers = getattr(judge_with, "max_in_flight", 4)
    judged = parallel_map(run_one, queries, max_workers)
    return build_report(judged)


# --- report rendering ----------------------------------------------------------

def render_report_md(report: BenchmarkReport) -> str:
    """Two three-metric mean tables plus the pairwise test matrix."""
    configs = [cfg for cfg in CONFIG_IDS if cfg in report.means]
    lines = ["# Benchmark report", ""]
    lines.append(f"Queries judged: {len(report.per_query)}")
    lines.append("")
    for block in (METRIC_NAMES[:3], METRIC_NAMES[3:]):
        header = "| Configuration | " + " | ".join(
            f"{m.capitalize()} (%)" for m in block) + " |"
        lines.append(header)
        lines.append("|" + " --- |" * (len(block) + 1))
        for cfg in configs:
            cells = " | ".join(f"{report.means[cfg][m]:.2f}" for m in block)
            lines.append(f"| {DISPLAY_NAMES.get(cfg, cfg)} | {cells} |")
        lines.append("")
    if report.pairwise_tests:
        lines.append("## Pairwise significance (paired t-test, two-sided)")
        lines.append("")
        lines.append("| Comparison | Metric | t | p | n | Wilcoxon W | Wilcoxon p |")
        lines.append("|" + " --- |" * 7)
        for (a, b, metric), result in report.pairwise_tests.items():
            comparison = (f"{DISPLAY_NAMES.get(a, a)} vs "
                          f"{DISPLAY_NAMES.get(b, b)}")
            lines.append(
                f"| {comparison} | {metric.capitalize()} "
                f"| {_fmt(result.t_stat)} | {_fmt(result.p_value)} "
                f"| {result.n} | {_fmt(result.wilcoxon_stat)} "
                f"| {_fmt(result.wilcoxon_p)} |")
        lines.append("")
    return "\n".join(lines)


def render_report_csv(report: BenchmarkReport) -> str:
    configs = [cfg for cfg in CONFIG_IDS if cfg in report.means]
    lines = ["configuration," + ",".join(METRIC_NAMES)]
    for cfg in configs:
        cells = ",".join(f"{report.means[cfg][m]:.2f}" for m in METRIC_NAMES)
        lines.append(f"{DISPLAY_NAMES.get(cfg, cfg)},{cells}")
    if report.pairwise_tests:
        lines.append("")
        lines.append("config_a,config_b,metric,t_stat,p_value,n,"
                     "wilcoxon_stat,wilcoxon_p")
        for (a, b, metric), result in report.pairwise_tests.items():
            lines.append(f"{a},{b},{metric},{_fmt(result.t_stat)},"
                         f"{_fmt(result.p_value)},{result.n},"
                         f"{_fmt(result.wilcoxon_stat)},"
                         f"{_fmt(result.wilcoxon_p)}")
    return "\n".join(lines) + "\n"


def _fmt(value: float) -> str:
    if value is None or math.isnan(value):
        return "-"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.4g}"

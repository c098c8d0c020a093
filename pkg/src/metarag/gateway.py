"""Provider-agnostic chat-completion gateway.

One contract for all callers: build a :class:`CompletionRequest` naming a
registered prompt template, hand it to a provider, get a
:class:`CompletionResponse` back. The HTTP provider retries transient
failures with exponential backoff; the mock provider is fully
deterministic and makes every downstream module testable offline.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from metarag.corpus import count_tokens
from metarag.exceptions import (
    AuthError,
    NoRuleForTemplate,
    ProviderError,
    RateLimited,
    UnboundPlaceholder,
    UnknownPlaceholder,
)

_PLACEHOLDER_RE = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    text: str

    def placeholders(self) -> set[str]:
        return set(_PLACEHOLDER_RE.findall(self.text))


@dataclass(frozen=True)
class CompletionRequest:
    template_id: str
    bindings: dict
    max_output_tokens: int = 1024
    temperature: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    input_tokens: int
    output_tokens: int
    provider: str


def render_template(template: PromptTemplate, bindings: dict) -> str:
    """Substitute ``{name}`` placeholders with their bound values.

    Substitution is a single pass, so braces inside binding values are
    left untouched. Raises :class:`UnboundPlaceholder` for a template
    placeholder without a binding and :class:`UnknownPlaceholder` for a
    binding that matches no placeholder.
    """
    names = template.placeholders()
    for key in bindings:
        if key not in names:
            raise UnknownPlaceholder(key)

    def _sub(match: re.Match) -> str:
        name = match.group(1)
        if name not in bindings:
            raise UnboundPlaceholder(name)
        return str(bindings[name])

    return _PLACEHOLDER_RE.sub(_sub, template.text)


def complete(request: CompletionRequest, provider) -> CompletionResponse:
    """Run ``request`` against ``provider`` (uniform entry point)."""
    return provider.complete(request)


def parallel_map(fn, items, max_workers: int):
    """Apply ``fn`` concurrently, preserving input order in the result."""
    items = list(items)
    if not items:
        return []
    max_workers = max(1, min(max_workers, len(items)))
    if max_workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(fn, items))


# --- HTTP provider ----------------------------------------------------------

class HttpProvider:
    """Generic HTTPS chat-completion adapter.

    Wire contract: POST ``{"model", "prompt", "max_tokens", "temperature"}``;
    the response JSON carries ``text`` plus optional ``input_tokens`` /
    ``output_tokens`` (whitespace counts are used when absent).

    Transient failures (429, 5xx, transport errors) are retried with
    exponential backoff: base 1 s, factor 2, at most 5 attempts, at most
    31 s of total sleep.
    """

    name = "http"
    deterministic = False

    MAX_ATTEMPTS = 5
    BACKOFF_BASE = 1.0
    BACKOFF_FACTOR = 2.0

    def __init__(self, endpoint: str, api_key: str, model: str,
                 max_in_flight: int = 4, transport=None, sleep=time.sleep):
        self.endpoint = endpoint
        self.api_key = api_key
        self.model = model
        self.max_in_flight = max_in_flight
        self._transport = transport or _requests_transport
        self._sleep = sleep

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        from metarag.prompts import get_template

        prompt = render_template(get_template(request.template_id),
                                 request.bindings)
        body = {
            "model": self.model,
            "prompt": prompt,
            "max_tokens": request.max_output_tokens,
            "temperature": request.temperature,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        last_status, last_body = 0, ""
        for attempt in range(self.MAX_ATTEMPTS):
            if attempt:
                self._sleep(self.BACKOFF_BASE * self.BACKOFF_FACTOR ** (attempt - 1))
            try:
                status, text = self._transport(self.endpoint, body, headers)
            except Exception as exc:  # transport-level failure is transient
                last_status, last_body = 0, str(exc)
                continue
            if status in (401, 403):
                raise AuthError(f"authentication rejected (HTTP {status})")
            if status == 200:
                return self._parse_response(prompt, text)
            if status == 429 or status >= 500:
                last_status, last_body = status, text
                continue
            raise ProviderError(status, text)
        if last_status == 429:
            raise RateLimited(self.MAX_ATTEMPTS)
        raise ProviderError(last_status, last_body)

    def _parse_response(self, prompt: str, text: str) -> CompletionResponse:
        try:
            payload = json.loads(text)
            answer = payload["text"]
        except (json.JSONDecodeError, TypeError, KeyError) as exc:
            raise ProviderError(200, f"unparseable response body: {text}") from exc
        return CompletionResponse(
            text=answer,
            input_tokens=int(payload.get("input_tokens", count_tokens(prompt))),
            output_tokens=int(payload.get("output_tokens", count_tokens(answer))),
            provider=self.name,
        )


def _requests_transport(url, payload, headers, timeout=120):
    import requests

    resp = requests.post(url, json=payload, headers=headers, timeout=timeout)
    return resp.status_code, resp.text


# --- mock provider ----------------------------------------------------------

_WORDS = (
    "inference", "convergence", "regularization", "sampling", "calibration",
    "estimation", "generalization", "robustness", "sparsity", "attention",
    "clustering", "optimization", "uncertainty", "causality", "embeddings",
    "gradients", "priors", "kernels", "likelihood", "variance",
    "benchmarks", "forecasting", "segmentation", "alignment", "retrieval",
    "distillation", "pruning", "quantization", "exploration", "planning",
    "representation", "supervision", "annotation", "drift", "fairness",
    "latency", "throughput", "scaling", "interpolation", "extrapolation",
)


def bindings_digest(bindings: dict) -> str:
    """Stable hex digest of a bindings map (canonical JSON, sorted keys)."""
    canon = json.dumps(bindings, sort_keys=True, ensure_ascii=True)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


class MockScript:
    """Rules the mock provider plays back, keyed by template_id.

    Rule kinds: ``echo``, ``fixed``, ``enrichment``, ``augmentation``,
    ``summary``, ``answer``, ``judge``, ``eval_query``. See
    :class:`MockProvider` for what each kind emits.
    """

    def __init__(self, rules: dict):
        self.rules = dict(rules)

    @classmethod
    def load(cls, path) -> "MockScript":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def rule_for(self, template_id: str) -> dict:
        if template_id not in self.rules:
            raise NoRuleForTemplate(template_id)
        return self.rules[template_id]


def default_script(enrichment_questions: int = 5,
                   judge_scores=(90, 95, 85, 90, 85, 95),
                   judge_jitter: int = 0,
                   augmentation_count: int = 3) -> MockScript:
    """A script covering every pipeline stage with sensible defaults."""
    return MockScript({
        "enrichment": {"kind": "enrichment",
                       "questions": enrichment_questions},
        "augmentation": {"kind": "augmentation",
                         "count": augmentation_count},
        "mk_summary": {"kind": "summary"},
        "final_answer": {"kind": "answer"},
        "judge": {"kind": "judge", "scores": list(judge_scores),
                  "jitter": judge_jitter},
        "eval_query": {"kind": "eval_query"},
    })


class MockProvider:
    """Deterministic offline provider.

    Output depends only on ``(template_id, bindings, seed)``: the rule for
    the template decides the shape, a seeded RNG keyed by the binding
    digest fills in the content. Stateless, so safe under any concurrency.
    """

    name = "mock"
    deterministic = True

    def __init__(self, script: MockScript, max_in_flight: int = 4):
        self.script = script
        self.max_in_flight = max_in_flight

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        from metarag.prompts import get_template

        rule = self.script.rule_for(request.template_id)
        prompt = render_template(get_template(request.template_id),
                                 request.bindings)
        rng = random.Random(f"{request.template_id}:"
                            f"{bindings_digest(request.bindings)}:"
                            f"{request.seed}")
        text = self._emit(rule, request.bindings, prompt, rng)
        return CompletionResponse(text=text,
                                  input_tokens=count_tokens(prompt),
                                  output_tokens=count_tokens(text),
                                  provider=self.name)

    def _emit(self, rule: dict, bindings: dict, prompt: str,
              rng: random.Random) -> str:
        kind = rule.get("kind", "fixed")
        if kind == "echo":
            return prompt
        if kind == "fixed":
            return rule.get("text", "")
        if kind == "enrichment":
            return self._emit_enrichment(rule, bindings, rng)
        if kind == "augmentation":
            return self._emit_augmentation(rule, bindings, rng)
        if kind == "summary":
            return self._emit_summary(bindings, rng)
        if kind == "answer":
            return self._emit_answer(bindings, rng)
        if kind == "judge":
            return self._emit_judge(rule, bindings, rng)
        if kind == "eval_query":
            return self._emit_eval_query(bindings, rng)
        raise ValueError(f"unknown mock rule kind: {kind!r}")

    @staticmethod
    def _pick(rng: random.Random, k: int) -> list[str]:
        return [_WORDS[rng.randrange(len(_WORDS))] for _ in range(k)]

    def _emit_enrichment(self, rule, bindings, rng) -> str:
        title = bindings.get("doc_title", "")
        counts = rule.get("questions_by_title", {})
        n_questions = int(counts.get(title, rule.get("questions", 5)))
        categories = [c.strip() for c in
                      bindings.get("text_categories", "").split(",") if c.strip()]
        fields = []
        if categories:
            fields = [categories[rng.randrange(len(categories))]]
        flags = ["Yes" if fields else "No", "No", "No", "No", "No", "No"]
        field_list = "[" + ", ".join(f"'{f}'" for f in fields) + "]"

        lines = [f"{i}. {flag}" for i, flag in enumerate(flags, start=1)]
        lines.append("")
        lines.append(f"1. {field_list}")
        lines.extend(f"{i}. []" for i in range(2, 7))
        lines.append("")
        lines.append("Questions:")
        questions, answers = [], []
        for i in range(1, n_questions + 1):
            w = self._pick(rng, 3)
            questions.append(f"{i}. What does the work titled {title} "
                             f"establish about {w[0]} and {w[1]}?")
            answers.append(f"{i}. It establishes that {w[0]} interacts with "
                           f"{w[1]} through {w[2]}, with measurable effects.")
        lines.extend(questions)
        if rule.get("malformed"):
            answers = answers[:-1] if len(answers) > 1 else []
        lines.append("")
        lines.append("Answers:")
        lines.extend(answers)
        return "\n".join(lines)

    def _emit_augmentation(self, rule, bindings, rng) -> str:
        count = int(rule.get("count", 3))
        query = bindings.get("user_query", "")
        topic = " ".join(query.split()[:4]).rstrip("?") or "the topic"
        lines = []
        for i in range(1, count + 1):
            w = self._pick(rng, 2)
            lines.append(f"{i}. What is known about {w[0]} and {w[1]} "
                         f"in relation to {topic}?")
        return "\n".join(lines)

    def _emit_summary(self, bindings, rng) -> str:
        questions = bindings.get("questions", "")
        n = len(re.findall(r"(?m)^\s*\d+\.", questions))
        tags = bindings.get("field_values", "")
        w = self._pick(rng, 3)
        return (f"This database section holds {n} questions about {tags}, "
                f"covering {w[0]}, {w[1]}, and {w[2]}.")

    def _emit_answer(self, bindings, rng) -> str:
        query = bindings.get("user_query", "")
        w = self._pick(rng, 4)
        return (f"Drawing on the retrieved entries, {w[0]} and {w[1]} are the "
                f"central themes for the question '{query}'. The evidence "
                f"emphasizes {w[2]} and suggests further work on {w[3]}.")

    def _emit_judge(self, rule, bindings, rng) -> str:
        metric_names = ("Recall", "Precision", "Specificity",
                        "Breadth", "Depth", "Relevancy")
        base_scores = list(rule.get("scores", (90, 95, 85, 90, 85, 95)))
        jitter = int(rule.get("jitter", 0))
        labels = [l.strip() for l in bindings.get("labels", "").split(",")
                  if l.strip()]
        blocks = []
        for label in labels:
            lines = [f"**{label} Response**", ""]
            for name, base in zip(metric_names, base_scores):
                score = base
                if jitter:
                    score += rng.randrange(2 * jitter + 1) - jitter
                score = max(0, min(100, score))
                w = self._pick(rng, 2)
                lines.append(f"**{name}:** {score}/100 - The response shows "
                             f"{w[0]} grounded in {w[1]}.")
                lines.append("")
            blocks.append("\n".join(lines).rstrip())
        return "\n\n".join(blocks)

    def _emit_eval_query(self, bindings, rng) -> str:
        tags = bindings.get("field_values", "the field")
        w = self._pick(rng, 2)
        return f"How does {w[0]} influence {w[1]} in {tags}?"

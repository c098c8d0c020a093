"""Exception taxonomy for the metarag pipeline.

Every error raised by the library derives from :class:`MetaragError` so
callers (and the CLI) can distinguish pipeline failures from bugs.
"""

from __future__ import annotations


class MetaragError(Exception):
    """Base class for all metarag errors."""


# --- corpus ---------------------------------------------------------------

class MissingFile(MetaragError):
    def __init__(self, path):
        self.path = str(path)
        super().__init__(f"file not found: {self.path}")


class MalformedLine(MetaragError):
    def __init__(self, line_no: int, line: str, reason: str = ""):
        self.line_no = line_no
        self.line = line
        detail = f": {reason}" if reason else ""
        super().__init__(f"malformed line {line_no}{detail}: {line!r}")


class DuplicateId(MetaragError):
    def __init__(self, doc_id: str):
        self.doc_id = doc_id
        super().__init__(f"duplicate document id: {doc_id!r}")


class NetworkError(MetaragError):
    def __init__(self, status: int, detail: str = ""):
        self.status = status
        super().__init__(f"request failed with status {status}"
                         + (f": {detail}" if detail else ""))


class FeedParseError(MetaragError):
    def __init__(self, position, detail: str = ""):
        self.position = position
        super().__init__(f"cannot parse feed at {position}"
                         + (f": {detail}" if detail else ""))


class InvalidChunkParams(MetaragError):
    pass


# --- llm gateway ----------------------------------------------------------

class UnboundPlaceholder(MetaragError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"template placeholder {{{name}}} has no binding")


class UnknownPlaceholder(MetaragError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"binding {name!r} matches no template placeholder")


class AuthError(MetaragError):
    pass


class RateLimited(MetaragError):
    def __init__(self, attempts: int):
        self.attempts = attempts
        super().__init__(f"rate limited after {attempts} attempts")


class ProviderError(MetaragError):
    def __init__(self, status: int, body: str = ""):
        self.status = status
        self.body = body[:200]
        super().__init__(f"provider error {status}: {self.body}")


class NoRuleForTemplate(MetaragError):
    def __init__(self, template_id: str):
        self.template_id = template_id
        super().__init__(f"mock script has no rule for template {template_id!r}")


# --- enrichment -----------------------------------------------------------

class EmptyDocument(MetaragError):
    def __init__(self, doc_id: str):
        self.doc_id = doc_id
        super().__init__(f"document {doc_id!r} has an empty body")


class EnrichmentParseError(MetaragError):
    pass


class MissingSection(EnrichmentParseError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"missing section: {name}")


class BadBoolean(EnrichmentParseError):
    def __init__(self, line: str):
        self.line = line
        super().__init__(f"expected 'N. Yes|No', got: {line!r}")


class BadList(EnrichmentParseError):
    def __init__(self, line: str, reason: str = ""):
        self.line = line
        detail = f" ({reason})" if reason else ""
        super().__init__(f"bad list literal{detail}: {line!r}")


class CountMismatch(EnrichmentParseError):
    def __init__(self, questions: int, answers: int):
        self.questions = questions
        self.answers = answers
        super().__init__(f"{questions} questions but {answers} answers")


class EmptyQuestions(EnrichmentParseError):
    def __init__(self):
        super().__init__("response contains no questions")


# --- embedding ------------------------------------------------------------

class EmptyText(MetaragError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"text at position {index} is empty")


class DimensionMismatch(MetaragError):
    def __init__(self, da: int, db: int):
        self.da = da
        self.db = db
        super().__init__(f"dimension mismatch: {da} vs {db}")


class ZeroVector(MetaragError):
    def __init__(self):
        super().__init__("cannot normalize a zero vector")


# --- qa index -------------------------------------------------------------

class DuplicateQaId(MetaragError):
    def __init__(self, qa_id: str):
        self.qa_id = qa_id
        super().__init__(f"duplicate qa_id: {qa_id!r}")


class CorruptIndex(MetaragError):
    pass


class DimensionHeaderMismatch(MetaragError):
    def __init__(self, header_dim: int, expected_dim: int):
        self.header_dim = header_dim
        self.expected_dim = expected_dim
        super().__init__(f"index stores dimension {header_dim}, "
                         f"expected {expected_dim}")


# --- mk summary -----------------------------------------------------------

class EmptyCluster(MetaragError):
    def __init__(self):
        super().__init__("cannot summarize an empty question cluster")


# --- query pipeline -------------------------------------------------------

class EmptyQuery(MetaragError):
    def __init__(self):
        super().__init__("user query is empty")


class AugmentationParseError(MetaragError):
    pass


class NoQuestionsFound(AugmentationParseError):
    def __init__(self):
        super().__init__("no numbered questions found in response")


class MissingResource(MetaragError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"configuration requires missing resource: {name}")


# --- evaluation -----------------------------------------------------------

class JudgeParseError(MetaragError):
    def __init__(self, label: str, metric: str | None = None):
        self.label = label
        self.metric = metric
        what = f"metric {metric!r}" if metric else "response block"
        super().__init__(f"cannot parse {what} for {label}")


class MissingMetric(MetaragError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"judgment is missing metric: {name}")


class OutOfRange(MetaragError):
    def __init__(self, name: str, value: int):
        self.name = name
        self.value = value
        super().__init__(f"metric {name} scored {value}, outside [0, 100]")


class EmptyBenchmark(MetaragError):
    def __init__(self):
        super().__init__("no judged queries to aggregate")


class LengthMismatch(MetaragError):
    def __init__(self, na: int, nb: int):
        self.na = na
        self.nb = nb
        super().__init__(f"paired samples differ in length: {na} vs {nb}")


class TooFewSamples(MetaragError):
    def __init__(self, n: int):
        self.n = n
        super().__init__(f"need at least 2 paired samples, got {n}")


# --- cli ------------------------------------------------------------------

class UnknownCommand(MetaragError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown command: {name}")


class ConfigError(MetaragError):
    def __init__(self, key: str, detail: str = ""):
        self.key = key
        super().__init__(f"bad config value for {key!r}"
                         + (f": {detail}" if detail else ""))

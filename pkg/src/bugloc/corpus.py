"""Bug-report corpus handling: ingestion, tokenization, vocabulary, TF-IDF.

Bug reports arrive as JSONL, one report per line, and are kept in
chronological order so that a time-based train/query split is just a list
slice. Text is tokenized by splitting identifiers at case transitions and
non-alphanumeric boundaries; weighting is plain tf * ln(N / df).
"""

from __future__ import annotations

import json
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import resources
from typing import Iterable, Mapping

from .errors import ParseError, ValidationError

logger = logging.getLogger(__name__)

_WORD_RE = re.compile(r"[A-Za-z0-9]+")
# getX2 -> get, X2; XMLParser -> XML, Parser; word2vec stays whole
_CAMEL_RE = re.compile(r"[A-Z]+(?![a-z])|[A-Z][a-z0-9]*|[a-z0-9]+")

# Light suffix stripping, applied only when stemming is enabled.
_SUFFIXES = ("ations", "ation", "ings", "ing", "edly", "ed", "es", "s", "ly")

_REPORT_KEYS = ("id", "summary", "description", "report_time", "status", "fixed_files")


def load_stopwords(path) -> frozenset[str]:
    """Read a stoplist file: one lowercase term per line, '#' comments allowed."""
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            term = line.strip()
            if term and not term.startswith("#"):
                words.add(term.lower())
    return frozenset(words)


def default_stopwords() -> frozenset[str]:
    ref = resources.files("bugloc").joinpath("data/stopwords.txt")
    words = set()
    for line in ref.read_text(encoding="utf-8").splitlines():
        term = line.strip()
        if term and not term.startswith("#"):
            words.add(term.lower())
    return frozenset(words)


@dataclass(frozen=True)
class TokenRules:
    """Tokenizer configuration. min_length filters after splitting and lowercasing."""

    stopwords: frozenset[str]
    min_length: int = 2
    stem: bool = False


def default_token_rules(min_length: int = 2, stem: bool = False, stopwords_file=None) -> TokenRules:
    stopwords = load_stopwords(stopwords_file) if stopwords_file else default_stopwords()
    return TokenRules(stopwords=stopwords, min_length=min_length, stem=stem)


def _stem(term: str) -> str:
    for suffix in _SUFFIXES:
        if term.endswith(suffix):
            stem = term[: -len(suffix)]
            # keep short roots and double-s words intact ("address" stays)
            if len(stem) >= 3 and not (suffix == "s" and term.endswith("ss")):
                return stem
    return term


def tokenize(text: str, rules: TokenRules) -> list[str]:
    """Split text into lowercase terms.

    Identifiers are split at non-alphanumeric characters and at case
    transitions; digits stay attached to the piece they follow. Stopwords
    and terms shorter than rules.min_length are dropped. Order and
    multiplicity are preserved.
    """
    out = []
    for word in _WORD_RE.findall(text):
        for piece in _CAMEL_RE.findall(word):
            term = piece.lower()
            if rules.stem:
                term = _stem(term)
            if len(term) < rules.min_length or term in rules.stopwords:
                continue
            out.append(term)
    return out


@dataclass(frozen=True)
class BugReport:
    id: str
    summary: str
    description: str
    report_time: datetime
    status: str
    fixed_files: tuple[str, ...]

    @property
    def text(self) -> str:
        return self.summary + "\n" + self.description


@dataclass(frozen=True)
class SourceDoc:
    path: str
    tokens: tuple[str, ...]


def _parse_time(raw, where: str) -> datetime:
    if not isinstance(raw, str):
        raise ParseError(f"{where}: report_time must be an ISO-8601 string")
    text = raw.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        stamp = datetime.fromisoformat(text)
    except ValueError as exc:
        raise ParseError(f"{where}: bad report_time {raw!r}: {exc}") from exc
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp.astimezone(timezone.utc)


def _parse_report(rec, where: str) -> BugReport:
    if not isinstance(rec, dict):
        raise ParseError(f"{where}: expected a JSON object")
    for key in _REPORT_KEYS:
        if key not in rec:
            raise ParseError(f"{where}: missing key {key!r}")
    rid = rec["id"]
    if not isinstance(rid, str) or not rid:
        raise ParseError(f"{where}: id must be a nonempty string")
    for key in ("summary", "description", "status"):
        if not isinstance(rec[key], str):
            raise ParseError(f"{where}: {key} must be a string")
    raw_files = rec["fixed_files"]
    if not isinstance(raw_files, list):
        raise ParseError(f"{where}: fixed_files must be a list")
    fixed = []
    for item in raw_files:
        if not isinstance(item, str) or not item:
            raise ParseError(f"{where}: fixed_files entries must be nonempty strings")
        if item not in fixed:
            fixed.append(item)
    return BugReport(
        id=rid,
        summary=rec["summary"],
        description=rec["description"],
        report_time=_parse_time(rec["report_time"], where),
        status=rec["status"],
        fixed_files=tuple(fixed),
    )


def load_bug_reports(path, format: str = "jsonl", resolved_only: bool = False) -> list[BugReport]:
    """Load bug reports from a JSONL file, sorted ascending by report_time.

    Malformed lines raise ParseError naming the line number; duplicate ids
    raise ValidationError naming the id. With resolved_only=True, reports
    whose status is not "resolved" (case-insensitive) are dropped after
    parsing and duplicate checking.
    """
    if format != "jsonl":
        raise ValidationError(f"unsupported bug report format: {format!r}")
    reports = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            where = f"{path}: line {lineno}"
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{where}: invalid JSON: {exc.msg}") from exc
            report = _parse_report(rec, where)
            if report.id in seen:
                raise ValidationError(
                    f"{where}: duplicate report id {report.id!r} "
                    f"(first seen on line {seen[report.id]})"
                )
            seen[report.id] = lineno
            reports.append(report)
    if resolved_only:
        reports = [r for r in reports if r.status.strip().lower() == "resolved"]
    reports.sort(key=lambda r: r.report_time)
    return reports


def load_source_docs(path, rules: TokenRules) -> list[SourceDoc]:
    """Load source documents from JSONL with keys path, content; tokenizes content."""
    docs = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            where = f"{path}: line {lineno}"
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{where}: invalid JSON: {exc.msg}") from exc
            if not isinstance(rec, dict) or "path" not in rec or "content" not in rec:
                raise ParseError(f"{where}: expected an object with keys path, content")
            doc_path = rec["path"]
            if not isinstance(doc_path, str) or not doc_path:
                raise ParseError(f"{where}: path must be a nonempty string")
            if not isinstance(rec["content"], str):
                raise ParseError(f"{where}: content must be a string")
            if doc_path in seen:
                raise ValidationError(
                    f"{where}: duplicate source path {doc_path!r} "
                    f"(first seen on line {seen[doc_path]})"
                )
            seen[doc_path] = lineno
            docs.append(SourceDoc(path=doc_path, tokens=tuple(tokenize(rec["content"], rules))))
    return docs


class Vocabulary:
    """Bidirectional term/index map with document frequencies.

    Indices are dense, assigned in sorted term order so the mapping does
    not depend on document order.
    """

    def __init__(self, terms: list[str], doc_freq: Mapping[str, int], num_docs: int):
        self.terms = list(terms)
        self.index = {t: i for i, t in enumerate(self.terms)}
        self.doc_freq = dict(doc_freq)
        self.num_docs = num_docs

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.index

    def index_of(self, term: str) -> int:
        return self.index[term]

    def term_of(self, idx: int) -> str:
        return self.terms[idx]


def build_vocabulary(docs: Iterable[Iterable[str]]) -> Vocabulary:
    """Build a vocabulary over tokenized documents; df counts documents, not occurrences."""
    doc_freq: Counter[str] = Counter()
    num_docs = 0
    for tokens in docs:
        num_docs += 1
        doc_freq.update(set(tokens))
    return Vocabulary(sorted(doc_freq), doc_freq, num_docs)


@dataclass
class BowVector:
    """Sparse TF-IDF vector: term index -> positive weight. No explicit zeros."""

    entries: dict[int, float]

    def norm(self) -> float:
        return math.sqrt(math.fsum(w * w for w in self.entries.values()))

    def is_empty(self) -> bool:
        return not self.entries


def bow_vectorize(tokens: Iterable[str], vocab: Vocabulary) -> BowVector:
    """Weight tokens by tf * ln(num_docs / doc_freq) under vocab.

    Tokens outside the vocabulary are skipped; terms whose df equals the
    corpus size weight to zero and are not stored.
    """
    if vocab.num_docs < 1:
        raise ValidationError("vocabulary has no documents")
    entries: dict[int, float] = {}
    for term, tf in sorted(Counter(tokens).items()):
        idx = vocab.index.get(term)
        if idx is None:
            continue
        weight = tf * math.log(vocab.num_docs / vocab.doc_freq[term])
        if weight > 0.0:
            entries[idx] = weight
    return BowVector(entries)

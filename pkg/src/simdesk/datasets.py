"""Dataset file readers: corpus and topics as JSON lines, qrels as TREC text."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

from .canonical import CanonicalError, parse_canonical


class DatasetError(ValueError):
    def __init__(self, code: str, message: str, line: int | None = None):
        self.code = code
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


PARSE_ERROR = "PARSE_ERROR"
DUPLICATE_DOC_ID = "DUPLICATE_DOC_ID"


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str = ""
    body: str = ""


@dataclass(frozen=True)
class Topic:
    topic_id: str
    title: str = ""
    description: str = ""


def _iter_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = parse_canonical(raw)
            except CanonicalError as exc:
                raise DatasetError(PARSE_ERROR, str(exc), line=lineno) from exc
            if not isinstance(obj, dict):
                raise DatasetError(PARSE_ERROR, "expected one object per line", line=lineno)
            yield lineno, obj


def read_corpus(path: str | Path) -> Iterator[Document]:
    for lineno, obj in _iter_jsonl(path):
        doc_id = obj.get("doc_id")
        if not isinstance(doc_id, str) or not doc_id:
            raise DatasetError(PARSE_ERROR, "missing or invalid doc_id", line=lineno)
        title = obj.get("title", "")
        body = obj.get("body", "")
        if not isinstance(title, str) or not isinstance(body, str):
            raise DatasetError(PARSE_ERROR, "title and body must be strings", line=lineno)
        yield Document(doc_id=doc_id, title=title, body=body)


def read_topics(path: str | Path) -> list[Topic]:
    topics = []
    for lineno, obj in _iter_jsonl(path):
        topic_id = obj.get("topic_id")
        if not isinstance(topic_id, str) or not topic_id:
            raise DatasetError(PARSE_ERROR, "missing or invalid topic_id", line=lineno)
        title = obj.get("title", "")
        description = obj.get("description", "")
        if not isinstance(title, str) or not isinstance(description, str):
            raise DatasetError(PARSE_ERROR, "title and description must be strings", line=lineno)
        topics.append(Topic(topic_id=topic_id, title=title, description=description))
    return topics


class Qrels:
    """Relevance grades keyed by (topic_id, doc_id); grade >= 1 is relevant."""

    def __init__(self) -> None:
        self._grades: dict[tuple[str, str], int] = {}

    def add(self, topic_id: str, doc_id: str, grade: int) -> None:
        self._grades[(topic_id, doc_id)] = grade

    def grade(self, topic_id: str, doc_id: str) -> Optional[int]:
        return self._grades.get((topic_id, doc_id))

    def is_relevant(self, topic_id: str, doc_id: str) -> bool:
        return self._grades.get((topic_id, doc_id), 0) >= 1

    def relevant_docs(self, topic_id: str) -> set[str]:
        return {d for (t, d), g in self._grades.items() if t == topic_id and g >= 1}

    def __len__(self) -> int:
        return len(self._grades)


def read_qrels(path: str | Path) -> Qrels:
    """TREC convention: `topic_id 0 doc_id grade`, whitespace-separated."""
    qrels = Qrels()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise DatasetError(PARSE_ERROR, f"expected 4 fields, got {len(parts)}", line=lineno)
            topic_id, _, doc_id, raw_grade = parts
            try:
                grade = int(raw_grade)
            except ValueError:
                raise DatasetError(PARSE_ERROR, f"grade {raw_grade!r} is not an integer", line=lineno) from None
            if grade < 0:
                raise DatasetError(PARSE_ERROR, f"grade {grade} is negative", line=lineno)
            qrels.add(topic_id, doc_id, grade)
    return qrels

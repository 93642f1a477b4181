import json
import sys
from collections.abc import Iterator
from pathlib import Path
from typing import Any

import pytest
from loguru import logger

from src.schemas.corpus import Corpus
from src.services.corpus import CitationGraph, build_citation_graph, parse_corpus


def mention(sentence: int, alone: bool = True, first: bool = False) -> dict[str, Any]:
    return {"sentence": sentence, "alone": alone, "first": first}


def reference(
    key: str, target_id: str | None, title: str, *mentions: dict[str, Any]
) -> dict[str, Any]:
    record: dict[str, Any] = {"key": key, "target_title": title, "mentions": list(mentions)}
    if target_id is not None:
        record["target_id"] = target_id
    return record


def section(heading: str, *sentences: str) -> dict[str, Any]:
    return {"heading": heading, "sentences": list(sentences)}


# Five papers. P1 cites P2, P3 and a paper outside the corpus (X404); P4 cites
# itself, which stays unresolved. Seven resolved edges in total.
PAPERS: list[dict[str, Any]] = [
    {
        "id": "P1",
        "title": "Graph based label propagation for citation analysis",
        "year": 2010,
        "authors": ["A", "B"],
        "venue": "J1",
        "sections": [
            section("Abstract", "We study label propagation over citation graphs."),
            section(
                "1. Introduction",
                "Citation counts treat every reference alike [1].",
                "We propose a graph method for reference intensity.",
            ),
            section("Related Work", "Similar ideas were explored recently [1, 2]."),
            section(
                "Method",
                "Our model extends the graph method of [1] significantly.",
                "Unrelated systems [3] could handle text but not graphs.",
            ),
            section("Conclusions", "Label propagation on graphs predicts intensity well."),
        ],
        "references": [
            reference(
                "r1",
                "P2",
                "Graph methods for citation analysis",
                mention(1),
                mention(4, alone=False, first=True),
            ),
            reference(
                "r2", "P3", "Text features of scholarly papers", mention(3, alone=False)
            ),
            reference("r3", "X404", "A paper nobody has", mention(5)),
        ],
    },
    {
        "id": "P2",
        "title": "Graph methods for citation analysis",
        "year": 2008,
        "authors": ["B", "C"],
        "venue": "J2",
        "sections": [
            section(
                "Introduction",
                "Text features help citation analysis [a].",
                "We build graph methods on them.",
            ),
            section("Conclusion", "Graph methods work."),
        ],
        "references": [
            reference("a", "P3", "Text features of scholarly papers", mention(0)),
        ],
    },
    {
        "id": "P3",
        "title": "Text features of scholarly papers",
        "year": 2005,
        "authors": ["D"],
        "venue": "J1",
        "sections": [
            section("Abstract", "We describe text features."),
            section("Introduction", "Scholarly papers carry many features."),
        ],
        "references": [],
    },
    {
        "id": "P4",
        "title": "Influence of references",
        "year": 2011,
        "authors": ["A"],
        "venue": "J2",
        "sections": [
            section(
                "Background",
                "Graph methods [x] may measure influence.",
                "Earlier graph methods [y] but also our own work [z] were weaker.",
            ),
        ],
        "references": [
            reference("x", "P1", "Graph based label propagation", mention(0)),
            reference("y", "P2", "Graph methods for citation analysis", mention(1)),
            reference("z", "P4", "Influence of references", mention(1)),
        ],
    },
    {
        "id": "P5",
        "title": "Citation graphs at scale",
        "year": 2011,
        "authors": ["E"],
        "venue": "J3",
        "sections": [
            section(
                "Introduction",
                "Label propagation [p] scales to large graphs.",
                "Text features [q] remain useful.",
            ),
        ],
        "references": [
            reference("p", "P1", "Graph based label propagation", mention(0)),
            reference("q", "P3", "Text features of scholarly papers", mention(1)),
        ],
    },
]

# One label per class so prediction can run on the fixture.
LABELS_TSV = (
    "citing_id\treference_key\tlabel\n"
    "P1\tr1\t5\n"
    "P1\tr2\t1.6\n"
    "P2\ta\t3\n"
    "P4\tx\t4\n"
    "P5\tq\t1\n"
)


def to_jsonl(papers: list[dict[str, Any]]) -> str:
    return "".join(json.dumps(p) + "\n" for p in papers)


@pytest.fixture(autouse=True)
def _reset_logger() -> Iterator[None]:
    """Commands replace loguru sinks; put a plain stderr sink back afterwards."""
    yield
    logger.remove()
    logger.add(sys.stderr, level="WARNING")


@pytest.fixture
def corpus_text() -> str:
    return to_jsonl(PAPERS)


@pytest.fixture
def corpus(corpus_text: str) -> Corpus:
    return parse_corpus(corpus_text)


@pytest.fixture
def graph(corpus: Corpus) -> CitationGraph:
    return build_citation_graph(corpus)


@pytest.fixture
def corpus_file(tmp_path: Path, corpus_text: str) -> Path:
    path = tmp_path / "corpus.jsonl"
    path.write_text(corpus_text, encoding="utf-8")
    return path


@pytest.fixture
def labels_file(tmp_path: Path) -> Path:
    path = tmp_path / "labels.tsv"
    path.write_text(LABELS_TSV, encoding="utf-8")
    return path

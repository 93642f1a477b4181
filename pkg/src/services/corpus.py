import json
import re
from collections.abc import Iterable, Mapping
from functools import cached_property
from pathlib import Path
from typing import IO

import networkx as nx
import pydantic
from loguru import logger

from src.conf import constants
from src.schemas.corpus import (
    Corpus,
    LinguisticAnnotations,
    MentionGroup,
    Paper,
    PairId,
    Reference,
    ReferenceContext,
    Section,
    SectionCategory,
    SentenceAnnotation,
)
from src.schemas.records import (
    AnnotationRecord,
    MentionRecord,
    PaperRecord,
    ReferenceRecord,
    SectionRecord,
)
from src.services.errors import CorpusParseError, ValidationError

MIN_INTENSITY = 1.0
MAX_INTENSITY = 5.0

_SECTION_RULES = tuple(
    (SectionCategory(category), tuple(re.compile(p) for p in patterns))
    for category, patterns in constants.SECTION_KEYWORDS
)


def map_section_heading(heading: str) -> SectionCategory:
    """Map a free-text heading to its category; unmatched headings are Rest."""
    lowered = heading.lower()
    for category, patterns in _SECTION_RULES:
        if any(p.search(lowered) for p in patterns):
            return category
    return SectionCategory.REST


def _iter_lines(source: bytes | str | IO[bytes] | IO[str]) -> Iterable[tuple[int, str]]:
    # JSON strings may hold U+2028, U+0085 and friends unescaped; only "\n" ends a record.
    lines: Iterable[str | bytes]
    if isinstance(source, bytes):
        lines = source.split(b"\n")
    elif isinstance(source, str):
        lines = source.split("\n")
    else:
        lines = source
    for number, raw in enumerate(lines, start=1):
        if isinstance(raw, bytes):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as e:
                raise CorpusParseError(number, f"invalid UTF-8 at byte {e.start}") from e
        else:
            line = raw
        if line.strip():
            yield number, line


def _build_reference(
    record: ReferenceRecord, sentence_count: int, line_number: int
) -> Reference:
    mentions = sorted(record.mentions, key=lambda m: m.sentence)
    for mention in mentions:
        if mention.sentence >= sentence_count:
            raise ValidationError(
                f"line {line_number}: reference {record.key!r} mentions sentence "
                f"{mention.sentence} but the paper has {sentence_count} sentences"
            )
    return Reference(
        key=record.key,
        target_id=record.target_id,
        target_title=record.target_title,
        mention_sentences=tuple(m.sentence for m in mentions),
        mention_groups=tuple(MentionGroup(m.alone, m.first) for m in mentions),
    )


def _build_paper(record: PaperRecord, line_number: int) -> Paper:
    sections = tuple(
        Section(
            heading=s.heading,
            category=map_section_heading(s.heading),
            sentences=tuple(s.sentences),
        )
        for s in record.sections
    )
    sentence_count = sum(len(s.sentences) for s in sections)
    keys = [r.key for r in record.references]
    if len(set(keys)) != len(keys):
        raise ValidationError(f"line {line_number}: duplicate reference key in {record.id!r}")
    return Paper(
        id=record.id,
        title=record.title,
        year=record.year,
        authors=tuple(record.authors),
        venue=record.venue,
        sections=sections,
        references=tuple(
            _build_reference(r, sentence_count, line_number) for r in record.references
        ),
    )


def _resolve_targets(papers: list[Paper]) -> list[Paper]:
    """Drop target ids that do not name another corpus paper.

    A paper citing itself, or citing the same target twice, keeps only the first
    resolvable reference so each resolved reference is exactly one graph edge.
    """
    known = {p.id for p in papers}
    resolved: list[Paper] = []
    for paper in papers:
        seen: set[str] = set()
        refs: list[Reference] = []
        for ref in paper.references:
            target = ref.target_id
            if target is not None and (
                target not in known or target == paper.id or target in seen
            ):
                logger.debug(f"{paper.id}: reference {ref.key} target {target} unresolved")
                ref = ref.model_copy(update={"target_id": None})
            elif target is not None:
                seen.add(target)
            refs.append(ref)
        resolved.append(paper.model_copy(update={"references": tuple(refs)}))
    return resolved


def parse_corpus(source: bytes | str | IO[bytes] | IO[str]) -> Corpus:
    """Parse a JSON Lines corpus into an immutable `Corpus`."""
    papers: list[Paper] = []
    seen_ids: dict[str, int] = {}
    for line_number, line in _iter_lines(source):
        try:
            record = PaperRecord.model_validate_json(line)
        except pydantic.ValidationError as e:
            raise CorpusParseError(line_number, str(e)) from e
        if record.id in seen_ids:
            raise ValidationError(
                f"line {line_number}: duplicate paper id {record.id!r} "
                f"(first seen on line {seen_ids[record.id]})"
            )
        seen_ids[record.id] = line_number
        papers.append(_build_paper(record, line_number))

    corpus = Corpus(papers=tuple(_resolve_targets(papers)))
    unresolved = sum(
        1 for p in corpus.papers for r in p.references if not r.resolved
    )
    logger.info(f"Parsed {len(corpus)} papers ({unresolved} unresolved references)")
    return corpus


def load_corpus(path: Path) -> Corpus:
    with path.open("rb") as handle:
        return parse_corpus(handle)


def serialize_corpus(corpus: Corpus) -> str:
    """Inverse of `parse_corpus`; unresolved targets are written without an id."""
    lines = []
    for paper in corpus.papers:
        record = PaperRecord(
            id=paper.id,
            title=paper.title,
            year=paper.year,
            authors=list(paper.authors),
            venue=paper.venue,
            sections=[
                SectionRecord(heading=s.heading, sentences=list(s.sentences))
                for s in paper.sections
            ],
            references=[
                ReferenceRecord(
                    key=r.key,
                    target_id=r.target_id,
                    target_title=r.target_title,
                    mentions=[
                        MentionRecord(sentence=i, alone=g.alone, first=g.first_in_group)
                        for i, g in zip(r.mention_sentences, r.mention_groups, strict=True)
                    ],
                )
                for r in paper.references
            ],
        )
        lines.append(record.model_dump_json(exclude_none=True))
    return "".join(line + "\n" for line in lines)


def extract_contexts(paper: Paper, ref: Reference) -> list[ReferenceContext]:
    """One three-sentence window per mention, clipped at document boundaries."""
    total = paper.sentence_count
    sentences = paper.sentences
    categories = paper.sentence_categories
    contexts = []
    for index in ref.mention_sentences:
        if not 0 <= index < total:
            raise ValidationError(
                f"{paper.id}: mention of {ref.key!r} at sentence {index} "
                f"outside 0..{total - 1}"
            )
        window = tuple(range(max(index - 1, 0), min(index + 2, total)))
        contexts.append(
            ReferenceContext(
                sentence_index=index,
                window=window,
                sentences=tuple(sentences[i] for i in window),
                section=categories[index],
            )
        )
    return contexts


def load_labels(path: Path, corpus: Corpus | None = None) -> dict[PairId, float]:
    """Read `citing_id<TAB>reference_key<TAB>label` lines; labels may be fractional."""
    labels: dict[PairId, float] = {}
    with path.open("rb") as handle:
        for line_number, line in _iter_lines(handle):
            cells = line.rstrip("\r\n").split("\t")
            if len(cells) != 3:
                raise CorpusParseError(line_number, f"expected 3 columns, got {len(cells)}")
            citing_id, key, raw = cells
            try:
                value = float(raw)
            except ValueError as e:
                # A header row is tolerated on the first line only.
                if line_number == 1:
                    continue
                raise CorpusParseError(line_number, f"label {raw!r} is not a number") from e
            if not MIN_INTENSITY <= value <= MAX_INTENSITY:
                raise ValidationError(f"line {line_number}: label {value} outside [1, 5]")
            pair = PairId(citing_id, key)
            if corpus is not None:
                paper = corpus.by_id.get(citing_id)
                if paper is None or key not in {r.key for r in paper.references}:
                    raise ValidationError(f"line {line_number}: unknown pair {pair}")
            labels[pair] = value
    logger.info(f"Loaded {len(labels)} labels from {path}")
    return labels


def load_annotations(path: Path) -> LinguisticAnnotations:
    annotations: LinguisticAnnotations = {}
    with path.open("rb") as handle:
        for line_number, line in _iter_lines(handle):
            try:
                record = AnnotationRecord.model_validate_json(line)
            except pydantic.ValidationError as e:
                raise CorpusParseError(line_number, str(e)) from e
            annotations[(record.paper_id, record.sentence)] = SentenceAnnotation(
                tokens=tuple(record.tokens),
                pos_tags=tuple(record.pos_tags),
                main_verb=record.main_verb,
                dependencies=tuple(record.dependencies),
            )
    logger.info(f"Loaded annotations for {len(annotations)} sentences")
    return annotations


class CitationGraph:
    """Directed citing -> cited graph over every corpus paper.

    Edges optionally carry an `intensity` in [1, 5]. The wrapped networkx graph
    is frozen, so instances are read-only.
    """

    WEIGHT = "intensity"

    def __init__(self, graph: nx.DiGraph) -> None:
        self._graph = nx.freeze(graph)

    @property
    def graph(self) -> nx.DiGraph:
        return self._graph

    @property
    def nodes(self) -> list[str]:
        return list(self._graph.nodes)

    def number_of_nodes(self) -> int:
        return int(self._graph.number_of_nodes())

    def number_of_edges(self) -> int:
        return int(self._graph.number_of_edges())

    @cached_property
    def is_weighted(self) -> bool:
        return self.number_of_edges() > 0 and all(
            self.WEIGHT in data for _, _, data in self._graph.edges(data=True)
        )

    def weight(self, citing: str, cited: str) -> float | None:
        value = self._graph.edges[citing, cited].get(self.WEIGHT)
        return None if value is None else float(value)

    def in_degree(self, node: str) -> int:
        return int(self._graph.in_degree(node))

    def predecessors(self, node: str) -> list[str]:
        return list(self._graph.predecessors(node))

    def edges(self) -> list[tuple[str, str, float | None]]:
        return [
            (u, v, None if self.WEIGHT not in d else float(d[self.WEIGHT]))
            for u, v, d in self._graph.edges(data=True)
        ]

    def venue(self, node: str) -> str | None:
        value = self._graph.nodes[node].get("venue")
        return None if value is None else str(value)

    def year(self, node: str) -> int:
        return int(self._graph.nodes[node]["year"])

    def authors(self, node: str) -> tuple[str, ...]:
        return tuple(self._graph.nodes[node].get("authors", ()))


def build_citation_graph(
    corpus: Corpus,
    weights: Mapping[tuple[str, str], float] | None = None,
) -> CitationGraph:
    """Build the citation graph; with `weights`, every resolved edge is weighted."""
    graph = nx.DiGraph()
    for paper in corpus.papers:
        graph.add_node(
            paper.id, year=paper.year, venue=paper.venue, authors=paper.authors
        )
    for paper in corpus.papers:
        for ref in paper.references:
            if ref.target_id is not None:
                graph.add_edge(paper.id, ref.target_id)

    if weights is not None:
        for (citing, cited), value in weights.items():
            if not graph.has_edge(citing, cited):
                raise ValidationError(f"weight given for nonexistent edge {citing} -> {cited}")
            if not MIN_INTENSITY <= value <= MAX_INTENSITY:
                raise ValidationError(
                    f"intensity {value} for {citing} -> {cited} outside [1, 5]"
                )
            graph.edges[citing, cited][CitationGraph.WEIGHT] = float(value)
        missing = [
            (u, v) for u, v, d in graph.edges(data=True) if CitationGraph.WEIGHT not in d
        ]
        if missing:
            raise ValidationError(
                f"{len(missing)} resolved edge(s) have no intensity, e.g. {missing[0]}"
            )

    logger.info(
        f"Citation graph: {graph.number_of_nodes()} nodes, "
        f"{graph.number_of_edges()} edges, weighted={weights is not None}"
    )
    return CitationGraph(graph)

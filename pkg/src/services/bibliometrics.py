"""Citation measures with and without reference intensity."""

from collections import defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import networkx as nx
import numpy as np
from loguru import logger

from src.conf.settings import PageRankConfig, settings
from src.services.corpus import MAX_INTENSITY, CitationGraph
from src.services.errors import PreconditionError, ValidationError
from src.services.evaluation import rank_metrics
from src.utils.misc_utils import write_tsv

STACKING_SIGMAS = 3.0
MIN_STACKING_JOURNALS = 3


class Measure(str, Enum):
    RAW_CITE = "RawCite"
    RAW_PR = "RawPR"
    INF_CITE = "InfCite"
    INF_PR = "InfPR"
    H_INDEX = "h-index"
    HIF_INDEX = "hif-index"
    TOT_P = "TotP"
    TOT_C = "TotC"
    AVG_C = "AvgC"


@dataclass(frozen=True)
class PaperScoreTable:
    """Score per id for one measure. Ids are papers, or authors for author measures."""

    measure: Measure
    scores: dict[str, float]
    converged: bool = True
    iterations: int = 0

    def ranking(self) -> list[tuple[str, float, int]]:
        """(id, score, rank), best first; equal scores ordered by id."""
        ordered = sorted(self.scores.items(), key=lambda item: (-item[1], item[0]))
        return [(key, score, rank) for rank, (key, score) in enumerate(ordered, start=1)]

    def to_tsv(self, path: Path) -> None:
        write_tsv(path, ("id", "score", "rank"), self.ranking())


def _require_weighted(graph: CitationGraph) -> None:
    if graph.number_of_edges() and not graph.is_weighted:
        raise ValidationError("intensity-weighted measure requested on an unweighted graph")


def raw_cite(graph: CitationGraph) -> PaperScoreTable:
    return PaperScoreTable(
        Measure.RAW_CITE, {n: float(graph.in_degree(n)) for n in graph.nodes}
    )


def influence(graph: CitationGraph) -> dict[str, float]:
    """Inf(p): summed intensity of the citations p receives."""
    _require_weighted(graph)
    totals = dict.fromkeys(graph.nodes, 0.0)
    for _, cited, weight in graph.edges():
        totals[cited] += weight or 0.0
    return totals


def inf_cite(graph: CitationGraph) -> PaperScoreTable:
    return PaperScoreTable(Measure.INF_CITE, influence(graph))


def pagerank(
    graph: CitationGraph,
    weighted: bool = False,
    q: float | None = None,
    tol: float | None = None,
    max_iter: int | None = None,
    config: PageRankConfig | None = None,
) -> PaperScoreTable:
    """Power-iteration PageRank; dangling nodes spread their mass uniformly.

    Weighted: a node passes rank to each cited node in proportion to the
    intensity of that citation over its total outgoing intensity.
    Stops when the L1 change drops below `tol`; `converged` is False when
    `max_iter` ran out first.
    """
    config = config or settings.pagerank
    q = config.damping if q is None else q
    tol = config.tol if tol is None else tol
    max_iter = config.max_iter if max_iter is None else max_iter
    n = graph.number_of_nodes()
    if n == 0:
        raise PreconditionError("PageRank needs a non-empty graph")
    if weighted:
        _require_weighted(graph)

    nodes = sorted(graph.nodes)
    A = nx.to_scipy_sparse_array(
        graph.graph,
        nodelist=nodes,
        weight=CitationGraph.WEIGHT if weighted else None,
        format="csr",
        dtype=float,
    )
    out_weight = np.asarray(A.sum(axis=1)).ravel()
    dangling = out_weight == 0
    inverse = np.divide(1.0, out_weight, out=np.zeros(n), where=~dangling)

    x = np.full(n, 1.0 / n)
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        previous = x
        x = q * ((x * inverse) @ A + x[dangling].sum() / n) + (1 - q) / n
        if np.abs(x - previous).sum() < tol:
            converged = True
            break
    x = x / x.sum()
    if not converged:
        logger.warning(f"PageRank did not converge in {max_iter} iterations")

    measure = Measure.INF_PR if weighted else Measure.RAW_PR
    return PaperScoreTable(
        measure,
        {node: float(v) for node, v in zip(nodes, x, strict=True)},
        converged=converged,
        iterations=iteration,
    )


def h_index(values: Iterable[float]) -> int:
    """Largest h such that at least h values are >= h."""
    ordered = sorted(values, reverse=True)
    h = 0
    for position, value in enumerate(ordered, start=1):
        if value >= position:
            h = position
        else:
            break
    return h


@dataclass(frozen=True)
class AuthorProfile:
    author_id: str
    papers: tuple[str, ...]
    citations: dict[str, int]
    influence: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for paper, value in self.influence.items():
            if not 0 <= value <= MAX_INTENSITY * self.citations.get(paper, 0) + 1e-9:
                raise ValidationError(
                    f"Inf({paper}) = {value} inconsistent with "
                    f"{self.citations.get(paper, 0)} citations"
                )


def hif_index(profile: AuthorProfile) -> int:
    """h-index over summed citation intensities instead of counts."""
    return h_index(profile.influence.values())


def author_profiles(graph: CitationGraph, weighted: bool = True) -> list[AuthorProfile]:
    inf = influence(graph) if weighted else {}
    papers_by_author: dict[str, list[str]] = defaultdict(list)
    for node in sorted(graph.nodes):
        for author in graph.authors(node):
            papers_by_author[author].append(node)
    profiles = []
    for author, papers in sorted(papers_by_author.items()):
        profiles.append(
            AuthorProfile(
                author_id=author,
                papers=tuple(papers),
                citations={p: graph.in_degree(p) for p in papers},
                influence={p: inf[p] for p in papers} if weighted else {},
            )
        )
    return profiles


def author_table(
    profiles: Sequence[AuthorProfile], measure: Measure
) -> PaperScoreTable:
    """Rank authors by TotP, TotC, AvgC, h-index or hif-index."""
    scores: dict[str, float] = {}
    for profile in profiles:
        total = sum(profile.citations.values())
        if measure == Measure.TOT_P:
            scores[profile.author_id] = float(len(profile.papers))
        elif measure == Measure.TOT_C:
            scores[profile.author_id] = float(total)
        elif measure == Measure.AVG_C:
            scores[profile.author_id] = total / len(profile.papers) if profile.papers else 0.0
        elif measure == Measure.H_INDEX:
            scores[profile.author_id] = float(h_index(profile.citations.values()))
        elif measure == Measure.HIF_INDEX:
            scores[profile.author_id] = float(hif_index(profile))
        else:
            raise ValueError(f"{measure} is not an author measure")
    return PaperScoreTable(measure, scores)


def measure_correlations(
    tables: Sequence[PaperScoreTable],
) -> dict[str, dict[str, float | None]]:
    """Pairwise Spearman correlation of the tables' scores over shared ids."""
    matrix: dict[str, dict[str, float | None]] = {}
    for a in tables:
        row: dict[str, float | None] = {}
        for b in tables:
            common = sorted(set(a.scores) & set(b.scores))
            try:
                spearman, _ = rank_metrics(
                    {k: a.scores[k] for k in common}, {k: b.scores[k] for k in common}
                )
            except PreconditionError:
                spearman = None
            row[b.measure.value] = spearman
        matrix[a.measure.value] = row
    return matrix


### Journals


@dataclass(frozen=True)
class JournalYearStats:
    """Citations in a census year to one journal's items of one publication year."""

    journal: str
    year: int
    citable_items: int
    citations_received: int
    weighted_citations: float
    self_journal_citations: int

    def __post_init__(self) -> None:
        if self.self_journal_citations > self.citations_received:
            raise ValidationError("self-journal citations exceed citations received")


def _require_venues(graph: CitationGraph) -> None:
    if not any(graph.venue(n) for n in graph.nodes):
        raise PreconditionError("no paper carries venue metadata")


def journal_year_stats(
    graph: CitationGraph, journal: str, census_year: int, window: int = 2
) -> list[JournalYearStats]:
    """Stats for publication years census_year-1 .. census_year-window."""
    _require_venues(graph)
    weighted = graph.is_weighted
    stats = []
    for year in range(census_year - 1, census_year - window - 1, -1):
        items = [
            n for n in graph.nodes if graph.venue(n) == journal and graph.year(n) == year
        ]
        received = 0
        weight_sum = 0.0
        self_cites = 0
        for item in items:
            for citing in graph.predecessors(item):
                if graph.year(citing) != census_year:
                    continue
                received += 1
                weight_sum += (graph.weight(citing, item) or 0.0) if weighted else 1.0
                self_cites += graph.venue(citing) == journal
        stats.append(
            JournalYearStats(
                journal=journal,
                year=year,
                citable_items=len(items),
                citations_received=received,
                weighted_citations=weight_sum,
                self_journal_citations=self_cites,
            )
        )
    return stats


def impact_factor(
    stats: Sequence[JournalYearStats],
    weighted: bool = False,
    exclude_self: bool = False,
) -> float | None:
    """Citations (or summed intensities) per citable item over the window.

    None when the window has no citable items.
    """
    items = sum(s.citable_items for s in stats)
    if items == 0:
        return None
    if weighted:
        return sum(s.weighted_citations for s in stats) / items
    citations = sum(s.citations_received for s in stats)
    if exclude_self:
        citations -= sum(s.self_journal_citations for s in stats)
    return citations / items


def self_journal_fraction(graph: CitationGraph, journal: str) -> float:
    """Share of citations to the journal's papers that come from the journal itself."""
    _require_venues(graph)
    received = 0
    internal = 0
    for node in graph.nodes:
        if graph.venue(node) != journal:
            continue
        for citing in graph.predecessors(node):
            received += 1
            internal += graph.venue(citing) == journal
    return internal / received if received else 0.0


@dataclass(frozen=True)
class JournalImpact:
    journal: str
    impact_factor: float
    weighted_impact_factor: float
    self_fraction: float
    impact_factor_without_self: float | None = None


@dataclass(frozen=True)
class StackingEntry:
    journal: str
    impact_factor: float
    weighted_impact_factor: float
    deviation: float
    self_fraction: float
    flagged: bool
    impact_factor_without_self: float | None = None

    def as_dict(self) -> dict[str, object]:
        return {
            "journal": self.journal,
            "IF": self.impact_factor,
            "IF_if": self.weighted_impact_factor,
            "IF_without_self": self.impact_factor_without_self,
            "deviation": self.deviation,
            "self_fraction": self.self_fraction,
            "flagged": self.flagged,
        }


def journal_impacts(graph: CitationGraph, census_year: int) -> list[JournalImpact]:
    """IF and IF_if of every journal with citable items in the window."""
    _require_weighted(graph)
    journals = sorted({v for n in graph.nodes if (v := graph.venue(n))})
    impacts = []
    for journal in journals:
        stats = journal_year_stats(graph, journal, census_year)
        raw = impact_factor(stats)
        weighted = impact_factor(stats, weighted=True)
        if raw is None or weighted is None:
            logger.debug(f"{journal}: no citable items before {census_year}")
            continue
        impacts.append(
            JournalImpact(
                journal=journal,
                impact_factor=raw,
                weighted_impact_factor=weighted,
                self_fraction=self_journal_fraction(graph, journal),
                impact_factor_without_self=impact_factor(stats, exclude_self=True),
            )
        )
    return impacts


def detect_stacking(impacts: Sequence[JournalImpact]) -> list[StackingEntry]:
    """Flag journals whose IF_if - IF lies more than 3 std from the mean difference."""
    if len(impacts) < MIN_STACKING_JOURNALS:
        raise PreconditionError(
            f"stacking detection needs at least {MIN_STACKING_JOURNALS} journals, "
            f"got {len(impacts)}"
        )
    d = np.asarray([j.weighted_impact_factor - j.impact_factor for j in impacts])
    mean = float(d.mean())
    std = float(d.std())
    entries = []
    for journal, value in zip(impacts, d, strict=True):
        deviation = float(value) - mean
        flagged = std > 0 and abs(deviation) > STACKING_SIGMAS * std
        entries.append(
            StackingEntry(
                journal=journal.journal,
                impact_factor=journal.impact_factor,
                weighted_impact_factor=journal.weighted_impact_factor,
                deviation=deviation,
                self_fraction=journal.self_fraction,
                flagged=bool(flagged),
                impact_factor_without_self=journal.impact_factor_without_self,
            )
        )
    flagged_names = [e.journal for e in entries if e.flagged]
    logger.info(f"Stacking check over {len(entries)} journals flagged {flagged_names}")
    return entries


def export_weighted_edges(graph: CitationGraph, path: Path) -> None:
    """Edge list `citing<TAB>cited<TAB>intensity` for random-walk recommenders."""
    _require_weighted(graph)
    rows = sorted((u, v, float(w or 0.0)) for u, v, w in graph.edges())
    write_tsv(path, ("citing", "cited", "intensity"), rows)

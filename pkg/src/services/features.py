from collections.abc import Collection, Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from loguru import logger

from src.conf import constants
from src.conf.settings import FeatureConfig, settings
from src.schemas.corpus import (
    Corpus,
    LinguisticAnnotations,
    Paper,
    PairId,
    Reference,
    ReferenceContext,
    SectionCategory,
)
from src.services import linguistic
from src.services.corpus import CitationGraph, extract_contexts
from src.services.errors import ValidationError
from src.services.text import cosine_similarity, term_vector, tokenize_and_stem
from src.utils.misc_utils import write_tsv

NUM_CATEGORIES = len(SectionCategory)


@dataclass(frozen=True)
class WordLists:
    """Stemmed cue words. Multi-token entries ("up-to-date") match as phrases."""

    rel: frozenset[tuple[str, ...]]
    rec: frozenset[tuple[str, ...]]
    ext: frozenset[tuple[str, ...]]
    comp: frozenset[tuple[str, ...]]

    @classmethod
    def from_words(
        cls,
        rel: Iterable[str],
        rec: Iterable[str],
        ext: Iterable[str],
        comp: Iterable[str],
    ) -> "WordLists":
        def stemmed(words: Iterable[str]) -> frozenset[tuple[str, ...]]:
            forms = frozenset(tuple(tokenize_and_stem(w)) for w in words)
            forms = frozenset(f for f in forms if f)
            if not forms:
                raise ValidationError("word lists must be non-empty")
            return forms

        return cls(stemmed(rel), stemmed(rec), stemmed(ext), stemmed(comp))

    @classmethod
    def default(cls) -> "WordLists":
        return cls.from_words(
            constants.REL_WORDS,
            constants.REC_WORDS,
            constants.EXT_WORDS,
            constants.COMP_WORDS,
        )


def _contains_any(tokens: Sequence[str], forms: frozenset[tuple[str, ...]]) -> bool:
    singles = {f[0] for f in forms if len(f) == 1}
    if singles.intersection(tokens):
        return True
    for form in forms:
        width = len(form)
        if width > 1 and any(
            tuple(tokens[i : i + width]) == form for i in range(len(tokens) - width + 1)
        ):
            return True
    return False


def context_features(
    ref: Reference,
    contexts: Sequence[ReferenceContext],
    word_lists: WordLists,
) -> tuple[float, ...]:
    """CF:Alone, CF:First, CF:Relevant, CF:Recent, CF:Extreme, CF:Comp."""
    if not contexts:
        return (0.0,) * len(constants.CF_COLUMNS)

    groups = ref.mention_groups
    alone = sum(g.alone for g in groups) / len(groups) if groups else 0.0
    grouped = [g for g in groups if not g.alone]
    first = sum(g.first_in_group for g in grouped) / len(grouped) if grouped else 0.0

    stemmed = [tokenize_and_stem(c.text) for c in contexts]

    def fraction(forms: frozenset[tuple[str, ...]]) -> float:
        return sum(_contains_any(tokens, forms) for tokens in stemmed) / len(stemmed)

    return (
        alone,
        first,
        fraction(word_lists.rel),
        fraction(word_lists.rec),
        fraction(word_lists.ext),
        fraction(word_lists.comp),
    )


_SIMILARITY_TARGETS = (
    SectionCategory.ABSTRACT,
    SectionCategory.INTRODUCTION,
    SectionCategory.CONCLUSION,
)
_SF_REST_EXCLUDES = frozenset(_SIMILARITY_TARGETS)
_FF_REST_EXCLUDES = frozenset({SectionCategory.INTRODUCTION, SectionCategory.RELATED_WORK})


def similarity_features(
    paper: Paper,
    ref: Reference,
    contexts: Sequence[ReferenceContext],
) -> tuple[float, ...]:
    """Cosine of the cited title, then of the joined contexts, against parts of the paper."""
    parts = [term_vector(paper.title)]
    parts.extend(term_vector(paper.section_text(c)) for c in _SIMILARITY_TARGETS)
    parts.append(
        term_vector(
            s
            for section in paper.sections
            if section.category not in _SF_REST_EXCLUDES
            for s in section.sentences
        )
    )
    title = term_vector(ref.target_title)
    reference_context = term_vector(c.text for c in contexts)
    return tuple(cosine_similarity(title, p) for p in parts) + tuple(
        cosine_similarity(reference_context, p) for p in parts
    )


def frequency_features(paper: Paper, ref: Reference) -> tuple[float, ...]:
    """Mention counts per region, over the paper's sentence count; FF:Sec over 5."""
    total = paper.sentence_count
    if not ref.mention_sentences or total == 0:
        return (0.0,) * len(constants.FF_COLUMNS)
    categories = [paper.sentence_categories[i] for i in ref.mention_sentences]
    intro = sum(c == SectionCategory.INTRODUCTION for c in categories)
    related = sum(c == SectionCategory.RELATED_WORK for c in categories)
    rest = sum(c not in _FF_REST_EXCLUDES for c in categories)
    return (
        len(categories) / total,
        intro / total,
        related / total,
        rest / total,
        len(set(categories)) / NUM_CATEGORIES,
    )


def position_features(paper: Paper, ref: Reference) -> tuple[float, ...]:
    """PF:Begin, PF:End, PF:Mean, PF:Std; positions scaled by sentence count."""
    total = paper.sentence_count
    if not ref.mention_sentences or total == 0:
        return (0.0,) * len(constants.PF_COLUMNS)
    positions = np.asarray(ref.mention_sentences, dtype=float)
    begin = float(np.mean(positions < total / 2))
    return (
        begin,
        1.0 - begin,
        float(positions.mean()) / total,
        float(positions.std()) / total,
    )


def _reference_set(paper: Paper, exclude: str) -> set[str]:
    return {
        r.target_id
        for r in paper.references
        if r.target_id is not None and r.target_id != exclude
    }


def jaccard(a: Collection[str], b: Collection[str]) -> float:
    union = set(a) | set(b)
    if not union:
        return 0.0
    return len(set(a) & set(b)) / len(union)


def misc_features(
    paper: Paper,
    ref: Reference,
    corpus: Corpus,
    graph: CitationGraph,
) -> tuple[float, ...]:
    """MS:GCount, MS:SelfC, MS:Time, MS:CoCite; all zero for unresolved references.

    MS:Time is year(citing) - year(cited) clipped at 0, so a reference to a
    later-dated paper scores like one from the same year.
    """
    target_id = ref.target_id
    if target_id is None or target_id not in corpus.by_id:
        return (0.0,) * len(constants.MS_COLUMNS)
    cited = corpus.by_id[target_id]
    others = graph.in_degree(target_id) - int(graph.graph.has_edge(paper.id, target_id))
    self_cite = float(bool(set(paper.authors) & set(cited.authors)))
    time_gap = float(max(paper.year - cited.year, 0))
    co_cite = jaccard(_reference_set(paper, cited.id), _reference_set(cited, paper.id))
    return (float(others), self_cite, time_gap, co_cite)


@dataclass(frozen=True)
class PairFeatureVector:
    pair: PairId
    dense: dict[str, tuple[float, ...]] = field(default_factory=dict)
    sparse: frozenset[str] = frozenset()


@dataclass(frozen=True)
class FeatureMatrix:
    """Max-normalised features, one row per pair, columns named by `header`."""

    header: tuple[str, ...]
    pairs: tuple[PairId, ...]
    values: np.ndarray
    dense_columns: int

    def __post_init__(self) -> None:
        self.values.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.pairs), len(self.header))

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.header.index(name)]

    def select_groups(self, groups: Collection[str]) -> "FeatureMatrix":
        """Restrict to the columns of the given feature groups, order preserved."""
        wanted = {g.lower() for g in groups}
        keep = [i for i, name in enumerate(self.header) if _group_of(name) in wanted]
        return FeatureMatrix(
            header=tuple(self.header[i] for i in keep),
            pairs=self.pairs,
            values=self.values[:, keep].copy(),
            dense_columns=sum(1 for i in keep if i < self.dense_columns),
        )

    def to_tsv(self, path: Path) -> None:
        write_tsv(
            path,
            ("pair_id", *self.header),
            (
                (str(pair), *(float(v) for v in row))
                for pair, row in zip(self.pairs, self.values, strict=True)
            ),
        )


def _group_of(column: str) -> str:
    return column.split(":", 1)[0].lower()


def assemble_feature_matrix(
    vectors: Sequence[PairFeatureVector],
    groups: Collection[str] = constants.FEATURE_GROUPS,
    config: FeatureConfig | None = None,
    with_annotations: bool = False,
) -> FeatureMatrix:
    """Stack pair vectors and divide every dense column by its maximum."""
    if not vectors:
        raise ValidationError("cannot assemble a feature matrix from zero pairs")
    config = config or settings.features
    wanted = [g for g in constants.FEATURE_GROUPS if g in {x.lower() for x in groups}]
    if not wanted:
        raise ValidationError("at least one feature group must be enabled")

    dense_header = [c for g in wanted if g != "lf" for c in constants.DENSE_COLUMNS[g]]
    dense = np.array(
        [[v for g in wanted if g != "lf" for v in vec.dense[g]] for vec in vectors],
        dtype=float,
    ).reshape(len(vectors), len(dense_header))
    col_max = dense.max(axis=0) if dense.size else np.zeros(0)
    scale = np.where(col_max > 0, col_max, 1.0)
    dense = dense / scale

    sparse_header: list[str] = []
    if "lf" in wanted:
        sparse_header = linguistic.build_vocabulary(
            [vec.sparse for vec in vectors],
            min_pairs=config.ngram_min_pairs,
            max_ngrams=config.ngram_max_columns,
            with_annotations=with_annotations,
        )
    index = {name: i for i, name in enumerate(sparse_header)}
    sparse = np.zeros((len(vectors), len(sparse_header)))
    for row, vec in enumerate(vectors):
        for name in vec.sparse:
            column = index.get(name)
            if column is not None:
                sparse[row, column] = 1.0

    header = (*dense_header, *sparse_header)
    logger.info(
        f"Feature matrix: {len(vectors)} pairs x {len(header)} columns "
        f"({len(dense_header)} dense, groups={','.join(wanted)})"
    )
    return FeatureMatrix(
        header=tuple(header),
        pairs=tuple(v.pair for v in vectors),
        values=np.hstack([dense, sparse]),
        dense_columns=len(dense_header),
    )


class FeatureExtractor:
    """Computes `PairFeatureVector`s for pairs of one corpus.

    The graph must be the unweighted citation graph of the same corpus.
    Every method is a pure function of the constructor inputs.
    """

    def __init__(
        self,
        corpus: Corpus,
        graph: CitationGraph,
        annotations: LinguisticAnnotations | None = None,
        word_lists: WordLists | None = None,
    ) -> None:
        self.corpus = corpus
        self.graph = graph
        self.annotations = annotations
        self.word_lists = word_lists or WordLists.default()

    def extract(
        self, pair: PairId, groups: Collection[str] = constants.FEATURE_GROUPS
    ) -> PairFeatureVector:
        paper = self.corpus.by_id[pair.citing_id]
        ref = paper.reference(pair.reference_key)
        contexts = extract_contexts(paper, ref)
        dense: dict[str, tuple[float, ...]] = {}
        if "cf" in groups:
            dense["cf"] = context_features(ref, contexts, self.word_lists)
        if "sf" in groups:
            dense["sf"] = similarity_features(paper, ref, contexts)
        if "ff" in groups:
            dense["ff"] = frequency_features(paper, ref)
        if "pf" in groups:
            dense["pf"] = position_features(paper, ref)
        if "ms" in groups:
            dense["ms"] = misc_features(paper, ref, self.corpus, self.graph)
        sparse: frozenset[str] = frozenset()
        if "lf" in groups:
            sparse = linguistic.linguistic_features(paper, ref, contexts, self.annotations)
        return PairFeatureVector(pair=pair, dense=dense, sparse=sparse)

    def feature_matrix(
        self,
        pairs: Sequence[PairId] | None = None,
        groups: Collection[str] = constants.FEATURE_GROUPS,
        config: FeatureConfig | None = None,
    ) -> FeatureMatrix:
        pairs = list(pairs) if pairs is not None else self.corpus.pairs()
        groups = {g.lower() for g in groups}
        vectors = [self.extract(p, groups) for p in pairs]
        return assemble_feature_matrix(
            vectors,
            groups=groups,
            config=config,
            with_annotations=self.annotations is not None,
        )

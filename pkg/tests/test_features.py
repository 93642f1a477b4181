import math
from pathlib import Path

import numpy as np
import pytest

from src.conf import constants
from src.schemas.corpus import Corpus, PairId
from src.services.corpus import (
    CitationGraph,
    build_citation_graph,
    extract_contexts,
    parse_corpus,
)
from src.services.errors import ValidationError
from src.services.features import (
    FeatureExtractor,
    WordLists,
    assemble_feature_matrix,
    context_features,
    frequency_features,
    jaccard,
    misc_features,
    position_features,
    similarity_features,
)
from tests.conftest import mention, reference, section, to_jsonl


@pytest.fixture
def extractor(corpus: Corpus, graph: CitationGraph) -> FeatureExtractor:
    return FeatureExtractor(corpus, graph)


def test_context_features(corpus: Corpus) -> None:
    p1 = corpus.by_id["P1"]
    ref = p1.reference("r1")
    alone, first, relevant, _, extreme, comp = context_features(
        ref, extract_contexts(p1, ref), WordLists.default()
    )
    assert alone == 0.5
    assert first == 1.0
    assert relevant == 0.5
    assert extreme == 0.5
    assert comp == 0.0


def test_context_features_without_mentions(corpus: Corpus) -> None:
    p3 = corpus.by_id["P3"]
    ref = corpus.by_id["P1"].reference("r1").model_copy(
        update={"mention_sentences": (), "mention_groups": ()}
    )
    assert context_features(ref, [], WordLists.default()) == (0.0,) * 6
    assert frequency_features(p3, ref) == (0.0,) * 5
    assert position_features(p3, ref) == (0.0,) * 4


def test_word_lists_must_not_be_empty() -> None:
    with pytest.raises(ValidationError):
        WordLists.from_words([], ["new"], ["greatly"], ["weak"])


def test_multi_token_cue_matches_as_phrase(corpus: Corpus) -> None:
    words = WordLists.from_words(["graph method"], ["zzz"], ["zzz"], ["zzz"])
    p1 = corpus.by_id["P1"]
    ref = p1.reference("r1")
    relevant = context_features(ref, extract_contexts(p1, ref), words)[2]
    assert relevant == 1.0


def test_relevant_grows_with_relevance_words(corpus: Corpus) -> None:
    words = WordLists.from_words(["pivotal"], ["new"], ["greatly"], ["weak"])
    for pair in corpus.pairs():
        paper = corpus.by_id[pair.citing_id]
        ref = paper.reference(pair.reference_key)
        contexts = extract_contexts(paper, ref)
        before = context_features(ref, contexts, words)[2]
        for i, context in enumerate(contexts):
            marked = context.model_copy(
                update={"sentences": (*context.sentences, "A pivotal result.")}
            )
            contexts = [*contexts[:i], marked, *contexts[i + 1 :]]
            after = context_features(ref, contexts, words)[2]
            assert after >= before
            before = after
        if contexts:
            assert before == 1.0


def test_similarity_title(corpus: Corpus) -> None:
    p1 = corpus.by_id["P1"]
    ref = p1.reference("r1")
    values = similarity_features(p1, ref, extract_contexts(p1, ref))
    assert len(values) == len(constants.SF_COLUMNS)
    assert values[0] == pytest.approx(4 / math.sqrt(35))
    assert all(0.0 <= v <= 1.0 for v in values)


def test_frequency_features(corpus: Corpus) -> None:
    p1 = corpus.by_id["P1"]
    assert frequency_features(p1, p1.reference("r1")) == pytest.approx(
        (2 / 7, 1 / 7, 0.0, 1 / 7, 2 / 5)
    )
    # the only mention sits in Related Work
    assert frequency_features(p1, p1.reference("r2")) == pytest.approx(
        (1 / 7, 0.0, 1 / 7, 0.0, 1 / 5)
    )


def test_position_features(corpus: Corpus) -> None:
    p1 = corpus.by_id["P1"]
    assert position_features(p1, p1.reference("r1")) == pytest.approx(
        (0.5, 0.5, 2.5 / 7, 1.5 / 7)
    )


def test_begin_plus_end_is_one(corpus: Corpus) -> None:
    for pair in corpus.pairs():
        paper = corpus.by_id[pair.citing_id]
        ref = paper.reference(pair.reference_key)
        begin, end, _, _ = position_features(paper, ref)
        assert begin + end == 1.0


def test_misc_features(corpus: Corpus, graph: CitationGraph) -> None:
    p1 = corpus.by_id["P1"]
    assert misc_features(p1, p1.reference("r1"), corpus, graph) == (1.0, 1.0, 2.0, 1.0)
    assert misc_features(p1, p1.reference("r3"), corpus, graph) == (0.0, 0.0, 0.0, 0.0)
    p4 = corpus.by_id["P4"]
    assert misc_features(p4, p4.reference("x"), corpus, graph) == (1.0, 1.0, 1.0, 0.5)


def test_time_gap_to_later_paper_is_zero() -> None:
    papers = [
        {
            "id": "A",
            "year": 2005,
            "sections": [section("Intro", "See [1].")],
            "references": [reference("1", "B", "", mention(0))],
        },
        {"id": "B", "year": 2010},
    ]
    corpus = parse_corpus(to_jsonl(papers))
    graph = build_citation_graph(corpus)
    a = corpus.by_id["A"]
    assert misc_features(a, a.reference("1"), corpus, graph)[2] == 0.0


def test_jaccard() -> None:
    assert jaccard({"a", "b"}, {"b", "a"}) == 1.0
    assert jaccard(set(), set()) == 0.0
    assert jaccard({"a"}, {"b"}) == 0.0


def test_feature_matrix_layout(extractor: FeatureExtractor) -> None:
    matrix = extractor.feature_matrix()
    dense = sum(len(c) for c in constants.DENSE_COLUMNS.values())
    assert matrix.dense_columns == dense
    assert matrix.header[: len(constants.CF_COLUMNS)] == constants.CF_COLUMNS
    assert matrix.header[dense : dense + 2] == ("LF:hasBut", "LF:Modal")
    assert matrix.shape == (9, len(matrix.header))
    assert "LF:NGram:graph" in matrix.header


def test_dense_features_in_unit_interval(extractor: FeatureExtractor) -> None:
    values = extractor.feature_matrix().values
    assert np.all(values >= 0.0)
    assert np.all(values <= 1.0)
    assert values.max(axis=0)[: len(constants.CF_COLUMNS)].max() == 1.0


def test_single_group(extractor: FeatureExtractor) -> None:
    matrix = extractor.feature_matrix(groups=["ff"])
    assert matrix.header == constants.FF_COLUMNS
    assert matrix.shape == (9, 5)


def test_select_groups(extractor: FeatureExtractor) -> None:
    full = extractor.feature_matrix()
    pf_ms = full.select_groups(["ms", "pf"])
    assert pf_ms.header == (*constants.PF_COLUMNS, *constants.MS_COLUMNS)
    np.testing.assert_array_equal(pf_ms.column("MS:Time"), full.column("MS:Time"))


def test_matrix_is_read_only(extractor: FeatureExtractor) -> None:
    matrix = extractor.feature_matrix(groups=["pf"])
    with pytest.raises(ValueError, match="read-only"):
        matrix.values[0, 0] = 2.0


def test_assemble_rejects_empty() -> None:
    with pytest.raises(ValidationError):
        assemble_feature_matrix([])


def test_unknown_groups_rejected(extractor: FeatureExtractor) -> None:
    vectors = [extractor.extract(PairId("P1", "r1"))]
    with pytest.raises(ValidationError):
        assemble_feature_matrix(vectors, groups=["xx"])


def test_to_tsv(extractor: FeatureExtractor, tmp_path: Path) -> None:
    path = tmp_path / "features.tsv"
    extractor.feature_matrix(groups=["ms"]).to_tsv(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0].split("\t") == ["pair_id", *constants.MS_COLUMNS]
    assert lines[1].split("\t")[0] == "P1::r1"
    assert len(lines) == 10


def test_extraction_is_deterministic(corpus: Corpus, graph: CitationGraph) -> None:
    first = FeatureExtractor(corpus, graph).feature_matrix()
    second = FeatureExtractor(corpus, graph).feature_matrix()
    assert first.header == second.header
    np.testing.assert_array_equal(first.values, second.values)

"""Boolean linguistic features of a reference's contexts (the LF group).

Tagger and parser output is never computed here: POS tags, main verbs and
dependency triples come from the optional annotations sidecar.
"""

import re
from collections import Counter
from collections.abc import Iterable, Sequence

from src.conf import constants
from src.schemas.corpus import (
    LinguisticAnnotations,
    Paper,
    Reference,
    ReferenceContext,
    SentenceAnnotation,
)
from src.services.errors import ValidationError
from src.services.text import stem, tokenize, tokenize_and_stem

HAS_BUT = "LF:hasBut"
MODAL = "LF:Modal"
NGRAM_PREFIX = "LF:NGram:"
POS_PREFIX = "LF:POS:"
TENSE_PREFIX = "LF:Tense:"
MAIN_VERB_PREFIX = "LF:MainV:"
DEP_PREFIX = "LF:DepRel:"
POSP_COLUMNS = tuple(f"LF:POSP:{i}" for i in range(1, len(constants.POS_PATTERNS) + 1))

# Annotation-driven families, in column order after the fixed columns.
_ANNOTATION_PREFIXES = (POS_PREFIX, TENSE_PREFIX, MAIN_VERB_PREFIX, DEP_PREFIX)
_POS_PATTERNS = tuple(re.compile(p) for p in constants.POS_PATTERNS)
_MODAL_TAG = "MD"


def ngrams(tokens: Sequence[str], max_n: int = 3) -> set[str]:
    grams = set()
    for n in range(1, max_n + 1):
        for i in range(len(tokens) - n + 1):
            grams.add(" ".join(tokens[i : i + n]))
    return grams


def pos_pattern_hits(tag_string: str) -> list[bool]:
    """Which of the seven tag patterns fully match the joined tag string."""
    return [p.fullmatch(tag_string) is not None for p in _POS_PATTERNS]


def _tag_string(annotation: SentenceAnnotation, ref: Reference) -> str:
    tags = [
        constants.CITATION_TAG if token in (ref.key, constants.CITATION_TAG) else tag
        for token, tag in zip(annotation.tokens, annotation.pos_tags, strict=True)
    ]
    return " ".join(tags)


def _check_alignment(paper_id: str, index: int, annotation: SentenceAnnotation) -> None:
    if len(annotation.tokens) != len(annotation.pos_tags):
        raise ValidationError(
            f"{paper_id} sentence {index}: {len(annotation.tokens)} tokens but "
            f"{len(annotation.pos_tags)} POS tags"
        )


def _annotation_features(
    annotation: SentenceAnnotation, ref: Reference
) -> set[str]:
    active = {POS_PREFIX + tag for tag in annotation.pos_tags}
    if _MODAL_TAG in annotation.pos_tags:
        active.add(MODAL)
    if annotation.main_verb:
        active.add(MAIN_VERB_PREFIX + stem(annotation.main_verb.lower()))
        tags = dict(zip(annotation.tokens, annotation.pos_tags, strict=True))
        tense = tags.get(annotation.main_verb)
        if tense is not None:
            active.add(TENSE_PREFIX + tense)
    hits = pos_pattern_hits(_tag_string(annotation, ref))
    active.update(name for name, hit in zip(POSP_COLUMNS, hits, strict=True) if hit)
    return active


def linguistic_features(
    paper: Paper,
    ref: Reference,
    contexts: Sequence[ReferenceContext],
    annotations: LinguisticAnnotations | None = None,
) -> frozenset[str]:
    """Names of the Boolean LF features that are on for this pair.

    Without annotations only n-grams, hasBut and modal presence are produced.
    """
    active: set[str] = set()
    for context in contexts:
        active.update(NGRAM_PREFIX + g for g in ngrams(tokenize_and_stem(context.text)))
        words = tokenize(paper.sentences[context.sentence_index])
        if "but" in words:
            active.add(HAS_BUT)
        if constants.MODAL_WORDS.intersection(words):
            active.add(MODAL)

        if annotations is None:
            continue
        reference_sentence = annotations.get((paper.id, context.sentence_index))
        if reference_sentence is not None:
            _check_alignment(paper.id, context.sentence_index, reference_sentence)
            active.update(_annotation_features(reference_sentence, ref))
        for index in context.window:
            annotation = annotations.get((paper.id, index))
            if annotation is None:
                continue
            _check_alignment(paper.id, index, annotation)
            active.update(
                f"{DEP_PREFIX}{rel.lower()}({stem(head.lower())},{stem(dep.lower())})"
                for rel, head, dep in annotation.dependencies
            )
    return frozenset(active)


def build_vocabulary(
    active_sets: Iterable[frozenset[str]],
    min_pairs: int,
    max_ngrams: int,
    with_annotations: bool,
) -> list[str]:
    """Column names of the LF block, in a fixed order.

    hasBut and Modal always come first, then the seven pattern columns when
    annotations were supplied, then observed annotation features sorted by
    name, then n-grams seen in at least `min_pairs` pairs, most frequent first
    and capped at `max_ngrams`.
    """
    document_frequency: Counter[str] = Counter()
    for active in active_sets:
        document_frequency.update(active)

    header = [HAS_BUT, MODAL]
    if with_annotations:
        header.extend(POSP_COLUMNS)
        for prefix in _ANNOTATION_PREFIXES:
            header.extend(sorted(n for n in document_frequency if n.startswith(prefix)))

    grams = [
        (name, count)
        for name, count in document_frequency.items()
        if name.startswith(NGRAM_PREFIX) and count >= min_pairs
    ]
    grams.sort(key=lambda item: (-item[1], item[0]))
    header.extend(name for name, _ in grams[:max_ngrams])
    return header

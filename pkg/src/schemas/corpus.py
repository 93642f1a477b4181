from enum import Enum
from functools import cached_property
from typing import NamedTuple

from pydantic import Field

from src.conf import constants
from src.schemas.base import FrozenModel


class SectionCategory(str, Enum):
    """Broad section classes a heading is mapped to."""

    ABSTRACT = constants.ABSTRACT
    INTRODUCTION = constants.INTRODUCTION
    RELATED_WORK = constants.RELATED_WORK
    CONCLUSION = constants.CONCLUSION
    REST = constants.REST


class MentionGroup(NamedTuple):
    alone: bool
    first_in_group: bool


class PairId(NamedTuple):
    """A paper-reference pair: the unit of prediction."""

    citing_id: str
    reference_key: str

    def __str__(self) -> str:
        return f"{self.citing_id}::{self.reference_key}"


class Section(FrozenModel):
    heading: str
    category: SectionCategory
    sentences: tuple[str, ...]


class Reference(FrozenModel):
    key: str
    target_id: str | None = None
    target_title: str = ""
    mention_sentences: tuple[int, ...] = ()
    mention_groups: tuple[MentionGroup, ...] = ()

    @property
    def resolved(self) -> bool:
        return self.target_id is not None


class Paper(FrozenModel):
    """One article. Sentence indices are global, 0-based and contiguous."""

    id: str = Field(min_length=1)
    title: str = ""
    year: int
    authors: tuple[str, ...] = ()
    venue: str | None = None
    sections: tuple[Section, ...] = ()
    references: tuple[Reference, ...] = ()

    @cached_property
    def sentences(self) -> tuple[str, ...]:
        return tuple(s for section in self.sections for s in section.sentences)

    @cached_property
    def sentence_categories(self) -> tuple[SectionCategory, ...]:
        """Section category of every global sentence index."""
        return tuple(
            section.category
            for section in self.sections
            for _ in section.sentences
        )

    @property
    def sentence_count(self) -> int:
        return len(self.sentences)

    def section_text(self, category: SectionCategory) -> str:
        return " ".join(
            s for section in self.sections if section.category == category
            for s in section.sentences
        )

    def reference(self, key: str) -> Reference:
        for ref in self.references:
            if ref.key == key:
                return ref
        raise KeyError(key)


class Corpus(FrozenModel):
    papers: tuple[Paper, ...] = ()

    @cached_property
    def by_id(self) -> dict[str, Paper]:
        return {paper.id: paper for paper in self.papers}

    def __len__(self) -> int:
        return len(self.papers)

    def pairs(self) -> list[PairId]:
        """Every (citing paper, reference) pair in corpus order."""
        return [
            PairId(paper.id, ref.key) for paper in self.papers for ref in paper.references
        ]


class ReferenceContext(FrozenModel):
    sentence_index: int
    window: tuple[int, ...] = Field(
        description="Global indices of previous, reference and next sentence."
    )
    sentences: tuple[str, ...]
    section: SectionCategory

    @property
    def text(self) -> str:
        return " ".join(self.sentences)


class SentenceAnnotation(FrozenModel):
    """Pre-computed tagger/parser output for one sentence."""

    tokens: tuple[str, ...]
    pos_tags: tuple[str, ...]
    main_verb: str | None = None
    dependencies: tuple[tuple[str, str, str], ...] = ()


# (paper id, global sentence index) -> annotation
LinguisticAnnotations = dict[tuple[str, int], SentenceAnnotation]

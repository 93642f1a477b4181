"""Wire formats: one pydantic model per JSON Lines record kind."""

from pydantic import Field

from src.schemas.base import NoExtraBasicModel


class MentionRecord(NoExtraBasicModel):
    sentence: int = Field(ge=0, description="Global 0-based sentence index.")
    alone: bool = True
    first: bool = Field(
        default=False, description="First marker of a grouped citation."
    )


class ReferenceRecord(NoExtraBasicModel):
    key: str = Field(min_length=1)
    target_id: str | None = None
    target_title: str = ""
    mentions: list[MentionRecord] = Field(default_factory=list)


class SectionRecord(NoExtraBasicModel):
    heading: str = ""
    sentences: list[str] = Field(default_factory=list)


class PaperRecord(NoExtraBasicModel):
    """One line of the corpus file."""

    id: str = Field(min_length=1)
    title: str = ""
    year: int
    authors: list[str] = Field(default_factory=list)
    venue: str | None = None
    sections: list[SectionRecord] = Field(default_factory=list)
    references: list[ReferenceRecord] = Field(default_factory=list)


class AnnotationRecord(NoExtraBasicModel):
    """One line of the annotations sidecar: tags for one sentence."""

    paper_id: str = Field(min_length=1)
    sentence: int = Field(ge=0)
    tokens: list[str]
    pos_tags: list[str]
    main_verb: str | None = None
    dependencies: list[tuple[str, str, str]] = Field(default_factory=list)

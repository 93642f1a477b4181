from pydantic import BaseModel, ConfigDict


class BasicModel(BaseModel):
    """Pydantic model with basic configs for all other models."""

    model_config = ConfigDict(use_enum_values=True)


class FrozenModel(BasicModel):
    """Immutable domain object; safe to share across threads once built.

    Enum fields keep their members so they hash like the constants they are
    compared against.
    """

    model_config = ConfigDict(frozen=True, use_enum_values=False)


class NoExtraBasicModel(BasicModel):
    """Pydantic model which does not allow extra fields."""

    model_config = ConfigDict(extra="forbid")

from typing import Literal

from dotenv import load_dotenv
from pydantic import Field, field_validator
from pydantic_settings import SettingsConfigDict

from src.conf.base_settings import ENV_PREFIX, BaseSettings

load_dotenv()  # Load environment variables from .env file


class GraLapConfig(BaseSettings):
    """Label propagation parameters."""

    tol: float = Field(
        default=1e-6,
        gt=0,
        description="Stop when max |dY| over unlabeled rows drops below this.",
    )
    max_iter: int = Field(default=1000, ge=1, description="Iteration cap.")
    epsilon_cutoff: float | None = Field(
        default=None,
        ge=0,
        description="Drop off-diagonal weights below this value. Off when unset.",
    )
    mode: Literal["gralap", "plain"] = Field(
        default="gralap",
        description="'plain': row-normalised W, no class mass scaling.",
    )
    expected_intensity: bool = Field(
        default=False,
        description="Weight graph edges by sum(l * p_l) instead of the hard label.",
    )

    model_config = SettingsConfigDict(env_prefix=f"{ENV_PREFIX}GRALAP_")


class PageRankConfig(BaseSettings):
    """PageRank parameters."""

    damping: float = Field(default=0.85, gt=0, lt=1, description="Damping q.")
    tol: float = Field(default=1e-10, gt=0)
    max_iter: int = Field(default=200, ge=1)

    model_config = SettingsConfigDict(env_prefix=f"{ENV_PREFIX}PAGERANK_")


class FeatureConfig(BaseSettings):
    """Feature extraction parameters."""

    ngram_min_pairs: int = Field(
        default=2, ge=1, description="Keep n-grams seen in at least this many pairs."
    )
    ngram_max_columns: int = Field(default=20_000, ge=0)

    model_config = SettingsConfigDict(env_prefix=f"{ENV_PREFIX}FEATURES_")


class LoggingConfig(BaseSettings):
    """Loguru sink configuration."""

    level: str = Field(default="INFO", description="Minimum level sent to stderr.")
    serialize: bool = Field(default=False, description="Emit JSON log lines.")

    @field_validator("level")
    @classmethod
    def upper_level(cls, value: str) -> str:
        return value.upper()

    model_config = SettingsConfigDict(env_prefix=f"{ENV_PREFIX}LOG_")


class Settings(BaseSettings):
    """Application settings."""

    gralap: GraLapConfig = GraLapConfig()
    pagerank: PageRankConfig = PageRankConfig()
    features: FeatureConfig = FeatureConfig()
    log: LoggingConfig = LoggingConfig()
    seed: int = Field(default=13, description="Seed for fold shuffling.")


settings = Settings()

from pydantic_settings import BaseSettings as PydanticBaseSettings
from pydantic_settings import SettingsConfigDict

ENV_PREFIX = "INTENSITY_"


class BaseSettings(PydanticBaseSettings):
    """
    Base settings class that inherits from PydanticBaseSettings.

    How it works:
    1. Pydantic reads environment variables that match the field names.
    2. It applies the `env_prefix` of the subclass. A `GraLapConfig` with
       `env_prefix="INTENSITY_GRALAP_"` populates `tol` from
       `INTENSITY_GRALAP_TOL`.
    3. It also loads variables from the `.env` file in the working directory.
    4. Type conversion is automatic ("1e-8" becomes a float).
    """

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix=ENV_PREFIX,
        env_file_encoding="utf-8",
        extra="ignore",
    )

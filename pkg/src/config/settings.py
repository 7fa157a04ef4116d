"""
Configuration settings for logging, bounded searches and random generation.
"""
from pathlib import Path
from pydantic import Field
from pydantic_settings import BaseSettings
from dotenv import load_dotenv

# Get the project root directory (where .env is located)
PROJECT_ROOT = Path(__file__).parent.parent.parent
ENV_FILE = PROJECT_ROOT / ".env"

# Load environment variables from .env file
load_dotenv(ENV_FILE)


class LoggingSettings(BaseSettings):
    """Logging configuration settings."""

    level: str = Field(default="INFO", validation_alias="LOG_LEVEL")
    file_path: str = Field(default="logs/gsft.log", validation_alias="LOG_FILE")

    model_config = {
        "env_file": str(ENV_FILE),
        "case_sensitive": False,
        "extra": "ignore"
    }


class SearchSettings(BaseSettings):
    """Budgets for the bounded searches (oracle, diagonal factorization, positivization)."""

    depth: int = Field(default=8, ge=0)
    entry_cap: int = Field(default=64, ge=1)
    seconds: float = Field(default=10.0, gt=0)
    positivize_budget_exponent: int = Field(default=3, ge=1)
    factor_depth: int = Field(default=6, ge=0)

    model_config = {
        "env_prefix": "GSFT_SEARCH_",
        "env_file": str(ENV_FILE),
        "case_sensitive": False,
        "extra": "ignore"
    }


class RandomSettings(BaseSettings):
    """Defaults for the seeded random instance generator."""

    seed: int = Field(default=0)
    density: float = Field(default=0.35, ge=0, le=1)
    max_entry: int = Field(default=2, ge=1)

    model_config = {
        "env_prefix": "GSFT_RANDOM_",
        "env_file": str(ENV_FILE),
        "case_sensitive": False,
        "extra": "ignore"
    }


# Global settings instances
logging_settings = LoggingSettings()
search_settings = SearchSettings()
random_settings = RandomSettings()

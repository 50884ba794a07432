import os
from dataclasses import dataclass
from typing import Optional

from dotenv import load_dotenv


@dataclass(frozen=True)
class Settings:
    output_dir: str
    database_url: str
    mlflow_tracking_uri: Optional[str]
    experiment_name: str
    log_level: str


def build_database_url() -> str:
    """
    Resolves the SQL result-store URL.

    An explicit GEBO_DATABASE_URL wins; otherwise the POSTGRES_* variables are
    used when POSTGRES_HOST is present (the docker-compose stack), else a local
    SQLite file.

    Returns:
        str: SQLAlchemy connection URL.
    """
    explicit = os.getenv("GEBO_DATABASE_URL")
    if explicit:
        return explicit

    if os.getenv("POSTGRES_HOST"):
        db_user = os.getenv("POSTGRES_USER", "gebo")
        db_password = os.getenv("POSTGRES_PASSWORD", "gebo")
        db_host = os.getenv("POSTGRES_HOST", "localhost")
        db_port = os.getenv("POSTGRES_PORT", "5432")
        db_name = os.getenv("POSTGRES_DB", "gebo")
        return f"postgresql+psycopg2://{db_user}:{db_password}@{db_host}:{db_port}/{db_name}"

    return "sqlite:///gebo_results.db"


def load_settings() -> Settings:
    """
    Loads runtime settings from the environment (and a .env file, if present).

    Returns:
        Settings: Resolved settings.
    """
    load_dotenv()
    return Settings(
        output_dir=os.getenv("GEBO_OUTPUT_DIR", "./data/runs"),
        database_url=build_database_url(),
        mlflow_tracking_uri=os.getenv("MLFLOW_TRACKING_URI") or None,
        experiment_name=os.getenv("GEBO_EXPERIMENT_NAME", "gebo"),
        log_level=os.getenv("GEBO_LOG_LEVEL", "INFO"),
    )

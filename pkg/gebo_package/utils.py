import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd
from sqlalchemy import create_engine

from gebo_package.config import build_database_url

logger = logging.getLogger(__name__)

LOG_FORMAT = "[%(levelname)s] %(message)s"


def configure_logging(level: Union[str, int] = "INFO") -> None:
    """
    Configures the root logger once with the bracketed level prefix.
    """
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)


def read_trace(path: Union[str, Path]) -> pd.DataFrame:
    """
    Loads a JSON-lines trace into a DataFrame, one row per evaluation.

    Timing dictionaries are flattened into `time_<phase>` columns.

    Args:
        path (str | Path): Trace file written by `Trace.write_jsonl`.

    Returns:
        pd.DataFrame: The trace records.
    """
    df = pd.read_json(path, lines=True)
    if "timings" in df.columns:
        timings = pd.json_normalize(df["timings"].apply(lambda t: t if isinstance(t, dict) else {}))
        timings = timings.add_prefix("time_")
        df = pd.concat([df.drop(columns=["timings"]), timings], axis=1)
    return df


def summarize_trace(df: pd.DataFrame) -> Dict[str, Any]:
    """
    Summary of one run: final incumbent, evaluation count, replacement count and
    suggestion-time percentiles over the search phase.

    Args:
        df (pd.DataFrame): Trace frame (see `read_trace` or `Trace.to_frame`).

    Returns:
        Dict[str, Any]: JSON-serializable summary.
    """
    if df.empty:
        return {"evaluations": 0, "final_incumbent": None, "replacements": 0}

    search = df[df["phase"] == "search"] if "phase" in df.columns else df
    replacements = 0
    if "replaced" in df.columns:
        replacements = int(df["replaced"].apply(lambda r: len(r) if isinstance(r, list) else 0).sum())

    summary: Dict[str, Any] = {
        "evaluations": int(len(df)),
        "initial_points": int(len(df) - len(search)),
        "iterations": int(len(search)),
        "final_incumbent": float(df["incumbent"].iloc[-1]),
        "best_values": df.loc[df["value"].idxmax(), "values"],
        "replacements": replacements,
    }

    if "time_total" in search.columns and search["time_total"].notna().any():
        times = search["time_total"].dropna().to_numpy(dtype=float)
        summary["time_mean"] = float(times.mean())
        for q in (50, 90, 99):
            summary[f"time_p{q}"] = float(np.percentile(times, q))
    return summary


def write_summary(summary: Dict[str, Any], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, default=str)


def ingest_dataframe_to_sql(
    df: pd.DataFrame,
    table_name: str,
    if_exists: str = "append",
    database_url: Optional[str] = None,
) -> bool:
    """
    Insere um DataFrame em uma tabela SQL.

    Args:
        df (pd.DataFrame): DataFrame to store; list/dict cells are stored as JSON text.
        table_name (str): Destination table.
        if_exists (str): 'fail', 'replace' or 'append'.
        database_url (str, optional): SQLAlchemy URL; resolved from the environment when absent.

    Returns:
        bool: True when the rows were written. Failures are logged, not raised.
    """
    try:
        url = database_url or build_database_url()
        engine = create_engine(url)

        # Colunas com listas/dicionários viram JSON
        stored = df.copy()
        for col in stored.columns:
            if stored[col].apply(lambda v: isinstance(v, (list, dict))).any():
                stored[col] = stored[col].apply(json.dumps)

        stored.to_sql(name=table_name, con=engine, if_exists=if_exists, index=False, method="multi")
        logger.info("Table '%s' updated (%d rows).", table_name, len(stored))
        return True

    except Exception as e:
        logger.error("Failed to write table '%s': %s", table_name, e)
        return False

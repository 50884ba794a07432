import json
import logging

import pandas as pd
import pandas.testing as pdt
import pytest
from sqlalchemy import create_engine

from gebo_package.config import build_database_url, load_settings
from gebo_package.utils import LOG_FORMAT, configure_logging, ingest_dataframe_to_sql, read_trace, summarize_trace, write_summary


@pytest.fixture
def trace_frame():
    return pd.DataFrame({
        "t": [-2, -1, 1, 2, 3],
        "phase": ["init", "init", "search", "search", "search"],
        "values": [[0, 0.1], [1, 0.2], [2, 0.3], [0, 0.4], [1, 0.5]],
        "value": [1.0, 3.0, 2.0, 5.0, 4.0],
        "incumbent": [1.0, 3.0, 3.0, 5.0, 5.0],
        "replaced": [[], [], [], [1], [0, 1]],
        "time_total": [None, None, 1.0, 2.0, 3.0],
    })


def test_summarize_trace(trace_frame):
    # Executa a função
    summary = summarize_trace(trace_frame)

    assert summary["evaluations"] == 5
    assert summary["initial_points"] == 2
    assert summary["iterations"] == 3
    assert summary["final_incumbent"] == 5.0
    assert summary["best_values"] == [0, 0.4]
    assert summary["replacements"] == 3
    assert summary["time_mean"] == pytest.approx(2.0)
    assert summary["time_p50"] == pytest.approx(2.0)
    assert summary["time_p90"] == pytest.approx(2.8)
    assert summary["time_p99"] == pytest.approx(2.98)


def test_summarize_empty_trace():
    assert summarize_trace(pd.DataFrame()) == {"evaluations": 0, "final_incumbent": None, "replacements": 0}


def test_read_trace_flattens_timings(tmp_path):
    # Arquivo JSON-lines com dois registros
    records = [
        {"t": -1, "phase": "init", "values": [0, 0.5], "value": 1.0, "incumbent": 1.0, "replaced": [], "timings": {}},
        {"t": 1, "phase": "search", "values": [1, 0.25], "value": 2.0, "incumbent": 2.0, "replaced": [],
         "timings": {"fit": 0.5, "total": 1.5}},
    ]
    path = tmp_path / "trace.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n")

    df = read_trace(path)

    assert "timings" not in df.columns
    assert df.loc[1, "time_total"] == 1.5
    assert pd.isna(df.loc[0, "time_fit"])
    assert df.loc[1, "values"] == [1, 0.25]
    assert summarize_trace(df)["time_mean"] == 1.5


def test_write_summary(tmp_path, trace_frame):
    path = tmp_path / "summary.json"
    write_summary(summarize_trace(trace_frame), path)
    assert json.loads(path.read_text())["final_incumbent"] == 5.0


def test_ingest_dataframe_to_sql(tmp_path, trace_frame):
    url = f"sqlite:///{tmp_path / 'results.db'}"

    assert ingest_dataframe_to_sql(trace_frame, "gebo_traces", database_url=url)
    assert ingest_dataframe_to_sql(trace_frame, "gebo_traces", database_url=url)

    stored = pd.read_sql_table("gebo_traces", create_engine(url))
    assert len(stored) == 10
    # Listas são gravadas como JSON
    assert json.loads(stored.loc[4, "replaced"]) == [0, 1]
    pdt.assert_series_equal(stored["value"].head(5), trace_frame["value"], check_names=False)


def test_ingest_dataframe_to_sql_failure_is_logged(caplog, trace_frame):
    assert ingest_dataframe_to_sql(trace_frame, "gebo_traces", database_url="nosuchdialect://x") is False
    assert "Failed to write table 'gebo_traces'" in caplog.text


def test_configure_logging():
    configure_logging("DEBUG")
    root = logging.getLogger()
    assert root.level == logging.DEBUG
    assert root.handlers[0].formatter._fmt == LOG_FORMAT
    configure_logging("INFO")


def test_database_url_resolution(monkeypatch):
    monkeypatch.delenv("GEBO_DATABASE_URL", raising=False)
    monkeypatch.delenv("POSTGRES_HOST", raising=False)
    assert build_database_url() == "sqlite:///gebo_results.db"

    monkeypatch.setenv("POSTGRES_HOST", "db")
    monkeypatch.setenv("POSTGRES_USER", "u")
    monkeypatch.setenv("POSTGRES_PASSWORD", "p")
    monkeypatch.setenv("POSTGRES_DB", "runs")
    monkeypatch.delenv("POSTGRES_PORT", raising=False)
    assert build_database_url() == "postgresql+psycopg2://u:p@db:5432/runs"

    monkeypatch.setenv("GEBO_DATABASE_URL", "sqlite:///other.db")
    assert build_database_url() == "sqlite:///other.db"


def test_load_settings(monkeypatch):
    monkeypatch.setenv("GEBO_EXPERIMENT_NAME", "bench")
    monkeypatch.setenv("GEBO_LOG_LEVEL", "DEBUG")
    monkeypatch.setenv("MLFLOW_TRACKING_URI", "")
    settings = load_settings()
    assert settings.experiment_name == "bench"
    assert settings.log_level == "DEBUG"
    assert settings.mlflow_tracking_uri is None

import mlflow

from gebo_package.engine import IterationRecord, Trace
from gebo_package.tracking import log_trace_to_mlflow


def make_trace():
    records = [
        IterationRecord(t=-1, phase="init", values=[0, 0.5], value=1.0, incumbent=1.0),
        IterationRecord(t=1, phase="search", values=[1, 0.2], value=3.0, incumbent=3.0, slot=0, reward=1.0,
                        timings={"total": 0.25}),
        IterationRecord(t=2, phase="search", values=[2, 0.1], value=2.0, incumbent=3.0, slot=1, reward=0.5,
                        replaced=[1], timings={"total": 0.75}),
    ]
    return Trace(run_config={"task": "func2c", "budget": 2, "seed": 0}, task="func2c", records=records)


def test_log_trace_to_mlflow(tmp_path):
    uri = (tmp_path / "mlruns").as_uri()

    summary = log_trace_to_mlflow(make_trace(), experiment_name="gebo_test", tracking_uri=uri, tags={"study": "unit"})

    assert summary["final_incumbent"] == 3.0
    assert summary["replacements"] == 1

    runs = mlflow.search_runs(experiment_names=["gebo_test"])
    assert len(runs) == 1
    run = runs.iloc[0]
    assert run["params.budget"] == "2"
    assert run["tags.task"] == "func2c"
    assert run["tags.study"] == "unit"
    assert run["metrics.final_incumbent"] == 3.0
    assert run["metrics.time_mean"] == 0.5

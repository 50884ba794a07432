import logging
from typing import Any, Dict, Optional

import mlflow

from gebo_package.engine import Trace
from gebo_package.utils import summarize_trace

logger = logging.getLogger(__name__)


def log_trace_to_mlflow(
    trace: Trace,
    experiment_name: str = "gebo",
    tracking_uri: Optional[str] = None,
    run_name: Optional[str] = None,
    tags: Optional[Dict[str, str]] = None,
) -> Dict[str, Any]:
    """
    Logs one optimization run to mlflow.

    Run parameters come from the trace's RunConfig; step metrics are the incumbent,
    the objective value, the bandit reward and the iteration time; the summary of
    `summarize_trace` is logged as final metrics.

    Returns:
        Dict[str, Any]: The summary that was logged.
    """
    if tracking_uri:
        mlflow.set_tracking_uri(tracking_uri)
    mlflow.set_experiment(experiment_name)

    frame = trace.to_frame()
    summary = summarize_trace(frame)

    with mlflow.start_run(run_name=run_name):
        for name, value in trace.run_config.items():
            mlflow.log_param(name, value)
        mlflow.set_tag("task", trace.task)
        for key, value in (tags or {}).items():
            mlflow.set_tag(key, value)

        for step, record in enumerate(trace.records):
            mlflow.log_metric("incumbent", record.incumbent, step=step)
            mlflow.log_metric("value", record.value, step=step)
            if record.reward is not None:
                mlflow.log_metric("reward", record.reward, step=step)
            if "total" in record.timings:
                mlflow.log_metric("iteration_seconds", record.timings["total"], step=step)

        for name, value in summary.items():
            if isinstance(value, (int, float)) and value is not None:
                mlflow.log_metric(name, float(value))

    logger.info("Logged run of '%s' to mlflow experiment '%s'", trace.task, experiment_name)
    return summary

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path
from typing import Any, Dict, List, Optional

from gebo_package.config import load_settings
from gebo_package.engine import RunConfig, run_exhaustive, run_gebo, run_prior_graph, run_random_search
from gebo_package.errors import GeboError
from gebo_package.graphmold import MoldedGraph, enumerate_connected_graphs, pagerank
from gebo_package.neural import save_checkpoint
from gebo_package.utils import configure_logging, ingest_dataframe_to_sql, read_trace, summarize_trace, write_summary

logger = logging.getLogger(__name__)

# Fields with a None default and the type their flag parses to
_OPTIONAL_TYPES = {"gamma_graph": float, "gamma_node": float, "time_budget": float, "space_path": str}
# Fields that own a dedicated flag
_DEDICATED = {"task", "mode", "budget", "seed", "repeats", "space_path", "minimize"}


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--task", default=None, help="registered task id or ext:<command> (default func2c)")
    parser.add_argument("--budget", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--space", dest="space_path", default=None, help="space file for external objectives")
    parser.add_argument("--minimize", action="store_true", default=None, help="external objective reports values to minimize")
    parser.add_argument("--config", default=None, help="JSON file with RunConfig fields")

    for f in fields(RunConfig):
        if f.name in _DEDICATED:
            continue
        kind = _OPTIONAL_TYPES.get(f.name, type(f.default))
        parser.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, type=kind, default=None)


def _run_config(args: argparse.Namespace, mode: str) -> RunConfig:
    payload: Dict[str, Any] = {}
    if args.config:
        payload.update(json.loads(Path(args.config).read_text()))
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is None:
            continue
        payload[f.name] = value
    payload["mode"] = mode
    return RunConfig.from_dict(payload)


def cmd_optimize(args: argparse.Namespace) -> int:
    cfg = _run_config(args, args.mode)
    task = cfg.make_task()
    try:
        if cfg.mode == "gebo":
            trace = run_gebo(cfg, task)
        elif cfg.mode == "prior-graph":
            graph = MoldedGraph.from_dict(json.loads(Path(args.graph).read_text())) if args.graph \
                else MoldedGraph.complete(task.space.dim)
            trace = run_prior_graph(cfg, graph, task)
        else:
            trace = run_random_search(cfg, task)
    finally:
        task.close()

    trace.write_jsonl(args.out)
    summary = summarize_trace(trace.to_frame())
    logger.info("Final incumbent %.6g after %d evaluations", summary["final_incumbent"], summary["evaluations"])
    if args.report:
        write_summary(summary, args.report)
    if args.checkpoint and trace.model is not None:
        save_checkpoint(trace.model, args.checkpoint)
    if args.mlflow:
        from gebo_package.tracking import log_trace_to_mlflow

        settings = load_settings()
        log_trace_to_mlflow(trace, settings.experiment_name, settings.mlflow_tracking_uri)
    if args.to_db:
        frame = trace.to_frame()
        frame.insert(0, "task", trace.task)
        frame.insert(1, "seed", cfg.seed)
        ingest_dataframe_to_sql(frame, "gebo_traces")
    return 0


def cmd_exhaustive(args: argparse.Namespace) -> int:
    cfg = _run_config(args, "exhaustive")
    task = cfg.make_task()
    try:
        result = run_exhaustive(cfg, task)
    finally:
        task.close()

    result.table.to_csv(args.out, index=False)
    correlations_path = args.correlations or str(Path(args.out).with_suffix("")) + "_pearson.csv"
    result.correlations.to_csv(correlations_path, index=False)
    logger.info("Wrote %d graphs to %s and correlations to %s", len(result.table), args.out, correlations_path)
    if args.to_db:
        ingest_dataframe_to_sql(result.table.assign(task=task.name), "gebo_exhaustive")
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    summary = summarize_trace(read_trace(args.trace))
    if args.report:
        write_summary(summary, args.report)
    else:
        print(json.dumps(summary, indent=2, default=str))
    return 0


def cmd_enumerate(args: argparse.Namespace) -> int:
    count = 0
    for graph in enumerate_connected_graphs(args.nodes):
        print(graph.to_json())
        count += 1
    logger.info("%d connected graphs on %d nodes", count, args.nodes)
    return 0


def cmd_pagerank(args: argparse.Namespace) -> int:
    graph = MoldedGraph.from_dict(json.loads(Path(args.graph).read_text()))
    result = pagerank(graph, d=args.damping)
    print(json.dumps({"scores": result.scores.tolist(), "iterations": result.iterations}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gebo", description="Graph-embedded Bayesian optimization over mixed spaces")
    parser.add_argument("--log-level", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    optimize = sub.add_parser("optimize", help="run one optimization")
    _add_run_options(optimize)
    optimize.add_argument("--mode", choices=("gebo", "prior-graph", "random-search"), default="gebo")
    optimize.add_argument("--graph", default=None, help="prior graph JSON for prior-graph mode (default: complete)")
    optimize.add_argument("--out", default="trace.jsonl")
    optimize.add_argument("--report", default=None, help="summary JSON path")
    optimize.add_argument("--checkpoint", default=None, help="save the trained model here")
    optimize.add_argument("--mlflow", action="store_true", help="log the run to mlflow")
    optimize.add_argument("--to-db", action="store_true", help="append the trace to the SQL result store")
    optimize.set_defaults(func=cmd_optimize)

    exhaustive = sub.add_parser("exhaustive", help="prior-graph runs over every connected graph")
    _add_run_options(exhaustive)
    exhaustive.add_argument("--repeats", type=int, default=None)
    exhaustive.add_argument("--out", default="table.csv")
    exhaustive.add_argument("--correlations", default=None)
    exhaustive.add_argument("--to-db", action="store_true")
    exhaustive.set_defaults(func=cmd_exhaustive)

    analyze = sub.add_parser("analyze", help="summarize a trace file")
    analyze.add_argument("--trace", required=True)
    analyze.add_argument("--report", default=None)
    analyze.set_defaults(func=cmd_analyze)

    enumerate_ = sub.add_parser("enumerate", help="print every connected graph on n nodes")
    enumerate_.add_argument("--nodes", type=int, required=True)
    enumerate_.set_defaults(func=cmd_enumerate)

    pagerank_ = sub.add_parser("pagerank", help="PageRank scores of a graph file")
    pagerank_.add_argument("--graph", required=True)
    pagerank_.add_argument("--damping", type=float, default=0.85)
    pagerank_.set_defaults(func=cmd_pagerank)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level or load_settings().log_level)
    try:
        return args.func(args)
    except GeboError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return 2
    except (ValueError, KeyError) as e:
        logger.error("Invalid arguments: %s", e)
        return 2


if __name__ == "__main__":
    sys.exit(main())

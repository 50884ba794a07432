from flask import Flask, request, jsonify
import logging
import traceback

from gebo_package.config import load_settings
from gebo_package.engine import RunConfig, run
from gebo_package.errors import GeboError
from gebo_package.graphmold import MoldedGraph, pagerank
from gebo_package.utils import configure_logging, summarize_trace

logger = logging.getLogger(__name__)

app = Flask(__name__)

# Modos que produzem um Trace
TRACE_MODES = ("gebo", "prior-graph", "random-search")


@app.route("/health", methods=["GET"])
def health():
    return jsonify({"status": "ok"}), 200


@app.route("/optimize", methods=["POST"])
def optimize():
    try:
        logger.info("Request received on /optimize")
        content = request.get_json(silent=True)

        if not content or not isinstance(content, dict):
            return jsonify({"error": "Invalid JSON body, expected a RunConfig object"}), 400
        if str(content.get("task", "")).startswith("ext:"):
            return jsonify({"error": "external objectives are not served over HTTP"}), 400

        cfg = RunConfig.from_dict(content)
        if cfg.mode not in TRACE_MODES:
            return jsonify({"error": f"mode must be one of {TRACE_MODES}"}), 400

        trace = run(cfg)
        summary = summarize_trace(trace.to_frame())
        return jsonify({"summary": summary, "incumbent": trace.best_values, "run_config": cfg.to_dict()}), 200

    except (GeboError, ValueError, KeyError, TypeError) as e:
        logger.warning("Rejected /optimize request: %s", e)
        return jsonify({"error": str(e)}), 400

    except Exception as e:
        logger.error("Error on /optimize: %s", e)
        return jsonify({
            "error": str(e),
            "trace": traceback.format_exc()
        }), 500


@app.route("/pagerank", methods=["POST"])
def graph_pagerank():
    try:
        content = request.get_json(silent=True)
        if not content or not isinstance(content, dict):
            return jsonify({"error": "Invalid JSON body, expected a graph object"}), 400

        graph = MoldedGraph.from_dict(content)
        result = pagerank(graph, d=float(content.get("damping", 0.85)))
        return jsonify({"scores": result.scores.tolist(), "iterations": result.iterations}), 200

    except (GeboError, ValueError, KeyError, TypeError) as e:
        return jsonify({"error": str(e)}), 400

    except Exception as e:
        logger.error("Error on /pagerank: %s", e)
        return jsonify({
            "error": str(e),
            "trace": traceback.format_exc()
        }), 500


if __name__ == "__main__":
    configure_logging(load_settings().log_level)
    app.run(host="0.0.0.0", port=5007, debug=True)

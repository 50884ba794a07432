import json

from gebo_package.cli import main


def test_enumerate(capsys):
    assert main(["enumerate", "--nodes", "3"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 4
    assert {len(json.loads(line)["edges"]) for line in lines} == {2, 3}


def test_pagerank(tmp_path, capsys):
    graph = tmp_path / "star.json"
    graph.write_text(json.dumps({"n": 4, "edges": [[0, 1], [0, 2], [0, 3]]}))

    assert main(["pagerank", "--graph", str(graph)]) == 0
    scores = json.loads(capsys.readouterr().out)["scores"]
    assert abs(sum(scores) - 1.0) < 1e-9
    assert abs(scores[0] - 0.4797) < 1e-3


def test_optimize_then_analyze(tmp_path, capsys):
    out = tmp_path / "trace.jsonl"
    report = tmp_path / "summary.json"
    code = main([
        "optimize", "--task", "func2c", "--mode", "random-search",
        "--budget", "3", "--n-initial", "2", "--seed", "4",
        "--out", str(out), "--report", str(report),
    ])
    assert code == 0
    assert len(out.read_text().splitlines()) == 5
    assert json.loads(report.read_text())["iterations"] == 3

    assert main(["analyze", "--trace", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["evaluations"] == 5
    assert summary["initial_points"] == 2


def test_config_file_is_merged_with_flags(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"task": "planted_hub4", "budget": 2, "n_initial": 3, "seed": 9}))
    out = tmp_path / "trace.jsonl"

    assert main(["optimize", "--config", str(config), "--mode", "random-search", "--budget", "1", "--out", str(out)]) == 0
    first = json.loads(out.read_text().splitlines()[0])
    assert len(out.read_text().splitlines()) == 4
    assert len(first["values"]) == 4


def test_errors_exit_with_code_2(tmp_path):
    assert main(["optimize", "--task", "no_such_task", "--out", str(tmp_path / "t.jsonl")]) == 2
    assert main(["exhaustive", "--task", "planted_hub", "--out", str(tmp_path / "table.csv")]) == 2
    assert main(["optimize", "--task", "func2c", "--n-initial", "1", "--out", str(tmp_path / "t.jsonl")]) == 2

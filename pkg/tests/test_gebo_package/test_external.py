import json
import sys
import textwrap

import pytest

from gebo_package.bench import get_task
from gebo_package.errors import ProcessDied, ProtocolError, Timeout
from gebo_package.external import ExternalObjective, evaluate_external
from gebo_package.space import Configuration

ECHO = textwrap.dedent("""
    import json, sys
    for line in sys.stdin:
        request = json.loads(line)
        print(json.dumps({"value": float(sum(request["values"]))}), flush=True)
""")

GARBAGE = textwrap.dedent("""
    import sys
    for line in sys.stdin:
        print("not json", flush=True)
""")

SILENT = textwrap.dedent("""
    import sys
    for line in sys.stdin:
        pass
""")

# answers late for negative inputs
SLOW_ON_NEGATIVE = textwrap.dedent("""
    import json, sys, time
    for line in sys.stdin:
        values = json.loads(line)["values"]
        if values[0] < 0:
            time.sleep(0.5)
        print(json.dumps({"value": float(values[0])}), flush=True)
""")

NOT_UTF8 = textwrap.dedent("""
    import sys
    for line in sys.stdin:
        sys.stdout.buffer.write(b"\\xff\\xfe\\n")
        sys.stdout.buffer.flush()
""")


def stub(source):
    return [sys.executable, "-c", source]


def test_evaluate_external_round_trip():
    with ExternalObjective(stub(ECHO), timeout=10) as ext:
        assert evaluate_external(ext, Configuration((0, 0.0))) == 0.0
        assert ext(Configuration((1, 2.5))) == 3.5
        assert ext.running


def test_evaluate_external_malformed_response():
    with ExternalObjective(stub(GARBAGE), timeout=10) as ext:
        with pytest.raises(ProtocolError):
            evaluate_external(ext, Configuration((0, 0.0)))


def test_evaluate_external_timeout():
    with ExternalObjective(stub(SILENT), timeout=0.5) as ext:
        with pytest.raises(Timeout):
            evaluate_external(ext, Configuration((0, 0.0)))


def test_evaluate_external_late_answer_is_not_reused():
    with ExternalObjective(stub(SLOW_ON_NEGATIVE), timeout=0.2) as ext:
        first_pid = ext._process.pid
        with pytest.raises(Timeout):
            evaluate_external(ext, Configuration((-1.0,)))
        assert ext._process is None

        # Executa a função após o timeout: a resposta atrasada não pode ser usada
        assert evaluate_external(ext, Configuration((2.0,))) == 2.0
        assert ext._process.pid != first_pid
        assert evaluate_external(ext, Configuration((3.0,))) == 3.0


def test_evaluate_external_invalid_utf8():
    with ExternalObjective(stub(NOT_UTF8), timeout=10) as ext:
        with pytest.raises(ProtocolError):
            evaluate_external(ext, Configuration((0, 0.0)))
        assert ext._process is None


def test_evaluate_external_process_died(caplog):
    with ExternalObjective(stub("import sys; sys.exit(3)"), timeout=10) as ext:
        with pytest.raises(ProcessDied):
            evaluate_external(ext, Configuration((1, 0.25)))
    assert "pending configuration" in caplog.text


def test_external_task_with_minimize_flag(tmp_path):
    space_file = tmp_path / "space.json"
    space_file.write_text(json.dumps({"variables": [
        {"name": "a", "kind": "discrete", "cardinality": 3},
        {"name": "b", "kind": "continuous", "bounds": [0.0, 1.0]},
    ]}))
    task = get_task("ext:python -c pass", space_path=str(space_file), minimize=True)
    # replace the command with the echo stub
    task.objective.inner.command = stub(ECHO)
    try:
        assert task(Configuration((2, 0.5))) == -2.5
        assert task.metadata["minimize"] is True
    finally:
        task.close()

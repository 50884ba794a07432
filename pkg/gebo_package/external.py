import json
import logging
import math
import queue
import shlex
import subprocess
import threading
from typing import List, Optional, Sequence, Union

from gebo_package.errors import ProcessDied, ProtocolError, Timeout
from gebo_package.space import Configuration

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 600.0

# posted by the reader thread when the child writes bytes that are not UTF-8
_UNDECODABLE = object()


class ExternalObjective:
    """
    Black-box objective served by a child process over line-delimited JSON.

    Each request is one line `{"protocol": 1, "values": [...]}` on the child's
    stdin; the child answers with one line `{"value": <real>}` on stdout.
    """

    def __init__(
        self,
        command: Union[str, Sequence[str]],
        timeout: float = DEFAULT_TIMEOUT,
        protocol_version: int = PROTOCOL_VERSION,
    ):
        self.command: List[str] = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self.protocol_version = protocol_version
        self._process: Optional[subprocess.Popen] = None
        self._lines: queue.Queue = queue.Queue()

    def start(self) -> None:
        logger.info("Starting external objective: %s", " ".join(self.command))
        self._process = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        # one queue per child process
        self._lines = queue.Queue()
        threading.Thread(target=_pump, args=(self._process.stdout, self._lines), daemon=True).start()

    @property
    def running(self) -> bool:
        return self._process is not None and self._process.poll() is None

    def close(self) -> None:
        if self._process is None:
            return
        try:
            if self._process.stdin:
                self._process.stdin.close()
            self._process.wait(timeout=5)
        except (subprocess.TimeoutExpired, OSError):
            self._process.kill()
        self._process = None

    def discard(self) -> None:
        """Kills the child without waiting for it; the next evaluation starts a fresh one."""
        if self._process is None:
            return
        logger.warning("Discarding external objective process %s", self._process.pid)
        self._process.kill()
        try:
            self._process.wait(timeout=5)
        except subprocess.TimeoutExpired:
            pass
        self._process = None

    def __enter__(self) -> "ExternalObjective":
        if self._process is None:
            self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __call__(self, cfg: Configuration) -> float:
        return evaluate_external(self, cfg)


def _pump(stream, lines: queue.Queue) -> None:
    try:
        for line in stream:
            lines.put(line)
    except UnicodeDecodeError:
        lines.put(_UNDECODABLE)
        return
    except ValueError:
        # stream closed by discard
        pass
    lines.put(None)


def evaluate_external(ext: ExternalObjective, cfg: Configuration) -> float:
    """
    Sends one configuration to the child process and reads back its value.

    Args:
        ext (ExternalObjective): The objective; started on first use.
        cfg (Configuration): Configuration to evaluate.

    Returns:
        float: The value as reported by the child.

    Raises:
        Timeout: No answer within `ext.timeout` seconds; the child is killed.
        ProtocolError: The answer is not a UTF-8 JSON object with a finite numeric `value`.
        ProcessDied: The child exited before answering.
    """
    if ext._process is None:
        ext.start()

    request = json.dumps({"protocol": ext.protocol_version, "values": list(cfg.values)})
    if ext._process.poll() is not None:
        logger.error("External objective died, pending configuration: %s", request)
        raise ProcessDied(f"process exited with code {ext._process.returncode}")

    try:
        ext._process.stdin.write(request + "\n")
        ext._process.stdin.flush()
    except (BrokenPipeError, OSError) as e:
        logger.error("External objective died, pending configuration: %s", request)
        raise ProcessDied(str(e)) from e

    try:
        line = ext._lines.get(timeout=ext.timeout)
    except queue.Empty:
        ext.discard()
        raise Timeout(f"no response within {ext.timeout} s for {request}")

    if line is None:
        logger.error("External objective died, pending configuration: %s", request)
        raise ProcessDied("process closed its output before answering")
    if line is _UNDECODABLE:
        ext.discard()
        raise ProtocolError(f"response to {request} is not valid UTF-8")

    try:
        payload = json.loads(line)
        value = float(payload["value"])
    except (ValueError, TypeError, KeyError) as e:
        raise ProtocolError(f"malformed response line {line.strip()!r}") from e
    if not math.isfinite(value):
        raise ProtocolError(f"non-finite value in response {line.strip()!r}")
    return value

"""The black-box boundary: anything mapping an Image to a ProbVector.

The attack sees only classify() — never weights, gradients, or
architecture. Backends: an in-process model, a recorded-table replay, and
a line-delimited-JSON subprocess. A budget wrapper makes query cost a hard
limit instead of a statistic.

Subprocess wire protocol (stdin/stdout, one JSON object per line):
  child handshake:  {"classes": <int>, "shape": [H, W, C]}
  request:          {"id": <int>, "shape": [H, W, C], "pixels": [<floats>]}
  response:         {"id": <int>, "probs": [<floats>]}  or  {"id": ..., "error": "<msg>"}
Pixels are row-major, channel-minor; floats carry 17 significant digits so
every f64 value survives the round-trip exactly.
"""

from __future__ import annotations

import hashlib
import json
import subprocess
import threading

import numpy as np

from .errors import BudgetExhaustedError, MalformedFileError, OracleError, ShapeMismatchError
from .image import Image, ProbVector
from .netlib import NetworkModel, forward


class Oracle:
    """Base class: shape validation and the query ledger.

    query_count increments once per classify call, counted when the query
    is issued (before the backend answers). Rejected calls — an image of
    the wrong shape, a tripped budget — are not queries and do not count.
    concurrency_safe declares whether classify may be called from several
    threads at once; the counter itself is always lock-protected.
    """

    concurrency_safe = False

    def __init__(self, class_count: int, input_shape: tuple[int, int, int] | None):
        if class_count < 2:
            raise ValueError(f"an oracle needs >= 2 classes, got {class_count}")
        self.class_count = class_count
        self.input_shape = tuple(input_shape) if input_shape is not None else None
        self._count_lock = threading.Lock()
        self._query_count = 0

    @property
    def query_count(self) -> int:
        with self._count_lock:
            return self._query_count

    def classify(self, img: Image) -> ProbVector:
        if self.input_shape is not None and img.shape != self.input_shape:
            raise ShapeMismatchError(
                f"oracle expects {self.input_shape}, got {img.shape}"
            )
        with self._count_lock:
            self._query_count += 1
        probs = self._classify(img)
        if len(probs) != self.class_count:
            raise OracleError(
                f"backend returned {len(probs)} scores, declared {self.class_count} classes"
            )
        return probs

    def _classify(self, img: Image) -> ProbVector:
        raise NotImplementedError


class InProcessOracle(Oracle):
    """Wraps a NetworkModel; classification is a pure forward pass."""

    concurrency_safe = True

    def __init__(self, model: NetworkModel):
        super().__init__(model.class_count, model.input_shape)
        self._model = model

    def _classify(self, img: Image) -> ProbVector:
        return forward(self._model, img)


def image_key(img: Image) -> str:
    """Content hash used to key replay tables."""
    return hashlib.sha256(img.data.tobytes()).hexdigest()


class ReplayOracle(Oracle):
    """Answers from a recorded {image hash: scores} table, verbatim."""

    concurrency_safe = True

    def __init__(self, class_count, input_shape, entries: dict[str, list[float]]):
        super().__init__(class_count, input_shape)
        self._entries = dict(entries)

    @classmethod
    def from_file(cls, path: str) -> "ReplayOracle":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
            return cls(int(doc["classes"]), tuple(doc["shape"]), doc["entries"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise MalformedFileError(f"{path}: bad replay table ({exc})") from exc

    def _classify(self, img: Image) -> ProbVector:
        key = image_key(img)
        if key not in self._entries:
            raise OracleError(f"image {key[:12]}... not present in replay table")
        return ProbVector(np.array(self._entries[key], dtype=np.float64))


class RecordingOracle(Oracle):
    """Delegates to another oracle while capturing a replay table."""

    def __init__(self, inner: Oracle):
        super().__init__(inner.class_count, inner.input_shape)
        self.concurrency_safe = False  # table insertion order is part of the artifact
        self._inner = inner
        self._entries: dict[str, list[float]] = {}

    def _classify(self, img: Image) -> ProbVector:
        probs = self._inner.classify(img)
        self._entries[image_key(img)] = [float(v) for v in probs.scores]
        return probs

    def save_table(self, path: str) -> None:
        doc = {
            "classes": self.class_count,
            "shape": list(self.input_shape),
            "entries": self._entries,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
            fh.write("\n")


def _format_floats(values) -> str:
    return ",".join(format(float(v), ".17g") for v in values)


class SubprocessOracle(Oracle):
    """Runs an external classifier process speaking the wire protocol."""

    concurrency_safe = False  # single ordered pipe

    def __init__(self, command: list[str], handshake_timeout: float = 30.0):
        try:
            self._proc = subprocess.Popen(
                command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise OracleError(f"cannot start oracle process {command!r}: {exc}") from exc
        self._command = command
        line = self._proc.stdout.readline()
        if not line:
            self._proc.kill()
            raise OracleError(f"oracle process {command!r} closed stdout before handshake")
        try:
            hello = json.loads(line)
            class_count = int(hello["classes"])
            shape = tuple(int(v) for v in hello["shape"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            self._proc.kill()
            raise OracleError(f"bad handshake line {line!r}") from exc
        super().__init__(class_count, shape)
        self._next_id = 0

    def _classify(self, img: Image) -> ProbVector:
        self._next_id += 1
        request_id = self._next_id
        h, w, c = img.shape
        line = (
            f'{{"id":{request_id},"shape":[{h},{w},{c}],'
            f'"pixels":[{_format_floats(img.data.ravel())}]}}\n'
        )
        try:
            self._proc.stdin.write(line)
            self._proc.stdin.flush()
            reply_line = self._proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise OracleError(f"oracle process died mid-query: {exc}") from exc
        if not reply_line:
            raise OracleError("oracle process closed stdout mid-query")
        try:
            reply = json.loads(reply_line)
        except json.JSONDecodeError as exc:
            raise OracleError(f"malformed oracle reply {reply_line!r}") from exc
        if reply.get("id") != request_id:
            raise OracleError(f"reply id {reply.get('id')} != request id {request_id}")
        if "error" in reply:
            raise OracleError(f"oracle reported: {reply['error']}")
        try:
            scores = np.array(reply["probs"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise OracleError(f"unusable probs in reply {reply_line!r}") from exc
        return ProbVector(scores)

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        if self._proc.stdout is not None:
            self._proc.stdout.close()

    def __enter__(self) -> "SubprocessOracle":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


class _BudgetedOracle(Oracle):
    def __init__(self, inner: Oracle, max_queries: int):
        super().__init__(inner.class_count, inner.input_shape)
        self.concurrency_safe = inner.concurrency_safe
        self._inner = inner
        self._max = max_queries

    def classify(self, img: Image) -> ProbVector:
        # shape-rejected calls must not consume budget, so check before counting
        if self.input_shape is not None and img.shape != self.input_shape:
            raise ShapeMismatchError(
                f"oracle expects {self.input_shape}, got {img.shape}"
            )
        with self._count_lock:
            if self._query_count >= self._max:
                raise BudgetExhaustedError(
                    f"query budget of {self._max} exhausted"
                )
            self._query_count += 1
        return self._inner.classify(img)


def with_budget(oracle: Oracle, max_queries: int) -> Oracle:
    """Wrap an oracle so the (max_queries + 1)-th classify raises
    BudgetExhaustedError; results pass through untouched."""
    if max_queries <= 0:
        raise ValueError(f"max_queries must be positive, got {max_queries}")
    return _BudgetedOracle(oracle, max_queries)

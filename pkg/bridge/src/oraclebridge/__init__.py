"""Host a classifier callback behind the line-delimited-JSON query protocol.

The bridge side of the wire protocol spoken by subprocess-backed oracles:

  handshake (we emit):  {"classes": <int>, "shape": [H, W, C]}
  request (we read):    {"id": <int>, "shape": [H, W, C], "pixels": [<floats>]}
  reply (we emit):      {"id": <int>, "probs": [<floats>]}
                    or  {"id": ..., "error": "<msg>"}

One JSON object per line, replies in request order, pixels row-major and
channel-minor. Reply floats carry 17 significant digits so every f64 value
survives the round-trip exactly.

The caller supplies the actual classifier as a plain callback, so this
package needs nothing beyond the standard library and never touches a
model file itself. A failed request — unparseable line, wrong shape, a
callback that raises — becomes an error reply, never a crash: the serving
loop only stops when stdin closes. stderr is left alone for logging.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass
from typing import Callable, Sequence, TextIO

__all__ = ["BridgeConfig", "serve"]
__version__ = "0.1.0"


@dataclass
class BridgeConfig:
    """What the bridge serves: score count, input geometry, and the classifier.

    predict receives the request's pixels as a nested height x width x
    channels list of floats (row-major, channel-minor — ``np.asarray(pixels)``
    rebuilds the image array directly) and must return one finite score per
    class, each in [0, 1]. Scores that stray outside the range are clamped
    with a warning on stderr; a wrong count or a non-finite value turns the
    request into an error reply.
    """

    class_count: int
    input_shape: tuple[int, int, int]
    predict: Callable[[list], Sequence[float]]

    def __post_init__(self):
        if not isinstance(self.class_count, int) or self.class_count < 1:
            raise ValueError(f"class_count must be a positive int, got {self.class_count!r}")
        shape = tuple(self.input_shape)
        if len(shape) != 3 or any(not isinstance(v, int) or v < 1 for v in shape):
            raise ValueError(f"input_shape must be three positive ints, got {self.input_shape!r}")
        self.input_shape = shape
        if not callable(self.predict):
            raise TypeError("predict must be callable")


def serve(config: BridgeConfig, stdin: TextIO | None = None,
          stdout: TextIO | None = None, stderr: TextIO | None = None) -> None:
    """Answer queries on stdout until stdin closes.

    Emits the handshake line, then one reply per request line, in order.
    Blank lines are skipped; anything else that cannot be served produces
    an {"id": ..., "error": ...} reply and the loop carries on.
    """
    stdin = sys.stdin if stdin is None else stdin
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr

    h, w, c = config.input_shape
    stdout.write(f'{{"classes":{config.class_count},"shape":[{h},{w},{c}]}}\n')
    stdout.flush()
    for line in stdin:
        if not line.strip():
            continue
        stdout.write(_reply_line(config, line, stderr))
        stdout.flush()


def _reply_line(config: BridgeConfig, line: str, stderr: TextIO) -> str:
    request_id = None
    try:
        request = json.loads(line)
        if not isinstance(request, dict):
            raise ValueError("request is not a JSON object")
        request_id = request.get("id")
        pixels = _checked_pixels(request, config.input_shape)
        scores = _checked_scores(config.predict(pixels), config.class_count,
                                 request_id, stderr)
    except Exception as exc:  # every failure becomes a reply, the loop survives
        message = str(exc) or type(exc).__name__
        return f'{{"id":{json.dumps(request_id)},"error":{json.dumps(message)}}}\n'
    probs = ",".join(format(v, ".17g") for v in scores)
    return f'{{"id":{json.dumps(request_id)},"probs":[{probs}]}}\n'


def _checked_pixels(request: dict, shape: tuple[int, int, int]) -> list:
    """Validate one request against the handshake and unflatten its pixels."""
    h, w, c = shape
    got = request.get("shape")
    if not isinstance(got, list) or got != [h, w, c]:
        raise ValueError(f"request shape {got!r} does not match handshake shape [{h}, {w}, {c}]")
    flat = request.get("pixels")
    if not isinstance(flat, list):
        raise ValueError("request has no pixel list")
    if len(flat) != h * w * c:
        raise ValueError(f"expected {h * w * c} pixels, got {len(flat)}")
    values = [float(v) for v in flat]
    rows = []
    pos = 0
    for _ in range(h):
        row = []
        for _ in range(w):
            row.append(values[pos:pos + c])
            pos += c
        rows.append(row)
    return rows


def _checked_scores(raw, class_count: int, request_id, stderr: TextIO) -> list[float]:
    scores = [float(v) for v in raw]
    if len(scores) != class_count:
        raise ValueError(f"predict returned {len(scores)} scores, expected {class_count}")
    if not all(math.isfinite(v) for v in scores):
        raise ValueError("predict returned a non-finite score")
    clamped = [min(1.0, max(0.0, v)) for v in scores]
    strays = sum(1 for a, b in zip(scores, clamped) if a != b)
    if strays:
        print(f"oraclebridge: request {request_id}: clamped {strays} score(s) into [0, 1]",
              file=stderr)
    return clamped

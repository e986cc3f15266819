"""Client side of the external logit server protocol.

The server is any child process speaking JSON-lines over its standard
streams. One JSON object per line, strictly request/response, one request
outstanding at a time:

    -> {"kind": "hello"}
    <- {"kind": "hello", "vocab_size": <int>}
    -> {"kind": "next_logits", "tokens": [<int>, ...]}
    <- {"kind": "next_logits", "logits": [<float> x vocab_size]}
    -> {"kind": "transition_scores", "tokens": [<int>, ...]}
    <- {"kind": "transition_scores", "scores": [<float> x (n-1)]}
    -> {"kind": "shutdown"}
    <- {"kind": "shutdown"}

Any request may instead be answered with {"kind": "error", "message": ...}.
Floats travel as plain JSON numbers (shortest round-trip form); NaN and
Infinity are rejected on receipt. A connected client satisfies the logit
source protocol, so a decoder can run against it directly.
"""

from __future__ import annotations

import json
import math
import queue
import shlex
import subprocess
import threading
from typing import Sequence

import numpy as np

from .errors import BridgeError, BridgeProtocolError, BridgeTimeoutError

DEFAULT_TIMEOUT = 30.0


class BridgeClient:
    """Owns one server child process; requests are serialized."""

    def __init__(self, cmd: str | Sequence[str], timeout: float = DEFAULT_TIMEOUT):
        argv = shlex.split(cmd) if isinstance(cmd, str) else list(cmd)
        self.timeout = timeout
        self._lock = threading.Lock()
        self._closed = False
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
            )
        except OSError as e:
            raise BridgeError(f"could not start logit server {argv!r}: {e}") from e
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()
        self.vocab_size = self._handshake()

    def _read_loop(self) -> None:
        try:
            for line in self._proc.stdout:
                self._lines.put(line)
        finally:
            self._lines.put(None)

    def _next_line(self) -> str:
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise BridgeTimeoutError(
                f"logit server did not respond within {self.timeout:g} s"
            ) from None
        if line is None:
            code = self._proc.poll()
            raise BridgeError(f"logit server exited (status {code}) before responding")
        return line

    def _request(self, obj: dict) -> dict:
        with self._lock:
            if self._closed:
                raise BridgeError("bridge client is closed")
            try:
                self._proc.stdin.write(json.dumps(obj, allow_nan=False) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as e:
                raise BridgeError(f"logit server pipe broke: {e}") from e
            line = self._next_line()
        try:
            resp = json.loads(line)
        except json.JSONDecodeError:
            snippet = line.strip()
            if len(snippet) > 200:
                snippet = snippet[:200] + "..."
            raise BridgeProtocolError(f"server sent a non-JSON line: {snippet!r}") from None
        if not isinstance(resp, dict) or "kind" not in resp:
            raise BridgeProtocolError(f"server response missing a kind: {resp!r}")
        if resp["kind"] == "error":
            raise BridgeError(f"server error: {resp.get('message', '(no message)')}")
        if resp["kind"] != obj["kind"]:
            raise BridgeProtocolError(
                f"asked for {obj['kind']!r} but server answered {resp['kind']!r}"
            )
        return resp

    def _handshake(self) -> int:
        resp = self._request({"kind": "hello"})
        size = resp.get("vocab_size")
        if not isinstance(size, int) or size < 1:
            raise BridgeProtocolError(f"invalid hello vocab_size: {size!r}")
        return size

    @staticmethod
    def _floats(payload: object, expected_len: int, what: str) -> np.ndarray:
        if not isinstance(payload, list) or len(payload) != expected_len:
            got = len(payload) if isinstance(payload, list) else type(payload).__name__
            raise BridgeProtocolError(f"expected {expected_len} {what}, got {got}")
        for x in payload:
            if not isinstance(x, (int, float)) or not math.isfinite(x):
                raise BridgeProtocolError(f"non-finite or non-numeric value in {what}: {x!r}")
        return np.asarray(payload, dtype=np.float64)

    def next_logits(self, prefix: Sequence[int]) -> np.ndarray:
        resp = self._request({"kind": "next_logits", "tokens": [int(t) for t in prefix]})
        return self._floats(resp.get("logits"), self.vocab_size, "logits")

    def transition_scores(self, seq: Sequence[int]) -> np.ndarray:
        resp = self._request({"kind": "transition_scores", "tokens": [int(t) for t in seq]})
        return self._floats(resp.get("scores"), len(seq) - 1, "scores")

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            if self._proc.poll() is None:
                try:
                    self._proc.stdin.write(json.dumps({"kind": "shutdown"}) + "\n")
                    self._proc.stdin.flush()
                except (BrokenPipeError, OSError):
                    pass
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        finally:
            pass

    def __enter__(self) -> "BridgeClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

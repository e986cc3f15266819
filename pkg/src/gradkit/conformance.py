"""Replayed-fixture conformance checking for logit servers.

A fixture file scripts an ordered session: lines to send (well-formed
requests or deliberately broken raw lines) and the response each must
produce. Checks are structural (response kind, payload lengths,
finiteness), not value-exact, so one fixture exercises any conforming
server regardless of the model behind it.
"""

from __future__ import annotations

import json
import math
import queue
import subprocess
import threading
from pathlib import Path
from typing import Sequence

DEFAULT_TIMEOUT = 30.0


def run_conformance(
    cmd: Sequence[str], fixture_path: str | Path, timeout: float = DEFAULT_TIMEOUT
) -> list[str]:
    """Run the scripted session against a server command.

    Returns a list of failure descriptions; an empty list means the server
    conforms.
    """
    fixture = json.loads(Path(fixture_path).read_text(encoding="utf-8"))
    steps = fixture["steps"]
    failures: list[str] = []
    vocab_size: int | None = None

    proc = subprocess.Popen(
        list(cmd), stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, encoding="utf-8"
    )
    lines: queue.Queue[str | None] = queue.Queue()

    def pump() -> None:
        try:
            for line in proc.stdout:
                lines.put(line)
        finally:
            lines.put(None)

    threading.Thread(target=pump, daemon=True).start()
    try:
        for i, step in enumerate(steps):
            label = f"step {i}"
            if "send_raw" in step:
                payload = step["send_raw"]
            else:
                payload = json.dumps(step["send"])
            try:
                proc.stdin.write(payload + "\n")
                proc.stdin.flush()
            except (BrokenPipeError, OSError) as e:
                failures.append(f"{label}: could not write to server ({e})")
                break
            try:
                line = lines.get(timeout=timeout)
            except queue.Empty:
                failures.append(f"{label}: no response within {timeout:g} s")
                break
            if line is None:
                failures.append(f"{label}: server exited instead of responding")
                break
            try:
                resp = json.loads(line)
            except json.JSONDecodeError:
                failures.append(f"{label}: response is not JSON: {line.strip()!r}")
                continue
            if not isinstance(resp, dict):
                failures.append(f"{label}: response is not an object: {resp!r}")
                continue
            expected_kind = step["expect_kind"]
            if resp.get("kind") != expected_kind:
                failures.append(
                    f"{label}: expected kind {expected_kind!r}, got {resp.get('kind')!r}"
                )
                continue
            if expected_kind == "hello":
                size = resp.get("vocab_size")
                if not isinstance(size, int) or size < 1:
                    failures.append(f"{label}: hello vocab_size invalid: {size!r}")
                else:
                    vocab_size = size
            if expected_kind == "error" and not isinstance(resp.get("message"), str):
                failures.append(f"{label}: error response missing a message string")
            field = step.get("expect_len_field")
            if field is not None:
                want = step["expect_len"]
                if want == "vocab_size":
                    want = vocab_size
                payload_list = resp.get(field)
                if not isinstance(payload_list, list) or len(payload_list) != want:
                    got = len(payload_list) if isinstance(payload_list, list) else payload_list
                    failures.append(f"{label}: expected {want} values in {field!r}, got {got!r}")
                elif any(
                    not isinstance(x, (int, float)) or not math.isfinite(x)
                    for x in payload_list
                ):
                    failures.append(f"{label}: non-finite value in {field!r}")
    finally:
        if proc.poll() is None:
            try:
                proc.stdin.close()
            except OSError:
                pass
            try:
                proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()
    return failures

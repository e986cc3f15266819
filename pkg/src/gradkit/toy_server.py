"""Reference logit server: serves a bigram model over the wire protocol.

Run as a child process (e.g. via --bridge-cmd):

    python -m gradkit.toy_server --corpus corpus.txt

The vocabulary is built from the corpus (or loaded with --vocab so several
processes can share one). Every request gets exactly one response; requests
the server cannot honor get an error response rather than a crash, so a
client can keep the session alive.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import IO

from .errors import GradKitError
from .sources import (
    LogitSource,
    MaxAnchoredSource,
    fit_toy_model,
    next_logits,
    transition_scores,
)
from .vocab import Vocab, build_vocab, tokenize


def _error(message: str) -> dict:
    return {"kind": "error", "message": message}


def handle_request(source: LogitSource, req: object) -> tuple[dict, bool]:
    """Returns (response, keep_running)."""
    if not isinstance(req, dict) or "kind" not in req:
        return _error("request must be an object with a 'kind' field"), True
    kind = req["kind"]
    if kind == "hello":
        return {"kind": "hello", "vocab_size": source.vocab_size}, True
    if kind == "shutdown":
        return {"kind": "shutdown"}, False
    if kind in ("next_logits", "transition_scores"):
        tokens = req.get("tokens")
        if not isinstance(tokens, list) or not all(isinstance(t, int) for t in tokens):
            return _error("'tokens' must be a list of integers"), True
        if any(not 0 <= t < source.vocab_size for t in tokens):
            return _error(f"token id out of range (vocab size {source.vocab_size})"), True
        try:
            if kind == "next_logits":
                vec = next_logits(source, tokens)
                return {"kind": "next_logits", "logits": vec.tolist()}, True
            vec = transition_scores(source, tokens)
            return {"kind": "transition_scores", "scores": vec.tolist()}, True
        except GradKitError as e:
            return _error(str(e)), True
    return _error(f"unknown request kind {kind!r}"), True


def serve(source: LogitSource, stdin: IO[str], stdout: IO[str]) -> None:
    for line in stdin:
        if not line.strip():
            continue
        try:
            req = json.loads(line)
        except json.JSONDecodeError:
            resp, keep = _error("request line is not valid JSON"), True
        else:
            resp, keep = handle_request(source, req)
        stdout.write(json.dumps(resp, allow_nan=False) + "\n")
        stdout.flush()
        if not keep:
            return


def build_source(
    corpus_path: str | None, vocab_path: str | None, k: float, anchor: float | None
) -> LogitSource:
    if corpus_path is None:
        raise GradKitError("--corpus is required")
    with open(corpus_path, encoding="utf-8") as f:
        records = [line.rstrip("\n") for line in f if line.strip()]
    vocab = Vocab.load(vocab_path) if vocab_path else build_vocab(records)
    source: LogitSource = fit_toy_model([tokenize(r, vocab) for r in records], vocab, k=k)
    if anchor is not None:
        source = MaxAnchoredSource(source, anchor=anchor)
    return source


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Serve a bigram logit model over stdio")
    parser.add_argument("--corpus", required=True, help="text corpus, one record per line")
    parser.add_argument("--vocab", help="existing vocab JSON (default: build from corpus)")
    parser.add_argument("--k", type=float, default=1.0, help="add-k smoothing (default 1)")
    parser.add_argument("--anchor", type=float, default=1.0,
                        help="shift each logit row so its max equals this value")
    parser.add_argument("--raw-logits", action="store_true",
                        help="serve raw log-probabilities without anchoring")
    args = parser.parse_args(argv)
    try:
        source = build_source(
            args.corpus, args.vocab, args.k, None if args.raw_logits else args.anchor
        )
    except (GradKitError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    serve(source, sys.stdin, sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())

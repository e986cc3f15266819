"""Logit sources: producers of next-token logit vectors.

A logit source is anything with a ``vocab_size`` and the two methods below;
the decoder and graph builder only ever talk to this protocol. Three
implementations live here:

* ToyBigramModel -- an add-k smoothed bigram model fit on token sequences.
  Its logits are log-probabilities, so each vector sums to one under exp.
* ReplaySource -- returns pre-scripted vectors in order, for exact-valued
  tests and reproducible decoding fixtures.
* MaxAnchoredSource -- wraps another source and shifts each logit vector by
  a constant so its maximum sits at a fixed positive anchor. Argmax and
  softmax are shift-invariant, so greedy behaviour is untouched, but the
  shifted vectors live in the positive-evidence regime that graph
  accumulation and max-normalization expect.

The module-level ``next_logits`` / ``transition_scores`` functions validate
inputs and outputs (lengths, finiteness) and should be preferred over
calling source methods directly.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import (
    InvalidTokenError,
    ReplayUnderrunError,
    SequenceTooShortError,
    ShapeMismatchError,
)
from .vocab import Vocab


@runtime_checkable
class LogitSource(Protocol):
    """Anything that can produce next-token logits over a fixed vocabulary."""

    vocab_size: int

    def next_logits(self, prefix: Sequence[int]) -> np.ndarray: ...

    def transition_scores(self, seq: Sequence[int]) -> np.ndarray: ...


class ToyBigramModel:
    """Add-k smoothed bigram model over token ids.

    ``counts[u][v]`` is how many times v immediately followed u in the
    fitting corpus. Logits are smoothed log-probabilities conditioned on the
    last token only:

        logits[v] = ln((counts[u][v] + k) / (rowsum(u) + k * vocab_size))
    """

    def __init__(self, counts: dict[int, dict[int, int]], vocab_size: int, k: float = 1.0):
        if k <= 0:
            raise ValueError(f"smoothing k must be positive, got {k}")
        self.counts = counts
        self.vocab_size = vocab_size
        self.k = float(k)
        self._rowsums = {u: sum(row.values()) for u, row in counts.items()}

    def next_logits(self, prefix: Sequence[int]) -> np.ndarray:
        u = prefix[-1]
        if not 0 <= u < self.vocab_size:
            raise InvalidTokenError(f"token id {u} out of range (vocab size {self.vocab_size})")
        row = self.counts.get(u, {})
        denom = self._rowsums.get(u, 0) + self.k * self.vocab_size
        out = np.full(self.vocab_size, math.log(self.k / denom), dtype=np.float64)
        for v, c in row.items():
            out[v] = math.log((c + self.k) / denom)
        return out

    def transition_scores(self, seq: Sequence[int]) -> np.ndarray:
        return _scores_from_rows(self, seq)


class ReplaySource:
    """Returns scripted logit vectors in order, one per call.

    The scripted data is immutable; the read cursor is per-instance state,
    so use one instance per decoding run (or call reset between runs).
    """

    def __init__(self, vocab_size: int, steps: Sequence[Sequence[float]]):
        self.vocab_size = vocab_size
        self._steps = [np.asarray(s, dtype=np.float64) for s in steps]
        for i, s in enumerate(self._steps):
            if s.shape != (vocab_size,):
                raise ShapeMismatchError(
                    f"replay step {i} has length {s.shape[0]}, expected {vocab_size}"
                )
            if not np.isfinite(s).all():
                raise ShapeMismatchError(f"replay step {i} contains non-finite values")
        self._cursor = 0

    @property
    def remaining(self) -> int:
        return len(self._steps) - self._cursor

    def reset(self) -> None:
        self._cursor = 0

    def next_logits(self, prefix: Sequence[int]) -> np.ndarray:
        if self._cursor >= len(self._steps):
            raise ReplayUnderrunError(
                f"replay source exhausted after {len(self._steps)} steps"
            )
        out = self._steps[self._cursor]
        self._cursor += 1
        return out.copy()

    def transition_scores(self, seq: Sequence[int]) -> np.ndarray:
        return _scores_from_rows(self, seq)

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplaySource":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(int(data["vocab_size"]), data["steps"])


class MaxAnchoredSource:
    """Shift each base logit vector so its maximum equals ``anchor``.

    The shift is constant per vector, so argmax (greedy choice) and softmax
    are unchanged; only the absolute scale moves. With a positive anchor the
    top of every vector is positive, which keeps accumulated transition
    weights meaningful as evidence and keeps max-normalization active.
    """

    def __init__(self, base: LogitSource, anchor: float = 1.0):
        if anchor <= 0:
            raise ValueError(f"anchor must be positive, got {anchor}")
        self.base = base
        self.anchor = float(anchor)
        self.vocab_size = base.vocab_size

    def next_logits(self, prefix: Sequence[int]) -> np.ndarray:
        raw = self.base.next_logits(prefix)
        return raw - raw.max() + self.anchor

    def transition_scores(self, seq: Sequence[int]) -> np.ndarray:
        return _scores_from_rows(self, seq)


def _scores_from_rows(source: LogitSource, seq: Sequence[int]) -> np.ndarray:
    """Per-position lookups of the logit assigned to the actual next token."""
    n = len(seq)
    out = np.empty(n - 1, dtype=np.float64)
    for i in range(n - 1):
        row = source.next_logits(seq[: i + 1])
        nxt = seq[i + 1]
        if not 0 <= nxt < source.vocab_size:
            raise InvalidTokenError(
                f"token id {nxt} out of range (vocab size {source.vocab_size})"
            )
        out[i] = row[nxt]
    return out


def fit_toy_model(
    corpus: Iterable[Sequence[int]], vocab: Vocab | int, k: float = 1.0
) -> ToyBigramModel:
    """Count adjacent token pairs across all sequences.

    Accepts a Vocab or a bare vocabulary size. Counting is order-independent
    over the corpus.
    """
    vocab_size = len(vocab) if isinstance(vocab, Vocab) else int(vocab)
    counts: dict[int, dict[int, int]] = {}
    for seq in corpus:
        for u, v in zip(seq, seq[1:]):
            if not (0 <= u < vocab_size and 0 <= v < vocab_size):
                raise InvalidTokenError(
                    f"pair ({u}, {v}) out of range (vocab size {vocab_size})"
                )
            row = counts.setdefault(u, {})
            row[v] = row.get(v, 0) + 1
    return ToyBigramModel(counts, vocab_size, k=k)


def next_logits(source: LogitSource, prefix: Sequence[int]) -> np.ndarray:
    """Validated next-token logits for a non-empty prefix."""
    if len(prefix) == 0:
        raise SequenceTooShortError("prefix must be non-empty")
    out = source.next_logits(prefix)
    if out.shape != (source.vocab_size,):
        raise ShapeMismatchError(
            f"source returned {out.shape[0]} logits, expected {source.vocab_size}"
        )
    if not np.isfinite(out).all():
        raise ShapeMismatchError("source returned non-finite logits")
    return out


def transition_scores(source: LogitSource, seq: Sequence[int]) -> np.ndarray:
    """Validated per-position scores for a sequence of length >= 2.

    scores[i] equals next_logits(seq[:i+1])[seq[i+1]].
    """
    if len(seq) < 2:
        raise SequenceTooShortError(
            f"need at least 2 tokens to score transitions, got {len(seq)}"
        )
    out = source.transition_scores(seq)
    if out.shape != (len(seq) - 1,):
        raise ShapeMismatchError(
            f"source returned {out.shape[0]} scores for a {len(seq)}-token sequence"
        )
    if not np.isfinite(out).all():
        raise ShapeMismatchError("source returned non-finite scores")
    return out


def load_replay(path: str | Path) -> ReplaySource:
    return ReplaySource.from_file(path)

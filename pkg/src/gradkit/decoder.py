"""Graph-retrieved adaptive decoding.

Each step: pull model logits for the prefix, look up the out-edges of the
last token as a graph logit vector, max-normalize that vector against the
model logits, add it in scaled by alpha, and pick the argmax. Ties always go
to the lowest token id, so decoding is fully deterministic.

Max-normalization has two modes. "intent" scales the graph vector by
max(model)/max(graph) so the rescaled graph peaks exactly where the model
logits peak in magnitude. "literal" scales by the reciprocal ratio,
max(graph)/max(model). Both go inert (zero vector, scale factor 0) whenever
either maximum is non-positive, since the ratio would be meaningless or
sign-flipping there.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, InvalidTokenError, ShapeMismatchError
from .graph import TransitionGraph
from .sources import LogitSource, next_logits
from .vocab import EOS_ID

NORM_INTENT = "intent"
NORM_LITERAL = "literal"

# Ties in the fused argmax always break toward the lowest token id.
TIE_BREAK = "lowest-id"


@dataclass(frozen=True)
class DecoderConfig:
    alpha: float = 1.0
    norm_mode: str = NORM_INTENT
    max_tokens: int = 64
    stop_tokens: frozenset[int] = field(default_factory=lambda: frozenset({EOS_ID}))
    trace_vectors: bool = False

    def validate(self) -> None:
        if self.alpha < 0:
            raise ConfigError(f"alpha must be non-negative, got {self.alpha}")
        if self.norm_mode not in (NORM_INTENT, NORM_LITERAL):
            raise ConfigError(f"unknown norm mode {self.norm_mode!r}")
        if self.max_tokens < 1:
            raise ConfigError(f"max_tokens must be at least 1, got {self.max_tokens}")


@dataclass
class StepTrace:
    position: int
    chosen: int
    scale_factor: float
    fused_active: bool
    model_logits: np.ndarray | None = None
    graph_logits: np.ndarray | None = None
    graph_norm: np.ndarray | None = None
    final_logits: np.ndarray | None = None


def retrieve_graph_logits(graph: TransitionGraph, last: int, vocab_size: int) -> np.ndarray:
    """Dense vector of out-edge weights of `last`, zero where no edge exists."""
    if vocab_size != graph.vocab_size:
        raise ShapeMismatchError(
            f"requested length {vocab_size} but graph covers {graph.vocab_size} tokens"
        )
    if not 0 <= last < vocab_size:
        raise InvalidTokenError(f"token id {last} out of range (vocab size {vocab_size})")
    out = np.zeros(vocab_size, dtype=np.float64)
    for dst, w in graph.out_edges(last).items():
        out[dst] = w
    return out


def max_normalize(
    graph_logits: np.ndarray, model_logits: np.ndarray, mode: str = NORM_INTENT
) -> tuple[np.ndarray, float]:
    """Rescale graph logits against model logits; returns (vector, scale).

    Inert (zero vector, scale 0.0) when max(graph) <= 0 or max(model) <= 0.
    """
    if graph_logits.shape != model_logits.shape:
        raise ShapeMismatchError(
            f"graph vector has length {graph_logits.shape[0]}, "
            f"model vector has length {model_logits.shape[0]}"
        )
    if mode not in (NORM_INTENT, NORM_LITERAL):
        raise ConfigError(f"unknown norm mode {mode!r}")
    gmax = float(graph_logits.max())
    mmax = float(model_logits.max())
    if gmax <= 0.0 or mmax <= 0.0:
        return np.zeros_like(graph_logits), 0.0
    scale = mmax / gmax if mode == NORM_INTENT else gmax / mmax
    return graph_logits * scale, scale


def fuse_and_select(
    model_logits: np.ndarray, graph_norm: np.ndarray, alpha: float
) -> tuple[int, np.ndarray]:
    """final = model + alpha * graph_norm; returns (argmax, final).

    np.argmax returns the first maximal index, which is the lowest-id
    tie-break.
    """
    if model_logits.shape != graph_norm.shape:
        raise ShapeMismatchError(
            f"model vector has length {model_logits.shape[0]}, "
            f"graph vector has length {graph_norm.shape[0]}"
        )
    if alpha < 0:
        raise ConfigError(f"alpha must be non-negative, got {alpha}")
    final = model_logits + alpha * graph_norm
    return int(np.argmax(final)), final


def generate(
    source: LogitSource,
    graph: TransitionGraph,
    prompt: Sequence[int],
    config: DecoderConfig,
) -> tuple[list[int], list[StepTrace]]:
    """Greedy generation with graph fusion at every continuation step.

    Returns the continuation (prompt excluded; a chosen stop token is kept
    as the final element) and one StepTrace per emitted token.
    """
    config.validate()
    if len(prompt) == 0:
        raise ConfigError("prompt must be non-empty")
    if source.vocab_size != graph.vocab_size:
        raise ShapeMismatchError(
            f"source vocab size {source.vocab_size} != graph vocab size {graph.vocab_size}"
        )
    for t in prompt:
        if not 0 <= t < graph.vocab_size:
            raise InvalidTokenError(
                f"prompt token {t} out of range (vocab size {graph.vocab_size})"
            )

    seq = list(prompt)
    continuation: list[int] = []
    traces: list[StepTrace] = []
    for position in range(config.max_tokens):
        model = next_logits(source, seq)
        graph_vec = retrieve_graph_logits(graph, seq[-1], graph.vocab_size)
        graph_norm, scale = max_normalize(graph_vec, model, config.norm_mode)
        chosen, final = fuse_and_select(model, graph_norm, config.alpha)
        trace = StepTrace(
            position=position,
            chosen=chosen,
            scale_factor=scale,
            fused_active=bool(config.alpha > 0 and scale > 0),
        )
        if config.trace_vectors:
            trace.model_logits = model
            trace.graph_logits = graph_vec
            trace.graph_norm = graph_norm
            trace.final_logits = final
        traces.append(trace)
        seq.append(chosen)
        continuation.append(chosen)
        if chosen in config.stop_tokens:
            break
    return continuation, traces


def _top_k(vec: np.ndarray, k: int) -> list[list[float]]:
    # Sort by logit descending, lowest id first among equals.
    order = sorted(range(len(vec)), key=lambda i: (-vec[i], i))[:k]
    return [[int(i), float(vec[i])] for i in order]


def write_trace_jsonl(traces: Sequence[StepTrace], path: str | Path, top_k: int = 5) -> None:
    """One JSON object per step; top-k (id, logit) pairs included only for
    traces that retained their vectors."""
    with open(path, "w", encoding="utf-8") as f:
        for t in traces:
            obj: dict = {
                "position": t.position,
                "chosen": t.chosen,
                "scale_factor": t.scale_factor,
                "fused_active": t.fused_active,
            }
            if t.model_logits is not None:
                obj["top_model"] = _top_k(t.model_logits, top_k)
                obj["top_graph"] = _top_k(t.graph_logits, top_k)
                obj["top_graph_norm"] = _top_k(t.graph_norm, top_k)
                obj["top_final"] = _top_k(t.final_logits, top_k)
            f.write(json.dumps(obj, allow_nan=False) + "\n")

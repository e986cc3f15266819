"""Sparse weighted token transition graph.

Edges are stored only for observed transitions; an absent pair has implicit
weight zero. Weights are raw accumulated logits in 64-bit floats and may be
negative; nothing is normalized at construction time.

Binary file format ("GTTG"):

    magic   4 bytes  b"GTTG"
    version 1 byte   0x01
    vocab   u32 LE
    edges   u64 LE
    records edges x (u32 src LE, u32 dst LE, f64 weight LE), sorted by
            (src, dst) ascending

The sort makes output canonical: building twice from the same inputs yields
byte-identical files. A JSON debug form with the same ordering is provided
for inspection.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import (
    GraphFormatError,
    IncompatibleArtifactsError,
    IncompatibleGraphError,
    InvalidTokenError,
    ScoreAlignmentError,
)
from .sources import LogitSource, transition_scores
from .vocab import BOS_ID, EOS_ID, Vocab, tokenize

_MAGIC = b"GTTG"
_VERSION = 1
_HEADER = struct.Struct("<4sBIQ")
_RECORD = struct.Struct("<IId")


class TransitionGraph:
    """Directed graph over token ids with cumulative-logit edge weights."""

    def __init__(self, vocab_size: int):
        if vocab_size < 1:
            raise ValueError(f"vocab_size must be positive, got {vocab_size}")
        self.vocab_size = vocab_size
        self._edges: dict[int, dict[int, float]] = {}
        self._edge_count = 0

    @property
    def edge_count(self) -> int:
        return self._edge_count

    @property
    def node_count(self) -> int:
        """Number of tokens appearing as source or destination of an edge."""
        nodes = set(self._edges)
        for row in self._edges.values():
            nodes.update(row)
        return len(nodes)

    def _check_id(self, t: int) -> None:
        if not 0 <= t < self.vocab_size:
            raise InvalidTokenError(
                f"token id {t} out of range (vocab size {self.vocab_size})"
            )

    def add_weight(self, src: int, dst: int, delta: float) -> None:
        """Increase weight(src, dst) by delta, creating the edge at 0 first."""
        self._check_id(src)
        self._check_id(dst)
        row = self._edges.setdefault(src, {})
        if dst not in row:
            row[dst] = 0.0
            self._edge_count += 1
        row[dst] += delta

    def weight(self, src: int, dst: int) -> float:
        return self._edges.get(src, {}).get(dst, 0.0)

    def out_edges(self, src: int) -> dict[int, float]:
        """Stored out-neighbors of src with weights; empty dict if none."""
        self._check_id(src)
        return dict(self._edges.get(src, {}))

    def accumulate(self, seq: Sequence[int], scores: Sequence[float]) -> "TransitionGraph":
        """Add one scored sequence: weight(seq[i], seq[i+1]) += scores[i]."""
        if len(scores) != len(seq) - 1 and not (len(seq) <= 1 and len(scores) == 0):
            raise ScoreAlignmentError(
                f"{len(scores)} scores do not align with a {len(seq)}-token sequence"
            )
        for i, w in enumerate(scores):
            self.add_weight(seq[i], seq[i + 1], float(w))
        return self

    def iter_edges(self) -> Iterator[tuple[int, int, float]]:
        """Edges in canonical (src, dst) ascending order."""
        for src in sorted(self._edges):
            row = self._edges[src]
            for dst in sorted(row):
                yield src, dst, row[dst]

    def copy(self) -> "TransitionGraph":
        g = TransitionGraph(self.vocab_size)
        g._edges = {u: dict(row) for u, row in self._edges.items()}
        g._edge_count = self._edge_count
        return g


@dataclass(frozen=True)
class GraphStats:
    corpus_size: int
    nodes: int
    edges: int
    edge_node_ratio: float


def accumulate_sequence(
    graph: TransitionGraph, seq: Sequence[int], scores: Sequence[float]
) -> TransitionGraph:
    return graph.accumulate(seq, scores)


def build_graph(
    corpus: Iterable[str],
    vocab: Vocab,
    source: LogitSource,
    include_boundaries: bool = True,
) -> TransitionGraph:
    """Single pass over the corpus: tokenize each record, score its
    transitions once, and accumulate them into the graph.

    Addition is commutative, so any record order (or sharded build merged
    with merge_graphs) produces the same graph up to float summation order.
    ``include_boundaries=False`` drops edges touching BOS/EOS.
    """
    if len(vocab) != source.vocab_size:
        raise IncompatibleArtifactsError(
            f"vocab has {len(vocab)} tokens but source expects {source.vocab_size}"
        )
    graph = TransitionGraph(len(vocab))
    boundary = {BOS_ID, EOS_ID}
    for record in corpus:
        seq = tokenize(record, vocab)
        scores = transition_scores(source, seq)
        if include_boundaries:
            graph.accumulate(seq, scores)
        else:
            for i, w in enumerate(scores):
                if seq[i] in boundary or seq[i + 1] in boundary:
                    continue
                graph.add_weight(seq[i], seq[i + 1], float(w))
    return graph


def merge_graphs(a: TransitionGraph, b: TransitionGraph) -> TransitionGraph:
    """Edge-wise sum of two graphs over the same vocabulary."""
    if a.vocab_size != b.vocab_size:
        raise IncompatibleGraphError(
            f"cannot merge graphs with vocab sizes {a.vocab_size} and {b.vocab_size}"
        )
    out = a.copy()
    for src, dst, w in b.iter_edges():
        out.add_weight(src, dst, w)
    return out


def stats(graph: TransitionGraph, corpus_size: int) -> GraphStats:
    nodes = graph.node_count
    edges = graph.edge_count
    ratio = edges / nodes if nodes > 0 else 0.0
    return GraphStats(corpus_size=corpus_size, nodes=nodes, edges=edges, edge_node_ratio=ratio)


def save_graph(graph: TransitionGraph, path: str | Path) -> None:
    """Write the canonical binary form."""
    with open(path, "wb") as f:
        f.write(_HEADER.pack(_MAGIC, _VERSION, graph.vocab_size, graph.edge_count))
        for src, dst, w in graph.iter_edges():
            f.write(_RECORD.pack(src, dst, w))


def load_graph(path: str | Path) -> TransitionGraph:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise GraphFormatError(f"{path}: truncated header")
    magic, version, vocab_size, edge_count = _HEADER.unpack_from(data, 0)
    if magic != _MAGIC:
        raise GraphFormatError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise GraphFormatError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + edge_count * _RECORD.size
    if len(data) != expected:
        raise GraphFormatError(
            f"{path}: expected {expected} bytes for {edge_count} edges, found {len(data)}"
        )
    graph = TransitionGraph(vocab_size)
    off = _HEADER.size
    for _ in range(edge_count):
        src, dst, w = _RECORD.unpack_from(data, off)
        off += _RECORD.size
        graph._check_id(src)
        graph._check_id(dst)
        row = graph._edges.setdefault(src, {})
        if dst in row:
            raise GraphFormatError(f"{path}: duplicate edge ({src}, {dst})")
        row[dst] = w
        graph._edge_count += 1
    return graph


def graph_to_json_dict(graph: TransitionGraph) -> dict:
    return {
        "vocab_size": graph.vocab_size,
        "edges": [[src, dst, w] for src, dst, w in graph.iter_edges()],
    }


def save_graph_json(graph: TransitionGraph, path: str | Path) -> None:
    Path(path).write_text(json.dumps(graph_to_json_dict(graph)), encoding="utf-8")


def load_graph_json(path: str | Path) -> TransitionGraph:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    graph = TransitionGraph(int(data["vocab_size"]))
    for src, dst, w in data["edges"]:
        graph.add_weight(int(src), int(dst), float(w))
    return graph

"""Planted-fact benchmark and ablation harness.

The benchmark plants single-token facts: each record pairs a unique key
token with a value token ("q k042 v042"). A corrupted copy of the corpus
replaces a fraction p of the values with distractor tokens. The bigram model
is fit on the corrupted corpus, so it confidently prefers the distractor for
every corrupted fact, while the transition graph is built from the truthful
records. A decode is correct when the first generated token after the key
is the gold value, which makes the greedy-vs-fused comparison decidable by
exact match: greedy scores 1-p, and with enough fusion weight the truthful
edges override the corrupted model preferences.

The value must directly follow the key in each record: both the bigram model
and the graph condition on the last token only, so any shared marker token
between key and value would make the answer position key-blind.

Decoding runs through a max-anchored view of the bigram model. The raw
bigram emits log-probabilities, which are all negative and would leave
max-normalization permanently inert; anchoring shifts each row to the
positive regime without changing any greedy choice.
"""

from __future__ import annotations

import json
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .decoder import DecoderConfig, generate
from .errors import ConfigError
from .graph import GraphStats, TransitionGraph, build_graph, stats
from .sources import LogitSource, MaxAnchoredSource, fit_toy_model
from .vocab import Vocab, build_vocab, encode_prompt, tokenize

DEFAULT_NUM_FACTS = 200
DEFAULT_CORRUPTION = 0.5
DEFAULT_SEED = 42
DEFAULT_ALPHAS = (0.0, 0.1, 0.5, 1.0, 2.0)
DEFAULT_SIZES = (10, 50, 100, 200)
SMOOTHING_K = 1.0
ANCHOR = 1.0
EVAL_MAX_TOKENS = 8

CSV_HEADER = "method,alpha,corpus_size,exact_match,nodes,edges,ratio,runtime_ms"


@dataclass(frozen=True)
class Question:
    prompt: str
    gold: str


@dataclass(frozen=True)
class SyntheticBenchmark:
    num_facts: int
    p: float
    seed: int
    truthful_corpus: tuple[str, ...]
    corrupted_corpus: tuple[str, ...]
    questions: tuple[Question, ...]


@dataclass(frozen=True)
class EvalReport:
    method: str
    alpha: float
    corpus_size: int
    exact_match: float
    graph_stats: GraphStats
    runtime_ms: int


def generate_benchmark(num_facts: int, p: float, seed: int) -> SyntheticBenchmark:
    """Deterministic benchmark: keys, values and distractors come from
    disjoint token pools, and exactly floor(p * num_facts) facts are
    corrupted."""
    if num_facts < 1:
        raise ConfigError(f"num_facts must be at least 1, got {num_facts}")
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"corruption fraction must be in [0, 1], got {p}")
    width = max(3, len(str(num_facts - 1)))
    keys = [f"k{i:0{width}d}" for i in range(num_facts)]
    values = [f"v{i:0{width}d}" for i in range(num_facts)]
    distractors = [f"d{i:0{width}d}" for i in range(num_facts)]

    truthful = [f"q {k} {v}" for k, v in zip(keys, values)]
    rng = random.Random(seed)
    flipped = set(rng.sample(range(num_facts), int(p * num_facts)))
    corrupted = []
    for i, (k, v) in enumerate(zip(keys, values)):
        answer = rng.choice(distractors) if i in flipped else v
        corrupted.append(f"q {k} {answer}")
    questions = tuple(Question(prompt=f"q {k}", gold=v) for k, v in zip(keys, values))
    return SyntheticBenchmark(
        num_facts=num_facts,
        p=p,
        seed=seed,
        truthful_corpus=tuple(truthful),
        corrupted_corpus=tuple(corrupted),
        questions=questions,
    )


def _prepare(bench: SyntheticBenchmark) -> tuple[Vocab, LogitSource]:
    vocab = build_vocab(list(bench.truthful_corpus) + list(bench.corrupted_corpus))
    toy = fit_toy_model(
        [tokenize(r, vocab) for r in bench.corrupted_corpus], vocab, k=SMOOTHING_K
    )
    return vocab, MaxAnchoredSource(toy, anchor=ANCHOR)


def run_eval(
    bench: SyntheticBenchmark, alpha: float, graph_corpus_size: int | None = None
) -> EvalReport:
    """Fit the corrupted model, build the graph from a truthful prefix,
    decode every question, and score first-token exact match."""
    size = len(bench.truthful_corpus) if graph_corpus_size is None else graph_corpus_size
    if not 0 <= size <= len(bench.truthful_corpus):
        raise ConfigError(
            f"graph corpus size {size} exceeds corpus of {len(bench.truthful_corpus)} records"
        )
    start = time.perf_counter()
    vocab, source = _prepare(bench)
    graph = build_graph(bench.truthful_corpus[:size], vocab, source)
    config = DecoderConfig(alpha=alpha, max_tokens=EVAL_MAX_TOKENS)
    matches = 0
    for q in bench.questions:
        prompt = encode_prompt(q.prompt, vocab)
        continuation, _ = generate(source, graph, prompt, config)
        if continuation[0] == vocab.token_to_id(q.gold):
            matches += 1
    runtime_ms = int((time.perf_counter() - start) * 1000)
    return EvalReport(
        method="GREEDY" if alpha == 0 else "GRAD",
        alpha=alpha,
        corpus_size=size,
        exact_match=matches / len(bench.questions),
        graph_stats=stats(graph, size),
        runtime_ms=runtime_ms,
    )


def sweep_alpha(
    bench: SyntheticBenchmark,
    alphas: Sequence[float],
    graph_corpus_size: int | None = None,
    jobs: int = 1,
) -> list[EvalReport]:
    """One report per alpha over the same benchmark and graph corpus."""
    if len(alphas) == 0:
        raise ConfigError("alpha sweep needs at least one value")
    return _run_rows(
        [(bench, a, graph_corpus_size) for a in alphas], jobs
    )


def sweep_corpus(
    bench: SyntheticBenchmark,
    sizes: Sequence[int],
    alpha: float,
    jobs: int = 1,
) -> tuple[list[EvalReport], list[GraphStats]]:
    """Graphs built on nested truthful prefixes; stats recorded per size."""
    if len(sizes) == 0:
        raise ConfigError("corpus sweep needs at least one size")
    if list(sizes) != sorted(sizes):
        raise ConfigError(f"sizes must be ascending, got {list(sizes)}")
    for s in sizes:
        if s > len(bench.truthful_corpus):
            raise ConfigError(
                f"size {s} exceeds corpus of {len(bench.truthful_corpus)} records"
            )
    reports = _run_rows([(bench, alpha, s) for s in sizes], jobs)
    return reports, [r.graph_stats for r in reports]


def _run_rows(
    rows: list[tuple[SyntheticBenchmark, float, int | None]], jobs: int
) -> list[EvalReport]:
    # Rows are independent; results merge in parameter order regardless of
    # completion order.
    if jobs <= 1:
        return [run_eval(b, a, s) for b, a, s in rows]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(run_eval, b, a, s) for b, a, s in rows]
        return [f.result() for f in futures]


def report_row(report: EvalReport) -> str:
    g = report.graph_stats
    return ",".join(
        [
            report.method,
            repr(float(report.alpha)),
            str(report.corpus_size),
            repr(float(report.exact_match)),
            str(g.nodes),
            str(g.edges),
            repr(float(g.edge_node_ratio)),
            str(report.runtime_ms),
        ]
    )


def reports_to_csv(reports: Sequence[EvalReport]) -> str:
    lines = [CSV_HEADER]
    lines.extend(report_row(r) for r in reports)
    return "\n".join(lines) + "\n"


def write_reports_csv(reports: Sequence[EvalReport], path: str | Path) -> None:
    Path(path).write_text(reports_to_csv(reports), encoding="utf-8")


def reports_to_json(reports: Sequence[EvalReport]) -> str:
    rows = []
    for r in reports:
        g = r.graph_stats
        rows.append(
            {
                "method": r.method,
                "alpha": r.alpha,
                "corpus_size": r.corpus_size,
                "exact_match": r.exact_match,
                "nodes": g.nodes,
                "edges": g.edges,
                "ratio": g.edge_node_ratio,
                "runtime_ms": r.runtime_ms,
            }
        )
    return json.dumps(rows, indent=2) + "\n"


def write_reports_json(reports: Sequence[EvalReport], path: str | Path) -> None:
    Path(path).write_text(reports_to_json(reports), encoding="utf-8")

"""Command line interface.

Commands: build-graph, decode, eval, sweep, stats. Option values resolve in
the order command line > TOML config file (--config) > built-in default.
Diagnostics go to stderr, data to stdout; exit status is 0 only on full
success. GRAD_LOG={error|info|debug} controls logging verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Any, Sequence

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover - py310 fallback
    import tomli as tomllib

from . import harness
from .bridge import BridgeClient
from .decoder import DecoderConfig, generate, write_trace_jsonl
from .errors import ConfigError, CorpusFormatError, GradKitError, IncompatibleArtifactsError
from .graph import build_graph, graph_to_json_dict, load_graph, save_graph, stats
from .harness import generate_benchmark, run_eval, sweep_alpha, sweep_corpus
from .sources import LogitSource, MaxAnchoredSource, ReplaySource, fit_toy_model
from .vocab import Vocab, build_vocab, detokenize, encode_prompt, tokenize

log = logging.getLogger("gradkit")

_DEFAULTS: dict[str, Any] = {
    "alpha": 1.0,
    "norm_mode": "intent",
    "max_tokens": 64,
    "seed": harness.DEFAULT_SEED,
    "k": 1.0,
    "anchor": 1.0,
    "jobs": 1,
    "stop_tokens": "2",
    "num_facts": harness.DEFAULT_NUM_FACTS,
    "corrupt_frac": harness.DEFAULT_CORRUPTION,
    "trace_top_k": 5,
}


def _setup_logging() -> None:
    level = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("GRAD_LOG", "error").lower(), logging.ERROR
    )
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(message)s")


class _Options:
    """Merged view over CLI args, config file, and defaults."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config: dict[str, Any] = {}
        config_path = getattr(args, "config", None)
        if config_path:
            try:
                with open(config_path, "rb") as f:
                    self.config = tomllib.load(f)
            except OSError as e:
                raise ConfigError(f"cannot read config file {config_path}: {e}") from e
            except tomllib.TOMLDecodeError as e:
                raise ConfigError(f"config file {config_path} is not valid TOML: {e}") from e

    def get(self, key: str) -> Any:
        cli_value = getattr(self.args, key, None)
        if cli_value is not None:
            return cli_value
        if key in self.config:
            return self.config[key]
        return _DEFAULTS.get(key)


def _read_corpus(path: str) -> list[str]:
    """One record per line; blank lines skipped; bad UTF-8 names its line."""
    records = []
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise CorpusFormatError(f"cannot read corpus {path}: {e}") from e
    for lineno, line in enumerate(raw.split(b"\n"), start=1):
        try:
            text = line.decode("utf-8")
        except UnicodeDecodeError as e:
            raise CorpusFormatError(f"{path} line {lineno}: invalid UTF-8 ({e})") from e
        text = text.rstrip("\r")
        if text.strip():
            records.append(text)
    return records


def _toy_source(records: list[str], vocab: Vocab, opts: _Options) -> LogitSource:
    source: LogitSource = fit_toy_model(
        [tokenize(r, vocab) for r in records], vocab, k=float(opts.get("k"))
    )
    if not getattr(opts.args, "raw_logits", False):
        source = MaxAnchoredSource(source, anchor=float(opts.get("anchor")))
    return source


def _check_sizes(vocab_size: int, **others: int) -> None:
    for name, size in others.items():
        if size != vocab_size:
            raise IncompatibleArtifactsError(
                f"{name} vocab size {size} does not match vocab size {vocab_size}"
            )


def cmd_build_graph(args: argparse.Namespace) -> int:
    opts = _Options(args)
    records = _read_corpus(args.corpus)
    vocab = build_vocab(records)
    bridge = None
    try:
        if getattr(args, "bridge_cmd", None):
            bridge = BridgeClient(args.bridge_cmd)
            _check_sizes(len(vocab), server=bridge.vocab_size)
            source: LogitSource = bridge
        else:
            source = _toy_source(records, vocab, opts)
        graph = build_graph(
            records, vocab, source, include_boundaries=not args.no_boundary_edges
        )
    finally:
        if bridge is not None:
            bridge.close()
    vocab.save(args.vocab)
    save_graph(graph, args.graph)
    s = stats(graph, len(records))
    log.info("built graph from %d records", len(records))
    print(f"nodes={s.nodes} edges={s.edges} ratio={s.edge_node_ratio!r}")
    return 0


def _decode_source(vocab: Vocab, opts: _Options) -> tuple[LogitSource, BridgeClient | None]:
    args = opts.args
    if getattr(args, "bridge_cmd", None):
        client = BridgeClient(args.bridge_cmd)
        return client, client
    if getattr(args, "replay", None):
        return ReplaySource.from_file(args.replay), None
    if getattr(args, "corpus", None):
        records = _read_corpus(args.corpus)
        return _toy_source(records, vocab, opts), None
    raise ConfigError("decode needs one of --bridge-cmd, --replay, or --corpus")


def _parse_stop_tokens(raw: Any) -> frozenset[int]:
    if isinstance(raw, str):
        parts = [p for p in raw.replace(",", " ").split() if p]
        return frozenset(int(p) for p in parts)
    if isinstance(raw, (list, tuple)):
        return frozenset(int(p) for p in raw)
    raise ConfigError(f"cannot parse stop tokens from {raw!r}")


def cmd_decode(args: argparse.Namespace) -> int:
    opts = _Options(args)
    vocab = Vocab.load(args.vocab)
    graph = load_graph(args.graph)
    _check_sizes(len(vocab), graph=graph.vocab_size)
    config = DecoderConfig(
        alpha=float(opts.get("alpha")),
        norm_mode=str(opts.get("norm_mode")),
        max_tokens=int(opts.get("max_tokens")),
        stop_tokens=_parse_stop_tokens(opts.get("stop_tokens")),
        trace_vectors=bool(args.trace),
    )
    source, bridge = _decode_source(vocab, opts)
    try:
        _check_sizes(len(vocab), source=source.vocab_size)
        prompt = encode_prompt(args.prompt, vocab)
        continuation, traces = generate(source, graph, prompt, config)
    finally:
        if bridge is not None:
            bridge.close()
    if args.trace:
        write_trace_jsonl(traces, args.trace, top_k=int(opts.get("trace_top_k")))
        log.info("wrote %d trace steps to %s", len(traces), args.trace)
    print(detokenize(continuation, vocab))
    return 0


def _write_reports(reports, stats_list, args, opts: _Options, mode: str) -> None:
    from . import figures  # deferred: pulls in matplotlib

    csv_text = harness.reports_to_csv(reports)
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
        log.info("wrote %d report rows to %s", len(reports), args.out)
    else:
        sys.stdout.write(csv_text)
    if args.json_out:
        harness.write_reports_json(reports, args.json_out)
    if args.out and not args.no_figures:
        stem = Path(args.out).with_suffix("")
        if mode == "alpha":
            figures.render_alpha_sweep(reports, f"{stem}.png")
        elif mode == "corpus":
            figures.render_corpus_sweep(reports, f"{stem}.png")
            figures.render_graph_growth(stats_list, f"{stem}_growth.png")
        else:
            figures.render_eval_comparison(reports, f"{stem}.png")


def _benchmark(opts: _Options):
    return generate_benchmark(
        int(opts.get("num_facts")), float(opts.get("corrupt_frac")), int(opts.get("seed"))
    )


def cmd_eval(args: argparse.Namespace) -> int:
    opts = _Options(args)
    bench = _benchmark(opts)
    alpha = float(opts.get("alpha"))
    size = args.corpus_size
    reports = [run_eval(bench, 0.0, size)]
    if alpha > 0:
        reports.append(run_eval(bench, alpha, size))
    _write_reports(reports, None, args, opts, mode="eval")
    return 0


def _parse_grid(raw: str, cast) -> list:
    try:
        return [cast(p) for p in raw.replace(",", " ").split() if p]
    except ValueError as e:
        raise ConfigError(f"cannot parse sweep grid {raw!r}: {e}") from e


def cmd_sweep(args: argparse.Namespace) -> int:
    opts = _Options(args)
    if args.alphas and args.sizes:
        raise ConfigError("--alphas and --sizes are mutually exclusive")
    bench = _benchmark(opts)
    jobs = int(opts.get("jobs"))
    if args.sizes:
        sizes = _parse_grid(args.sizes, int)
        reports, stats_list = sweep_corpus(bench, sizes, float(opts.get("alpha")), jobs=jobs)
        _write_reports(reports, stats_list, args, opts, mode="corpus")
    else:
        alphas = (
            _parse_grid(args.alphas, float) if args.alphas else list(harness.DEFAULT_ALPHAS)
        )
        reports = sweep_alpha(bench, alphas, args.corpus_size, jobs=jobs)
        _write_reports(reports, None, args, opts, mode="alpha")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    graph = load_graph(args.graph)
    if args.json:
        import json as _json

        print(_json.dumps(graph_to_json_dict(graph)))
        return 0
    s = stats(graph, 0)
    print(f"nodes={s.nodes} edges={s.edges} ratio={s.edge_node_ratio!r}")
    return 0


def _add_source_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=float, help="bigram smoothing (default 1)")
    p.add_argument("--anchor", type=float,
                   help="shift each logit row so its max equals this value (default 1)")
    p.add_argument("--raw-logits", action="store_true",
                   help="use raw log-probabilities without anchoring")
    p.add_argument("--bridge-cmd", help="serve logits from this child process command")


def _add_report_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--num-facts", type=int, help="benchmark size (default 200)")
    p.add_argument("--corrupt-frac", type=float,
                   help="fraction of facts corrupted in the model corpus (default 0.5)")
    p.add_argument("--seed", type=int, help="benchmark seed (default 42)")
    p.add_argument("--out", help="write CSV report here (default: stdout)")
    p.add_argument("--json-out", help="also write a JSON report here")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.add_argument("--jobs", type=int, help="parallel sweep rows (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gradkit",
        description="Token transition graphs fused with model logits at decode time",
    )
    parser.add_argument("--config", help="TOML config file (flags override it)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-graph", help="build vocab and graph files from a corpus")
    p.add_argument("--corpus", required=True, help="text corpus, one record per line")
    p.add_argument("--vocab", required=True, help="output vocab JSON path")
    p.add_argument("--graph", required=True, help="output graph file path")
    p.add_argument("--no-boundary-edges", action="store_true",
                   help="drop edges touching the sequence boundary tokens")
    _add_source_opts(p)
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("decode", help="generate a continuation for a prompt")
    p.add_argument("prompt", help="prompt text")
    p.add_argument("--vocab", required=True, help="vocab JSON path")
    p.add_argument("--graph", required=True, help="graph file path")
    p.add_argument("--corpus", help="fit the built-in bigram source on this corpus")
    p.add_argument("--replay", help="scripted logit vectors JSON file")
    p.add_argument("--alpha", type=float, help="fusion weight (default 1.0)")
    p.add_argument("--norm-mode", choices=["intent", "literal"],
                   help="max-normalization mode (default intent)")
    p.add_argument("--max-tokens", type=int, help="continuation cap (default 64)")
    p.add_argument("--stop-tokens", help="ids that end generation (default '2')")
    p.add_argument("--trace", help="write per-step JSONL trace here")
    _add_source_opts(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="greedy-vs-fused comparison on the planted-fact benchmark")
    p.add_argument("--alpha", type=float, help="fusion weight for the fused row (default 1.0)")
    p.add_argument("--corpus-size", type=int, help="graph corpus prefix (default: all)")
    _add_report_opts(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="alpha sweep (default) or corpus-size sweep")
    p.add_argument("--alphas", help="comma-separated fusion weights")
    p.add_argument("--sizes", help="comma-separated graph corpus sizes")
    p.add_argument("--alpha", type=float, help="fusion weight for the size sweep")
    p.add_argument("--corpus-size", type=int, help="graph corpus prefix for the alpha sweep")
    _add_report_opts(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stats", help="print node/edge statistics for a graph file")
    p.add_argument("--graph", required=True, help="graph file path")
    p.add_argument("--json", action="store_true", help="dump the edge list as JSON")
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GradKitError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

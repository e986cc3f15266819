from __future__ import annotations

import json
import re
import sys

import pytest

from gradkit.cli import main
from gradkit.graph import load_graph

from conftest import FIXTURES


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def mask_runtime(csv_text: str) -> str:
    # Last column is wall-clock; everything else must be byte-stable.
    lines = csv_text.splitlines()
    return "\n".join(
        ",".join(line.split(",")[:-1]) for line in lines
    )


def test_build_graph_empty_corpus(tmp_path, capsys):
    corpus = tmp_path / "empty.txt"
    corpus.write_text("")
    code, out, _ = run_cli(
        capsys, "build-graph", "--corpus", str(corpus),
        "--vocab", str(tmp_path / "v.json"), "--graph", str(tmp_path / "g.gttg"),
    )
    assert code == 0
    assert out.strip() == "nodes=0 edges=0 ratio=0.0"
    assert load_graph(tmp_path / "g.gttg").edge_count == 0


def test_build_graph_matches_golden_bytes(tmp_path, capsys):
    code, out, _ = run_cli(
        capsys, "build-graph", "--corpus", str(FIXTURES / "two_records.txt"),
        "--vocab", str(tmp_path / "v.json"), "--graph", str(tmp_path / "g.gttg"),
    )
    assert code == 0
    assert (tmp_path / "g.gttg").read_bytes() == (FIXTURES / "two_records.gttg").read_bytes()
    assert re.fullmatch(r"nodes=6 edges=7 ratio=1\.1666666666666\d+", out.strip())


def test_build_graph_rebuild_is_byte_identical(tmp_path, capsys):
    for name in ("g1.gttg", "g2.gttg"):
        code, _, _ = run_cli(
            capsys, "build-graph", "--corpus", str(FIXTURES / "two_records.txt"),
            "--vocab", str(tmp_path / "v.json"), "--graph", str(tmp_path / name),
        )
        assert code == 0
    assert (tmp_path / "g1.gttg").read_bytes() == (tmp_path / "g2.gttg").read_bytes()


def test_build_graph_reports_bad_utf8_line(tmp_path, capsys):
    corpus = tmp_path / "bad.txt"
    corpus.write_bytes(b"fine line\n\xff\xfe broken\n")
    code, _, err = run_cli(
        capsys, "build-graph", "--corpus", str(corpus),
        "--vocab", str(tmp_path / "v.json"), "--graph", str(tmp_path / "g.gttg"),
    )
    assert code != 0
    assert "line 2" in err


def test_decode_fixture_golden_continuation(capsys, tmp_path):
    code, out, _ = run_cli(
        capsys, "decode", "--vocab", str(FIXTURES / "decode_vocab.json"),
        "--graph", str(FIXTURES / "decode_graph.gttg"),
        "--replay", str(FIXTURES / "decode_replay.json"),
        "--alpha", "1", "a",
    )
    assert code == 0
    assert out.strip() == "c"


def test_decode_alpha_zero_is_greedy(capsys):
    code, out, _ = run_cli(
        capsys, "decode", "--vocab", str(FIXTURES / "decode_vocab.json"),
        "--graph", str(FIXTURES / "decode_graph.gttg"),
        "--replay", str(FIXTURES / "decode_replay.json"),
        "--alpha", "0", "a",
    )
    assert code == 0
    assert out.strip() == "b"


def test_decode_writes_trace(tmp_path, capsys):
    trace = tmp_path / "trace.jsonl"
    code, _, _ = run_cli(
        capsys, "decode", "--vocab", str(FIXTURES / "decode_vocab.json"),
        "--graph", str(FIXTURES / "decode_graph.gttg"),
        "--replay", str(FIXTURES / "decode_replay.json"),
        "--alpha", "1", "--trace", str(trace), "a",
    )
    assert code == 0
    rows = [json.loads(l) for l in trace.read_text().splitlines()]
    assert [r["chosen"] for r in rows] == [5, 2]
    assert all("top_final" in r for r in rows)


def test_decode_missing_graph_names_path(tmp_path, capsys):
    missing = tmp_path / "nope.gttg"
    code, _, err = run_cli(
        capsys, "decode", "--vocab", str(FIXTURES / "decode_vocab.json"),
        "--graph", str(missing),
        "--replay", str(FIXTURES / "decode_replay.json"), "a",
    )
    assert code != 0
    assert str(missing) in err


def test_decode_vocab_graph_size_mismatch(tmp_path, capsys):
    code, _, err = run_cli(
        capsys, "decode", "--vocab", str(FIXTURES / "decode_vocab.json"),
        "--graph", str(FIXTURES / "two_records.gttg"),
        "--replay", str(FIXTURES / "decode_replay.json"), "a",
    )
    assert code != 0
    assert "vocab size" in err


def test_decode_via_bridge(capsys):
    corpus = FIXTURES / "two_records.txt"
    bridge_cmd = f"{sys.executable} -m gradkit.toy_server --corpus {corpus}"
    code, out, _ = run_cli(
        capsys, "decode",
        "--vocab", str(FIXTURES / "bridge_vocab.json"),
        "--graph", str(FIXTURES / "bridge_graph.gttg"),
        "--bridge-cmd", bridge_cmd, "--alpha", "1", "a b",
    )
    assert code == 0
    code2, out2, _ = run_cli(
        capsys, "decode",
        "--vocab", str(FIXTURES / "bridge_vocab.json"),
        "--graph", str(FIXTURES / "bridge_graph.gttg"),
        "--corpus", str(corpus), "--alpha", "1", "a b",
    )
    assert code2 == 0
    assert out == out2


def test_decode_bridge_vocab_mismatch(capsys):
    corpus = FIXTURES / "two_records.txt"
    bridge_cmd = f"{sys.executable} -m gradkit.toy_server --corpus {corpus}"
    code, _, err = run_cli(
        capsys, "decode", "--vocab", str(FIXTURES / "decode_vocab.json"),
        "--graph", str(FIXTURES / "decode_graph.gttg"),
        "--bridge-cmd", bridge_cmd, "a",
    )
    assert code != 0
    assert "vocab size" in err


def test_eval_writes_two_rows_and_figure(tmp_path, capsys):
    out_csv = tmp_path / "report.csv"
    code, _, _ = run_cli(
        capsys, "eval", "--num-facts", "20", "--seed", "3",
        "--out", str(out_csv),
    )
    assert code == 0
    lines = out_csv.read_text().splitlines()
    assert len(lines) == 3
    assert lines[1].startswith("GREEDY,0.0,")
    assert lines[2].startswith("GRAD,1.0,")
    assert (tmp_path / "report.png").exists()


def test_eval_no_figures_flag(tmp_path, capsys):
    out_csv = tmp_path / "report.csv"
    code, _, _ = run_cli(
        capsys, "eval", "--num-facts", "10", "--out", str(out_csv), "--no-figures",
    )
    assert code == 0
    assert not (tmp_path / "report.png").exists()


def test_eval_stdout_when_no_out(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "eval", "--num-facts", "10")
    assert code == 0
    assert out.startswith("method,alpha,corpus_size")


def test_sweep_alpha_grid_rows(tmp_path, capsys):
    out_csv = tmp_path / "sweep.csv"
    code, _, _ = run_cli(
        capsys, "sweep", "--alphas", "0,0.1,0.5,1,2", "--num-facts", "20",
        "--out", str(out_csv),
    )
    assert code == 0
    lines = out_csv.read_text().splitlines()
    assert len(lines) == 6
    assert (tmp_path / "sweep.png").exists()


def test_sweep_sizes_rows_and_growth_figure(tmp_path, capsys):
    out_csv = tmp_path / "sweep.csv"
    code, _, _ = run_cli(
        capsys, "sweep", "--sizes", "5,10,20", "--alpha", "1", "--num-facts", "20",
        "--out", str(out_csv), "--jobs", "2",
    )
    assert code == 0
    lines = out_csv.read_text().splitlines()
    assert len(lines) == 4
    assert (tmp_path / "sweep.png").exists()
    assert (tmp_path / "sweep_growth.png").exists()


def test_sweep_rerun_is_deterministic_outside_runtime(tmp_path, capsys):
    texts = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        code, _, _ = run_cli(
            capsys, "sweep", "--alphas", "0,1", "--num-facts", "20",
            "--seed", "42", "--out", str(path), "--no-figures",
        )
        assert code == 0
        texts.append(path.read_text())
    assert mask_runtime(texts[0]) == mask_runtime(texts[1])


def test_sweep_alphas_and_sizes_mutually_exclusive(tmp_path, capsys):
    code, _, err = run_cli(
        capsys, "sweep", "--alphas", "0,1", "--sizes", "5,10",
        "--num-facts", "10",
    )
    assert code != 0
    assert "mutually exclusive" in err


def test_sweep_json_report(tmp_path, capsys):
    out_csv = tmp_path / "sweep.csv"
    out_json = tmp_path / "sweep.json"
    code, _, _ = run_cli(
        capsys, "sweep", "--alphas", "0,1", "--num-facts", "10",
        "--out", str(out_csv), "--json-out", str(out_json), "--no-figures",
    )
    assert code == 0
    data = json.loads(out_json.read_text())
    assert [row["method"] for row in data] == ["GREEDY", "GRAD"]


def test_stats_line_matches_build_output(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "stats", "--graph", str(FIXTURES / "two_records.gttg"))
    assert code == 0
    assert re.fullmatch(r"nodes=6 edges=7 ratio=1\.1666666666666\d+\n", out)


def test_stats_json_dump(capsys):
    code, out, _ = run_cli(
        capsys, "stats", "--graph", str(FIXTURES / "decode_graph.gttg"), "--json",
    )
    assert code == 0
    data = json.loads(out)
    assert data["vocab_size"] == 6
    assert [3, 5, 4.0] in data["edges"]


def test_config_file_overridden_by_flag(tmp_path, capsys):
    config = tmp_path / "grad.toml"
    config.write_text("alpha = 0.0\n")
    args = [
        "decode", "--vocab", str(FIXTURES / "decode_vocab.json"),
        "--graph", str(FIXTURES / "decode_graph.gttg"),
        "--replay", str(FIXTURES / "decode_replay.json"), "a",
    ]
    code, out, _ = run_cli(capsys, "--config", str(config), *args)
    assert code == 0
    assert out.strip() == "b"  # config alpha=0 -> greedy
    code, out, _ = run_cli(capsys, "--config", str(config), *args[:1], "--alpha", "1", *args[1:])
    assert code == 0
    assert out.strip() == "c"  # flag wins over config


def test_grad_log_env_controls_verbosity(tmp_path, monkeypatch, capsys):
    import logging

    monkeypatch.setenv("GRAD_LOG", "debug")
    for handler in logging.root.handlers[:]:
        logging.root.removeHandler(handler)
    code, _, _ = run_cli(
        capsys, "build-graph", "--corpus", str(FIXTURES / "two_records.txt"),
        "--vocab", str(tmp_path / "v.json"), "--graph", str(tmp_path / "g.gttg"),
    )
    assert code == 0
    assert logging.getLogger("gradkit").isEnabledFor(logging.DEBUG)


def test_inputs_never_mutated(tmp_path, capsys):
    before = (FIXTURES / "two_records.txt").read_bytes()
    run_cli(
        capsys, "build-graph", "--corpus", str(FIXTURES / "two_records.txt"),
        "--vocab", str(tmp_path / "v.json"), "--graph", str(tmp_path / "g.gttg"),
    )
    assert (FIXTURES / "two_records.txt").read_bytes() == before

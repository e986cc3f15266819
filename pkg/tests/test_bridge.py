from __future__ import annotations

import random
import sys

import numpy as np
import pytest

from gradkit.bridge import BridgeClient
from gradkit.conformance import run_conformance
from gradkit.decoder import DecoderConfig, generate
from gradkit.errors import BridgeError, BridgeProtocolError, BridgeTimeoutError
from gradkit.graph import build_graph
from gradkit.sources import MaxAnchoredSource, fit_toy_model, next_logits, transition_scores
from gradkit.vocab import build_vocab, encode_prompt, tokenize

from conftest import make_server_cmd

ECHO_SERVER = """\
import sys, json
VECTOR = [0.5, 1.5, -0.25, 3.0, 0.0]
for line in sys.stdin:
    req = json.loads(line)
    kind = req["kind"]
    if kind == "hello":
        resp = {"kind": "hello", "vocab_size": 5}
    elif kind == "next_logits":
        resp = {"kind": "next_logits", "logits": VECTOR}
    elif kind == "transition_scores":
        resp = {"kind": "transition_scores", "scores": [0.125] * (len(req["tokens"]) - 1)}
    elif kind == "shutdown":
        print(json.dumps({"kind": "shutdown"}), flush=True)
        break
    print(json.dumps(resp), flush=True)
"""


def toy_server_cmd(fixtures, extra=()):
    return [
        sys.executable, "-m", "gradkit.toy_server",
        "--corpus", str(fixtures / "two_records.txt"), *extra,
    ]


def test_handshake_returns_declared_size(tmp_path):
    with BridgeClient(make_server_cmd(tmp_path, ECHO_SERVER)) as client:
        assert client.vocab_size == 5


def test_echo_vectors_arrive_bit_exact(tmp_path):
    with BridgeClient(make_server_cmd(tmp_path, ECHO_SERVER)) as client:
        vec = client.next_logits([1, 2])
        assert vec.tolist() == [0.5, 1.5, -0.25, 3.0, 0.0]
        scores = client.transition_scores([0, 1, 2, 3])
        assert scores.tolist() == [0.125, 0.125, 0.125]


def test_transition_scores_length_contract(tmp_path):
    with BridgeClient(make_server_cmd(tmp_path, ECHO_SERVER)) as client:
        assert client.transition_scores([0, 1, 2, 3]).shape == (3,)


def test_non_json_line_is_a_protocol_error(tmp_path):
    cmd = make_server_cmd(tmp_path, 'import sys\nprint("hello there")\nsys.stdin.readline()\n')
    with pytest.raises(BridgeProtocolError, match="hello there"):
        BridgeClient(cmd)


def test_wrong_response_kind_rejected(tmp_path):
    body = """\
import sys, json
for line in sys.stdin:
    req = json.loads(line)
    if req["kind"] == "hello":
        print(json.dumps({"kind": "hello", "vocab_size": 3}), flush=True)
    else:
        print(json.dumps({"kind": "hello", "vocab_size": 3}), flush=True)
"""
    with BridgeClient(make_server_cmd(tmp_path, body)) as client:
        with pytest.raises(BridgeProtocolError, match="answered"):
            client.next_logits([0])


def test_length_mismatch_rejected(tmp_path):
    body = """\
import sys, json
for line in sys.stdin:
    req = json.loads(line)
    if req["kind"] == "hello":
        print(json.dumps({"kind": "hello", "vocab_size": 4}), flush=True)
    else:
        print(json.dumps({"kind": "next_logits", "logits": [1.0, 2.0]}), flush=True)
"""
    with BridgeClient(make_server_cmd(tmp_path, body)) as client:
        with pytest.raises(BridgeProtocolError, match="expected 4"):
            client.next_logits([0])


def test_nan_payload_rejected(tmp_path):
    body = """\
import sys, json
for line in sys.stdin:
    req = json.loads(line)
    if req["kind"] == "hello":
        print(json.dumps({"kind": "hello", "vocab_size": 2}), flush=True)
    else:
        print('{"kind": "next_logits", "logits": [NaN, 1.0]}', flush=True)
"""
    with BridgeClient(make_server_cmd(tmp_path, body)) as client:
        with pytest.raises(BridgeProtocolError, match="non-finite"):
            client.next_logits([0])


def test_error_response_surfaces_message(tmp_path):
    body = """\
import sys, json
for line in sys.stdin:
    req = json.loads(line)
    if req["kind"] == "hello":
        print(json.dumps({"kind": "hello", "vocab_size": 2}), flush=True)
    else:
        print(json.dumps({"kind": "error", "message": "deliberate failure"}), flush=True)
"""
    with BridgeClient(make_server_cmd(tmp_path, body)) as client:
        with pytest.raises(BridgeError, match="deliberate failure"):
            client.next_logits([0])


def test_child_exit_is_reported(tmp_path):
    cmd = make_server_cmd(tmp_path, "import sys; sys.exit(3)\n")
    with pytest.raises(BridgeError, match="exited"):
        BridgeClient(cmd)


def test_timeout_is_reported(tmp_path):
    cmd = make_server_cmd(tmp_path, "import time\ntime.sleep(60)\n")
    with pytest.raises(BridgeTimeoutError):
        BridgeClient(cmd, timeout=0.5)


def test_toy_server_passes_conformance_corpus(fixtures):
    failures = run_conformance(
        toy_server_cmd(fixtures), fixtures / "protocol_conformance.json"
    )
    assert failures == []


def test_toy_server_raw_mode_passes_conformance(fixtures):
    failures = run_conformance(
        toy_server_cmd(fixtures, extra=["--raw-logits"]),
        fixtures / "protocol_conformance.json",
    )
    assert failures == []


def in_process_source(fixtures):
    corpus = (fixtures / "two_records.txt").read_text().splitlines()
    vocab = build_vocab(corpus)
    toy = fit_toy_model([tokenize(r, vocab) for r in corpus], vocab, k=1.0)
    return corpus, vocab, MaxAnchoredSource(toy, anchor=1.0)


def test_bridge_matches_in_process_vectors(fixtures):
    corpus, vocab, local = in_process_source(fixtures)
    with BridgeClient(toy_server_cmd(fixtures)) as remote:
        assert remote.vocab_size == len(vocab)
        for prefix in ([1], [1, 3], [1, 3, 4, 5]):
            assert np.array_equal(next_logits(remote, prefix), next_logits(local, prefix))
        seq = tokenize(corpus[0], vocab)
        assert np.array_equal(
            transition_scores(remote, seq), transition_scores(local, seq)
        )


def test_generation_via_bridge_matches_in_process(fixtures):
    corpus, vocab, local = in_process_source(fixtures)
    graph = build_graph(corpus, vocab, local)
    rng = random.Random(17)
    prompts = [encode_prompt(rng.choice(["a", "a b", "b c", "c", "d"]), vocab)
               for _ in range(8)]
    config = DecoderConfig(alpha=1.0, max_tokens=10)
    with BridgeClient(toy_server_cmd(fixtures)) as remote:
        for prompt in prompts:
            local_out, _ = generate(local, graph, prompt, config)
            remote_out, _ = generate(remote, graph, prompt, config)
            assert local_out == remote_out

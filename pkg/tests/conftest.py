from __future__ import annotations

import math
import random
import sys
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


def make_server_cmd(tmp_path: Path, body: str, name: str = "server.py") -> list[str]:
    """Write a scripted server to disk and return its launch command."""
    path = tmp_path / name
    path.write_text(body, encoding="utf-8")
    return [sys.executable, str(path)]


def random_corpus(rng: random.Random, max_records: int = 8, max_len: int = 6) -> list[str]:
    """Small random text corpus over a fixed word pool."""
    pool = ["alpha", "beta", "gamma", "delta", "eps", "zeta", ".", "x1", "y2"]
    records = []
    for _ in range(rng.randint(1, max_records)):
        words = [rng.choice(pool) for _ in range(rng.randint(1, max_len))]
        records.append(" ".join(words))
    return records


def bigram_logit(counts: dict[int, dict[int, int]], vocab_size: int, k: float,
                 u: int, v: int) -> float:
    """Direct smoothed log-probability, independent of the library path."""
    row = counts.get(u, {})
    denom = sum(row.values()) + k * vocab_size
    return math.log((row.get(v, 0) + k) / denom)


def count_pairs(seqs: list[list[int]]) -> dict[int, dict[int, int]]:
    counts: dict[int, dict[int, int]] = {}
    for s in seqs:
        for u, v in zip(s, s[1:]):
            counts.setdefault(u, {})[v] = counts.get(u, {}).get(v, 0) + 1
    return counts

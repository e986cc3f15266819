"""Deterministic whitespace+punctuation tokenizer and bidirectional vocabulary.

Token ids are dense integers. Ids 0..2 are reserved for UNK, BOS and EOS in
every vocabulary built here, so graph and vocab files stay portable across
runs. Unknown surface forms map to UNK; tokenization never fails.
"""

from __future__ import annotations

import json
import string
from pathlib import Path
from typing import Iterable, Sequence

from .errors import InvalidTokenError

UNK_ID = 0
BOS_ID = 1
EOS_ID = 2
RESERVED_TOKENS = ("<unk>", "<bos>", "<eos>")

_ASCII_PUNCT = frozenset(string.punctuation)


def split_surface(text: str) -> list[str]:
    """Split text into surface tokens.

    Splits on Unicode whitespace, then peels leading and trailing ASCII
    punctuation characters off each chunk into their own single-character
    tokens. Interior punctuation (e.g. the apostrophe in "don't") stays put.
    """
    out: list[str] = []
    for chunk in text.split():
        lead: list[str] = []
        while chunk and chunk[0] in _ASCII_PUNCT:
            lead.append(chunk[0])
            chunk = chunk[1:]
        trail: list[str] = []
        while chunk and chunk[-1] in _ASCII_PUNCT:
            trail.append(chunk[-1])
            chunk = chunk[:-1]
        out.extend(lead)
        if chunk:
            out.append(chunk)
        out.extend(reversed(trail))
    return out


class Vocab:
    """Immutable bidirectional map between token strings and dense ids.

    `entries[i]` is the surface form of id `i`; `index` maps surface form
    back to id (first occurrence wins if a loaded file carries duplicates).
    """

    def __init__(self, entries: Sequence[str]):
        if len(entries) < len(RESERVED_TOKENS):
            raise InvalidTokenError(
                f"vocabulary needs at least {len(RESERVED_TOKENS)} entries, got {len(entries)}"
            )
        self.entries: list[str] = list(entries)
        self.index: dict[str, int] = {}
        for i, tok in enumerate(self.entries):
            self.index.setdefault(tok, i)

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocab) and self.entries == other.entries

    def token_to_id(self, token: str) -> int:
        """Id for a surface form, UNK_ID if absent."""
        return self.index.get(token, UNK_ID)

    def id_to_token(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.entries):
            raise InvalidTokenError(
                f"token id {token_id} out of range for vocabulary of size {len(self.entries)}"
            )
        return self.entries[token_id]

    @classmethod
    def build(cls, corpus: Iterable[str]) -> "Vocab":
        """Build from text records: reserved tokens plus every distinct
        surface token in first-occurrence order."""
        entries = list(RESERVED_TOKENS)
        seen = set(entries)
        for record in corpus:
            for tok in split_surface(record):
                if tok not in seen:
                    seen.add(tok)
                    entries.append(tok)
        return cls(entries)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps({"tokens": self.entries}, ensure_ascii=False), encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        tokens = data.get("tokens")
        if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
            raise InvalidTokenError(f"{path}: vocab file must contain a list of token strings")
        return cls(tokens)


def build_vocab(corpus: Iterable[str]) -> Vocab:
    return Vocab.build(corpus)


def tokenize(text: str, vocab: Vocab) -> list[int]:
    """Text to ids: BOS + body tokens + EOS, unknowns mapped to UNK."""
    ids = [BOS_ID]
    ids.extend(vocab.token_to_id(tok) for tok in split_surface(text))
    ids.append(EOS_ID)
    return ids


def encode_prompt(text: str, vocab: Vocab) -> list[int]:
    """Like tokenize but without the trailing EOS, for generation prefixes."""
    return tokenize(text, vocab)[:-1]


def detokenize(ids: Sequence[int], vocab: Vocab) -> str:
    """Ids back to text: BOS/EOS dropped, remaining tokens space-joined.

    UNK renders as its reserved surface form. Raises InvalidTokenError on
    out-of-range ids.
    """
    parts = []
    for i in ids:
        tok = vocab.id_to_token(i)
        if i in (BOS_ID, EOS_ID):
            continue
        parts.append(tok)
    return " ".join(parts)

"""Whitespace tokenizer with byte fallback over a fixed vocabulary file.

The vocabulary is plain text, one token per line, index = line number.
Indices 0..2 are pad/bos/eos; 3..258 are single-byte tokens written as
``<0xNN>``; the rest are whole words. Unknown words fall back to their
UTF-8 bytes, with an explicit space byte between adjacent byte runs so
word boundaries survive detokenization.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

from facerep.errors import InputError

CONTEXT_LENGTH = 77
PAD, BOS, EOS = 0, 1, 2
_BYTE_BASE = 3
_SPACE_BYTE = _BYTE_BASE + 0x20


@dataclass(frozen=True)
class TextTokens:
    """Fixed-length id sequence with the eos location recorded."""

    ids: np.ndarray
    eos_position: int

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        if ids.shape != (CONTEXT_LENGTH,):
            raise InputError(f"ids must have shape ({CONTEXT_LENGTH},), got {ids.shape}")
        if not (0 < self.eos_position < CONTEXT_LENGTH):
            raise InputError(f"eos_position {self.eos_position} out of range")
        if ids[self.eos_position] != EOS:
            raise InputError("eos_position does not point at the eos token")
        if np.any(ids[self.eos_position + 1 :] != PAD):
            raise InputError("padding must be the only content after eos")
        object.__setattr__(self, "ids", ids)


def _default_vocab_path():
    return resources.files("facerep.fixtures") / "vocab.txt"


class TextTokenizer:
    def __init__(self, vocab_path=None):
        src = _default_vocab_path() if vocab_path is None else vocab_path
        text = src.read_text(encoding="utf-8")
        self.tokens = text.splitlines()
        if len(self.tokens) < _BYTE_BASE + 256:
            raise InputError("vocabulary too small; needs specials plus 256 byte tokens")
        for b in range(256):
            expected = f"<0x{b:02X}>"
            if self.tokens[_BYTE_BASE + b] != expected:
                raise InputError(
                    f"vocabulary line {_BYTE_BASE + b} is "
                    f"'{self.tokens[_BYTE_BASE + b]}', expected '{expected}'"
                )
        self.index = {tok: i for i, tok in enumerate(self.tokens)}

    @property
    def vocab_size(self) -> int:
        return len(self.tokens)

    def _word_ids(self, word: str) -> list[int]:
        wid = self.index.get(word)
        if wid is not None:
            return [wid]
        return [_BYTE_BASE + b for b in word.encode("utf-8")]

    def tokenize(self, text: str) -> TextTokens:
        """Always returns exactly 77 ids: bos, body (truncated to 75), eos, pad."""
        if not isinstance(text, str):
            raise InputError("text must be a string")
        body: list[int] = []
        previous_was_bytes = False
        for word in text.split():
            ids = self._word_ids(word)
            is_bytes = len(ids) > 1 or (_BYTE_BASE <= ids[0] < _BYTE_BASE + 256)
            if body and previous_was_bytes and is_bytes:
                body.append(_SPACE_BYTE)
            body.extend(ids)
            previous_was_bytes = is_bytes
        body = body[: CONTEXT_LENGTH - 2]
        ids = np.full(CONTEXT_LENGTH, PAD, dtype=np.int64)
        ids[0] = BOS
        ids[1 : 1 + len(body)] = body
        eos_position = 1 + len(body)
        ids[eos_position] = EOS
        return TextTokens(ids=ids, eos_position=eos_position)

    def tokenize_batch(self, texts: list[str]) -> tuple[np.ndarray, np.ndarray]:
        toks = [self.tokenize(t) for t in texts]
        ids = np.stack([t.ids for t in toks])
        eos = np.array([t.eos_position for t in toks], dtype=np.int64)
        return ids, eos

    def detokenize(self, tokens: TextTokens) -> str:
        """Best-effort inverse; whitespace runs collapse to single spaces."""
        words: list[str] = []
        byte_run: list[int] = []

        def flush():
            if byte_run:
                words.extend(bytes(byte_run).decode("utf-8", errors="replace").split())
                byte_run.clear()

        for tid in tokens.ids[1 : tokens.eos_position]:
            tid = int(tid)
            if _BYTE_BASE <= tid < _BYTE_BASE + 256:
                byte_run.append(tid - _BYTE_BASE)
            else:
                flush()
                if tid not in (PAD, BOS, EOS):
                    words.append(self.tokens[tid])
        flush()
        return " ".join(words)

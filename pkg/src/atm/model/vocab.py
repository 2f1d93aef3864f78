from __future__ import annotations

from typing import Iterable

import numpy as np

from ..qparse import word_tokens

PAD, UNK, SEP = "<pad>", "<unk>", "<sep>"
SPECIALS = (PAD, UNK, SEP)


class Vocab:
    """Word-level vocabulary; ids 0/1/2 are padding, unknown and the q/a separator."""

    def __init__(self, tokens: Iterable[str]):
        tokens = list(tokens)
        if tuple(tokens[:3]) != SPECIALS:
            raise ValueError(f"vocabulary must start with {SPECIALS}")
        self.tokens = tuple(tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate vocabulary entries")

    pad_id, unk_id, sep_id = 0, 1, 2

    @classmethod
    def build(cls, texts: Iterable[str]) -> "Vocab":
        words = sorted({w for text in texts for w in word_tokens(text)} - set(SPECIALS))
        return cls([*SPECIALS, *words])

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, text: str) -> list[int]:
        return [self.index.get(w, self.unk_id) for w in word_tokens(text)]

    def encode_pair(self, question: str, answer: str) -> list[int]:
        """Ids of the concatenated question/answer text ``[q; a]``."""
        return self.encode(question) + [self.sep_id] + self.encode(answer)


def pad_batch(seqs: list[list[int]]) -> tuple[np.ndarray, np.ndarray]:
    """``(ids, mask)`` arrays of shape ``(B, L)``; padded positions hold id 0 / False."""
    if any(len(s) == 0 for s in seqs):
        raise ValueError("cannot encode an empty token sequence")
    width = max(len(s) for s in seqs)
    ids = np.zeros((len(seqs), width), dtype=np.int64)
    mask = np.zeros((len(seqs), width), dtype=bool)
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = s
        mask[i, : len(s)] = True
    return ids, mask

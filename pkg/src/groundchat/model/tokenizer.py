"""Word-level tokenizer over single-space-separated text.

Tokens are whatever ``text.split(" ")`` yields, so the assistant marker
``###Assistant:`` is one token and ``" ".join`` is an exact inverse for
single-spaced text.  The vocabulary is built from a training corpus and
persisted in checkpoints; unknown words map to ``<unk>``.
"""

from __future__ import annotations

from typing import Iterable, Sequence

UNK = "<unk>"
EOS = "<eos>"
SPECIALS = (UNK, EOS)


def words(text: str) -> list[str]:
    """Split on single spaces, dropping empty pieces at segment edges."""
    return [w for w in text.split(" ") if w]


class WordTokenizer:
    def __init__(self, vocab: Sequence[str]):
        vocab = tuple(vocab)
        if len(set(vocab)) != len(vocab):
            raise ValueError("duplicate tokens in vocabulary")
        for special in SPECIALS:
            if special not in vocab:
                raise ValueError(f"vocabulary missing {special!r}")
        self.vocab = vocab
        self._index = {tok: i for i, tok in enumerate(vocab)}

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "WordTokenizer":
        seen = set()
        for text in texts:
            seen.update(words(text))
        return cls(SPECIALS + tuple(sorted(seen - set(SPECIALS))))

    @property
    def size(self) -> int:
        return len(self.vocab)

    @property
    def unk_id(self) -> int:
        return self._index[UNK]

    @property
    def eos_id(self) -> int:
        return self._index[EOS]

    def id_of(self, token: str) -> int:
        return self._index.get(token, self._index[UNK])

    def encode(self, text: str) -> list[int]:
        return [self.id_of(w) for w in words(text)]

    def decode(self, ids: Iterable[int]) -> str:
        return " ".join(self.vocab[i] for i in ids)

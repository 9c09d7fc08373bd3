"""Phoneme-token vocabulary with reserved control symbols.

Phonemes are opaque whitespace-delimited tokens; stress marks and
diacritics stay inside the token, so /"oU/ and /oU/ are distinct entries.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import UnknownPhonemeError, ValidationError

PAD_ID, BOS_ID, EOS_ID = 0, 1, 2
PAD_TOKEN, BOS_TOKEN, EOS_TOKEN = "<pad>", "<bos>", "<eos>"
_RESERVED = (PAD_TOKEN, BOS_TOKEN, EOS_TOKEN)
N_RESERVED = len(_RESERVED)


class Vocabulary:
    """Bijection phoneme token <-> integer id, ids 0..2 reserved."""

    def __init__(self, phonemes: Iterable[str]):
        uniq = sorted(set(phonemes))
        for tok in uniq:
            if not tok or any(c.isspace() for c in tok):
                raise ValidationError(f"bad phoneme token: {tok!r}")
            if tok in _RESERVED:
                raise ValidationError(f"phoneme collides with reserved: {tok!r}")
        self._tokens: tuple[str, ...] = _RESERVED + tuple(uniq)
        self._ids = {tok: i for i, tok in enumerate(self._tokens)}

    @classmethod
    def from_sequences(cls, sequences: Iterable[Sequence[str]]) -> "Vocabulary":
        toks: set[str] = set()
        for seq in sequences:
            toks.update(seq)
        return cls(toks)

    def __len__(self) -> int:
        return len(self._tokens)

    @property
    def n_phonemes(self) -> int:
        return len(self._tokens) - N_RESERVED

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    @property
    def phonemes(self) -> tuple[str, ...]:
        return self._tokens[N_RESERVED:]

    def id_of(self, token: str) -> int:
        try:
            return self._ids[token]
        except KeyError:
            raise UnknownPhonemeError(token) from None

    def encode(self, seq: Sequence[str]) -> np.ndarray:
        return np.array([self.id_of(t) for t in seq], dtype=np.int64)

    def decode(self, ids: Iterable[int]) -> tuple[str, ...]:
        out = []
        for i in ids:
            if not 0 <= i < len(self._tokens):
                raise ValidationError(f"id out of range: {i}")
            out.append(self._tokens[i])
        return tuple(out)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._tokens == other._tokens

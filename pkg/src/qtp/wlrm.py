"""Word-level repair: nearest dictionary word under summed ASCII Hamming distance."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .codec import Stage, TextStage
from .errors import DataError, DomainError

# Punctuation detached from a token before lookup. Corrupted bytes elsewhere in
# the token stay part of the word and are compared by their raw code.
EDGE_PUNCT = ".,;:!?'\"()"

_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)
_LOWER = {c: c + 32 for c in range(ord("A"), ord("Z") + 1)}


class RepairFlag(str, enum.Enum):
    IN_DICT = "in_dict"
    REPAIRED = "repaired"
    UNREPAIRED = "unrepaired"


def ascii_lower(s: str) -> str:
    """Lowercase A-Z only; other code points (including 128-255) are kept as-is."""
    return s.translate(_LOWER)


def _codes(word: str) -> np.ndarray:
    return np.frombuffer(word.encode("latin-1"), dtype=np.uint8)


def word_distance(w: str, w_q: str) -> int:
    if len(w) != len(w_q):
        raise DomainError(f"length mismatch: {len(w)} vs {len(w_q)}")
    return int(_POPCOUNT[_codes(w) ^ _codes(w_q)].sum())


@dataclass
class Dictionary:
    words: frozenset[str]
    frequency_rank: Mapping[str, int] = field(default_factory=dict)
    source: str = "<memory>"

    def __post_init__(self) -> None:
        for w in self.words:
            if not w or not w.isascii() or ascii_lower(w) != w:
                raise DataError(f"dictionary entry {w!r} is not a non-empty lowercase ASCII word")
        self.by_length: dict[int, list[str]] = {}
        for w in sorted(self.words, key=self._tie_key):
            self.by_length.setdefault(len(w), []).append(w)
        # candidate matrices for vectorised distance; rows follow tie order
        self._codes = {
            n: np.frombuffer("".join(ws).encode("ascii"), dtype=np.uint8).reshape(len(ws), n)
            for n, ws in self.by_length.items()
        }

    def _tie_key(self, w: str) -> tuple:
        rank = self.frequency_rank.get(w)
        return (rank is None, rank if rank is not None else 0, w)

    @classmethod
    def from_words(cls, words: Iterable[str], **kw) -> "Dictionary":
        return cls(frozenset(ascii_lower(w) for w in words if w), **kw)

    @classmethod
    def load(cls, path: str | Path) -> "Dictionary":
        """One word per line, optionally followed by a tab and an integer rank."""
        words, ranks = set(), {}
        with open(path, encoding="ascii") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                word, _, rank = line.partition("\t")
                word = word.strip()
                words.add(word)
                if rank.strip():
                    try:
                        ranks[word] = int(rank)
                    except ValueError as exc:
                        raise DataError(f"{path}:{lineno}: bad rank {rank!r}") from exc
        return cls(frozenset(words), ranks, source=str(path))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            for w in sorted(self.words, key=self._tie_key):
                rank = self.frequency_rank.get(w)
                fh.write(w if rank is None else f"{w}\t{rank}")
                fh.write("\n")

    def __contains__(self, word: str) -> bool:
        return word in self.words

    def __len__(self) -> int:
        return len(self.words)

    def nearest(self, word: str) -> str | None:
        cands = self._codes.get(len(word))
        if cands is None:
            return None
        dist = _POPCOUNT[cands ^ _codes(word)].sum(axis=1)
        # argmin returns the first minimum, and rows are in tie-break order
        return self.by_length[len(word)][int(np.argmin(dist))]


def split_token(token: str) -> tuple[str, str, str]:
    """(leading punctuation, core, trailing punctuation)."""
    core = token.lstrip(EDGE_PUNCT)
    lead = token[: len(token) - len(core)]
    stripped = core.rstrip(EDGE_PUNCT)
    return lead, stripped, core[len(stripped) :]


def apply_case(word: str, like: str) -> str:
    """Give ``word`` the capitalization pattern of ``like``."""
    if len(like) > 1 and like.isupper():
        return word.upper()
    if like[:1].isupper():
        return word[:1].upper() + word[1:]
    return word


def repair_word(w_q: str, dictionary: Dictionary) -> tuple[str, RepairFlag]:
    if not w_q:
        raise DomainError("cannot repair an empty word")
    key = ascii_lower(w_q)
    if key in dictionary:
        return key, RepairFlag.IN_DICT
    best = dictionary.nearest(key)
    if best is None:
        return w_q, RepairFlag.UNREPAIRED
    return best, RepairFlag.REPAIRED


def repair_token(token: str, dictionary: Dictionary) -> tuple[str, RepairFlag]:
    lead, core, trail = split_token(token)
    if not core:
        return token, RepairFlag.UNREPAIRED
    word, flag = repair_word(core, dictionary)
    if flag is RepairFlag.UNREPAIRED:
        return token, flag
    return lead + apply_case(word, core) + trail, flag


def repair_text(t_q: TextStage, dictionary: Dictionary) -> tuple[TextStage, list[RepairFlag]]:
    out, flags = [], []
    for tok in t_q.words:
        word, flag = repair_token(tok, dictionary)
        out.append(word)
        flags.append(flag)
    return t_q.replace_words(out, Stage.WORD_REPAIRED), flags

"""Corpus files and a synthetic caption-style corpus for desk-scale runs."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .wlrm import ascii_lower, split_token

# Caption-like lexicon. Several words sit one or two flipped bits apart
# (cat/bat/hat, dog/log, red/bed, sits/sets, ...) so word-level repair alone
# is sometimes ambiguous and sentence context matters.
DETERMINERS = ["a", "the", "one", "two", "some"]
ADJECTIVES = [
    "red", "big", "small", "old", "young", "black", "white", "brown", "little", "happy",
    "wet", "tall", "tan", "fat", "dark", "green", "blue", "pink", "gray", "wild",
]
NOUNS = [
    "dog", "cat", "man", "boy", "girl", "woman", "child", "bird", "horse", "bike",
    "ball", "car", "hat", "bat", "log", "bed", "cow", "pig", "fox", "rat",
    "kid", "team", "crowd", "player", "rider", "baby", "puppy", "duck", "goat", "lady",
]
PLACES = [
    "park", "beach", "street", "field", "river", "snow", "grass", "road", "pool", "lake",
    "yard", "hill", "city", "sand", "water", "track", "wall", "fence", "tree", "house",
]
VERBS = [
    "runs", "sits", "jumps", "walks", "plays", "rests", "swims", "rides", "looks", "waits",
    "stands", "lies", "sleeps", "climbs", "dances", "races", "hops", "rolls", "digs", "eats",
]
PREPOSITIONS = ["in", "on", "near", "by", "under", "over", "at", "behind", "across", "along"]
CONNECTORS = ["and", "while", "as"]


def lexicon() -> list[str]:
    words = DETERMINERS + ADJECTIVES + NOUNS + PLACES + VERBS + PREPOSITIONS + CONNECTORS
    return sorted(set(words))


def _noun_phrase(rng: np.random.Generator, nouns: Sequence[str]) -> list[str]:
    out = [rng.choice(DETERMINERS)]
    for _ in range(rng.integers(0, 3)):
        out.append(rng.choice(ADJECTIVES))
    out.append(rng.choice(nouns))
    return out


def _clause(rng: np.random.Generator) -> list[str]:
    words = _noun_phrase(rng, NOUNS) + [rng.choice(VERBS)]
    for _ in range(rng.integers(1, 3)):
        words += [rng.choice(PREPOSITIONS)] + _noun_phrase(rng, PLACES)
    return words


def synthetic_sentence(rng: np.random.Generator, min_words: int = 5, max_words: int = 16) -> str:
    while True:
        words = _clause(rng)
        if rng.random() < 0.35:
            words += [rng.choice(CONNECTORS)] + _clause(rng)
        if min_words <= len(words) <= max_words:
            return " ".join(str(w) for w in words)


def synthetic_corpus(
    n: int, rng: np.random.Generator, min_words: int = 5, max_words: int = 16
) -> list[str]:
    """``n`` distinct sentences."""
    seen: dict[str, None] = {}
    while len(seen) < n:
        seen.setdefault(synthetic_sentence(rng, min_words, max_words))
    return list(seen)


def load_corpus(path: str | Path) -> list[str]:
    """One ASCII sentence per line; blank lines are skipped."""
    sentences = []
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            try:
                line = raw.decode("ascii").rstrip("\r\n")
            except UnicodeDecodeError as exc:
                raise DataError(f"{path}:{lineno}: non-ASCII byte at column {exc.start + 1}") from exc
            if line.strip():
                sentences.append(line.strip())
    if not sentences:
        raise DataError(f"{path}: corpus is empty")
    return sentences


def save_corpus(path: str | Path, sentences: Sequence[str]) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for s in sentences:
            fh.write(s + "\n")


def vocabulary(sentences: Sequence[str]) -> set[str]:
    """Lowercase dictionary keys of every token in the corpus."""
    words = set()
    for s in sentences:
        for tok in s.split():
            core = split_token(tok)[1]
            if core:
                words.add(ascii_lower(core))
    return words

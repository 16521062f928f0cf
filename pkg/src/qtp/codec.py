"""Text <-> bits <-> superdense-coding symbols, plus segmentation and display.

Bits are numpy ``uint8`` arrays of 0/1, most significant bit first. Decoded
text uses code points 0-255 (one char per received byte), so corrupted bytes
keep their true bit pattern until :func:`normalize_display`.
"""

from __future__ import annotations

import enum
import math
import re
import string
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, FramingError
from .qcore import SymbolPair


class Stage(str, enum.Enum):
    IDEAL = "T"
    RECEIVED = "Tq"
    WORD_REPAIRED = "Tw"
    CORRECTED = "Tc"
    FUSED = "Te"


class Mode(str, enum.Enum):
    CLASSICAL = "classical"
    QUBIT = "qubit"
    QUDIT4 = "qudit4"

    @property
    def dim(self) -> int:
        return {"classical": 1, "qubit": 2, "qudit4": 4}[self.value]

    @property
    def bits_per_use(self) -> int:
        return {"classical": 1, "qubit": 2, "qudit4": 4}[self.value]


@dataclass(frozen=True)
class TextStage:
    """Words plus the whitespace between them.

    ``separators`` has ``len(words) + 1`` entries: leading, inner gaps, trailing.
    """

    words: tuple[str, ...]
    separators: tuple[str, ...]
    stage: Stage = Stage.IDEAL

    def __post_init__(self) -> None:
        object.__setattr__(self, "words", tuple(self.words))
        object.__setattr__(self, "separators", tuple(self.separators))
        if len(self.separators) != len(self.words) + 1:
            raise DomainError("separators must number len(words) + 1")

    @classmethod
    def from_string(cls, text: str, stage: Stage = Stage.IDEAL) -> "TextStage":
        words, seps, pos = [], [], 0
        for m in re.finditer(r"\S+", text):
            seps.append(text[pos : m.start()])
            words.append(m.group())
            pos = m.end()
        seps.append(text[pos:])
        return cls(tuple(words), tuple(seps), stage)

    @classmethod
    def from_words(cls, words: Sequence[str], stage: Stage = Stage.IDEAL) -> "TextStage":
        n = len(words)
        seps = ("",) + (" ",) * max(n - 1, 0) + (("",) if n else ())
        return cls(tuple(words), seps, stage)

    @property
    def text(self) -> str:
        parts = [self.separators[0]]
        for w, s in zip(self.words, self.separators[1:]):
            parts.append(w)
            parts.append(s)
        return "".join(parts)

    def __len__(self) -> int:
        return len(self.words)

    def spans(self) -> list[tuple[int, int]]:
        """(start, end) character offsets of every word in :attr:`text`."""
        out, pos = [], len(self.separators[0])
        for w, s in zip(self.words, self.separators[1:]):
            out.append((pos, pos + len(w)))
            pos += len(w) + len(s)
        return out

    def replace_words(self, words: Sequence[str], stage: Stage) -> "TextStage":
        if len(words) != len(self.words):
            raise DomainError(f"word count {len(words)} != {len(self.words)}")
        return TextStage(tuple(words), self.separators, stage)

    def realign(self, received: str, stage: Stage = Stage.RECEIVED) -> "TextStage":
        """Cut a received string at this text's word boundaries.

        Noise preserves byte count, so the sender's framing applies to the
        received bytes even when a space was corrupted.
        """
        if len(received) != len(self.text):
            raise FramingError(f"received {len(received)} chars, expected {len(self.text)}")
        words, seps, pos = [], [], 0
        for a, b in self.spans():
            seps.append(received[pos:a])
            words.append(received[a:b])
            pos = b
        seps.append(received[pos:])
        return TextStage(tuple(words), tuple(seps), stage)


def ascii_encode(text: str) -> np.ndarray:
    data = bytearray()
    for i, ch in enumerate(text, start=1):
        code = ord(ch)
        if code > 127:
            raise DomainError(f"non-ASCII character {ch!r} at position {i}")
        data.append(code)
    return np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8))


def ascii_decode(bits: Sequence[int] | np.ndarray) -> str:
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.size % 8:
        raise FramingError(f"bit length {arr.size} is not a multiple of 8")
    return np.packbits(arr).tobytes().decode("latin-1")


def _bits_per_symbol(d: int) -> int:
    if d not in (2, 4):
        raise DomainError(f"symbol packing supports d in {{2, 4}}, got {d}")
    return int(math.log2(d))


def pack_symbols(bits: Sequence[int] | np.ndarray, d: int) -> list[SymbolPair]:
    k = _bits_per_symbol(d)
    arr = np.asarray(bits, dtype=np.int64)
    if arr.size % (2 * k):
        raise FramingError(f"bit length {arr.size} not divisible by {2 * k}")
    weights = 1 << np.arange(k - 1, -1, -1)
    groups = arr.reshape(-1, 2, k) @ weights
    return [SymbolPair(int(z), int(x)) for z, x in groups]


def unpack_symbols(pairs: Sequence[tuple[int, int]], d: int) -> np.ndarray:
    k = _bits_per_symbol(d)
    if len(pairs) == 0:
        return np.zeros(0, dtype=np.uint8)
    vals = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if vals.min() < 0 or vals.max() >= d:
        raise DomainError(f"symbol out of range for d={d}")
    shifts = np.arange(k - 1, -1, -1)
    return ((vals[..., None] >> shifts) & 1).astype(np.uint8).ravel()


def channel_uses(char_count: int, mode: Mode | str) -> int:
    """Channel uses to carry ``char_count`` 8-bit characters.

    One superdense-coding use carries 2*log2(d) bits, so a character costs
    8 classical uses, 4 qubit uses or 2 ququart uses.
    """
    if char_count < 0:
        raise DomainError("character count must be non-negative")
    mode = Mode(mode)
    return 8 * char_count // mode.bits_per_use


@dataclass(frozen=True)
class SegmentPlan:
    unit_bounds: tuple[tuple[int, int], ...]  # 1-indexed, inclusive
    max_unit: int = 16

    @property
    def sizes(self) -> list[int]:
        return [b - a + 1 for a, b in self.unit_bounds]


def segment_text(text: TextStage | int, max_unit: int = 16) -> SegmentPlan:
    """Split n words into ceil(n / max_unit) consecutive units of near-equal size.

    Larger units come first. Greedy max_unit chunks could leave a short tail;
    this does not: for max_unit >= 9 and n >= 5 every unit has at least 5 words.
    """
    if max_unit < 5:
        raise DomainError(f"max_unit must be at least 5, got {max_unit}")
    n = text if isinstance(text, int) else len(text)
    if n == 0:
        return SegmentPlan((), max_unit)
    k = -(-n // max_unit)
    base, extra = divmod(n, k)
    bounds, start = [], 1
    for i in range(k):
        size = base + (1 if i < extra else 0)
        bounds.append((start, start + size - 1))
        start += size
    return SegmentPlan(tuple(bounds), max_unit)


def split_units(text: TextStage, plan: SegmentPlan) -> list[TextStage]:
    """Materialize a plan. Leading/trailing whitespace goes to the outer units."""
    units = []
    last = len(plan.unit_bounds) - 1
    for i, (a, b) in enumerate(plan.unit_bounds):
        words = text.words[a - 1 : b]
        inner = text.separators[a:b]
        lead = text.separators[0] if i == 0 else ""
        trail = text.separators[-1] if i == last else ""
        units.append(TextStage(words, (lead,) + inner + (trail,), text.stage))
    return units


_DISPLAY_OK = frozenset(string.ascii_letters + string.digits + " .,;:'\"!?-")


def normalize_display(text: str) -> str:
    return "".join(c if c in _DISPLAY_OK else "x" for c in text)

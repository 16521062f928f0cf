"""Error rates, confusion scores and detection probability.

Scores that are undefined (zero denominator) are ``None`` in Python and the
token ``"NA"`` in serialized reports; they are never coerced to 0.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Optional, Sequence

import numpy as np

from .codec import TextStage
from .errors import DomainError

NA = "NA"


def ber(sent: Sequence[int], received: Sequence[int]) -> float:
    a = np.asarray(sent, dtype=np.uint8)
    b = np.asarray(received, dtype=np.uint8)
    if a.shape != b.shape:
        raise DomainError(f"bit length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise DomainError("BER of an empty bit string is undefined")
    return float(np.count_nonzero(a != b)) / a.size


def word_errors(reference: TextStage, hypothesis: TextStage) -> int:
    if len(reference) != len(hypothesis):
        raise DomainError(f"word count mismatch: {len(reference)} vs {len(hypothesis)}")
    return sum(r != h for r, h in zip(reference.words, hypothesis.words))


def wer(reference: TextStage, hypothesis: TextStage) -> float:
    n = len(reference)
    errs = word_errors(reference, hypothesis)
    if n == 0:
        raise DomainError("WER of an empty text is undefined")
    return errs / n


def ser(references: Sequence[TextStage], hypotheses: Sequence[TextStage]) -> float:
    if len(references) != len(hypotheses):
        raise DomainError(f"sentence count mismatch: {len(references)} vs {len(hypotheses)}")
    if not references:
        raise DomainError("SER of an empty corpus is undefined")
    bad = sum(word_errors(r, h) > 0 for r, h in zip(references, hypotheses))
    return bad / len(references)


def ser_reduction_ratio(before: float, after: float) -> Optional[float]:
    if before <= 0:
        return None
    return (before - after) / before


def _div(num: float, den: float) -> Optional[float]:
    return num / den if den else None


def confusion_scores(tp: int, fp: int, tn: int, fn: int):
    """(accuracy, precision, recall, f1); any undefined score is ``None``."""
    total = tp + fp + tn + fn
    if total <= 0:
        raise DomainError("confusion counts are all zero")
    precision = _div(tp, tp + fp)
    recall = _div(tp, tp + fn)
    if precision is None or recall is None:
        f1 = None
    else:
        f1 = _div(2 * precision * recall, precision + recall)
    return (tp + tn) / total, precision, recall, f1


def tally_confusion(
    flags: Sequence[Iterable[int]], truth: Sequence[Sequence[int]]
) -> tuple[int, int, int, int]:
    """Per-position counts (TP, FP, TN, FN). ``flags`` holds 1-indexed positions."""
    if len(flags) != len(truth):
        raise DomainError(f"{len(flags)} flag sets for {len(truth)} sentences")
    tp = fp = tn = fn = 0
    for flagged, labels in zip(flags, truth):
        flagged = set(flagged)
        n = len(labels)
        if any(not 1 <= i <= n for i in flagged):
            raise DomainError(f"flagged position outside 1..{n}")
        for i, lab in enumerate(labels, start=1):
            hit = i in flagged
            if lab:
                tp += hit
                fn += not hit
            else:
                fp += hit
                tn += not hit
    return tp, fp, tn, fn


def detection_probability(flags, truth) -> Optional[float]:
    """Fraction of truly corrupted positions that were flagged (recall)."""
    tp, _, _, fn = tally_confusion(flags, truth)
    return _div(tp, tp + fn)


def sentence_detection_probability(flags, truth) -> Optional[float]:
    """Fraction of corrupted sentences whose error positions were all flagged."""
    hits = total = 0
    for flagged, labels in zip(flags, truth):
        bad = {i for i, lab in enumerate(labels, start=1) if lab}
        if bad:
            total += 1
            hits += bad <= set(flagged)
    return _div(hits, total)


@dataclass
class MetricsReport:
    ber: Optional[float] = None
    wer: Optional[float] = None
    ser: Optional[float] = None
    ser_reduction: Optional[float] = None
    accuracy: Optional[float] = None
    precision: Optional[float] = None
    recall: Optional[float] = None
    f1: Optional[float] = None
    detection_probability: Optional[float] = None
    sentence_detection_probability: Optional[float] = None
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    n_sentences: int = 0
    n_words: int = 0
    n_bits: int = 0

    def to_dict(self) -> dict:
        return {k: (NA if v is None else v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsReport":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise DomainError(f"unknown report fields: {sorted(unknown)}")
        return cls(**{k: (None if v == NA else v) for k, v in data.items()})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        return cls.from_dict(json.loads(text))


def format_value(v) -> str:
    if v is None:
        return NA
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()

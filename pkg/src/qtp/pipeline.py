"""End-to-end transmission of one text: encode, send, decode, repair."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import qcore
from .codec import (
    Mode,
    Stage,
    TextStage,
    ascii_decode,
    ascii_encode,
    pack_symbols,
    unpack_symbols,
)
from .errors import ConfigError
from .qcore import Channel, ChannelKind
from .slrm.model import ModelConfig, detect_errors, fuse, infer
from .wlrm import Dictionary, repair_text


@dataclass(frozen=True)
class Link:
    """A transmission mode plus its noise: a Kraus channel, or a flip probability."""

    mode: Mode
    kind: ChannelKind
    lam: float
    channel: Optional[Channel] = None

    @property
    def spec(self) -> str:
        return f"{self.kind.value}:{self.lam:g}"


def parse_channel_spec(spec: str) -> tuple[ChannelKind, float]:
    kind, sep, lam = spec.partition(":")
    if not sep:
        raise ConfigError(f"channel spec {spec!r} is not KIND:LAMBDA")
    try:
        return ChannelKind(kind.strip()), float(lam)
    except ValueError as exc:
        raise ConfigError(f"bad channel spec {spec!r}: {exc}") from exc


def make_link(mode: Mode | str, kind: ChannelKind | str, lam: float, channel: Channel | None = None) -> Link:
    """Resolve a (mode, kind, lambda) request to a concrete link.

    ``bit_flip`` is accepted in every mode: classical flips each bit, qubit
    uses the qubit bit-flip channel, qudit4 uses the d=4 shift channel.
    """
    mode, kind = Mode(mode), ChannelKind(kind)
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"noise strength must lie in [0, 1], got {lam}")
    if channel is not None:
        if channel.d != mode.dim:
            raise ConfigError(f"channel dimension {channel.d} does not fit mode {mode.value}")
        return Link(mode, channel.kind, channel.lam, channel)
    if mode is Mode.CLASSICAL:
        if kind not in (ChannelKind.BIT_FLIP, ChannelKind.QUDIT_BIT_FLIP):
            raise ConfigError(f"classical mode supports bit_flip only, got {kind.value}")
        return Link(mode, ChannelKind.BIT_FLIP, lam)
    if mode is Mode.QUDIT4:
        if kind not in (ChannelKind.BIT_FLIP, ChannelKind.QUDIT_BIT_FLIP):
            raise ConfigError(f"qudit4 mode supports qudit_bit_flip only, got {kind.value}")
        return Link(mode, ChannelKind.QUDIT_BIT_FLIP, lam, qcore.builtin_channel("qudit_bit_flip", lam, 4))
    if kind is ChannelKind.QUDIT_BIT_FLIP:
        raise ConfigError("qudit_bit_flip needs mode qudit4")
    return Link(mode, kind, lam, qcore.builtin_channel(kind, lam, 2))


def transmit_bits(bits: np.ndarray, link: Link, rng: np.random.Generator) -> np.ndarray:
    if link.mode is Mode.CLASSICAL:
        return np.asarray(qcore.classical_transmit(bits, link.lam, rng), dtype=np.uint8)
    d = link.mode.dim
    sent = pack_symbols(bits, d)
    got = qcore.transmit_symbols(link.channel, sent, rng)
    return unpack_symbols(got, d)


@dataclass
class Transmission:
    ideal: TextStage
    received: TextStage
    sent_bits: np.ndarray
    received_bits: np.ndarray
    channel_uses: int


def transmit_text(t: TextStage, link: Link, rng: np.random.Generator) -> Transmission:
    bits = ascii_encode(t.text)
    got = transmit_bits(bits, link, rng)
    uses = bits.size // link.mode.bits_per_use
    return Transmission(t, t.realign(ascii_decode(got), Stage.RECEIVED), bits, got, uses)


@dataclass
class StageRecord:
    """All five stages for one transmission unit."""

    ideal: TextStage
    received: TextStage
    repaired: TextStage
    corrected: Optional[TextStage]
    fused: TextStage
    confidence: Optional[np.ndarray]
    sent_bits: np.ndarray
    received_bits: np.ndarray
    channel_uses: int
    threshold: float = 0.5

    @property
    def detected(self) -> set[int]:
        return set() if self.confidence is None else detect_errors(self.confidence, self.threshold)


def post_decode(
    t_q: TextStage,
    dictionary: Dictionary,
    model: Optional[tuple[dict, ModelConfig]] = None,
    threshold: float = 0.5,
):
    """WLRM then (optionally) SLRM. Returns (T^w, T^c, confidences, T^e)."""
    t_w, _ = repair_text(t_q, dictionary)
    if model is None or len(t_w) == 0:
        return t_w, None, None, t_w.replace_words(t_w.words, Stage.FUSED)
    params, cfg = model
    t_c, conf = infer(t_w, params, cfg)
    return t_w, t_c, conf, fuse(t_w, t_c, conf, threshold)


def run_unit(
    t: TextStage,
    link: Link,
    rng: np.random.Generator,
    dictionary: Dictionary,
    model: Optional[tuple[dict, ModelConfig]] = None,
    threshold: float = 0.5,
) -> StageRecord:
    tx = transmit_text(t, link, rng)
    t_w, t_c, conf, t_e = post_decode(tx.received, dictionary, model, threshold)
    return StageRecord(
        ideal=t,
        received=tx.received,
        repaired=t_w,
        corrected=t_c,
        fused=t_e,
        confidence=conf,
        sent_bits=tx.sent_bits,
        received_bits=tx.received_bits,
        channel_uses=tx.channel_uses,
        threshold=threshold,
    )

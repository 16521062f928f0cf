"""Superdense coding over Kraus-operator noise channels.

Alice applies Z(z)X(x) to her half of |Phi_00>, sends it through the channel,
and Bob measures in the generalized Bell basis. Everything here is exact
linear algebra on d x d matrices; sampling is the only stochastic step.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, DomainError

COMPLETENESS_TOL = 1e-10
CUSTOM_COMPLETENESS_TOL = 1e-8
NEG_CLAMP = 1e-12
# amplitudes carry ~1e-16 phase roundoff, i.e. ~1e-32 spurious probability
ZERO_SNAP = 1e-20


class ChannelKind(str, enum.Enum):
    BIT_FLIP = "bit_flip"
    PHASE_FLIP = "phase_flip"
    DEPOLARIZING = "depolarizing"
    AMPLITUDE_DAMPING = "amplitude_damping"
    QUDIT_BIT_FLIP = "qudit_bit_flip"
    CUSTOM = "custom"


class SymbolPair(NamedTuple):
    z: int
    x: int


def _check_index(d: int, z: int, x: int) -> None:
    if d < 1:
        raise DomainError(f"dimension must be positive, got {d}")
    if not (0 <= z < d and 0 <= x < d):
        raise DomainError(f"(z, x) = ({z}, {x}) out of range for d={d}")


def shift(d: int, x: int) -> np.ndarray:
    """X(x) = sum_k |k+x mod d><k|."""
    out = np.zeros((d, d), dtype=np.complex128)
    for k in range(d):
        out[(k + x) % d, k] = 1.0
    return out


def clock(d: int, z: int) -> np.ndarray:
    """Z(z) = sum_k exp(2 pi i k z / d) |k><k|."""
    k = np.arange(d)
    return np.diag(np.exp(2j * np.pi * k * z / d))


def heisenberg_weyl(d: int, z: int, x: int) -> np.ndarray:
    _check_index(d, z, x)
    return clock(d, z) @ shift(d, x)


def bell_state(d: int, z: int, x: int) -> np.ndarray:
    """Amplitudes of (Z(z)X(x) (x) I)|Phi_00>, indexed as a*d + b for |a b>."""
    _check_index(d, z, x)
    phi00 = np.zeros(d * d, dtype=np.complex128)
    phi00[[k * d + k for k in range(d)]] = 1.0 / np.sqrt(d)
    op = np.kron(heisenberg_weyl(d, z, x), np.eye(d))
    return op @ phi00


def completeness_residual(kraus: Iterable[np.ndarray], d: int) -> float:
    acc = np.zeros((d, d), dtype=np.complex128)
    for k in kraus:
        acc += k.conj().T @ k
    return float(np.linalg.norm(acc - np.eye(d), ord="fro"))


@dataclass(frozen=True, eq=False)
class Channel:
    d: int
    lam: float
    kraus: tuple[np.ndarray, ...]
    kind: ChannelKind = ChannelKind.CUSTOM
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ConfigError(f"channel dimension must be positive, got {self.d}")
        if not self.kraus:
            raise ConfigError("channel needs at least one Kraus operator")
        frozen = []
        for k in self.kraus:
            arr = np.array(k, dtype=np.complex128)
            if arr.shape != (self.d, self.d):
                raise ConfigError(f"Kraus operator of shape {arr.shape}, expected {(self.d, self.d)}")
            if not np.all(np.isfinite(arr)):
                raise ConfigError("Kraus operator has non-finite entries")
            arr.setflags(write=False)
            frozen.append(arr)
        object.__setattr__(self, "kraus", tuple(frozen))
        if self.kind is ChannelKind.CUSTOM:
            res = completeness_residual(self.kraus, self.d)
            if res >= CUSTOM_COMPLETENESS_TOL:
                raise ConfigError(f"custom channel is not trace preserving (residual {res:.3g})")

    @property
    def spec(self) -> str:
        return f"{self.kind.value}:{self.lam:g}"


def check_completeness(ch: Channel) -> float:
    return completeness_residual(ch.kraus, ch.d)


_QUBIT_KINDS = {
    ChannelKind.BIT_FLIP,
    ChannelKind.PHASE_FLIP,
    ChannelKind.DEPOLARIZING,
    ChannelKind.AMPLITUDE_DAMPING,
}


def builtin_channel(kind: ChannelKind | str, lam: float, d: int = 2) -> Channel:
    """Kraus sets for the five tabulated noise models."""
    try:
        kind = ChannelKind(kind)
    except ValueError as exc:
        raise ConfigError(f"unknown channel kind {kind!r}") from exc
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"noise strength must lie in [0, 1], got {lam}")
    if kind in _QUBIT_KINDS and d != 2:
        raise ConfigError(f"{kind.value} is defined for d=2 only, got d={d}")
    if kind is ChannelKind.QUDIT_BIT_FLIP and d != 4:
        raise ConfigError(f"qudit_bit_flip is defined for d=4 only, got d={d}")
    if kind is ChannelKind.CUSTOM:
        raise ConfigError("custom channels are built with custom_channel()")

    eye = np.eye(d, dtype=np.complex128)
    X = shift(2, 1)
    Z = clock(2, 1)
    if kind is ChannelKind.BIT_FLIP:
        ops = [np.sqrt(1 - lam) * eye, np.sqrt(lam) * X]
    elif kind is ChannelKind.PHASE_FLIP:
        ops = [np.sqrt(1 - lam) * eye, np.sqrt(lam) * Z]
    elif kind is ChannelKind.DEPOLARIZING:
        Y = np.array([[0, -1j], [1j, 0]])
        q = np.sqrt(lam / 4)
        ops = [np.sqrt(1 - 3 * lam / 4) * eye, q * X, q * Y, q * Z]
    elif kind is ChannelKind.AMPLITUDE_DAMPING:
        ops = [
            np.array([[1, 0], [0, np.sqrt(1 - lam)]], dtype=np.complex128),
            np.array([[0, np.sqrt(lam)], [0, 0]], dtype=np.complex128),
        ]
    else:
        ops = [np.sqrt(1 - lam) * eye] + [np.sqrt(lam / 3) * shift(4, s) for s in (1, 2, 3)]
    return Channel(d=d, lam=lam, kraus=tuple(ops), kind=kind)


def custom_channel(kraus: Sequence[np.ndarray], lam: float = 0.0) -> Channel:
    kraus = [np.asarray(k, dtype=np.complex128) for k in kraus]
    if not kraus:
        raise ConfigError("custom channel needs at least one Kraus operator")
    return Channel(d=kraus[0].shape[0], lam=lam, kraus=tuple(kraus), kind=ChannelKind.CUSTOM)


def _weyl_table(d: int) -> np.ndarray:
    """All d^2 Weyl operators stacked, index z*d + x."""
    return np.stack([heisenberg_weyl(d, z, x) for z in range(d) for x in range(d)])


def sdc_outcome_distribution(ch: Channel, msg: SymbolPair | tuple[int, int]) -> np.ndarray:
    """Bell-measurement outcome probabilities, shape (d, d) indexed [z', x'].

    Uses <Phi_ab| (K (x) I) |Phi_zx> = tr(W_ab^dag K W_zx) / d, which avoids
    building the d^2-dimensional joint state.
    """
    d = ch.d
    z, x = msg
    try:
        _check_index(d, z, x)
    except DomainError as exc:
        raise DomainError(f"message {tuple(msg)} invalid for channel with d={d}") from exc
    key = (z, x)
    if key in ch._cache:
        return ch._cache[key].copy()

    weyl = _weyl_table(d)
    sent = weyl[z * d + x]
    probs = np.zeros(d * d)
    for k in ch.kraus:
        # amp[j] = tr(W_j^dag K U) / d
        amp = np.einsum("jba,bc,ca->j", weyl.conj(), k, sent) / d
        probs += np.abs(amp) ** 2
    probs = probs.reshape(d, d)
    if probs.min() < -NEG_CLAMP:
        raise DomainError(f"negative outcome probability {probs.min():.3g}")
    probs[probs < ZERO_SNAP] = 0.0
    probs /= probs.sum()
    probs.setflags(write=False)
    ch._cache[key] = probs
    return probs.copy()


def outcome_table(ch: Channel) -> np.ndarray:
    """Distributions for every message, shape (d*d, d*d): row = sent z*d+x."""
    d = ch.d
    return np.stack(
        [sdc_outcome_distribution(ch, (z, x)).ravel() for z in range(d) for x in range(d)]
    )


def _cdf(rows: np.ndarray) -> np.ndarray:
    """Row-wise CDF pinned to exactly 1 from the last non-zero entry onward."""
    rows = np.atleast_2d(rows)
    cdf = np.cumsum(rows, axis=1) / rows.sum(axis=1, keepdims=True)
    last = rows.shape[1] - 1 - np.argmax(rows[:, ::-1] > 0, axis=1)
    cdf[np.arange(rows.shape[1])[None, :] >= last[:, None]] = 1.0
    return cdf


def sample_outcome(dist: np.ndarray, rng: np.random.Generator) -> SymbolPair:
    d = dist.shape[0]
    cdf = _cdf(np.asarray(dist, dtype=float).ravel())[0]
    idx = int(np.searchsorted(cdf, rng.random(), side="right"))
    return SymbolPair(idx // d, idx % d)


def transmit_symbols(
    ch: Channel, symbols: Sequence[tuple[int, int]], rng: np.random.Generator
) -> list[SymbolPair]:
    """Send each symbol pair through one noisy SDC use and return Bob's outcomes."""
    if len(symbols) == 0:
        return []
    d = ch.d
    sent = np.array([z * d + x for z, x in symbols], dtype=np.int64)
    cdf = _cdf(outcome_table(ch))
    u = rng.random(sent.size)
    got = (u[:, None] >= cdf[sent]).sum(axis=1)
    return [SymbolPair(int(g) // d, int(g) % d) for g in got]


def classical_transmit(bits: Sequence[int], flip_prob: float, rng: np.random.Generator) -> list[int]:
    if not 0.0 <= flip_prob <= 1.0:
        raise DomainError(f"flip probability must lie in [0, 1], got {flip_prob}")
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.size == 0:
        return []
    flips = rng.random(arr.size) < flip_prob
    return (arr ^ flips.astype(np.uint8)).tolist()

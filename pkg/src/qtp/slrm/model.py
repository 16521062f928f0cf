"""Correction and evaluation networks sharing one encoder.

Input layout: ``[CLS] w_1 ... w_n [SEP]`` with positions 0..n+1. The
correction head reads positions 1..n and produces a distribution over real
vocabulary words (special tokens are masked to probability 0). The
evaluation network reruns the encoder with the corrected tokens' embeddings
added at positions 1..n and emits one sigmoid confidence per word.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..codec import Stage, TextStage
from ..errors import ConfigError, DomainError
from ..wlrm import apply_case, ascii_lower, split_token
from .layers import BLOCK_KEYS, encoder_block_forward, encoder_block_backward, softmax

PAD, UNK, CLS, SEP = "[PAD]", "[UNK]", "[CLS]", "[SEP]"
SPECIAL_TOKENS = (PAD, UNK, CLS, SEP)


@dataclass(frozen=True)
class ModelConfig:
    vocab: tuple[str, ...]
    num_blocks: int = 2
    d_model: int = 64
    heads: int = 4
    ffn_dim: int | None = None
    max_len: int = 64
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "vocab", tuple(self.vocab))
        if self.ffn_dim is None:
            object.__setattr__(self, "ffn_dim", 4 * self.d_model)
        if self.d_model % self.heads:
            raise ConfigError(f"d_model={self.d_model} not divisible by heads={self.heads}")
        for tok in SPECIAL_TOKENS:
            if self.vocab.count(tok) != 1:
                raise ConfigError(f"vocabulary must contain {tok} exactly once")
        if len(set(self.vocab)) != len(self.vocab):
            raise ConfigError("vocabulary has duplicate tokens")
        if self.num_blocks < 0 or self.max_len < 3:
            raise ConfigError("num_blocks must be >= 0 and max_len >= 3")
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.vocab)})

    @classmethod
    def from_words(cls, words: Iterable[str], **kw) -> "ModelConfig":
        return cls(vocab=SPECIAL_TOKENS + tuple(sorted(set(words) - set(SPECIAL_TOKENS))), **kw)

    @property
    def d_head(self) -> int:
        return self.d_model // self.heads

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def token_id(self, token: str) -> int:
        return self._index.get(token, self._index[UNK])

    @property
    def special_ids(self) -> np.ndarray:
        return np.array([self._index[t] for t in SPECIAL_TOKENS])

    def to_dict(self) -> dict:
        return {
            "num_blocks": self.num_blocks,
            "d_model": self.d_model,
            "heads": self.heads,
            "ffn_dim": self.ffn_dim,
            "max_len": self.max_len,
        }


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    d, h, dh, f, v = cfg.d_model, cfg.heads, cfg.d_head, cfg.ffn_dim, cfg.vocab_size
    shapes = {"tok_emb": (v, d), "pos_emb": (cfg.max_len, d)}
    block = {
        "wq": (h, d, dh), "wk": (h, d, dh), "wv": (h, d, dh), "wo": (d, d),
        "ln1_g": (d,), "ln1_b": (d,), "w1": (d, f), "b1": (f,), "w2": (f, d), "b2": (d,),
        "ln2_g": (d,), "ln2_b": (d,),
    }
    for b in range(cfg.num_blocks):
        for k in BLOCK_KEYS:
            shapes[f"blocks.{b}.{k}"] = block[k]
    shapes.update({"corr_w": (d, v), "corr_b": (v,), "eval_w": (d, 1), "eval_b": (1,)})
    return shapes


def init_params(cfg: ModelConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, unit norm scales."""
    params = {}
    for name, shape in param_shapes(cfg).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf.endswith("_g"):
            params[name] = np.ones(shape)
        elif leaf in ("b1", "b2", "corr_b", "eval_b") or leaf.endswith("_b"):
            params[name] = np.zeros(shape)
        else:
            fan_in = shape[-2] if len(shape) >= 2 and leaf not in ("tok_emb", "pos_emb") else shape[-1]
            bound = 1.0 / np.sqrt(fan_in)
            params[name] = rng.uniform(-bound, bound, size=shape)
    return params


def _block(params: dict, b: int) -> dict:
    return {k: params[f"blocks.{b}.{k}"] for k in BLOCK_KEYS}


def word_key(token: str) -> str:
    """Vocabulary lookup key: lowercase core with edge punctuation removed."""
    return ascii_lower(split_token(token)[1])


def encode_words(words: Sequence[str], cfg: ModelConfig) -> np.ndarray:
    if len(words) > cfg.max_len - 2:
        raise DomainError(
            f"sentence of {len(words)} words exceeds max_len-2={cfg.max_len - 2}; segment it first"
        )
    return np.array([cfg.token_id(word_key(w)) for w in words], dtype=np.int64)


def run_encoder(params: dict, cfg: ModelConfig, ids: np.ndarray, extra: np.ndarray | None = None):
    """Encode ``[CLS] ids [SEP]``; ``extra`` token ids are embedded and added at word positions."""
    n = len(ids)
    if n > cfg.max_len - 2:
        raise DomainError(f"sequence of {n} words exceeds max_len-2={cfg.max_len - 2}")
    full = np.concatenate(([cfg.token_id(CLS)], ids, [cfg.token_id(SEP)]))
    x = params["tok_emb"][full] + params["pos_emb"][: n + 2]
    if extra is not None:
        if len(extra) != n:
            raise DomainError(f"extra ids length {len(extra)} != {n}")
        x = x.copy()
        x[1 : n + 1] += params["tok_emb"][extra]
    caches = []
    for b in range(cfg.num_blocks):
        x, c = encoder_block_forward(x, _block(params, b))
        caches.append(c)
    return x, (full, extra, caches)


def encoder_backward(params: dict, cfg: ModelConfig, dh: np.ndarray, cache, grads: dict) -> None:
    """Accumulate encoder parameter gradients for upstream ``dh`` into ``grads``."""
    full, extra, caches = cache
    for b in reversed(range(cfg.num_blocks)):
        dh, g = encoder_block_backward(dh, caches[b])
        for k, v in g.items():
            grads[f"blocks.{b}.{k}"] += v
    n = len(full) - 2
    grads["pos_emb"][: n + 2] += dh
    np.add.at(grads["tok_emb"], full, dh)
    if extra is not None:
        np.add.at(grads["tok_emb"], extra, dh[1 : n + 1])


def correction_logits(params: dict, cfg: ModelConfig, h: np.ndarray) -> np.ndarray:
    n = h.shape[0] - 2
    logits = h[1 : n + 1] @ params["corr_w"] + params["corr_b"]
    logits[:, cfg.special_ids] = -np.inf
    return logits


def sigmoid(s: np.ndarray) -> np.ndarray:
    out = np.empty_like(s, dtype=float)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    e = np.exp(s[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def evaluation_scores(params: dict, h: np.ndarray) -> np.ndarray:
    n = h.shape[0] - 2
    return (h[1 : n + 1] @ params["eval_w"] + params["eval_b"])[:, 0]


def _words(t: TextStage | Sequence[str]) -> Sequence[str]:
    return t.words if isinstance(t, TextStage) else t


def correction_forward(t_w: TextStage | Sequence[str], params: dict, cfg: ModelConfig) -> np.ndarray:
    """P^c: one probability row per word, shape (n, vocab_size)."""
    ids = encode_words(_words(t_w), cfg)
    h, _ = run_encoder(params, cfg, ids)
    return softmax(correction_logits(params, cfg, h))


def decode_ids(probs: np.ndarray) -> np.ndarray:
    # np.argmax keeps the first maximum, i.e. the lowest vocabulary index
    return np.argmax(probs, axis=1)


def decode_correction(
    probs: np.ndarray, cfg: ModelConfig, template: TextStage | None = None
) -> TextStage:
    """Argmax word per row. With a template, each word takes the template token's
    case and edge punctuation, and the template's whitespace."""
    words = [cfg.vocab[i] for i in decode_ids(probs)]
    if template is None:
        return TextStage.from_words(words, Stage.CORRECTED)
    return template.replace_words([restyle(w, t) for w, t in zip(words, template.words)], Stage.CORRECTED)


def restyle(word: str, like: str) -> str:
    lead, core, trail = split_token(like)
    return lead + apply_case(word, core or word) + trail


def evaluation_forward(
    t_w: TextStage | Sequence[str], t_c: TextStage | Sequence[str], params: dict, cfg: ModelConfig
) -> np.ndarray:
    """Confidence c_i in [0, 1] that the correction at word i should be used."""
    w, c = _words(t_w), _words(t_c)
    if len(w) != len(c):
        raise DomainError(f"length mismatch: {len(w)} vs {len(c)}")
    h, _ = run_encoder(params, cfg, encode_words(w, cfg), encode_words(c, cfg))
    return sigmoid(evaluation_scores(params, h))


def infer(t_w: TextStage, params: dict, cfg: ModelConfig) -> tuple[TextStage, np.ndarray]:
    """Correction then evaluation for one sentence: (T^c, confidences)."""
    ids = encode_words(t_w.words, cfg)
    if len(ids) == 0:
        return t_w.replace_words([], Stage.CORRECTED), np.zeros(0)
    h, _ = run_encoder(params, cfg, ids)
    probs = softmax(correction_logits(params, cfg, h))
    cids = decode_ids(probs)
    h2, _ = run_encoder(params, cfg, ids, cids)
    conf = sigmoid(evaluation_scores(params, h2))
    return decode_correction(probs, cfg, t_w), conf


def fuse(t_w: TextStage, t_c: TextStage, c: Sequence[float], threshold: float = 0.5) -> TextStage:
    """Take the corrected word where confidence >= threshold, else the WLRM word."""
    c = np.asarray(c, dtype=float)
    if not (len(t_w) == len(t_c) == len(c)):
        raise DomainError(f"length mismatch: {len(t_w)}, {len(t_c)}, {len(c)}")
    words = [wc if ci >= threshold else ww for ww, wc, ci in zip(t_w.words, t_c.words, c)]
    return t_w.replace_words(words, Stage.FUSED)


def detect_errors(c: Sequence[float], threshold: float = 0.5) -> set[int]:
    """1-indexed positions the evaluation network flags as corrupted."""
    return {i for i, ci in enumerate(c, start=1) if ci >= threshold}

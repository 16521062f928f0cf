"""Joint training of the correction and evaluation networks.

One step per training pair (batch size 1 by default): correction forward on
T^w, evaluation forward on (T^w, argmax correction), loss
``theta * L_c + (1 - theta) * L_e``, Adam update. After every epoch the
parameter EMA is refreshed; the EMA is the model used for inference.
"""

from __future__ import annotations

import copy
import csv
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .codec import TextStage
from .errors import ConfigError, DataError, DivergenceError, DomainError
from .pipeline import Link, transmit_text
from .rng import substream
from .slrm.layers import softmax
from .slrm.model import (
    ModelConfig,
    correction_logits,
    decode_ids,
    encode_words,
    encoder_backward,
    evaluation_scores,
    init_params,
    run_encoder,
    sigmoid,
    word_key,
)
from .wlrm import Dictionary, repair_text

log = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    theta: float = 0.5
    alpha: float = 0.25
    gamma: float = 2.0
    epsilon: float = 1e-8
    lr: float = 1e-3
    epochs: int = 10  # K, inner loop
    outer_iterations: int = 1  # N_epochs, outer loop
    ema_decay: float = 0.999
    batch_size: int = 1
    seed: int = 0
    channel: str = "bit_flip:0.01"
    mode: str = "qubit"

    def __post_init__(self) -> None:
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigError(f"theta must lie in [0, 1], got {self.theta}")
        if self.gamma < 0 or self.epsilon <= 0 or self.lr <= 0:
            raise ConfigError("need gamma >= 0, epsilon > 0 and lr > 0")
        if not 0.0 <= self.ema_decay <= 1.0:
            raise ConfigError(f"ema_decay must lie in [0, 1], got {self.ema_decay}")
        if self.epochs < 0 or self.outer_iterations < 0 or self.batch_size < 1:
            raise ConfigError("epochs and outer_iterations must be >= 0, batch_size >= 1")

    @property
    def total_epochs(self) -> int:
        return self.epochs * self.outer_iterations


@dataclass
class TrainingPair:
    target: TextStage
    input: TextStage
    labels: tuple[int, ...]
    received: Optional[TextStage] = None

    def __post_init__(self) -> None:
        if not (len(self.target) == len(self.input) == len(self.labels)):
            raise DomainError("target, input and labels must have equal word counts")


def make_q_labels(t_w: TextStage, t: TextStage) -> tuple[int, ...]:
    """q_i = 1 where the word-repaired word still differs from the ideal one."""
    if len(t_w) != len(t):
        raise DomainError(f"word count mismatch: {len(t_w)} vs {len(t)}")
    return tuple(int(a != b) for a, b in zip(t_w.words, t.words))


def generate_noisy_corpus(
    corpus: Sequence[str | TextStage],
    link: Link,
    dictionary: Dictionary,
    seed: int,
    stream: str = "corpus",
) -> list[TrainingPair]:
    """Transmit every sentence once through ``link`` and word-repair it.

    Sentence ``i`` draws from substream ``(seed, stream, i)``.
    """
    pairs = []
    for i, sent in enumerate(corpus):
        t = sent if isinstance(sent, TextStage) else TextStage.from_string(sent)
        try:
            tx = transmit_text(t, link, substream(seed, stream, i))
        except DomainError as exc:
            raise DataError(f"corpus sentence {i + 1}: {exc}") from exc
        t_w, _ = repair_text(tx.received, dictionary)
        pairs.append(TrainingPair(t, t_w, make_q_labels(t_w, t), tx.received))
    return pairs


def _target_ids(t: TextStage | Sequence[str], cfg: ModelConfig) -> np.ndarray:
    words = t.words if isinstance(t, TextStage) else t
    ids = []
    for w in words:
        key = word_key(w)
        if key not in cfg._index or cfg.token_id(key) in cfg.special_ids:
            raise DataError(f"target word {w!r} is not in the model vocabulary")
        ids.append(cfg.token_id(key))
    return np.array(ids, dtype=np.int64)


def correction_loss(probs: np.ndarray, target, cfg: ModelConfig | None = None) -> float:
    """-sum_i log P^c_i[target_i]. ``target`` is a TextStage (needs cfg) or id array."""
    ids = np.asarray(target) if cfg is None else _target_ids(target, cfg)
    if len(ids) != probs.shape[0]:
        raise DomainError(f"{probs.shape[0]} rows for {len(ids)} targets")
    with np.errstate(divide="ignore"):
        return float(-np.log(probs[np.arange(len(ids)), ids]).sum())


def _focal_f(c: np.ndarray, q: np.ndarray) -> np.ndarray:
    return np.where(q == 1, c, 1.0 - c)


def evaluation_loss(c, q, alpha: float = 0.25, gamma: float = 2.0, eps: float = 1e-8) -> float:
    """-sum_i alpha (1 - f_i)^gamma log(f_i + eps), f_i = c_i if q_i else 1 - c_i."""
    c = np.asarray(c, dtype=float)
    q = np.asarray(q)
    if c.shape != q.shape:
        raise DomainError(f"confidence length {c.size} != label length {q.size}")
    f = _focal_f(c, q)
    with np.errstate(divide="ignore"):
        return float(-(alpha * (1.0 - f) ** gamma * np.log(f + eps)).sum())


def _evaluation_loss_grad(c, q, alpha, gamma, eps) -> np.ndarray:
    """dL_e/dc."""
    f = _focal_f(c, q)
    one_minus = 1.0 - f
    dpow = np.zeros_like(f) if gamma == 0 else gamma * one_minus ** (gamma - 1)
    df = -alpha * (-dpow * np.log(f + eps) + one_minus**gamma / (f + eps))
    return np.where(q == 1, df, -df)


def combined_loss(l_c: float, l_e: float, theta: float) -> float:
    if not 0.0 <= theta <= 1.0:
        raise DomainError(f"theta must lie in [0, 1], got {theta}")
    return theta * l_c + (1.0 - theta) * l_e


def _zeros_like(params: dict) -> dict:
    return {k: np.zeros_like(v) for k, v in params.items()}


def objective(
    params: dict,
    cfg: ModelConfig,
    input_ids: np.ndarray,
    target_ids: np.ndarray,
    q: np.ndarray,
    tcfg: TrainConfig,
    corrected_ids: np.ndarray | None = None,
):
    """Combined loss and its gradient for one sentence.

    ``corrected_ids`` fixes the tokens fed to the evaluation network; by
    default they are the argmax of the current correction output, which is
    piecewise constant in the parameters and therefore carries no gradient.
    Returns ``(L, L_c, L_e, grads, corrected_ids)``.
    """
    grads = _zeros_like(params)
    n = len(input_ids)
    h1, cache1 = run_encoder(params, cfg, input_ids)
    probs = softmax(correction_logits(params, cfg, h1))
    l_c = correction_loss(probs, target_ids)
    if corrected_ids is None:
        corrected_ids = decode_ids(probs)

    h2, cache2 = run_encoder(params, cfg, input_ids, corrected_ids)
    conf = sigmoid(evaluation_scores(params, h2))
    l_e = evaluation_loss(conf, q, tcfg.alpha, tcfg.gamma, tcfg.epsilon)
    total = combined_loss(l_c, l_e, tcfg.theta)

    # correction head: d(-log softmax)/dlogits = P - onehot; masked columns have P = 0
    dlogits = probs.copy()
    dlogits[np.arange(n), target_ids] -= 1.0
    dlogits *= tcfg.theta
    hw = h1[1 : n + 1]
    grads["corr_w"] += hw.T @ dlogits
    grads["corr_b"] += dlogits.sum(axis=0)
    dh1 = np.zeros_like(h1)
    dh1[1 : n + 1] = dlogits @ params["corr_w"].T
    encoder_backward(params, cfg, dh1, cache1, grads)

    dconf = _evaluation_loss_grad(conf, q, tcfg.alpha, tcfg.gamma, tcfg.epsilon) * (1.0 - tcfg.theta)
    ds = (dconf * conf * (1.0 - conf))[:, None]
    he = h2[1 : n + 1]
    grads["eval_w"] += he.T @ ds
    grads["eval_b"] += ds.sum(axis=0)
    dh2 = np.zeros_like(h2)
    dh2[1 : n + 1] = ds @ params["eval_w"].T
    encoder_backward(params, cfg, dh2, cache2, grads)
    return total, l_c, l_e, grads, corrected_ids


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def optimizer_step(params: dict, grads: dict, state: AdamState, lr: float) -> tuple[dict, AdamState]:
    """Bias-corrected Adam update, in place on ``params`` and ``state``."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            bad = int(np.count_nonzero(~np.isfinite(g)))
            raise DivergenceError(f"non-finite gradient for {name} ({bad} entries) at step {state.t + 1}")
    state.t += 1
    c1 = 1.0 - ADAM_BETA1**state.t
    c2 = 1.0 - ADAM_BETA2**state.t
    for name, g in grads.items():
        m = state.m.setdefault(name, np.zeros_like(g))
        v = state.v.setdefault(name, np.zeros_like(g))
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        params[name] -= lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)
    return params, state


def ema_update(shadow: dict, params: dict, decay: float) -> dict:
    for name, p in params.items():
        shadow[name] = decay * shadow[name] + (1.0 - decay) * p
    return shadow


def ema_debiased(shadow: dict, decay: float, updates: int, fallback: dict) -> dict:
    """Zero-started shadow divided by 1 - decay**updates.

    The result is a convex combination of the averaged parameters only; with no
    updates (or decay 1) nothing has been averaged and ``fallback`` is returned.
    """
    norm = 1.0 - decay**updates
    if updates == 0 or norm <= 0.0:
        return copy.deepcopy(fallback)
    return {k: v / norm for k, v in shadow.items()}


def split_dataset(pairs: Sequence, ratios=(80, 10, 10), rng: np.random.Generator | None = None):
    """Seeded shuffle, then floor(n*r/100) items each for valid and test; train keeps the rest."""
    if len(ratios) != 3 or sum(ratios) != 100 or min(ratios) < 0:
        raise ConfigError(f"split ratios must be three non-negative numbers summing to 100, got {ratios}")
    n = len(pairs)
    order = np.arange(n) if rng is None else rng.permutation(n)
    n_valid = n * ratios[1] // 100
    n_test = n * ratios[2] // 100
    n_train = n - n_valid - n_test
    pick = lambda idx: [pairs[i] for i in idx]  # noqa: E731
    return (
        pick(order[:n_train]),
        pick(order[n_train : n_train + n_valid]),
        pick(order[n_train + n_valid :]),
    )


@dataclass
class TrainResult:
    params: dict
    ema: dict
    history: list[dict]
    steps: int


def _prepare(pairs: Sequence[TrainingPair], cfg: ModelConfig):
    out = []
    for p in pairs:
        if len(p.input) == 0:
            continue
        out.append((encode_words(p.input.words, cfg), _target_ids(p.target, cfg), np.asarray(p.labels)))
    return out


def _step(params, grads, state, lr, last_good) -> None:
    try:
        optimizer_step(params, grads, state, lr)
    except DivergenceError as err:
        err.last_good = last_good
        raise


def train(
    pairs: Sequence[TrainingPair],
    cfg: ModelConfig,
    tcfg: TrainConfig,
    params: dict | None = None,
    progress: bool = False,
) -> TrainResult:
    """Algorithm-1 loop: outer x inner epochs, shuffle, per-pair steps, EMA per epoch.

    The EMA shadow starts at zero and is bias-corrected after the last epoch,
    so the initial weights carry no share of it. On a non-finite loss or
    gradient :class:`DivergenceError` is raised with ``.last_good`` holding the
    parameters from the end of the previous epoch.
    """
    if not pairs:
        raise ConfigError("training split is empty")
    data = _prepare(pairs, cfg)
    if params is None:
        params = init_params(cfg, substream(tcfg.seed, "init"))
    initial = copy.deepcopy(params)
    shadow = _zeros_like(params)
    state = AdamState()
    history = []
    shuffle_rng = substream(tcfg.seed, "shuffle")
    epoch = 0
    for _outer in range(tcfg.outer_iterations):
        for _inner in range(tcfg.epochs):
            epoch += 1
            last_good = copy.deepcopy(params)
            sums = np.zeros(3)
            acc, in_batch = None, 0
            for idx in shuffle_rng.permutation(len(data)):
                ids_w, ids_t, q = data[idx]
                total, l_c, l_e, grads, _ = objective(params, cfg, ids_w, ids_t, q, tcfg)
                if not np.isfinite(total):
                    err = DivergenceError(f"loss became non-finite in epoch {epoch}")
                    err.last_good = last_good
                    raise err
                sums += (total, l_c, l_e)
                if tcfg.batch_size == 1:
                    _step(params, grads, state, tcfg.lr, last_good)
                    continue
                acc = grads if acc is None else {k: acc[k] + grads[k] for k in acc}
                in_batch += 1
                if in_batch == tcfg.batch_size:
                    _step(params, {k: v / in_batch for k, v in acc.items()}, state, tcfg.lr, last_good)
                    acc, in_batch = None, 0
            if acc is not None:
                _step(params, {k: v / in_batch for k, v in acc.items()}, state, tcfg.lr, last_good)
            ema_update(shadow, params, tcfg.ema_decay)
            mean = sums / len(data)
            history.append({"epoch": epoch, "L": mean[0], "L_c": mean[1], "L_e": mean[2]})
            if progress:
                log.info("epoch %d  L=%.4f  L_c=%.4f  L_e=%.4f", epoch, *mean)
    ema = ema_debiased(shadow, tcfg.ema_decay, epoch, initial)
    return TrainResult(params, ema, history, state.t)


HISTORY_COLUMNS = ("epoch", "L", "L_c", "L_e")


def write_history(path: str | Path, history: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for row in history:
            w.writerow([row["epoch"]] + [repr(float(row[k])) for k in HISTORY_COLUMNS[1:]])


def train_config_dict(tcfg: TrainConfig) -> dict:
    return asdict(tcfg)

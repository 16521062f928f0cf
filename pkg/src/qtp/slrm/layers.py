"""Transformer encoder pieces in numpy with explicit backward passes.

Every ``*_forward`` returns ``(out, cache)``; the matching ``*_backward``
takes the upstream gradient and the cache and returns input gradients plus a
dict of parameter gradients. Shapes: sequences are (n, d_model); per-head
projections are stacked as (h, d_model, d_model // h).
"""

from __future__ import annotations

import numpy as np

from ..errors import DomainError

LN_EPS = 1e-6


def softmax(s: np.ndarray, axis: int = -1) -> np.ndarray:
    s = s - s.max(axis=axis, keepdims=True)
    e = np.exp(s)
    return e / e.sum(axis=axis, keepdims=True)


def _softmax_backward(a: np.ndarray, da: np.ndarray) -> np.ndarray:
    return a * (da - (da * a).sum(axis=-1, keepdims=True))


def attention_head(x: np.ndarray, wq: np.ndarray, wk: np.ndarray, wv: np.ndarray) -> np.ndarray:
    """softmax((x wq)(x wk)^T / sqrt(d_head)) x wv for a single head."""
    if x.ndim != 2 or wq.shape[0] != x.shape[1] or wq.shape != wk.shape or wq.shape != wv.shape:
        raise DomainError(f"attention shapes x{x.shape} wq{wq.shape} wk{wk.shape} wv{wv.shape}")
    out, _ = multi_head_forward(x, wq[None], wk[None], wv[None], None)
    return out


def multi_head_forward(x, wq, wk, wv, wo):
    """Concat(head_1..head_h) wo. ``wo=None`` skips the output projection."""
    h, d, dh = wq.shape
    if x.ndim != 2 or x.shape[1] != d or wk.shape != wq.shape or wv.shape != wq.shape:
        raise DomainError(f"multi-head shapes x{x.shape} w{wq.shape}")
    if wo is not None and wo.shape != (h * dh, d):
        raise DomainError(f"output projection shape {wo.shape}, expected {(h * dh, d)}")
    q = x @ wq  # (h, n, dh)
    k = x @ wk
    v = x @ wv
    scale = 1.0 / np.sqrt(dh)
    attn = softmax((q @ k.transpose(0, 2, 1)) * scale)
    heads = attn @ v
    concat = heads.transpose(1, 0, 2).reshape(x.shape[0], h * dh)
    out = concat if wo is None else concat @ wo
    return out, (x, q, k, v, attn, concat, wq, wk, wv, wo, scale)


def multi_head_backward(dout, cache):
    x, q, k, v, attn, concat, wq, wk, wv, wo, scale = cache
    h, d, dh = wq.shape
    n = x.shape[0]
    grads = {}
    if wo is not None:
        grads["wo"] = concat.T @ dout
        dconcat = dout @ wo.T
    else:
        dconcat = dout
    dheads = dconcat.reshape(n, h, dh).transpose(1, 0, 2)
    dattn = dheads @ v.transpose(0, 2, 1)
    dv = attn.transpose(0, 2, 1) @ dheads
    ds = _softmax_backward(attn, dattn) * scale
    dq = ds @ k
    dk = ds.transpose(0, 2, 1) @ q
    xt = x.T
    grads["wq"] = xt @ dq
    grads["wk"] = xt @ dk
    grads["wv"] = xt @ dv
    dx = (dq @ wq.transpose(0, 2, 1) + dk @ wk.transpose(0, 2, 1) + dv @ wv.transpose(0, 2, 1)).sum(axis=0)
    return dx, grads


def layer_norm_forward(x, gamma, beta):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (x - mu) * inv
    return xhat * gamma + beta, (xhat, inv, gamma)


def layer_norm_backward(dout, cache):
    xhat, inv, gamma = cache
    grads = {"gamma": (dout * xhat).sum(axis=0), "beta": dout.sum(axis=0)}
    dxhat = dout * gamma
    dx = inv * (
        dxhat - dxhat.mean(axis=-1, keepdims=True) - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, grads


def ffn_forward(x, w1, b1, w2, b2):
    pre = x @ w1 + b1
    act = np.maximum(pre, 0.0)
    return act @ w2 + b2, (x, pre, act, w1, w2)


def ffn_backward(dout, cache):
    x, pre, act, w1, w2 = cache
    grads = {"w2": act.T @ dout, "b2": dout.sum(axis=0)}
    dpre = (dout @ w2.T) * (pre > 0)
    grads["w1"] = x.T @ dpre
    grads["b1"] = dpre.sum(axis=0)
    return dpre @ w1.T, grads


BLOCK_KEYS = ("wq", "wk", "wv", "wo", "ln1_g", "ln1_b", "w1", "b1", "w2", "b2", "ln2_g", "ln2_b")


def encoder_block_forward(x, p: dict):
    """LayerNorm(x + MultiHead(x)), then LayerNorm(h + FFN(h))."""
    att, c_att = multi_head_forward(x, p["wq"], p["wk"], p["wv"], p["wo"])
    h, c_ln1 = layer_norm_forward(x + att, p["ln1_g"], p["ln1_b"])
    f, c_ffn = ffn_forward(h, p["w1"], p["b1"], p["w2"], p["b2"])
    out, c_ln2 = layer_norm_forward(h + f, p["ln2_g"], p["ln2_b"])
    return out, (c_att, c_ln1, c_ffn, c_ln2)


def encoder_block_backward(dout, cache):
    c_att, c_ln1, c_ffn, c_ln2 = cache
    dsum2, g = layer_norm_backward(dout, c_ln2)
    grads = {"ln2_g": g["gamma"], "ln2_b": g["beta"]}
    dh_ffn, g = ffn_backward(dsum2, c_ffn)
    grads.update(g)
    dh = dsum2 + dh_ffn
    dsum1, g = layer_norm_backward(dh, c_ln1)
    grads["ln1_g"], grads["ln1_b"] = g["gamma"], g["beta"]
    dx_att, g = multi_head_backward(dsum1, c_att)
    grads.update(g)
    return dsum1 + dx_att, grads


def encoder_block(x, p: dict) -> np.ndarray:
    return encoder_block_forward(x, p)[0]


def multi_head(x, wq, wk, wv, wo) -> np.ndarray:
    return multi_head_forward(x, wq, wk, wv, wo)[0]

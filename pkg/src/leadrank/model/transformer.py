"""Decoder-only transformer forward and backward passes.

Pre-norm blocks with causal self-attention and a squared-ReLU feed-forward;
the hidden state at each sequence's terminal BOS position feeds three
bias-free heads:

    h_ctr1 = h_bos @ W_ctr1        (the exportable 128-dim text embedding)
    h_ctr  = h_ctr1 @ W_ctr2       (scalar purchase logit)
    h_qa   = h_bos @ W_qa          (full-vocabulary answer logits)

The backward pass produces gradients only for the trainable parameters
(low-rank factors and heads); the frozen backbone receives none. Hot paths
avoid copies: the attention scale folds into Q, the causal mask is cached
per length, and single-head batches skip the head split entirely.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import ContextLengthError
from ..promptize.prompt import TokenSequence
from .params import AdaptedMatrix, Model


@dataclass
class ForwardOutput:
    h_bos: np.ndarray             # (B, d_model)
    h_ctr1: np.ndarray            # (B, 128)
    h_ctr: np.ndarray             # (B,)
    h_qa: np.ndarray              # (B, vocab)
    lm_logits: np.ndarray | None = None  # (B, T, vocab) when requested


def _layer_norm(x, gamma, beta, eps=1e-5):
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x - mean) * inv_std
    return gamma * x_hat + beta, (x_hat, inv_std)

def _layer_norm_backward(dy, gamma, cache):
    x_hat, inv_std = cache
    dx_hat = dy * gamma
    m1 = dx_hat.mean(axis=-1, keepdims=True)
    m2 = (dx_hat * x_hat).mean(axis=-1, keepdims=True)
    return inv_std * (dx_hat - m1 - x_hat * m2)


def _sq_relu(x):
    r = np.maximum(x, 0.0)
    return r * r, r

def _sq_relu_backward(dy, r):
    return dy * (2.0 * r)


def _dropout(x, p, rng):
    """Inverted dropout; returns (output, mask) with mask None when inactive."""
    if p <= 0.0 or rng is None:
        return x, None
    mask = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    return x * mask, mask


@lru_cache(maxsize=8)
def _causal_mask(t: int, dtype_name: str) -> np.ndarray:
    mask = np.zeros((t, t), dtype=np.dtype(dtype_name))
    mask[np.triu_indices(t, k=1)] = -np.inf
    return mask


class _ScratchPool:
    """Recycles the large (B*H, T, T) attention buffers.

    Fresh multi-hundred-MB allocations pay a page-zeroing cost on every
    step; reusing buffers across layers and steps removes it. Capped so
    rarely-seen shapes cannot accumulate unbounded memory.
    """

    def __init__(self, max_bytes: int = 2 << 30):
        self._free: dict[tuple, list[np.ndarray]] = {}
        self._bytes = 0
        self._max_bytes = max_bytes

    def take(self, shape: tuple, dtype) -> np.ndarray:
        key = (shape, np.dtype(dtype).name)
        stack = self._free.get(key)
        if stack:
            arr = stack.pop()
            self._bytes -= arr.nbytes
            return arr
        return np.empty(shape, dtype)

    def give(self, arr: np.ndarray) -> None:
        if arr.nbytes + self._bytes > self._max_bytes:
            return
        self._free.setdefault((arr.shape, arr.dtype.name), []).append(arr)
        self._bytes += arr.nbytes


_POOL = _ScratchPool()


def _split_heads(x2d: np.ndarray, b: int, t: int, h: int, dk: int) -> np.ndarray:
    """(B*T, d_model) -> contiguous (B*H, T, dk); copy-free when H == 1."""
    if h == 1:
        return x2d.reshape(b, t, dk)
    return np.ascontiguousarray(
        x2d.reshape(b, t, h, dk).transpose(0, 2, 1, 3)).reshape(b * h, t, dk)

def _merge_heads(x: np.ndarray, b: int, t: int, h: int, dk: int) -> np.ndarray:
    """(B*H, T, dk) -> (B*T, d_model); copy-free when H == 1."""
    if h == 1:
        return x.reshape(b * t, dk)
    return np.ascontiguousarray(
        x.reshape(b, h, t, dk).transpose(0, 2, 1, 3)).reshape(b * t, h * dk)


def forward_batch(model: Model, ids: np.ndarray, bos_index: np.ndarray,
                  train_mode: bool = False, rng: np.random.Generator | None = None,
                  use_lora: bool = True, want_lm_logits: bool = False,
                  want_cache: bool = False):
    """Run a right-padded batch; returns ForwardOutput (and a cache if asked).

    Padding after each sequence's BOS never influences real positions: pads
    sit at later indices, and the causal mask bars attention to them.
    """
    cfg = model.cfg
    B, T = ids.shape
    if T > cfg.max_context:
        raise ContextLengthError(f"sequence length {T} exceeds max_context {cfg.max_context}")
    H, dk = cfg.n_heads, cfg.d_model // cfg.n_heads
    d = cfg.d_model
    p = cfg.dropout if train_mode else 0.0
    drop_rng = rng if train_mode else None

    x = model.embed[ids] + model.pos[:T]
    x, emb_mask = _dropout(x, p, drop_rng)
    mask = _causal_mask(T, x.dtype.name)

    cache = {"ids": ids, "bos_index": bos_index, "emb_mask": emb_mask,
             "layers": [], "p": p, "use_lora": use_lora} if want_cache else None

    for layer in model.layers:
        weff = {key: m.effective(use_lora) for key, m in layer.adapted().items()}

        a, ln1_cache = _layer_norm(x, layer.ln1_g, layer.ln1_b)
        a2 = a.reshape(B * T, d)
        q2 = a2 @ weff["wq"]
        q2 *= dk ** -0.5  # fold the attention scale into Q
        q = _split_heads(q2, B, T, H, dk)
        k = _split_heads(a2 @ weff["wk"], B, T, H, dk)
        v = _split_heads(a2 @ weff["wv"], B, T, H, dk)

        scores = _POOL.take((B * H, T, T), x.dtype)
        np.matmul(q, k.transpose(0, 2, 1), out=scores)
        scores += mask
        scores -= scores.max(axis=-1, keepdims=True)
        np.exp(scores, out=scores)
        scores /= scores.sum(axis=-1, keepdims=True)
        probs = scores  # softmax computed in place
        probs_used, attn_mask = _dropout(probs, p, drop_rng)

        ctx = _merge_heads(np.matmul(probs_used, v), B, T, H, dk)
        if not want_cache:
            _POOL.give(probs)
        attn_out = (ctx @ weff["wo"]).reshape(B, T, d)
        attn_out, out_mask = _dropout(attn_out, p, drop_rng)
        x_mid = x + attn_out

        b, ln2_cache = _layer_norm(x_mid, layer.ln2_g, layer.ln2_b)
        f1 = b.reshape(B * T, d) @ weff["w1"]
        g, relu_f1 = _sq_relu(f1)
        f2 = (g @ weff["w2"]).reshape(B, T, d)
        f2, ff_mask = _dropout(f2, p, drop_rng)
        x = x_mid + f2

        if want_cache:
            cache["layers"].append(dict(
                a=a, ln1=ln1_cache, q=q, k=k, v=v, probs=probs,
                probs_used=probs_used, attn_mask=attn_mask, ctx=ctx,
                out_mask=out_mask, ln2=ln2_cache, b=b, relu_f1=relu_f1, g=g,
                ff_mask=ff_mask, weff=weff))

    h_final, lnf_cache = _layer_norm(x, model.lnf_g, model.lnf_b)
    h_bos = h_final[np.arange(B), bos_index]
    h_ctr1 = h_bos @ model.heads.w_ctr1
    h_ctr = (h_ctr1 @ model.heads.w_ctr2)[:, 0]
    h_qa = h_bos @ model.heads.w_qa
    lm_logits = None
    if want_lm_logits:
        lm_logits = (h_final.reshape(B * T, d) @ model.heads.w_qa).reshape(B, T, -1)

    out = ForwardOutput(h_bos=h_bos, h_ctr1=h_ctr1, h_ctr=h_ctr, h_qa=h_qa, lm_logits=lm_logits)
    if want_cache:
        cache.update(h_final=h_final, lnf=lnf_cache, h_bos=h_bos, h_ctr1=h_ctr1)
        return out, cache
    return out


def forward(model: Model, tokens: TokenSequence, train_mode: bool = False,
            rng: np.random.Generator | None = None, use_lora: bool = True,
            want_lm_logits: bool = False) -> ForwardOutput:
    """Single-sequence convenience wrapper around forward_batch."""
    ids = np.asarray([tokens.ids], dtype=np.int64)
    bos = np.asarray([tokens.bos_index], dtype=np.int64)
    return forward_batch(model, ids, bos, train_mode=train_mode, rng=rng,
                         use_lora=use_lora, want_lm_logits=want_lm_logits)


def backward_batch(model: Model, cache: dict, d_h_ctr: np.ndarray,
                   d_h_qa: np.ndarray,
                   d_lm_logits: np.ndarray | None = None) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss w.r.t. every trainable parameter.

    d_h_ctr (B,) and d_h_qa (B, vocab) are the loss gradients at the two
    BOS-position heads; d_lm_logits backs the optional per-position LM path.
    """
    cfg = model.cfg
    ids, bos_index = cache["ids"], cache["bos_index"]
    B, T = ids.shape
    H, dk = cfg.n_heads, cfg.d_model // cfg.n_heads
    d = cfg.d_model
    grads: dict[str, np.ndarray] = {}

    h_bos, h_ctr1 = cache["h_bos"], cache["h_ctr1"]
    d_h_ctr1 = d_h_ctr[:, None] * model.heads.w_ctr2[:, 0][None, :]
    grads["heads.w_ctr2"] = h_ctr1.T @ d_h_ctr[:, None]
    grads["heads.w_ctr1"] = h_bos.T @ d_h_ctr1
    grads["heads.w_qa"] = h_bos.T @ d_h_qa
    d_h_bos = d_h_ctr1 @ model.heads.w_ctr1.T + d_h_qa @ model.heads.w_qa.T

    d_h_final = np.zeros_like(cache["h_final"])
    d_h_final[np.arange(B), bos_index] = d_h_bos
    if d_lm_logits is not None:
        dlm2 = d_lm_logits.reshape(B * T, -1)
        grads["heads.w_qa"] += cache["h_final"].reshape(B * T, d).T @ dlm2
        d_h_final += (dlm2 @ model.heads.w_qa.T).reshape(B, T, d)

    dx = _layer_norm_backward(d_h_final, model.lnf_g, cache["lnf"])

    def lora_grads(name_prefix: str, mat: AdaptedMatrix, d_weff: np.ndarray):
        if not cache["use_lora"]:
            return
        grads[f"{name_prefix}.lora_a"] = mat.scale * (d_weff @ mat.lora_b.T)
        grads[f"{name_prefix}.lora_b"] = mat.scale * (mat.lora_a.T @ d_weff)

    for i in reversed(range(len(model.layers))):
        layer, lc = model.layers[i], cache["layers"][i]
        weff = lc["weff"]

        # feed-forward branch
        d_f2 = dx if lc["ff_mask"] is None else dx * lc["ff_mask"]
        d_g = d_f2.reshape(B * T, d) @ weff["w2"].T
        lora_grads(f"layers.{i}.w2", layer.w2, lc["g"].T @ d_f2.reshape(B * T, d))
        d_f1 = _sq_relu_backward(d_g, lc["relu_f1"])
        lora_grads(f"layers.{i}.w1", layer.w1, lc["b"].reshape(B * T, d).T @ d_f1)
        d_b = (d_f1 @ weff["w1"].T).reshape(B, T, d)
        d_x_mid = dx + _layer_norm_backward(d_b, layer.ln2_g, lc["ln2"])

        # attention branch
        d_attn_out = d_x_mid if lc["out_mask"] is None else d_x_mid * lc["out_mask"]
        d_attn2 = d_attn_out.reshape(B * T, d)
        lora_grads(f"layers.{i}.wo", layer.wo, lc["ctx"].T @ d_attn2)
        d_ctx = _split_heads(d_attn2 @ weff["wo"].T, B, T, H, dk)

        d_probs = _POOL.take((B * H, T, T), d_ctx.dtype)
        np.matmul(d_ctx, lc["v"].transpose(0, 2, 1), out=d_probs)
        d_v = np.matmul(lc["probs_used"].transpose(0, 2, 1), d_ctx)
        if lc["attn_mask"] is not None:
            d_probs *= lc["attn_mask"]
        probs = lc["probs"]
        row = np.sum(d_probs * probs, axis=-1, keepdims=True)
        d_probs -= row
        d_probs *= probs
        d_scores = d_probs
        d_q = np.matmul(d_scores, lc["k"])
        d_q *= dk ** -0.5  # mirror the scale folded into Q
        d_k = np.matmul(d_scores.transpose(0, 2, 1), lc["q"])
        _POOL.give(d_probs)
        if lc["probs_used"] is not probs:
            _POOL.give(lc["probs_used"])
        _POOL.give(probs)  # cache buffers are consumed by backward

        d_q2 = _merge_heads(d_q, B, T, H, dk)
        d_k2 = _merge_heads(d_k, B, T, H, dk)
        d_v2 = _merge_heads(d_v, B, T, H, dk)
        a2 = lc["a"].reshape(B * T, d)
        lora_grads(f"layers.{i}.wq", layer.wq, a2.T @ d_q2)
        lora_grads(f"layers.{i}.wk", layer.wk, a2.T @ d_k2)
        lora_grads(f"layers.{i}.wv", layer.wv, a2.T @ d_v2)
        d_a = (d_q2 @ weff["wq"].T + d_k2 @ weff["wk"].T + d_v2 @ weff["wv"].T).reshape(B, T, d)
        dx = d_x_mid + _layer_norm_backward(d_a, layer.ln1_g, lc["ln1"])

    if cache["emb_mask"] is not None:
        dx *= cache["emb_mask"]  # frozen embeddings: gradient stops here
    return grads

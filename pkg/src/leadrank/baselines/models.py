"""Classical CTR baselines: wide-and-deep, DeepFM, and deep-and-cross.

All three share the featurizer, an 8-dim embedding per categorical field, a
relu deep tower, a logistic output trained with binary cross-entropy, and
the same Adam contract as the main training loop. The DeepFM second-order
term uses the sum-of-squares identity 0.5 * ((sum v)^2 - sum v^2) over field
vectors; DCN cross layers compute x_{l+1} = x0 * (x_l . w_l) + b_l + x_l,
preserving dimension at every layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, NonFiniteLossError
from ..evaluation import auc
from ..synthdata.records import LeadRecord
from ..training import AdamState, adam_step, loss_ctr, loss_ctr_grad
from .featurize import CATEGORICAL_FEATURES, FeatureStats, cardinalities, featurize, fit_stats

BASELINE_KINDS = ("wide_and_deep", "deepfm", "dcn")


@dataclass(frozen=True)
class BaselineConfig:
    kind: str = "deepfm"
    embedding_dim: int = 8
    cross_num: int = 2
    deep_widths: tuple[int, ...] = (64, 32)
    lr: float = 1e-3
    batch_size: int = 256
    epochs: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise ConfigError(f"unknown baseline kind: {self.kind}")
        if self.embedding_dim < 1 or self.cross_num < 0:
            raise ConfigError("embedding_dim must be >= 1 and cross_num >= 0")


@dataclass
class BaselineModel:
    cfg: BaselineConfig
    params: dict[str, np.ndarray]
    stats: FeatureStats
    n_dense: int

    def predict_logits(self, leads: list[LeadRecord],
                       embeddings: np.ndarray | None = None) -> np.ndarray:
        cats, dense = featurize(leads, self.stats, embeddings)
        if dense.shape[1] != self.n_dense:
            raise ConfigError(
                f"model was trained with {self.n_dense} dense inputs, got {dense.shape[1]}")
        logits, _ = _FORWARD[self.cfg.kind](self.params, cats, dense, self.cfg)
        return logits

    def predict_proba(self, leads, embeddings=None) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.predict_logits(leads, embeddings)))


def _mlp_init(rng, widths, d_in, params, prefix):
    prev = d_in
    for i, w in enumerate(widths):
        params[f"{prefix}.w{i}"] = rng.standard_normal((prev, w)) * np.sqrt(2.0 / prev)
        params[f"{prefix}.b{i}"] = np.zeros(w)
        prev = w
    params[f"{prefix}.w_out"] = rng.standard_normal((prev, 1)) * np.sqrt(1.0 / prev)
    params[f"{prefix}.b_out"] = np.zeros(1)


def _mlp_forward(params, x, widths, prefix):
    cache = {"h": [x]}
    h = x
    for i in range(len(widths)):
        z = h @ params[f"{prefix}.w{i}"] + params[f"{prefix}.b{i}"]
        h = np.maximum(z, 0.0)
        cache["h"].append(h)
    out = (h @ params[f"{prefix}.w_out"] + params[f"{prefix}.b_out"])[:, 0]
    return out, cache

def _mlp_backward(params, grads, cache, d_out, widths, prefix):
    h_last = cache["h"][-1]
    grads[f"{prefix}.w_out"] = h_last.T @ d_out[:, None]
    grads[f"{prefix}.b_out"] = np.array([d_out.sum()])
    d_h = d_out[:, None] @ params[f"{prefix}.w_out"].T
    for i in reversed(range(len(widths))):
        d_z = d_h * (cache["h"][i + 1] > 0)
        grads[f"{prefix}.w{i}"] = cache["h"][i].T @ d_z
        grads[f"{prefix}.b{i}"] = d_z.sum(axis=0)
        d_h = d_z @ params[f"{prefix}.w{i}"].T
    return d_h  # gradient w.r.t. the tower input


def _embed_lookup(params, cats, k):
    return np.stack([params[f"embed.{j}"][cats[:, j]]
                     for j in range(cats.shape[1])], axis=1)  # (B, n_cat, k)


def _init_common(rng, cfg, n_dense):
    params: dict[str, np.ndarray] = {}
    for j, card in enumerate(cardinalities()):
        params[f"embed.{j}"] = rng.standard_normal((card, cfg.embedding_dim)) * 0.05
    return params


# ---------------------------------------------------------------- wide & deep

def _wd_forward(params, cats, dense, cfg):
    emb = _embed_lookup(params, cats, cfg.embedding_dim)
    deep_in = np.concatenate([dense, emb.reshape(len(dense), -1)], axis=1)
    deep_out, mlp_cache = _mlp_forward(params, deep_in, cfg.deep_widths, "deep")
    wide = dense @ params["wide.w"] + params["wide.b"][0]
    for j in range(cats.shape[1]):
        wide = wide + params[f"wide.cat{j}"][cats[:, j]]
    logits = wide + deep_out
    return logits, {"emb": emb, "deep_in": deep_in, "mlp": mlp_cache, "cats": cats,
                    "dense": dense}

def _wd_backward(params, cache, d_logits, cfg):
    grads: dict[str, np.ndarray] = {}
    cats, dense = cache["cats"], cache["dense"]
    grads["wide.w"] = dense.T @ d_logits
    grads["wide.b"] = np.array([d_logits.sum()])
    for j in range(cats.shape[1]):
        g = np.zeros_like(params[f"wide.cat{j}"])
        np.add.at(g, cats[:, j], d_logits)
        grads[f"wide.cat{j}"] = g
    d_deep_in = _mlp_backward(params, grads, cache["mlp"], d_logits, cfg.deep_widths, "deep")
    _embed_backward(params, grads, cats, d_deep_in[:, dense.shape[1]:], cfg)
    return grads


def _embed_backward(params, grads, cats, d_emb_flat, cfg):
    k = cfg.embedding_dim
    for j in range(cats.shape[1]):
        g = np.zeros_like(params[f"embed.{j}"])
        np.add.at(g, cats[:, j], d_emb_flat[:, j * k:(j + 1) * k])
        grads[f"embed.{j}"] = grads.get(f"embed.{j}", 0) + g


# -------------------------------------------------------------------- deepfm

def _fm_fields(params, cats, dense, cfg):
    """Stack categorical embeddings and value-scaled dense-field vectors."""
    emb = _embed_lookup(params, cats, cfg.embedding_dim)       # (B, n_cat, k)
    dense_v = dense[:, :, None] * params["fm.dense_v"][None]   # (B, n_dense, k)
    return np.concatenate([emb, dense_v], axis=1)

def _fm_forward(params, cats, dense, cfg):
    fields = _fm_fields(params, cats, dense, cfg)              # (B, F, k)
    s = fields.sum(axis=1)
    q = (fields ** 2).sum(axis=1)
    second = 0.5 * (s ** 2 - q).sum(axis=1)
    first = dense @ params["fm.w_dense"]
    for j in range(cats.shape[1]):
        first = first + params[f"fm.w_cat{j}"][cats[:, j]]
    deep_in = fields.reshape(len(dense), -1)
    deep_out, mlp_cache = _mlp_forward(params, deep_in, cfg.deep_widths, "deep")
    logits = first + second + deep_out + params["fm.b"][0]
    return logits, {"fields": fields, "s": s, "mlp": mlp_cache, "cats": cats,
                    "dense": dense}

def _fm_backward(params, cache, d_logits, cfg):
    grads: dict[str, np.ndarray] = {}
    cats, dense, fields, s = cache["cats"], cache["dense"], cache["fields"], cache["s"]
    grads["fm.w_dense"] = dense.T @ d_logits
    grads["fm.b"] = np.array([d_logits.sum()])
    for j in range(cats.shape[1]):
        g = np.zeros_like(params[f"fm.w_cat{j}"])
        np.add.at(g, cats[:, j], d_logits)
        grads[f"fm.w_cat{j}"] = g
    # second order: d/dv_f = s - v_f, scaled by the logit gradient
    d_fields = d_logits[:, None, None] * (s[:, None, :] - fields)
    d_deep_in = _mlp_backward(params, grads, cache["mlp"], d_logits, cfg.deep_widths, "deep")
    d_fields = d_fields + d_deep_in.reshape(fields.shape)
    n_cat = cats.shape[1]
    _embed_backward(params, grads, cats,
                    d_fields[:, :n_cat].reshape(len(dense), -1), cfg)
    grads["fm.dense_v"] = np.einsum("bfk,bf->fk", d_fields[:, n_cat:], dense)
    return grads


# ----------------------------------------------------------------------- dcn

def _dcn_forward(params, cats, dense, cfg):
    emb = _embed_lookup(params, cats, cfg.embedding_dim)
    x0 = np.concatenate([dense, emb.reshape(len(dense), -1)], axis=1)
    xs = [x0]
    ss = []
    x = x0
    for l in range(cfg.cross_num):
        sl = x @ params[f"cross.w{l}"]                      # (B,)
        x = x0 * sl[:, None] + params[f"cross.b{l}"] + x
        ss.append(sl)
        xs.append(x)
    deep_out, mlp_cache = _mlp_forward(params, x0, cfg.deep_widths, "deep")
    combined = np.concatenate([x, deep_out[:, None]], axis=1)
    logits = combined @ params["final.w"] + params["final.b"][0]
    return logits, {"x0": x0, "xs": xs, "ss": ss, "mlp": mlp_cache,
                    "combined": combined, "cats": cats, "dense": dense}

def _dcn_backward(params, cache, d_logits, cfg):
    grads: dict[str, np.ndarray] = {}
    x0, xs, ss = cache["x0"], cache["xs"], cache["ss"]
    cats, dense = cache["cats"], cache["dense"]
    grads["final.w"] = cache["combined"].T @ d_logits
    grads["final.b"] = np.array([d_logits.sum()])
    d_combined = d_logits[:, None] * params["final.w"][None, :]
    d_x = d_combined[:, :-1]
    d_deep_out = d_combined[:, -1]
    d_x0 = np.zeros_like(x0)
    for l in reversed(range(cfg.cross_num)):
        sl, x_l = ss[l], xs[l]
        grads[f"cross.b{l}"] = d_x.sum(axis=0)
        d_sl = (d_x * x0).sum(axis=1)
        grads[f"cross.w{l}"] = x_l.T @ d_sl
        d_x0 += d_x * sl[:, None]
        d_x = d_x + d_sl[:, None] * params[f"cross.w{l}"][None, :]
    d_x0 += d_x
    d_x0 += _mlp_backward(params, grads, cache["mlp"], d_deep_out, cfg.deep_widths, "deep")
    _embed_backward(params, grads, cats, d_x0[:, dense.shape[1]:], cfg)
    return grads


_FORWARD = {"wide_and_deep": _wd_forward, "deepfm": _fm_forward, "dcn": _dcn_forward}
_BACKWARD = {"wide_and_deep": _wd_backward, "deepfm": _fm_backward, "dcn": _dcn_backward}


def init_baseline(cfg: BaselineConfig, n_dense: int, stats: FeatureStats) -> BaselineModel:
    rng = np.random.default_rng(cfg.seed)
    params = _init_common(rng, cfg, n_dense)
    n_cat = len(CATEGORICAL_FEATURES)
    if cfg.kind == "wide_and_deep":
        params["wide.w"] = rng.standard_normal(n_dense) * 0.01
        params["wide.b"] = np.zeros(1)
        for j, card in enumerate(cardinalities()):
            params[f"wide.cat{j}"] = np.zeros(card)
        _mlp_init(rng, cfg.deep_widths, n_dense + n_cat * cfg.embedding_dim, params, "deep")
    elif cfg.kind == "deepfm":
        params["fm.w_dense"] = rng.standard_normal(n_dense) * 0.01
        params["fm.b"] = np.zeros(1)
        for j, card in enumerate(cardinalities()):
            params[f"fm.w_cat{j}"] = np.zeros(card)
        params["fm.dense_v"] = rng.standard_normal((n_dense, cfg.embedding_dim)) * 0.05
        _mlp_init(rng, cfg.deep_widths, (n_cat + n_dense) * cfg.embedding_dim, params, "deep")
    else:  # dcn
        d0 = n_dense + n_cat * cfg.embedding_dim
        for l in range(cfg.cross_num):
            params[f"cross.w{l}"] = rng.standard_normal(d0) * 0.01
            params[f"cross.b{l}"] = np.zeros(d0)
        _mlp_init(rng, cfg.deep_widths, d0, params, "deep")
        params["final.w"] = rng.standard_normal(d0 + 1) * 0.01
        params["final.b"] = np.zeros(1)
    return BaselineModel(cfg=cfg, params=params, stats=stats, n_dense=n_dense)


def train_baseline(cfg: BaselineConfig, train_leads: list[LeadRecord],
                   embeddings: np.ndarray | None = None) -> BaselineModel:
    """Fit one baseline with seeded-shuffle batches and Adam."""
    stats = fit_stats(train_leads, embeddings)
    cats, dense = featurize(train_leads, stats, embeddings)
    labels = np.asarray([l.label for l in train_leads], dtype=np.float64)
    model = init_baseline(cfg, dense.shape[1], stats)
    fwd, bwd = _FORWARD[cfg.kind], _BACKWARD[cfg.kind]

    state = AdamState()
    order_rng = np.random.default_rng([cfg.seed, 1])
    step = 0
    for _ in range(cfg.epochs):
        perm = order_rng.permutation(len(train_leads))
        for lo in range(0, len(train_leads), cfg.batch_size):
            idx = perm[lo:lo + cfg.batch_size]
            logits, cache = fwd(model.params, cats[idx], dense[idx], cfg)
            loss = loss_ctr(logits, labels[idx])
            if not np.isfinite(loss):
                raise NonFiniteLossError(step, f"baseline {cfg.kind}")
            d_logits = loss_ctr_grad(logits, labels[idx])
            grads = bwd(model.params, cache, d_logits, cfg)
            adam_step([(n, model.params[n], "all") for n in sorted(grads)],
                      grads, state, {"all": cfg.lr})
            step += 1
    return model


def evaluate_baseline(model: BaselineModel, test_leads: list[LeadRecord],
                      embeddings: np.ndarray | None = None) -> float:
    scores = model.predict_proba(test_leads, embeddings)
    return auc(scores, [l.label for l in test_leads])

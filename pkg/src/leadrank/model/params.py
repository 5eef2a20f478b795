"""Parameter containers and initialization.

The backbone (embeddings, attention and feed-forward bases, layer norms) is
frozen; training touches only the low-rank factors attached to the six
adapted matrices per layer (group "alpha") and the three output heads
(group "beta"). Low-rank B factors start at zero so the adapted model is
exactly the base model at init.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ModelConfig

GROUP_ALPHA = "alpha"
GROUP_BETA = "beta"


@dataclass
class AdaptedMatrix:
    """A frozen base matrix with a trainable low-rank update."""

    base: np.ndarray    # (d_in, d_out), frozen
    lora_a: np.ndarray  # (d_in, r)
    lora_b: np.ndarray  # (r, d_out)
    scale: float

    def effective(self, use_lora: bool = True) -> np.ndarray:
        if not use_lora:
            return self.base
        return self.base + self.scale * (self.lora_a @ self.lora_b)


@dataclass
class LayerParams:
    wq: AdaptedMatrix
    wk: AdaptedMatrix
    wv: AdaptedMatrix
    wo: AdaptedMatrix
    w1: AdaptedMatrix
    w2: AdaptedMatrix
    ln1_g: np.ndarray
    ln1_b: np.ndarray
    ln2_g: np.ndarray
    ln2_b: np.ndarray

    def adapted(self) -> dict[str, AdaptedMatrix]:
        return {"wq": self.wq, "wk": self.wk, "wv": self.wv,
                "wo": self.wo, "w1": self.w1, "w2": self.w2}


@dataclass
class Heads:
    w_ctr1: np.ndarray  # (d_model, 128)
    w_ctr2: np.ndarray  # (128, 1)
    w_qa: np.ndarray    # (d_model, vocab)


@dataclass
class Model:
    cfg: ModelConfig
    embed: np.ndarray  # (vocab, d_model), frozen
    pos: np.ndarray    # (max_context, d_model), frozen
    layers: list[LayerParams] = field(default_factory=list)
    lnf_g: np.ndarray = None
    lnf_b: np.ndarray = None
    heads: Heads = None

    def trainable_params(self) -> list[tuple[str, np.ndarray, str]]:
        """(name, array, group) in a fixed order; the only arrays fit may update."""
        out = []
        for i, layer in enumerate(self.layers):
            for key, mat in layer.adapted().items():
                out.append((f"layers.{i}.{key}.lora_a", mat.lora_a, GROUP_ALPHA))
                out.append((f"layers.{i}.{key}.lora_b", mat.lora_b, GROUP_ALPHA))
        out.append(("heads.w_ctr1", self.heads.w_ctr1, GROUP_BETA))
        out.append(("heads.w_ctr2", self.heads.w_ctr2, GROUP_BETA))
        out.append(("heads.w_qa", self.heads.w_qa, GROUP_BETA))
        return out

    def frozen_params(self) -> list[tuple[str, np.ndarray]]:
        out = [("embed", self.embed), ("pos", self.pos)]
        for i, layer in enumerate(self.layers):
            for key, mat in layer.adapted().items():
                out.append((f"layers.{i}.{key}.base", mat.base))
            for key in ("ln1_g", "ln1_b", "ln2_g", "ln2_b"):
                out.append((f"layers.{i}.{key}", getattr(layer, key)))
        out.append(("lnf_g", self.lnf_g))
        out.append(("lnf_b", self.lnf_b))
        return out

    def all_params(self) -> list[tuple[str, np.ndarray]]:
        return self.frozen_params() + [(n, a) for n, a, _ in self.trainable_params()]

    def base_fingerprint(self) -> dict[str, float]:
        """Checksums of frozen arrays, for asserting the freeze contract."""
        return {name: float(np.sum(np.abs(arr), dtype=np.float64))
                for name, arr in self.frozen_params()}


# Init scales. The base stays frozen, so the usefulness of what the heads can
# read out of h_bos is set here: query/key bases get a small scale to keep
# initial attention close to uniform (content pooling the heads can use from
# step one, with adapters learning selectivity on top), and position
# embeddings stay well below token embeddings for the same reason.
_EMBED_STD = 0.02
_POS_STD = 0.01
_QK_SCALE = 0.2


def init_model(cfg: ModelConfig, seed: int) -> Model:
    rng = np.random.default_rng(seed)
    dt = np.dtype(cfg.dtype)
    d, r = cfg.d_model, cfg.lora_rank
    scale = cfg.lora_alpha / cfg.lora_rank

    def gauss(shape, std):
        return (rng.standard_normal(shape) * std).astype(dt)

    def adapted(d_in, d_out, base_scale=1.0):
        return AdaptedMatrix(
            base=gauss((d_in, d_out), base_scale * d_in ** -0.5),
            lora_a=gauss((d_in, r), d_in ** -0.5),
            lora_b=np.zeros((r, d_out), dtype=dt),
            scale=scale,
        )

    embed = gauss((cfg.vocab_size, d), _EMBED_STD)
    pos = gauss((cfg.max_context, d), _POS_STD)
    layers = []
    for _ in range(cfg.n_layers):
        layers.append(LayerParams(
            wq=adapted(d, d, _QK_SCALE), wk=adapted(d, d, _QK_SCALE),
            wv=adapted(d, d), wo=adapted(d, d),
            w1=adapted(d, cfg.d_ff), w2=adapted(cfg.d_ff, d),
            ln1_g=np.ones(d, dtype=dt), ln1_b=np.zeros(d, dtype=dt),
            ln2_g=np.ones(d, dtype=dt), ln2_b=np.zeros(d, dtype=dt),
        ))
    heads = Heads(
        w_ctr1=gauss((d, cfg.embed_dim_ctr1), d ** -0.5),
        w_ctr2=gauss((cfg.embed_dim_ctr1, 1), cfg.embed_dim_ctr1 ** -0.5),
        w_qa=gauss((d, cfg.vocab_size), d ** -0.5),
    )
    return Model(cfg=cfg, embed=embed, pos=pos, layers=layers,
                 lnf_g=np.ones(d, dtype=dt), lnf_b=np.zeros(d, dtype=dt), heads=heads)

"""Model configuration."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from ..errors import ConfigError

CTR_EMBED_DIM = 128


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int = 260
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    d_ff: int = 256
    max_context: int = 2048
    dropout: float = 0.1
    embed_dim_ctr1: int = CTR_EMBED_DIM
    lora_rank: int = 4
    lora_alpha: float = 1.0
    dtype: str = "float32"

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ConfigError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.lora_rank < 1:
            raise ConfigError("lora_rank must be >= 1")
        if self.embed_dim_ctr1 != CTR_EMBED_DIM:
            raise ConfigError(f"embed_dim_ctr1 is fixed at {CTR_EMBED_DIM}")
        if self.vocab_size < 4:
            raise ConfigError("vocab_size must cover the four reserved tokens")
        if not (0.0 <= self.dropout < 1.0):
            raise ConfigError("dropout must be in [0, 1)")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"unsupported dtype: {self.dtype}")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "ModelConfig":
        return cls(**obj)

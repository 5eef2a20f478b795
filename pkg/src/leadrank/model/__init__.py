from .config import CTR_EMBED_DIM, ModelConfig
from .params import GROUP_ALPHA, GROUP_BETA, AdaptedMatrix, Heads, LayerParams, Model, init_model
from .transformer import ForwardOutput, backward_batch, forward, forward_batch
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "CTR_EMBED_DIM", "ModelConfig", "GROUP_ALPHA", "GROUP_BETA", "AdaptedMatrix",
    "Heads", "LayerParams", "Model", "init_model", "ForwardOutput",
    "backward_batch", "forward", "forward_batch", "load_checkpoint", "save_checkpoint",
]

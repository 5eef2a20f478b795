from .vocab import BOS_ID, BYTE_OFFSET, NO_ID, PAD_ID, VOCAB, VOCAB_SIZE, YES_ID, Vocab
from .prompt import (
    EMPTY_RECORD_MARKER,
    TEMPLATE_VERSION,
    TokenSequence,
    detokenize,
    load_template,
    render_prompt,
    render_tabular_block,
    tokenize,
)

__all__ = [
    "BOS_ID", "BYTE_OFFSET", "NO_ID", "PAD_ID", "VOCAB", "VOCAB_SIZE", "YES_ID", "Vocab",
    "EMPTY_RECORD_MARKER", "TEMPLATE_VERSION", "TokenSequence", "detokenize",
    "load_template", "render_prompt", "render_tabular_block", "tokenize",
]

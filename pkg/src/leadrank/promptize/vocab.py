"""Byte-level vocabulary with reserved control tokens.

Ids 0..3 are reserved (PAD, BOS, YES, NO); byte value b maps to id 4 + b,
so the vocabulary has exactly 260 entries. YES/NO are the answer tokens
targeted by the question-answering loss; BOS terminates every prompt and
its hidden state feeds the output heads.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import UnknownTokenError

PAD_ID = 0
BOS_ID = 1
YES_ID = 2
NO_ID = 3
BYTE_OFFSET = 4
VOCAB_SIZE = 260

_RESERVED_GLYPHS = {PAD_ID: "⟨PAD⟩", BOS_ID: "⟨BOS⟩",
                    YES_ID: "⟨YES⟩", NO_ID: "⟨NO⟩"}


@dataclass(frozen=True)
class Vocab:
    """The fixed 260-entry byte vocabulary."""

    pad_id: int = PAD_ID
    bos_id: int = BOS_ID
    yes_id: int = YES_ID
    no_id: int = NO_ID
    size: int = VOCAB_SIZE

    def encode_bytes(self, data: bytes) -> list[int]:
        return [BYTE_OFFSET + b for b in data]

    def encode(self, text: str) -> list[int]:
        """Map text to byte token ids (no BOS appended)."""
        return self.encode_bytes(text.encode("utf-8", errors="surrogateescape"))

    def decode(self, ids) -> str:
        """Inverse of encode; reserved ids render as angle-bracket glyphs."""
        parts: list[str] = []
        run: list[int] = []

        def flush():
            if run:
                parts.append(bytes(run).decode("utf-8", errors="surrogateescape"))
                run.clear()

        for i in ids:
            i = int(i)
            if i < 0 or i >= VOCAB_SIZE:
                raise UnknownTokenError(f"token id {i} outside vocabulary of size {VOCAB_SIZE}")
            if i < BYTE_OFFSET:
                flush()
                parts.append(_RESERVED_GLYPHS[i])
            else:
                run.append(i - BYTE_OFFSET)
        flush()
        return "".join(parts)


VOCAB = Vocab()

"""Prompt rendering and byte tokenization.

The rendered prompt has three sections in fixed order: the category-grouped
tabular block (omitted in text-only mode), the communication record between
literal '<<<' / '>>>' marker lines, and the output-format instruction. The
terminal BOS token is appended by tokenize, never rendered as text.

When a prompt exceeds the token budget, the transcript between the marker
lines is suffix-truncated first (most recent bytes win); only once the
transcript is exhausted is the remaining structural text suffix-truncated.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from ..errors import BudgetError
from ..synthdata.features import FEATURE_SCHEMA, SENTINEL
from ..synthdata.records import LeadRecord
from .vocab import BOS_ID, VOCAB, Vocab

TEMPLATE_VERSION = 1
EMPTY_RECORD_MARKER = "(no communication recorded)"
_REC_OPEN = "<<<\n"
_REC_CLOSE = "\n>>>"


def load_template(version: int = TEMPLATE_VERSION) -> str:
    raw = resources.files("leadrank.promptize").joinpath(f"template_v{version}.txt").read_text()
    lines = [ln for ln in raw.split("\n") if not ln.startswith("#")]
    return "\n".join(lines).rstrip("\n")


def _format_value(v: float) -> str:
    if v == SENTINEL:
        return "na"
    if float(v).is_integer():
        return str(int(v))
    return f"{v:.2f}"


def render_tabular_block(tabular: dict[str, float]) -> str:
    lines = []
    for category, names in FEATURE_SCHEMA.items():
        lines.append(f"{category}:")
        for name in names:
            lines.append(f" {name}: {_format_value(tabular[name])}")
    return "\n".join(lines) + "\n\n"


def render_prompt(lead: LeadRecord, mode: str = "full") -> str:
    """Serialize a lead into prompt text (no BOS; that is tokenize's job)."""
    if mode not in ("full", "text_only"):
        raise ValueError(f"unknown prompt mode: {mode!r}")
    tabular_block = render_tabular_block(lead.tabular) if mode == "full" else ""
    transcript = lead.transcript.rstrip("\n")
    if not transcript:
        transcript = EMPTY_RECORD_MARKER
    else:
        # keep the record markers unambiguous for the tokenizer
        transcript = "\n".join(
            " " + ln if ln.rstrip() in ("<<<", ">>>") else ln for ln in transcript.split("\n")
        )
    return load_template().format(tabular_block=tabular_block, transcript_block=transcript)


@dataclass(frozen=True)
class TokenSequence:
    ids: tuple[int, ...]
    bos_index: int

    def __len__(self) -> int:
        return len(self.ids)


def tokenize(text: str, vocab: Vocab = VOCAB, max_len: int = 2048,
             keep: str = "most_recent") -> TokenSequence:
    """Encode prompt text into byte ids plus a terminal BOS within max_len."""
    if keep != "most_recent":
        raise ValueError(f"unsupported keep policy: {keep!r}")
    if max_len < 2:
        raise BudgetError(f"max_len {max_len} below structural minimum of 2")

    head, transcript, tail = _split_record(text)
    budget = max_len - 1  # reserve the BOS slot
    total = len(head) + len(transcript) + len(tail)
    if total > budget:
        keep_t = max(0, len(transcript) - (total - budget))
        transcript = transcript[len(transcript) - keep_t:]
        body = head + transcript + tail
        if len(body) > budget:
            body = body[len(body) - budget:]
    else:
        body = head + transcript + tail

    ids = tuple(vocab.encode_bytes(body)) + (BOS_ID,)
    return TokenSequence(ids=ids, bos_index=len(ids) - 1)


def _split_record(text: str) -> tuple[bytes, bytes, bytes]:
    """Split prompt bytes into (structural head, transcript, structural tail)."""
    data = text.encode("utf-8", errors="surrogateescape")
    open_marker = _REC_OPEN.encode()
    close_marker = _REC_CLOSE.encode()
    start = data.find(open_marker)
    if start < 0:
        return data, b"", b""
    start += len(open_marker)
    end = data.find(close_marker, start)
    if end < 0:
        return data, b"", b""
    return data[:start], data[start:end], data[end:]


def detokenize(ids, vocab: Vocab = VOCAB) -> str:
    """Inverse byte mapping; reserved ids render as angle-bracket glyphs."""
    return vocab.decode(ids)

"""Extractive transcript compression plus an external-summarizer client.

Sentences (transcript turns count as sentences) are scored by the mean
normalized term frequency of their content words; the top ceil(ratio * n)
sentences are kept in original order, ties going to the later sentence.
Inputs already below min_input_tokens pass through untouched, which is also
what keeps repeated summarization idempotent on short outputs.

The external client posts {"text": ...} and expects {"summary": ...}; on
timeout or a non-2xx response it either falls back to the extractive path
or raises, per config.
"""

from __future__ import annotations

import json
import re
import urllib.error
import urllib.request
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, MisalignedCorporaError, SummarizerTransportError
from .promptize.vocab import VOCAB
from .synthdata.records import LeadRecord

QUANTILES = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95)

_STOPWORDS = frozenset("""
a an and are as at be but by for from had has have he her his i in is it its
me my of on or our she so that the their them they this to us was we were
will with you your not now
""".split())

_WORD_RE = re.compile(r"[a-z']+")
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+|\n+")
_SPEAKER_TAG = re.compile(r"^\s*\w+\s*:\s*")


@dataclass(frozen=True)
class SummaryConfig:
    target_ratio: float = 0.4
    min_input_tokens: int = 256

    def __post_init__(self):
        if not (0.0 < self.target_ratio <= 1.0):
            raise ConfigError("target_ratio must be in (0, 1]")
        if self.min_input_tokens < 0:
            raise ConfigError("min_input_tokens must be non-negative")


def token_length(text: str) -> int:
    """Length in byte tokens, the unit used throughout the reports."""
    return len(VOCAB.encode(text))


def split_sentences(text: str) -> list[str]:
    return [s.strip() for s in _SENTENCE_SPLIT.split(text) if s.strip()]


def _content_words(sentence: str) -> list[str]:
    # speaker tags on dialogue lines would otherwise dominate term frequency
    sentence = _SPEAKER_TAG.sub("", sentence)
    return [w for w in _WORD_RE.findall(sentence.lower()) if w not in _STOPWORDS]


def summarize(transcript: str, cfg: SummaryConfig = SummaryConfig()) -> str:
    """Keep the top ceil(ratio * n) salient sentences in original order."""
    if not transcript.strip():
        return ""
    if token_length(transcript) < cfg.min_input_tokens:
        return transcript
    sentences = split_sentences(transcript)
    n_keep = int(np.ceil(cfg.target_ratio * len(sentences)))

    freq: dict[str, int] = {}
    per_sentence = []
    for s in sentences:
        words = _content_words(s)
        per_sentence.append(words)
        for w in words:
            freq[w] = freq.get(w, 0) + 1
    max_freq = max(freq.values()) if freq else 1

    scores = []
    for i, words in enumerate(per_sentence):
        if words:
            score = sum(freq[w] / max_freq for w in words) / len(words)
        else:
            score = 0.0
        scores.append((score, i))  # later index wins ties under reverse sort
    ranked = sorted(scores, key=lambda t: (t[0], t[1]), reverse=True)
    keep = sorted(i for _, i in ranked[:n_keep])
    return "\n".join(sentences[i] for i in keep) + "\n"


def summarize_lead(lead: LeadRecord, cfg: SummaryConfig = SummaryConfig()) -> LeadRecord:
    return LeadRecord(lead_id=lead.lead_id, anchor=lead.anchor,
                      tabular=dict(lead.tabular),
                      transcript=summarize(lead.transcript, cfg), label=lead.label)


def compression_report(before: list[LeadRecord], after: list[LeadRecord]) -> dict:
    """Token-length quantile table for both corpora plus overall reduction."""
    if len(before) != len(after) or any(
            a.lead_id != b.lead_id for a, b in zip(before, after)):
        raise MisalignedCorporaError("before/after corpora must align lead-for-lead")
    orig = np.asarray([token_length(l.transcript) for l in before])
    summ = np.asarray([token_length(l.transcript) for l in after])
    total_before = int(orig.sum())
    total_after = int(summ.sum())
    reduction = 1.0 - total_after / total_before if total_before else 0.0
    return {
        "quantiles": list(QUANTILES),
        "original": [int(round(np.quantile(orig, q))) for q in QUANTILES],
        "summarized": [int(round(np.quantile(summ, q))) for q in QUANTILES],
        "total_tokens_original": total_before,
        "total_tokens_summarized": total_after,
        "token_reduction": reduction,
    }


@dataclass(frozen=True)
class ExternalSummarizer:
    endpoint: str
    timeout_ms: int = 5000
    fallback_to_extractive: bool = True
    extractive_cfg: SummaryConfig = SummaryConfig()

    def summarize(self, transcript: str) -> str:
        payload = json.dumps({"text": transcript}).encode("utf-8")
        request = urllib.request.Request(
            self.endpoint, data=payload, headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(request, timeout=self.timeout_ms / 1000.0) as resp:
                if not (200 <= resp.status < 300):
                    raise SummarizerTransportError(f"endpoint returned {resp.status}")
                return json.loads(resp.read().decode("utf-8"))["summary"]
        except (urllib.error.URLError, TimeoutError, OSError, ValueError, KeyError) as exc:
            if self.fallback_to_extractive:
                return summarize(transcript, self.extractive_cfg)
            raise SummarizerTransportError(str(exc)) from exc


def external_summarize(transcript: str, client: ExternalSummarizer) -> str:
    return client.summarize(transcript)

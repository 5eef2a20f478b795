"""Domain records for the synthetic lead corpus.

A lead is backed by an ordered event log (calls, store visits, web sessions,
and at most one purchase). The feature snapshot is taken at the lead's anchor
date; all timestamp comparisons are done at date granularity: an event counts
as pre-anchor iff event date <= anchor, and a purchase converts the label iff
anchor < purchase date <= anchor + horizon.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime

EVENT_KINDS = ("call", "store_visit", "web_session", "purchase")


@dataclass
class CustomerEvent:
    lead_id: str
    kind: str
    timestamp: datetime
    duration_s: float = 0.0
    transcript_turns: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind: {self.kind!r}")
        if self.kind != "call":
            # duration and transcript are call-only attributes
            self.duration_s = 0.0
            self.transcript_turns = []

    def to_json(self) -> dict:
        return {
            "lead_id": self.lead_id,
            "kind": self.kind,
            "timestamp": self.timestamp.isoformat(),
            "duration_s": self.duration_s,
            "transcript_turns": [[s, u] for s, u in self.transcript_turns],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CustomerEvent":
        return cls(
            lead_id=obj["lead_id"],
            kind=obj["kind"],
            timestamp=datetime.fromisoformat(obj["timestamp"]),
            duration_s=float(obj.get("duration_s", 0.0)),
            transcript_turns=[(s, u) for s, u in obj.get("transcript_turns", [])],
        )


@dataclass
class LeadRecord:
    lead_id: str
    anchor: date
    tabular: dict[str, float]
    transcript: str
    label: int

    def to_json(self) -> dict:
        return {
            "lead_id": self.lead_id,
            "anchor": self.anchor.isoformat(),
            "tabular": self.tabular,
            "transcript": self.transcript,
            "label": self.label,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LeadRecord":
        return cls(
            lead_id=obj["lead_id"],
            anchor=date.fromisoformat(obj["anchor"]),
            tabular={k: float(v) for k, v in obj["tabular"].items()},
            transcript=obj["transcript"],
            label=int(obj["label"]),
        )


EventLog = dict[str, list[CustomerEvent]]


def transcript_from_events(events: list[CustomerEvent], anchor: date) -> str:
    """Concatenate call turns up to the anchor, one 'speaker: text' line each."""
    lines = []
    for ev in events:
        if ev.kind == "call" and ev.timestamp.date() <= anchor:
            for speaker, utterance in ev.transcript_turns:
                lines.append(f"{speaker}: {utterance}")
    return "\n".join(lines) + ("\n" if lines else "")

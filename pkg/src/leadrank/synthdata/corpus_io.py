"""Corpus persistence: JSONL with a schema header, plus an event sidecar.

Corpus file: line 1 is the header object (schema version, the 31 frozen
feature names with categories, categorical value orderings, label horizon);
every following line is one lead. The sidecar holds one line per lead with
its full event list, keyed identically, and is what the leakage audits
recompute features from. Floats survive the round trip exactly (JSON
serialization of IEEE doubles is lossless here).
"""

from __future__ import annotations

import json
from pathlib import Path

from ..errors import CorpusParseError
from .features import CATEGORICAL_VALUES, FEATURE_NAMES, FEATURE_SCHEMA
from .records import CustomerEvent, EventLog, LeadRecord

SCHEMA_VERSION = 1


def corpus_header(label_horizon: int) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "feature_names": list(FEATURE_NAMES),
        "categories": {cat: list(names) for cat, names in FEATURE_SCHEMA.items()},
        "categorical_values": {k: list(v) for k, v in CATEGORICAL_VALUES.items()},
        "label_horizon_days": label_horizon,
    }


def write_corpus(leads: list[LeadRecord], path: str | Path, label_horizon: int = 30) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(json.dumps(corpus_header(label_horizon), sort_keys=True) + "\n")
        for lead in leads:
            fh.write(json.dumps(lead.to_json(), sort_keys=True) + "\n")
    return path


def read_corpus(path: str | Path) -> list[LeadRecord]:
    leads, _ = read_corpus_with_header(path)
    return leads


def read_corpus_with_header(path: str | Path) -> tuple[list[LeadRecord], dict | None]:
    leads: list[LeadRecord] = []
    header = None
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if line_no == 1:
                    if "schema_version" in obj:
                        header = obj
                        continue
                leads.append(LeadRecord.from_json(obj))
            except (ValueError, KeyError, TypeError) as exc:
                raise CorpusParseError(line_no, str(exc)) from exc
    return leads, header


def write_events(events: EventLog, path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        for lead_id in events:
            fh.write(json.dumps(
                {"lead_id": lead_id, "events": [ev.to_json() for ev in events[lead_id]]},
                sort_keys=True) + "\n")
    return path


def read_events(path: str | Path) -> EventLog:
    events: EventLog = {}
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                events[obj["lead_id"]] = [CustomerEvent.from_json(e) for e in obj["events"]]
            except (ValueError, KeyError, TypeError) as exc:
                raise CorpusParseError(line_no, str(exc)) from exc
    return events

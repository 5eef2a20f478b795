"""Temporal partitioning and leakage audits.

The split rule is purely a function of anchors: train takes anchors at or
before t_split minus the required gap, test takes anchors at or after
t_split, and leads falling inside the gap are dropped (their label windows
straddle the boundary). Audits return structured findings rather than
booleans so CI jobs can print and count them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path

from .errors import AuditUnavailableError, ConfigError, DegenerateSplitError
from .synthdata.features import compute_tabular
from .synthdata.records import EventLog, LeadRecord


@dataclass(frozen=True)
class SplitSpec:
    t_split: date
    label_horizon: int
    required_gap: int | None = None  # defaults to label_horizon

    def __post_init__(self):
        if self.required_gap is None:
            object.__setattr__(self, "required_gap", self.label_horizon)
        if self.required_gap < self.label_horizon:
            raise ConfigError("required_gap must be at least label_horizon")


@dataclass
class Finding:
    kind: str
    lead_id: str
    detail: str
    feature: str | None = None
    other_lead_id: str | None = None

    def to_json(self) -> dict:
        out = {"kind": self.kind, "lead_id": self.lead_id, "detail": self.detail}
        if self.feature is not None:
            out["feature"] = self.feature
        if self.other_lead_id is not None:
            out["other_lead_id"] = self.other_lead_id
        return out


@dataclass
class SplitResult:
    train_ids: list[str]
    test_ids: list[str]
    dropped_ids: list[str]
    spec: SplitSpec
    audit_report: list[Finding] = field(default_factory=list)


def temporal_split(leads: list[LeadRecord], spec: SplitSpec) -> SplitResult:
    """Partition by anchor date around t_split with a label-horizon gap."""
    train_cutoff = spec.t_split - timedelta(days=spec.required_gap)
    train, test, dropped = [], [], []
    for lead in leads:
        if lead.anchor <= train_cutoff:
            train.append(lead.lead_id)
        elif lead.anchor >= spec.t_split:
            test.append(lead.lead_id)
        else:
            dropped.append(lead.lead_id)
    if not train or not test:
        raise DegenerateSplitError(
            f"degenerate split at t_split={spec.t_split}: "
            f"{len(train)} train / {len(test)} test leads")
    return SplitResult(train_ids=train, test_ids=test, dropped_ids=dropped, spec=spec)


def audit_feature_leakage(leads: list[LeadRecord], events: EventLog | None) -> list[Finding]:
    """Flag stored tabular values that differ from a pre-anchor recomputation."""
    if events is None:
        raise AuditUnavailableError("feature audit requires the event-log sidecar")
    findings: list[Finding] = []
    for lead in leads:
        if lead.lead_id not in events:
            raise AuditUnavailableError(f"no events for lead {lead.lead_id}")
        recomputed = compute_tabular(events, lead.lead_id, lead.anchor)
        for name, value in recomputed.items():
            stored = lead.tabular.get(name)
            if stored != value:
                findings.append(Finding(
                    kind="feature_leakage", lead_id=lead.lead_id, feature=name,
                    detail=f"stored {stored!r} != recomputed-from-pre-anchor-events {value!r}"))
    return findings


def audit_label_leakage(split: SplitResult, leads: list[LeadRecord],
                        spec: SplitSpec | None = None) -> list[Finding]:
    """Flag (train, test) anchor pairs whose label/feature windows overlap.

    A train lead's label window extends required_gap days past its anchor;
    it must close before any test anchor opens.
    """
    spec = spec or split.spec
    anchors = {lead.lead_id: lead.anchor for lead in leads}
    gap = timedelta(days=spec.required_gap)
    test_anchors = [(anchors[i], i) for i in split.test_ids if i in anchors]
    if not test_anchors:
        return []
    min_test = min(test_anchors)[0]
    findings: list[Finding] = []
    for train_id in split.train_ids:
        if train_id not in anchors:
            continue
        if anchors[train_id] + gap > min_test:
            # enumerate every overlapped test lead for a complete pair count
            for test_anchor, test_id in test_anchors:
                if anchors[train_id] + gap > test_anchor:
                    findings.append(Finding(
                        kind="label_leakage", lead_id=train_id, other_lead_id=test_id,
                        detail=(f"train anchor {anchors[train_id]} + {spec.required_gap}d "
                                f"overlaps test anchor {test_anchor}")))
    return findings


def write_split_manifest(split: SplitResult, path: str | Path) -> Path:
    path = Path(path)
    payload = {
        "t_split": split.spec.t_split.isoformat(),
        "gap_days": split.spec.required_gap,
        "label_horizon_days": split.spec.label_horizon,
        "train_ids": split.train_ids,
        "test_ids": split.test_ids,
        "dropped": split.dropped_ids,
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True))
    return path


def read_split_manifest(path: str | Path) -> SplitResult:
    obj = json.loads(Path(path).read_text())
    spec = SplitSpec(t_split=date.fromisoformat(obj["t_split"]),
                     label_horizon=obj["label_horizon_days"],
                     required_gap=obj["gap_days"])
    return SplitResult(train_ids=list(obj["train_ids"]), test_ids=list(obj["test_ids"]),
                       dropped_ids=list(obj["dropped"]), spec=spec)


def write_audit_report(findings: list[Finding], path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps({"n_findings": len(findings),
                                "findings": [f.to_json() for f in findings]},
                               indent=2, sort_keys=True))
    return path

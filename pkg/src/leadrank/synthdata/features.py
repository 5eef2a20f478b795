"""The frozen 31-feature tabular schema and its event-log derivations.

Every feature is computed strictly from events dated at or before the anchor,
so the stored values of a generated lead can always be recomputed bit-for-bit
from the event sidecar. Features whose denominator is empty (no store visit
yet, no transcript turns, ...) are emitted as the SENTINEL value so coverage
stays measurable.
"""

from __future__ import annotations

from datetime import date

from ..errors import LeadNotFoundError
from .records import CustomerEvent, EventLog

SENTINEL = -1.0

# category -> ordered feature names; the flat order of FEATURE_NAMES is the
# canonical column order frozen into every corpus header.
FEATURE_SCHEMA: dict[str, tuple[str, ...]] = {
    "profile": (
        "first_contact_d",
        "last_contact_d",
        "active_days",
        "active_weeks",
        "contacts_total",
        "span_d",
        "events_per_week",
    ),
    "engagement": (
        "calls_7d",
        "calls_30d",
        "calls_total",
        "call_avg_s",
        "call_max_s",
        "call_s_30d",
        "last_call_d",
        "turns_total",
        "cust_turn_frac",
    ),
    "behavioral": (
        "visits_30d",
        "visits_total",
        "last_visit_d",
        "web_7d",
        "web_30d",
        "web_total",
        "last_web_d",
        "evening_frac",
    ),
    "channel": (
        "primary_channel",
        "chan_call",
        "chan_store",
        "chan_web",
        "channels_used",
        "weekend_frac",
        "contact_gap_avg_d",
    ),
}

FEATURE_NAMES: tuple[str, ...] = tuple(n for names in FEATURE_SCHEMA.values() for n in names)
FEATURE_CATEGORY: dict[str, str] = {n: cat for cat, names in FEATURE_SCHEMA.items() for n in names}

# discrete-valued features the baselines may embed; value order is frozen in
# the corpus header so categorical ids stay stable across runs
CATEGORICAL_VALUES: dict[str, tuple[float, ...]] = {
    "primary_channel": (0.0, 1.0, 2.0),
    "channels_used": (1.0, 2.0, 3.0),
}

assert len(FEATURE_NAMES) == 31

_CONTACT_KINDS = ("call", "store_visit", "web_session")
_CHANNEL_ID = {"call": 0.0, "store_visit": 1.0, "web_session": 2.0}


def compute_tabular(events: EventLog, lead_id: str, anchor: date) -> dict[str, float]:
    """Derive the 31 tabular features from pre-anchor events of one lead."""
    if lead_id not in events:
        raise LeadNotFoundError(f"lead_id {lead_id!r} not in event log")
    pre = [ev for ev in events[lead_id]
           if ev.kind in _CONTACT_KINDS and ev.timestamp.date() <= anchor]

    f: dict[str, float] = {}
    calls = [ev for ev in pre if ev.kind == "call"]
    visits = [ev for ev in pre if ev.kind == "store_visit"]
    webs = [ev for ev in pre if ev.kind == "web_session"]

    def days_ago(ev: CustomerEvent) -> int:
        return (anchor - ev.timestamp.date()).days

    def in_window(ev: CustomerEvent, n_days: int) -> bool:
        return days_ago(ev) < n_days

    # profile
    if pre:
        f["first_contact_d"] = float(days_ago(pre[0]))
        f["last_contact_d"] = float(days_ago(pre[-1]))
        f["active_days"] = float(len({ev.timestamp.date() for ev in pre}))
        f["active_weeks"] = float(len({ev.timestamp.isocalendar()[:2] for ev in pre}))
        f["contacts_total"] = float(len(pre))
        span = (pre[-1].timestamp - pre[0].timestamp).total_seconds() / 86400.0
        f["span_d"] = span
        f["events_per_week"] = len(pre) / max(span, 1.0) * 7.0
    else:
        f["first_contact_d"] = SENTINEL
        f["last_contact_d"] = SENTINEL
        f["active_days"] = 0.0
        f["active_weeks"] = 0.0
        f["contacts_total"] = 0.0
        f["span_d"] = SENTINEL
        f["events_per_week"] = SENTINEL

    # engagement
    f["calls_7d"] = float(sum(in_window(ev, 7) for ev in calls))
    f["calls_30d"] = float(sum(in_window(ev, 30) for ev in calls))
    f["calls_total"] = float(len(calls))
    if calls:
        durations = [ev.duration_s for ev in calls]
        f["call_avg_s"] = sum(durations) / len(durations)
        f["call_max_s"] = max(durations)
        f["call_s_30d"] = float(sum(ev.duration_s for ev in calls if in_window(ev, 30)))
        f["last_call_d"] = float(days_ago(calls[-1]))
    else:
        f["call_avg_s"] = SENTINEL
        f["call_max_s"] = SENTINEL
        f["call_s_30d"] = 0.0
        f["last_call_d"] = SENTINEL
    n_turns = sum(len(ev.transcript_turns) for ev in calls)
    n_cust = sum(1 for ev in calls for s, _ in ev.transcript_turns if s == "customer")
    f["turns_total"] = float(n_turns)
    f["cust_turn_frac"] = n_cust / n_turns if n_turns else SENTINEL

    # behavioral
    f["visits_30d"] = float(sum(in_window(ev, 30) for ev in visits))
    f["visits_total"] = float(len(visits))
    f["last_visit_d"] = float(days_ago(visits[-1])) if visits else SENTINEL
    f["web_7d"] = float(sum(in_window(ev, 7) for ev in webs))
    f["web_30d"] = float(sum(in_window(ev, 30) for ev in webs))
    f["web_total"] = float(len(webs))
    f["last_web_d"] = float(days_ago(webs[-1])) if webs else SENTINEL
    f["evening_frac"] = (sum(ev.timestamp.hour >= 18 for ev in pre) / len(pre)) if pre else SENTINEL

    # channel
    if pre:
        counts = {"call": len(calls), "store_visit": len(visits), "web_session": len(webs)}
        primary = max(_CONTACT_KINDS, key=lambda k: counts[k])  # ties favor call
        f["primary_channel"] = _CHANNEL_ID[primary]
        f["chan_call"] = 1.0 if primary == "call" else 0.0
        f["chan_store"] = 1.0 if primary == "store_visit" else 0.0
        f["chan_web"] = 1.0 if primary == "web_session" else 0.0
        f["channels_used"] = float(sum(1 for k in counts.values() if k > 0))
        f["weekend_frac"] = sum(ev.timestamp.weekday() >= 5 for ev in pre) / len(pre)
    else:
        f["primary_channel"] = SENTINEL
        f["chan_call"] = 0.0
        f["chan_store"] = 0.0
        f["chan_web"] = 0.0
        f["channels_used"] = 0.0
        f["weekend_frac"] = SENTINEL
    if len(pre) >= 2:
        gap = (pre[-1].timestamp - pre[0].timestamp).total_seconds() / 86400.0
        f["contact_gap_avg_d"] = gap / (len(pre) - 1)
    else:
        f["contact_gap_avg_d"] = SENTINEL

    return {name: f[name] for name in FEATURE_NAMES}


def assign_label(events: EventLog, lead_id: str, anchor: date, label_horizon: int) -> int:
    """1 iff a purchase event falls in (anchor, anchor + label_horizon] days."""
    if label_horizon <= 0:
        raise ValueError("label_horizon must be positive")
    if lead_id not in events:
        raise LeadNotFoundError(f"lead_id {lead_id!r} not in event log")
    for ev in events[lead_id]:
        if ev.kind != "purchase":
            continue
        offset = (ev.timestamp.date() - anchor).days
        if 0 < offset <= label_horizon:
            return 1
    return 0

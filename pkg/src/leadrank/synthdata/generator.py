"""Synthetic lead-corpus generator.

Each lead carries two latent traits: u drives event behavior (call cadence,
durations, visits), w drives what the customer says. The purchase label is
Bernoulli over a logistic intent b0 + tab_w * u + txt_w * w, so transcripts
carry signal the tabular features cannot explain; the intercept b0 is
calibrated by bisection to hit the target positive rate. With
signal_recency on, intent phrases land in the most recent turns while older
turns mix plain filler with label-independent decoy phrases, which makes
recency-truncated context strictly cleaner than full context.

Determinism: every lead draws from its own generator seeded by
(master seed, lead index, stage), so output is byte-identical for a fixed
seed regardless of generation order or worker count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime, time as dtime, timedelta
from typing import Iterator

import numpy as np

from ..errors import ConfigError, EmptyCorpusError
from .features import assign_label, compute_tabular
from .records import CustomerEvent, EventLog, LeadRecord, transcript_from_events

POSITIVE_PHRASES = (
    "we are ready to move forward with the order",
    "the budget got approved so we can proceed",
    "please send the final quote to sign",
    "wants to schedule the delivery date",
    "asked to reserve the showroom car today",
    "confirmed the trade in offer works for us",
    "lets lock in the financing plan",
    "planning to complete the purchase this week",
)

HESITANT_PHRASES = (
    "just browsing for now",
    "still comparing other brands",
    "not in a hurry to decide",
    "spending is on hold this year",
    "need to think it over for a while",
    "the price feels too high for us",
    "maybe next quarter at the earliest",
    "please stop the weekly follow up calls",
)

# Filler turns are composed verb + topic + optional detail so individual
# lines rarely repeat word-for-word; only intent phrases recur verbatim,
# which is what lets term-frequency salience find them.
CUSTOMER_VERBS = ("asked about", "wondered about", "had a question on",
                  "brought up", "compared notes on", "wanted to know about")
SALES_VERBS = ("explained", "covered", "reviewed", "outlined", "described",
               "walked through", "summarized", "clarified", "highlighted",
               "went over", "answered questions on", "presented")
# topic nouns deliberately avoid the intent phrases' core words so filler
# never mimics buying signals at the byte level
FILLER_TOPICS = (
    "the trim differences", "the warranty coverage", "the charging network",
    "the service plan", "the current promotions", "the test drive slots",
    "the paperwork steps", "the insurance options", "the handover timeline",
    "the maintenance costs", "the paint finishes", "the home charger setup",
    "the roadside assistance", "the navigation subscription", "the referral bonus",
    "the demo days", "the battery guarantee", "the cargo space",
    "the model refresh", "the registration forms", "the tire storage",
    "the mobile app", "the charging cost estimates", "the resale outlook",
    "the seat ventilation", "the towing package", "the winter range figures",
    "the software update cadence", "the loaner policy", "the lane assist tuning",
    "the cabin noise ratings", "the roof rack options", "the wheel choices",
    "the interior trim samples", "the headlight variants", "the key card setup",
)

# sales reps log concrete buying signals by repeating their wording
_ECHO_PREFIXES = ("noted that the customer said", "logged that the customer said",
                  "wrote down that the customer said")
FILLER_DETAILS = (
    "", "", "in detail", "for the family car", "after the visit",
    "with current pricing", "over email", "for both variants", "for winter use",
    "using the brochure", "during the walkaround", "before closing time",
    "for the base model", "with a quick example", "at the showroom",
)

_ALL_INTENT = POSITIVE_PHRASES + HESITANT_PHRASES


@dataclass(frozen=True)
class GeneratorConfig:
    n_leads: int
    positive_rate_target: float = 0.0145
    empty_text_fraction: float = 0.15
    signal_recency: bool = True
    label_horizon: int = 30
    seed: int = 0
    tabular_signal_weight: float = 1.0
    text_signal_weight: float = 1.0
    transcript_length_scale: float = 1.0
    decoy_rate: float = 0.3
    start: date = date(2024, 1, 1)
    anchor_window_days: int = 360
    lookback_days: int = 90

    def __post_init__(self):
        if self.n_leads < 1:
            raise EmptyCorpusError("n_leads must be >= 1")
        for name in ("positive_rate_target", "empty_text_fraction"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if self.label_horizon <= 0:
            raise ConfigError("label_horizon must be positive")


# intent = b0 + tab_w * _U_LOAD * u + txt_w * _W_LOAD * w
_U_LOAD = 0.65
_W_LOAD = 1.30


@dataclass
class SyntheticCorpus:
    leads: list[LeadRecord]
    events: EventLog
    intents: dict[str, float]
    config: GeneratorConfig


def _lead_id(i: int) -> str:
    return f"L{i:07d}"


def _draw_traits(cfg: GeneratorConfig) -> tuple[np.ndarray, np.ndarray]:
    us = np.empty(cfg.n_leads)
    ws = np.empty(cfg.n_leads)
    for i in range(cfg.n_leads):
        rng = np.random.default_rng([cfg.seed, i, 0])
        us[i] = rng.standard_normal()
        ws[i] = rng.standard_normal()
    return us, ws


def calibrate_intercept(scores: np.ndarray, target: float,
                        lo: float = -30.0, hi: float = 10.0) -> float:
    """Bisect b0 so that mean(sigmoid(b0 + scores)) equals the target rate."""
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if np.mean(1.0 / (1.0 + np.exp(-(mid + scores)))) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _dialogue(rng: np.random.Generator, n_turns: int, recent_slots: int,
              w: float, cfg: GeneratorConfig) -> list[tuple[str, str]]:
    """One call's turns.

    With signal_recency on, intent phrases occupy the trailing recent_slots
    turns and older customer turns mix filler with label-independent decoy
    phrases; with it off, intent phrases scatter uniformly and no decoys
    are planted.
    """
    p_pos = 1.0 / (1.0 + np.exp(-1.8 * w))
    turns: list[tuple[str, str]] = []
    pending_echo: str | None = None
    pending_repeat: str | None = None

    def filler(verbs) -> str:
        phrase = (f"{verbs[rng.integers(len(verbs))]} "
                  f"{FILLER_TOPICS[rng.integers(len(FILLER_TOPICS))]}")
        detail = FILLER_DETAILS[rng.integers(len(FILLER_DETAILS))]
        return f"{phrase} {detail}".strip()

    for t in range(n_turns):
        speaker = "sales" if t % 2 == 0 else "customer"
        if cfg.signal_recency:
            signal_slot = t >= n_turns - recent_slots
            decoy_ok = not signal_slot
        else:
            signal_slot = rng.random() < 0.35
            decoy_ok = False
        if speaker == "sales":
            if pending_echo is not None:
                prefix = _ECHO_PREFIXES[rng.integers(len(_ECHO_PREFIXES))]
                turns.append((speaker, f"{prefix} {pending_echo}"))
                pending_echo = None
            else:
                turns.append((speaker, filler(SALES_VERBS)))
            continue
        if signal_slot and pending_repeat is not None:
            turns.append((speaker, pending_repeat))
            pending_repeat = None
            continue
        if signal_slot and rng.random() < 0.75:
            pool = POSITIVE_PHRASES if rng.random() < p_pos else HESITANT_PHRASES
            phrase = pool[rng.integers(len(pool))]
            # repeats and sales echoes give intent wording term-frequency weight
            if rng.random() < 0.65:
                pending_repeat = phrase
            if rng.random() < 0.8:
                pending_echo = phrase
            turns.append((speaker, phrase))
        elif decoy_ok and rng.random() < cfg.decoy_rate:
            turns.append((speaker, _ALL_INTENT[rng.integers(len(_ALL_INTENT))]))
        else:
            turns.append((speaker, filler(CUSTOMER_VERBS)))
    return turns


def _lead_events(i: int, cfg: GeneratorConfig, u: float, w: float, b0: float,
                 text_empty: bool) -> tuple[list[CustomerEvent], float, int, date]:
    rng = np.random.default_rng([cfg.seed, i, 1])
    lid = _lead_id(i)
    anchor = cfg.start + timedelta(days=int(rng.integers(0, cfg.anchor_window_days)))

    def at(day_offset: float, hour_lo: int = 9, hour_hi: int = 21) -> datetime:
        day = anchor - timedelta(days=int(day_offset))
        return datetime.combine(day, dtime(int(rng.integers(hour_lo, hour_hi)),
                                           int(rng.integers(0, 60)), int(rng.integers(0, 60))))

    events: list[CustomerEvent] = []
    scale = cfg.transcript_length_scale

    # guaranteed first touch: one web session deep in the lookback window
    first_off = float(rng.uniform(20, cfg.lookback_days - 1))
    events.append(CustomerEvent(lid, "web_session", at(first_off)))

    # calls: at least one; cadence and recency tighten with u
    n_calls = 1 + int(rng.poisson(np.exp(-0.1 + 0.38 * u) * scale))
    n_calls = min(n_calls, 8)
    last_gap = min(float(rng.exponential(12.0 * np.exp(-0.35 * u))) + 0.3, first_off - 1)
    offsets = [max(last_gap, 0.3)]
    for _ in range(n_calls - 1):
        offsets.append(min(offsets[-1] + float(rng.exponential(14.0)) + 1.0, first_off - 0.5))
    offsets = offsets[::-1]  # chronological
    for idx, off in enumerate(offsets):
        dur = float(rng.lognormal(3.9 + 0.32 * u, 0.5))
        is_last = idx == len(offsets) - 1
        is_second_last = idx == len(offsets) - 2
        n_turns = 4 + int(rng.poisson(3.0 * scale))
        # long-transcript corpora spread intent over the last two calls, so
        # summarization can surface signal that plain suffix truncation cuts
        recent_slots = 4 if is_last else (3 if is_second_last and scale >= 2.0 else 0)
        turns = [] if text_empty else _dialogue(rng, n_turns, recent_slots, w, cfg)
        events.append(CustomerEvent(lid, "call", at(off), duration_s=round(dur, 1),
                                    transcript_turns=turns))

    for _ in range(int(rng.poisson(np.exp(0.15 + 0.3 * u)))):
        events.append(CustomerEvent(lid, "store_visit", at(float(rng.uniform(0.3, cfg.lookback_days - 1)))))
    for _ in range(int(rng.poisson(np.exp(0.9 + 0.22 * u)))):
        events.append(CustomerEvent(lid, "web_session",
                                    at(float(rng.uniform(0.3, cfg.lookback_days - 1)), 8, 24)))

    intent = b0 + cfg.tabular_signal_weight * _U_LOAD * u + cfg.text_signal_weight * _W_LOAD * w
    label = int(rng.random() < 1.0 / (1.0 + np.exp(-intent)))
    if label:
        pdays = int(rng.integers(1, cfg.label_horizon + 1))
        pts = datetime.combine(anchor + timedelta(days=pdays), dtime(12, 0))
        events.append(CustomerEvent(lid, "purchase", pts))

    # post-anchor activity that must never leak into features
    if rng.random() < 0.5:
        kind = "call" if rng.random() < 0.5 else "web_session"
        ts = datetime.combine(anchor + timedelta(days=int(rng.integers(1, 10))), dtime(15, 30))
        events.append(CustomerEvent(lid, kind, ts,
                                    duration_s=60.0 if kind == "call" else 0.0))

    events.sort(key=lambda ev: ev.timestamp)
    return events, intent, label, anchor


def _empty_text_ids(cfg: GeneratorConfig) -> set[int]:
    count = int(round(cfg.empty_text_fraction * cfg.n_leads))
    rng = np.random.default_rng([cfg.seed, 2])
    return set(rng.choice(cfg.n_leads, size=count, replace=False).tolist())


def iter_lead_bundles(cfg: GeneratorConfig) -> Iterator[tuple[LeadRecord, list[CustomerEvent], float]]:
    """Stream (lead, events, intent) one lead at a time; constant memory."""
    us, ws = _draw_traits(cfg)
    scores = cfg.tabular_signal_weight * _U_LOAD * us + cfg.text_signal_weight * _W_LOAD * ws
    b0 = calibrate_intercept(scores, cfg.positive_rate_target)
    empty_ids = _empty_text_ids(cfg)
    for i in range(cfg.n_leads):
        lid = _lead_id(i)
        events, intent, label, anchor = _lead_events(i, cfg, us[i], ws[i], b0, i in empty_ids)
        log = {lid: events}
        lead = LeadRecord(
            lead_id=lid,
            anchor=anchor,
            tabular=compute_tabular(log, lid, anchor),
            transcript=transcript_from_events(events, anchor),
            label=assign_label(log, lid, anchor, cfg.label_horizon),
        )
        assert lead.label == label
        yield lead, events, intent


def generate_corpus(cfg: GeneratorConfig) -> SyntheticCorpus:
    """Materialize the full corpus with per-lead event logs and intents."""
    leads: list[LeadRecord] = []
    events: EventLog = {}
    intents: dict[str, float] = {}
    for lead, evs, intent in iter_lead_bundles(cfg):
        leads.append(lead)
        events[lead.lead_id] = evs
        intents[lead.lead_id] = intent
    return SyntheticCorpus(leads=leads, events=events, intents=intents, config=cfg)

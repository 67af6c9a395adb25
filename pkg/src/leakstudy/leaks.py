"""From raw headlines and bond announcements to screened leak events.

Pipeline: condense_announcements -> filter_headlines -> dedup_headlines ->
match_leaks -> apply_liquidity.  Everything is a pure function of its inputs
and output order is canonical (sorted by leak timestamp, then ticker).
"""

from __future__ import annotations

import dataclasses
import enum
import math
import re
from collections import defaultdict
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from typing import Iterable, Mapping, Optional, Sequence

from .core import (
    BondAnnouncement,
    ExchangeCalendar,
    Headline,
    IntradayBar,
    Phase,
    business_days_between,
    classify_timestamp,
    event_clock_start,
)
from .errors import CalendarGapError, DataError
from .ingest import FxTable, macaulay_perpetual, rebase_usd

DEFAULT_HORIZON_DAYS = 60
SEARCH_TERMS = ("mandate", "green")
EARLY_MARKET_MINUTES = 60
LIQUIDITY_MIN_ACTIVE_BARS = 2
LIQUIDITY_MIN_VOLUME = 10_000
DAYS_PER_YEAR = 365.25

_TERM_PATTERNS = tuple(re.compile(rf"\b{re.escape(t)}\b", re.IGNORECASE) for t in SEARCH_TERMS)


class Timing(str, enum.Enum):
    EARLY = "EarlyMarket"
    LATE = "LateMarket"


@dataclass(frozen=True)
class BondTerms:
    amount: float
    currency: str
    term_years: float
    coupon_pct: float
    has_option: bool
    perpetual: bool = False


@dataclass(frozen=True)
class AnnouncementEvent:
    ticker: str
    announce_date: date
    bonds: tuple

    def __post_init__(self):
        if not self.bonds:
            raise DataError(f"announcement event {self.ticker}/{self.announce_date} has no bonds")

    @property
    def n_bonds(self) -> int:
        return len(self.bonds)

    @property
    def avg_coupon(self) -> float:
        return math.fsum(b.coupon_pct for b in self.bonds) / len(self.bonds)

    @property
    def avg_term(self) -> float:
        return math.fsum(b.term_years for b in self.bonds) / len(self.bonds)

    @property
    def has_option(self) -> bool:
        return any(b.has_option for b in self.bonds)

    def size_usd(self, at: Optional[datetime] = None, fx: Optional[FxTable] = None) -> float:
        return math.fsum(rebase_usd(b.amount, b.currency, at, fx) for b in self.bonds)


@dataclass(frozen=True)
class LeakEvent:
    headline: Headline
    event: AnnouncementEvent
    leak_ts: datetime
    timing: Timing
    event_start: datetime  # minute 0 of the intraday clock
    session_date: date  # trading date of minute 0; day 0 of the daily clock
    time_of_day: str
    phase: Phase
    size_usd: float
    passes_liquidity: Optional[bool] = None

    @property
    def ticker(self) -> str:
        return self.event.ticker


# --------------------------------------------------------------------------- announcements

def bond_term(bond: BondAnnouncement) -> float:
    if bond.perpetual:
        if bond.yield_ is None:
            raise DataError(f"perpetual bond of {bond.ticker} on {bond.announce_date} has no yield")
        return macaulay_perpetual(bond.yield_)
    return (bond.maturity_date - bond.announce_date).days / DAYS_PER_YEAR


def condense_announcements(raw: Iterable[BondAnnouncement]) -> list[AnnouncementEvent]:
    groups = defaultdict(list)
    for b in raw:
        groups[(b.ticker, b.announce_date)].append(b)
    events = []
    for (ticker, d), bonds in sorted(groups.items()):
        bonds.sort(key=lambda b: (b.currency, b.amount, b.coupon_pct, b.maturity_date or date.max, b.perpetual))
        terms = tuple(
            BondTerms(b.amount, b.currency, bond_term(b), b.coupon_pct, b.has_option, b.perpetual) for b in bonds
        )
        events.append(AnnouncementEvent(ticker, d, terms))
    return events


# --------------------------------------------------------------------------- headlines

def _canonical(headlines: Iterable[Headline]) -> list[Headline]:
    return sorted(headlines, key=lambda h: (h.timestamp, h.feed, h.headline, h.article_chars, h.tickers))


def matches_search(text: str) -> bool:
    return all(p.search(text) for p in _TERM_PATTERNS)


def filter_headlines(headlines: Iterable[Headline], *, require_ticker: bool = True) -> list[Headline]:
    return _canonical(
        h for h in headlines
        if h.green_label and matches_search(h.headline) and (h.tickers or not require_ticker)
    )


def _norm_text(text: str) -> str:
    return " ".join(text.casefold().split())


def dedup_headlines(
    candidates: Iterable[Headline],
    *,
    horizon_days: int = DEFAULT_HORIZON_DAYS,
    duplicate_window: timedelta = timedelta(days=1),
) -> list[Headline]:
    """Collapse cross-feed duplicates, then update chains.

    Duplicates share normalised text and primary ticker and sit within
    ``duplicate_window`` of each other (single linkage); the copy with the
    longest article wins, ties going to the earlier one.  An update chain is
    every headline of a ticker within ``horizon_days`` of the chain's first
    headline; only that first headline is kept.
    """
    by_text = defaultdict(list)
    for h in _canonical(candidates):
        by_text[(_norm_text(h.headline), h.primary_ticker)].append(h)

    survivors = []
    for group in by_text.values():
        cluster = [group[0]]
        for h in group[1:]:
            if h.timestamp - cluster[-1].timestamp <= duplicate_window:
                cluster.append(h)
            else:
                survivors.append(_richest(cluster))
                cluster = [h]
        survivors.append(_richest(cluster))

    horizon = timedelta(days=horizon_days)
    out, anchors = [], {}
    for h in _canonical(survivors):
        t = h.primary_ticker
        if t is None:
            out.append(h)
            continue
        anchor = anchors.get(t)
        if anchor is not None and h.timestamp - anchor <= horizon:
            continue
        anchors[t] = h.timestamp
        out.append(h)
    return out


def _richest(cluster: Sequence[Headline]) -> Headline:
    return min(cluster, key=lambda h: (-h.article_chars, h.timestamp, h.feed))


# --------------------------------------------------------------------------- matching

def timing_class(ts: datetime, cal: ExchangeCalendar) -> Timing:
    pos = classify_timestamp(ts, cal)
    if pos.phase is Phase.IN_SESSION and pos.offset_minutes >= EARLY_MARKET_MINUTES:
        return Timing.LATE
    return Timing.EARLY


def time_of_day_bucket(ts: datetime, cal: ExchangeCalendar) -> str:
    pos = classify_timestamp(ts, cal)
    if pos.phase in (Phase.PRE_MARKET, Phase.NON_TRADING_DAY):
        return "PreMarket"
    if pos.phase is Phase.POST_MARKET:
        return "PostMarket"
    if pos.offset_minutes < EARLY_MARKET_MINUTES:
        return "FirstHour"
    if pos.offset_minutes >= cal.session_minutes(cal.local_date(ts)) - EARLY_MARKET_MINUTES:
        return "LastHour"
    return "MidSession"


def match_leaks(
    candidates: Iterable[Headline],
    events: Iterable[AnnouncementEvent],
    calendars: Mapping[str, ExchangeCalendar],
    horizon_days: int = DEFAULT_HORIZON_DAYS,
    fx: Optional[FxTable] = None,
) -> list[LeakEvent]:
    """Pair each headline with the earliest later announcement of its primary ticker.

    ``calendars`` maps ticker to its listing exchange's calendar.  A match needs
    at least one business day between the leak date and the announcement date
    and at most ``horizon_days`` calendar days.  Each announcement event is
    claimed by at most one headline (the earliest).
    """
    by_ticker = defaultdict(list)
    for ev in events:
        by_ticker[ev.ticker].append(ev)
    for evs in by_ticker.values():
        evs.sort(key=lambda e: e.announce_date)

    claimed = set()
    leaks = []
    for h in _canonical(candidates):
        ticker = h.primary_ticker
        if ticker is None or ticker not in by_ticker:
            continue
        cal = calendars.get(ticker)
        if cal is None:
            raise CalendarGapError(f"no exchange calendar for ticker {ticker}", ticker=ticker)
        leak_date = cal.local_date(h.timestamp)
        for ev in by_ticker[ticker]:
            gap = (ev.announce_date - leak_date).days
            if gap > horizon_days:
                break
            if gap < 1 or business_days_between(leak_date, ev.announce_date, cal) < 1:
                continue
            key = (ev.ticker, ev.announce_date)
            if key in claimed:
                break
            claimed.add(key)
            start = event_clock_start(h.timestamp, cal)
            leaks.append(
                LeakEvent(
                    headline=h,
                    event=ev,
                    leak_ts=h.timestamp,
                    timing=timing_class(h.timestamp, cal),
                    event_start=start,
                    session_date=cal.local_date(start),
                    time_of_day=time_of_day_bucket(h.timestamp, cal),
                    phase=classify_timestamp(h.timestamp, cal).phase,
                    size_usd=ev.size_usd(h.timestamp, fx),
                )
            )
            break
    leaks.sort(key=lambda lk: (lk.leak_ts, lk.ticker))
    return leaks


# --------------------------------------------------------------------------- liquidity

def liquidity_check(
    leak: LeakEvent,
    bars: Optional[Sequence[IntradayBar]],
    *,
    min_active_bars: int = LIQUIDITY_MIN_ACTIVE_BARS,
    min_volume: float = LIQUIDITY_MIN_VOLUME,
) -> Optional[bool]:
    """``None`` when the intraday series does not cover the screening windows."""
    if not bars:
        return None
    # out-of-session leaks are screened from the next open
    start = leak.leak_ts if leak.phase is Phase.IN_SESSION else leak.event_start
    hour_end = start + timedelta(minutes=EARLY_MARKET_MINUTES)
    day_end = start + timedelta(hours=24)
    window = [b for b in bars if start <= b.timestamp < day_end]
    if not window:
        return None
    active = sum(1 for b in window if b.timestamp < hour_end and b.volume > 0)
    volume = math.fsum(b.volume for b in window)
    return active >= min_active_bars and volume > min_volume


def apply_liquidity(
    leaks: Iterable[LeakEvent],
    intraday: Mapping[str, Sequence[IntradayBar]],
    **thresholds,
) -> list[LeakEvent]:
    return [
        dataclasses.replace(lk, passes_liquidity=liquidity_check(lk, intraday.get(lk.ticker), **thresholds))
        for lk in leaks
    ]

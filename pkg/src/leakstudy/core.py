"""Domain types, exchange calendars and return arithmetic."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from typing import Mapping, NamedTuple, Optional
from zoneinfo import ZoneInfo

import numpy as np

from .errors import CalendarGapError, DomainError, OrderingError

BAR_MINUTES = 5

FINANCIAL_INDUSTRIES = frozenset(
    {
        "bank",
        "banks",
        "government agency",
        "real estate",
        "financial services",
        "consumer finance",
        "commercial finance",
        "consumer/commercial finance",
    }
)


class SectorClass(str, enum.Enum):
    FINANCIAL = "Financial"
    NON_FINANCIAL = "NonFinancial"

    @classmethod
    def from_industry(cls, industry: str) -> "SectorClass":
        key = " ".join(industry.strip().lower().replace("_", " ").replace("-", " ").split())
        return cls.FINANCIAL if key in FINANCIAL_INDUSTRIES else cls.NON_FINANCIAL


@dataclass(frozen=True)
class SecurityRecord:
    ticker: str
    exchange_id: str
    region: str
    sector_class: SectorClass
    currency: str = "USD"

    def __post_init__(self):
        if not isinstance(self.sector_class, SectorClass):
            object.__setattr__(self, "sector_class", SectorClass(self.sector_class))


class Phase(str, enum.Enum):
    PRE_MARKET = "PreMarket"
    IN_SESSION = "InSession"
    POST_MARKET = "PostMarket"
    NON_TRADING_DAY = "NonTradingDay"


class SessionPosition(NamedTuple):
    phase: Phase
    offset_minutes: Optional[int] = None


@dataclass(frozen=True)
class ExchangeCalendar:
    """Trading calendar of one exchange.

    ``early_closes`` maps a date to a shortened close time (half-day sessions).
    ``coverage`` bounds the dates this calendar is known to be correct for;
    ``None`` on either side means open-ended.
    """

    exchange_id: str
    timezone: str
    session_open: time
    session_close: time
    holidays: frozenset = frozenset()
    weekend_days: frozenset = frozenset({5, 6})
    early_closes: Mapping[date, time] = field(default_factory=dict)
    coverage_start: Optional[date] = None
    coverage_end: Optional[date] = None

    def __post_init__(self):
        if not self.session_open < self.session_close:
            raise DomainError(f"{self.exchange_id}: session_open must precede session_close")
        for d, t in self.early_closes.items():
            if not self.session_open < t:
                raise DomainError(f"{self.exchange_id}: early close on {d} is not after the open")
        object.__setattr__(self, "holidays", frozenset(self.holidays))
        object.__setattr__(self, "weekend_days", frozenset(self.weekend_days))
        object.__setattr__(self, "early_closes", dict(self.early_closes))
        ZoneInfo(self.timezone)  # fail fast on unknown zones

    def __hash__(self):
        return hash((self.exchange_id, self.timezone, self.session_open, self.session_close, self.holidays))

    @property
    def tz(self) -> ZoneInfo:
        return ZoneInfo(self.timezone)

    @property
    def weekmask(self) -> str:
        return "".join("0" if d in self.weekend_days else "1" for d in range(7))

    def check_covered(self, d: date) -> None:
        if (self.coverage_start and d < self.coverage_start) or (self.coverage_end and d > self.coverage_end):
            raise CalendarGapError(f"{d} is outside the coverage of calendar {self.exchange_id}", exchange=self.exchange_id)

    def is_trading_day(self, d: date) -> bool:
        self.check_covered(d)
        return d.weekday() not in self.weekend_days and d not in self.holidays

    def close_on(self, d: date) -> time:
        return self.early_closes.get(d, self.session_close)

    def session_bounds(self, d: date) -> tuple[datetime, datetime]:
        if not self.is_trading_day(d):
            raise DomainError(f"{d} is not a trading day on {self.exchange_id}")
        tz = self.tz
        return (datetime.combine(d, self.session_open, tz), datetime.combine(d, self.close_on(d), tz))

    def session_minutes(self, d: date) -> int:
        o, c = self.session_bounds(d)
        return int((c - o).total_seconds() // 60)

    def local_date(self, ts: datetime) -> date:
        return _aware(ts).astimezone(self.tz).date()

    def next_trading_day(self, d: date, *, inclusive: bool = False) -> date:
        cur = d if inclusive else d + timedelta(days=1)
        for _ in range(3660):
            if self.is_trading_day(cur):
                return cur
            cur += timedelta(days=1)
        raise CalendarGapError(f"no trading day within ten years after {d}", exchange=self.exchange_id)

    def previous_trading_day(self, d: date) -> date:
        cur = d - timedelta(days=1)
        for _ in range(3660):
            if self.is_trading_day(cur):
                return cur
            cur -= timedelta(days=1)
        raise CalendarGapError(f"no trading day within ten years before {d}", exchange=self.exchange_id)


def _aware(ts: datetime) -> datetime:
    if ts.tzinfo is None:
        raise DomainError(f"timestamp {ts.isoformat()} has no zone offset")
    return ts


@dataclass(frozen=True)
class DailyBar:
    date: date
    close: float
    volume: float
    shares_outstanding: float

    def __post_init__(self):
        if not self.close > 0:
            raise DomainError(f"close must be positive, got {self.close}")
        if not self.volume >= 0:
            raise DomainError(f"volume must be non-negative, got {self.volume}")
        if not self.shares_outstanding > 0:
            raise DomainError(f"shares_outstanding must be positive, got {self.shares_outstanding}")


@dataclass(frozen=True)
class IntradayBar:
    """A 5-minute bar; ``price`` is the mark at ``timestamp`` (bar start)."""

    timestamp: datetime
    price: float
    volume: float

    def __post_init__(self):
        _aware(self.timestamp)
        if not self.price > 0:
            raise DomainError(f"price must be positive, got {self.price}")
        if not self.volume >= 0:
            raise DomainError(f"volume must be non-negative, got {self.volume}")


@dataclass(frozen=True)
class ReturnObservation:
    date: date
    r_i: float
    r_m: float
    rf: float = 0.0

    def __post_init__(self):
        if not (self.r_i > -1 and self.r_m > -1):
            raise DomainError(f"returns must exceed -1 on {self.date}")


@dataclass(frozen=True)
class FactorRow:
    date: date
    mkt_rf: float
    smb: float
    hml: float
    rf: float
    mom: Optional[float] = None

    def __post_init__(self):
        vals = [self.mkt_rf, self.smb, self.hml, self.rf] + ([] if self.mom is None else [self.mom])
        if not all(math.isfinite(v) for v in vals):
            raise DomainError(f"non-finite factor value on {self.date}")


def simple_return(p_prev: float, p_curr: float) -> float:
    if not (p_prev > 0 and p_curr > 0):
        raise DomainError(f"prices must be positive, got {p_prev} and {p_curr}")
    return p_curr / p_prev - 1.0


def classify_timestamp(ts: datetime, cal: ExchangeCalendar) -> SessionPosition:
    local = _aware(ts).astimezone(cal.tz)
    d = local.date()
    if not cal.is_trading_day(d):
        return SessionPosition(Phase.NON_TRADING_DAY)
    open_dt, close_dt = cal.session_bounds(d)
    if local < open_dt:
        return SessionPosition(Phase.PRE_MARKET)
    if local >= close_dt:
        return SessionPosition(Phase.POST_MARKET)
    return SessionPosition(Phase.IN_SESSION, int((local - open_dt).total_seconds() // 60))


def business_days_between(a: date, b: date, cal: ExchangeCalendar) -> int:
    """Trading days in the half-open interval (a, b]."""
    if a > b:
        raise OrderingError(f"{a} is after {b}")
    cal.check_covered(a)
    cal.check_covered(b)
    one = timedelta(days=1)
    return int(
        np.busday_count(
            a + one,
            b + one,
            weekmask=cal.weekmask,
            holidays=sorted(cal.holidays),
        )
    )


def event_clock_start(ts: datetime, cal: ExchangeCalendar) -> datetime:
    """Minute 0 of the intraday event clock for a leak at ``ts``.

    In-session leaks snap forward to the next 5-minute grid point counted from the
    open; anything outside a session starts at the next session's open.
    """
    pos = classify_timestamp(ts, cal)
    local = ts.astimezone(cal.tz)
    d = local.date()
    if pos.phase is Phase.PRE_MARKET:
        return cal.session_bounds(d)[0]
    if pos.phase is Phase.IN_SESSION:
        open_dt, close_dt = cal.session_bounds(d)
        elapsed = (local - open_dt).total_seconds()
        steps = math.ceil(elapsed / (BAR_MINUTES * 60))
        snapped = open_dt + timedelta(minutes=BAR_MINUTES * steps)
        if snapped < close_dt:
            return snapped
    return cal.session_bounds(cal.next_trading_day(d))[0]


@dataclass(frozen=True)
class Headline:
    feed: str
    timestamp: datetime
    headline: str
    article_chars: int
    tickers: tuple = ()
    green_label: bool = False

    @property
    def primary_ticker(self) -> Optional[str]:
        return self.tickers[0] if self.tickers else None


@dataclass(frozen=True)
class BondAnnouncement:
    """One announced bond as listed in the announcements file (native currency)."""

    ticker: str
    announce_date: date
    currency: str
    amount: float
    maturity_date: Optional[date]
    perpetual: bool
    coupon_pct: float
    has_option: bool
    yield_: Optional[float] = None

    def __post_init__(self):
        if not self.amount > 0:
            raise DomainError(f"{self.ticker}: bond amount must be positive")
        if not self.perpetual and self.maturity_date is None:
            raise DomainError(f"{self.ticker}: dated bond needs a maturity_date")
